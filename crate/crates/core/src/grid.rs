//! Radial grids graded toward the axis, quadrature weights, finite
//! difference stencils on nonuniform nodes, and monotone interpolation.

/// A strictly increasing radial grid.
#[derive(Clone, Debug)]
pub struct RadialGrid {
    pub r: Vec<f64>,
}

impl RadialGrid {
    /// Geometric grading from `r_first` to `r_max` over `n` nodes with the
    /// first node at 0. Spacings grow by a fixed ratio so the mesh is
    /// clustered at the axis; relative spacing `h_i / r_i` stays bounded.
    pub fn graded(r_max: f64, n: usize, r_first: f64) -> Self {
        assert!(n >= 8 && r_max > r_first && r_first > 0.0);
        // Find q with r_first * (q^(n-1) - 1)/(q - 1) = r_max by bisection.
        let m = (n - 1) as f64;
        let target = r_max / r_first;
        let f = |q: f64| -> f64 {
            if (q - 1.0).abs() < 1e-12 {
                m
            } else {
                (q.powf(m) - 1.0) / (q - 1.0)
            }
        };
        let (mut lo, mut hi) = (1.0 + 1e-12, 2.0);
        while f(hi) < target {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let q = 0.5 * (lo + hi);
        let mut r = Vec::with_capacity(n);
        r.push(0.0);
        let mut h = r_first;
        let mut acc = 0.0;
        for _ in 1..n {
            acc += h;
            r.push(acc);
            h *= q;
        }
        // Pin the endpoint exactly.
        let scale = r_max / *r.last().unwrap();
        for v in r.iter_mut() {
            *v *= scale;
        }
        Self { r }
    }

    /// Uniform grid on [0, r_max].
    pub fn uniform(r_max: f64, n: usize) -> Self {
        let r = (0..n).map(|i| r_max * i as f64 / (n - 1) as f64).collect();
        Self { r }
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    /// Trapezoid quadrature weights for `∫ g(r) r dr` (the planar measure
    /// without the angular factor).
    pub fn quad_weights_rdr(&self) -> Vec<f64> {
        let n = self.r.len();
        let mut w = vec![0.0; n];
        for i in 0..n - 1 {
            let h = self.r[i + 1] - self.r[i];
            w[i] += 0.5 * h * self.r[i];
            w[i + 1] += 0.5 * h * self.r[i + 1];
        }
        w
    }

    /// Trapezoid weights for `∫ g(r) dr`.
    pub fn quad_weights_dr(&self) -> Vec<f64> {
        let n = self.r.len();
        let mut w = vec![0.0; n];
        for i in 0..n - 1 {
            let h = self.r[i + 1] - self.r[i];
            w[i] += 0.5 * h;
            w[i + 1] += 0.5 * h;
        }
        w
    }
}

/// Fornberg weights for the `m`-th derivative at `x0` from nodes `xs`.
pub fn fd_weights(x0: f64, xs: &[f64], m: usize) -> Vec<f64> {
    let n = xs.len();
    assert!(n > m);
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

/// Derivative of sampled values by centered 5-point Fornberg stencils
/// (one-sided at the ends); 4th order on smooth grids.
pub fn differentiate(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    assert!(n >= 5);
    let mut dy = vec![0.0; n];
    for i in 0..n {
        let lo = i.saturating_sub(2).min(n - 5);
        let xs = &x[lo..lo + 5];
        let w = fd_weights(x[i], xs, 1);
        dy[i] = (0..5).map(|k| w[k] * y[lo + k]).sum();
    }
    dy
}

/// Cubic Hermite interpolant with caller-supplied nodal derivatives
/// (4th-order accurate values when the derivatives are exact).
#[derive(Clone, Debug)]
pub struct Hermite {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Hermite {
    pub fn new(x: &[f64], y: &[f64], d: &[f64]) -> Self {
        assert!(x.len() >= 2 && x.len() == y.len() && x.len() == d.len());
        Self {
            x: x.to_vec(),
            y: y.to_vec(),
            d: d.to_vec(),
        }
    }

    fn locate(&self, xq: f64) -> usize {
        match self.x.binary_search_by(|v| v.partial_cmp(&xq).unwrap()) {
            Ok(i) => i.min(self.x.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.x.len() - 2),
        }
    }

    pub fn eval(&self, xq: f64) -> f64 {
        let i = self.locate(xq);
        let h = self.x[i + 1] - self.x[i];
        let t = (xq - self.x[i]) / h;
        let (y0, y1, d0, d1) = (self.y[i], self.y[i + 1], self.d[i], self.d[i + 1]);
        let h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
        let h10 = t * (1.0 - t) * (1.0 - t);
        let h01 = t * t * (3.0 - 2.0 * t);
        let h11 = t * t * (t - 1.0);
        h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
    }
}

/// Monotone cubic (PCHIP) interpolant.
#[derive(Clone, Debug)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    pub fn new(x: &[f64], y: &[f64]) -> Self {
        let n = x.len();
        assert!(n >= 2 && x.len() == y.len());
        let mut slopes = vec![0.0; n - 1];
        for i in 0..n - 1 {
            slopes[i] = (y[i + 1] - y[i]) / (x[i + 1] - x[i]);
        }
        let mut d = vec![0.0; n];
        d[0] = slopes[0];
        d[n - 1] = slopes[n - 2];
        for i in 1..n - 1 {
            let (s0, s1) = (slopes[i - 1], slopes[i]);
            if s0 * s1 <= 0.0 {
                d[i] = 0.0;
            } else {
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                let w1 = 2.0 * h1 + h0;
                let w2 = h1 + 2.0 * h0;
                d[i] = (w1 + w2) / (w1 / s0 + w2 / s1);
            }
        }
        Self {
            x: x.to_vec(),
            y: y.to_vec(),
            d,
        }
    }

    fn locate(&self, xq: f64) -> usize {
        match self
            .x
            .binary_search_by(|v| v.partial_cmp(&xq).unwrap())
        {
            Ok(i) => i.min(self.x.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.x.len() - 2),
        }
    }

    pub fn eval(&self, xq: f64) -> f64 {
        let i = self.locate(xq);
        let h = self.x[i + 1] - self.x[i];
        let t = (xq - self.x[i]) / h;
        let (y0, y1, d0, d1) = (self.y[i], self.y[i + 1], self.d[i], self.d[i + 1]);
        let h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
        let h10 = t * (1.0 - t) * (1.0 - t);
        let h01 = t * t * (3.0 - 2.0 * t);
        let h11 = t * t * (t - 1.0);
        h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
    }

    pub fn eval_deriv(&self, xq: f64) -> f64 {
        let i = self.locate(xq);
        let h = self.x[i + 1] - self.x[i];
        let t = (xq - self.x[i]) / h;
        let (y0, y1, d0, d1) = (self.y[i], self.y[i + 1], self.d[i], self.d[i + 1]);
        let dh00 = 6.0 * t * t - 6.0 * t;
        let dh10 = 3.0 * t * t - 4.0 * t + 1.0;
        let dh01 = -6.0 * t * t + 6.0 * t;
        let dh11 = 3.0 * t * t - 2.0 * t;
        (dh00 * y0 + dh01 * y1) / h + dh10 * d0 + dh11 * d1
    }
}
