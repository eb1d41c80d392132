//! The distinguished radial profile `H(ρ)`.
//!
//! `H` solves the scale-invariant sinh-Gordon equation
//!
//! ```text
//! (ρ∂ρ)² H = (9/8) ρ³ sinh(2H)
//! ```
//!
//! with a logarithmic asymptote `H = -log(ρ^{1/2}(a₀ + a₂ρ² + ...))` at
//! the axis and super-exponential decay `H ≤ C exp(-cρ^{3/2})` at
//! infinity. The connection coefficient is `f(ρ) = 1/4 + ρH'/2`, which
//! rises monotonically from a second-order zero at the axis to the
//! limiting value 1/4.
//!
//! Two substitutions remove the stiffness:
//! * on `[0, 1]` we solve for `w = H + (1/2) log ρ`, which extends to an
//!   even smooth function through the axis (so `a₀ = e^{-w(0)}`);
//! * on `[1, ρ_max]` we solve for `u = log H`, which tracks the tail to
//!   full relative accuracy; the far boundary condition is the Robin form
//!   `u' = -(3/2)ρ^{1/2} - 3/(4ρ)` of the leading decay asymptotics.
//!
//! The production solver is a damped Newton iteration on 4th-order
//! finite-difference collocation; [`solve_profile_collocation`] is an
//! independent Chebyshev collocation solver used as the cross-check
//! oracle for `a₀`.

use crate::grid::{differentiate, fd_weights, Hermite, Pchip};
use crate::num::band::BandMatrix;
use crate::num::dense::{lu_solve, DMat};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Solved profile on a radial grid, with interpolants and tail model.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProfileH {
    /// Strictly increasing positive grid (the axis node is excluded; use
    /// `eval_w` for the regular quantity through the axis).
    pub rho: Vec<f64>,
    pub h: Vec<f64>,
    pub dh: Vec<f64>,
    pub f: Vec<f64>,
    /// Leading expansion coefficient: `e^{-H} ρ^{-1/2} -> a₀` at the axis.
    pub a0: f64,
    pub rho_max: f64,
    /// Max-norm of the discrete residual in the `(ρ∂ρ)²H` form.
    pub residual_norm: f64,
    /// Grid of the regular variable `w = H + log(ρ)/2` on `[0, 1]`,
    /// with its first two nodal derivatives (for Hermite evaluation).
    pub w_rho: Vec<f64>,
    pub w: Vec<f64>,
    pub w_d: Vec<f64>,
    pub w_dd: Vec<f64>,
    /// Nodal derivative of `dh` on the export grid.
    pub dh_d: Vec<f64>,
    /// Fitted tail decay rate in `H ~ A ρ^{-3/4} exp(-c ρ^{3/2})`.
    pub tail_c: f64,
    pub tail_a: f64,
    #[serde(skip)]
    interp: Option<ProfileInterp>,
}

#[derive(Clone, Debug)]
struct ProfileInterp {
    w: Hermite,
    dw: Hermite,
    h: Hermite,
    dh: Hermite,
}

/// sinh(2x)/x, stable at small x.
fn sinh2x_over_x(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        2.0 + (4.0 / 3.0) * x * x + (4.0 / 15.0) * x * x * x * x
    } else {
        (2.0 * x).sinh() / x
    }
}

struct TwoRegionLayout {
    rho_a: Vec<f64>,
    rho_b: Vec<f64>,
}

impl TwoRegionLayout {
    fn n(&self) -> usize {
        self.rho_a.len() + self.rho_b.len()
    }
}

/// Residual of the composite nonlinear system; `x = [w-values, u-values]`.
/// Rows are scaled to the `(ρ∂ρ)²H - (9/8)ρ³ sinh 2H` form where they
/// are collocation rows.
fn residual_and_rows(
    layout: &TwoRegionLayout,
    x: &[f64],
    d1a: &[Vec<f64>],
    d2a: &[Vec<f64>],
    d1b: &[Vec<f64>],
    d2b: &[Vec<f64>],
) -> Vec<f64> {
    let na = layout.rho_a.len();
    let nb = layout.rho_b.len();
    let (w, u) = x.split_at(na);
    let mut res = vec![0.0; na + nb];

    // Row 0: w'(0) = 0 (5-point one-sided stencil).
    res[0] = (0..5).map(|k| d1a[0][k] * w[k]).sum();

    // Interior w-rows i = 1..na-2:
    //   ρ²w'' + ρw' - (9/16)ρ²(e^{2w} - ρ²e^{-2w}) = 0.
    for i in 1..na - 1 {
        let rho = layout.rho_a[i];
        let lo = i.saturating_sub(2).min(na - 5);
        let wp: f64 = (0..5).map(|k| d1a[i][k] * w[lo + k]).sum();
        let wpp: f64 = (0..5).map(|k| d2a[i][k] * w[lo + k]).sum();
        let s = (9.0 / 16.0) * rho * rho * ((2.0 * w[i]).exp() - rho * rho * (-2.0 * w[i]).exp());
        res[i] = rho * rho * wpp + rho * wp - s;
    }

    // Matching rows at ρ = 1 (rows na-1 and na):
    //   w(1) = e^{u(1)}  and  w'(1) - 1/2 = u'(1) e^{u(1)}.
    let h1 = u[0].exp();
    res[na - 1] = w[na - 1] - h1;
    let wp1: f64 = (0..5).map(|k| d1a[na - 1][k] * w[na - 5 + k]).sum();
    let up1: f64 = (0..5).map(|k| d1b[0][k] * u[k]).sum();
    res[na] = wp1 - 0.5 - up1 * h1;

    // Interior u-rows j = 1..nb-2:
    //   ρ²u'' + ρu' + (ρu')² - (9/8)ρ³ sinh(2e^u)e^{-u} = 0.
    for j in 1..nb - 1 {
        let rho = layout.rho_b[j];
        let lo = j.saturating_sub(2).min(nb - 5);
        let up: f64 = (0..5).map(|k| d1b[j][k] * u[lo + k]).sum();
        let upp: f64 = (0..5).map(|k| d2b[j][k] * u[lo + k]).sum();
        let hval = u[j].exp();
        let s = (9.0 / 16.0) * rho * rho * rho * sinh2x_over_x(hval) * 2.0;
        res[na + j] = rho * rho * upp + rho * up + rho * rho * up * up - s;
    }

    // Far boundary: u'(ρmax) + (3/2)ρ^{1/2} + 3/(4ρ) = 0.
    let rmx = *layout.rho_b.last().unwrap();
    let upn: f64 = (0..5).map(|k| d1b[nb - 1][k] * u[nb - 5 + k]).sum();
    res[na + nb - 1] = upn + 1.5 * rmx.sqrt() + 0.75 / rmx;
    res
}

/// Solve the composite system by damped Newton on a banded Jacobian.
fn newton_solve(layout: &TwoRegionLayout, x0: Vec<f64>, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let na = layout.rho_a.len();
    let nb = layout.rho_b.len();
    let n = layout.n();

    // Precompute 5-point stencil weights per row.
    let stencils = |rho: &[f64], order: usize| -> Vec<Vec<f64>> {
        let m = rho.len();
        (0..m)
            .map(|i| {
                let lo = i.saturating_sub(2).min(m - 5);
                fd_weights(rho[i], &rho[lo..lo + 5], order)
            })
            .collect()
    };
    let d1a = stencils(&layout.rho_a, 1);
    let d2a = stencils(&layout.rho_a, 2);
    let d1b = stencils(&layout.rho_b, 1);
    let d2b = stencils(&layout.rho_b, 2);

    // Convergence is measured in the (ρ∂ρ)²H form: u-rows carry a factor
    // e^u relative to it, which also keeps the far-tail rows (whose raw
    // evaluation has a ρ²/h² cancellation floor) from blocking the exit.
    let mapped_norm = |x: &[f64], res: &[f64]| -> f64 {
        let mut m = 0.0f64;
        for (i, v) in res.iter().enumerate() {
            // Interior u-rows get the e^u factor; boundary, matching and
            // w-rows are already O(1)-scaled.
            let w = if i > na && i < n - 1 { x[i].exp() } else { 1.0 };
            m = m.max((v * w).abs());
        }
        m
    };

    let mut x = x0;
    let mut res = residual_and_rows(layout, &x, &d1a, &d2a, &d1b, &d2b);
    let mut rnorm = mapped_norm(&x, &res);

    for _it in 0..max_iter {
        if rnorm <= tol {
            return Ok(x);
        }
        // Banded Jacobian by analytic differentiation of the rows.
        let mut jac = BandMatrix::zeros(n, 6);
        let (w, u) = x.split_at(na);

        for k in 0..5 {
            jac.add(0, k, d1a[0][k]);
        }
        for i in 1..na - 1 {
            let rho = layout.rho_a[i];
            let lo = i.saturating_sub(2).min(na - 5);
            for k in 0..5 {
                jac.add(i, lo + k, rho * rho * d2a[i][k] + rho * d1a[i][k]);
            }
            let ds = (9.0 / 16.0)
                * rho
                * rho
                * (2.0 * (2.0 * w[i]).exp() + 2.0 * rho * rho * (-2.0 * w[i]).exp());
            jac.add(i, i, -ds);
        }
        let h1 = u[0].exp();
        jac.add(na - 1, na - 1, 1.0);
        jac.add(na - 1, na, -h1);
        let up1: f64 = (0..5).map(|k| d1b[0][k] * u[k]).sum();
        for k in 0..5 {
            jac.add(na, na - 5 + k, d1a[na - 1][k]);
            jac.add(na, na + k, -h1 * d1b[0][k]);
        }
        jac.add(na, na, -up1 * h1);
        for j in 1..nb - 1 {
            let rho = layout.rho_b[j];
            let lo = j.saturating_sub(2).min(nb - 5);
            let up: f64 = (0..5).map(|k| d1b[j][k] * u[lo + k]).sum();
            for k in 0..5 {
                jac.add(
                    na + j,
                    na + lo + k,
                    rho * rho * d2b[j][k] + rho * d1b[j][k] + 2.0 * rho * rho * up * d1b[j][k],
                );
            }
            let hval = u[j].exp();
            // d/du [ (9/8)ρ³ sinh(2h)/h ·? ] with h = e^u: derivative of
            // (9/16)·2·ρ³·sinh(2h)/h wrt u is (9/8)ρ³(2cosh(2h) - sinh(2h)/h).
            let dsdu = (9.0 / 8.0) * rho * rho * rho * (2.0 * (2.0 * hval).cosh() - sinh2x_over_x(hval));
            jac.add(na + j, na + j, -dsdu);
        }
        for k in 0..5 {
            jac.add(na + nb - 1, na + nb - 5 + k, d1b[nb - 1][k]);
        }

        jac.factor().map_err(Error::NonConvergence)?;
        let mut step = res.clone();
        jac.solve(&mut step);

        // Damped update with halving line search on the mapped max-norm.
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let xt: Vec<f64> = x.iter().zip(&step).map(|(xi, si)| xi - lambda * si).collect();
            let rt = residual_and_rows(layout, &xt, &d1a, &d2a, &d1b, &d2b);
            let rtn = mapped_norm(&xt, &rt);
            if rtn < rnorm * (1.0 - 0.25 * lambda) || rtn < tol {
                x = xt;
                res = rt;
                rnorm = rtn;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(Error::NonConvergence(format!(
                "profile Newton stalled at residual {rnorm:.3e}"
            )));
        }
    }
    if rnorm <= tol {
        Ok(x)
    } else {
        Err(Error::GridTooCoarse(format!(
            "profile residual {rnorm:.3e} did not reach tol {tol:.3e}"
        )))
    }
}

fn make_layout(rho_max: f64, n_points: usize) -> TwoRegionLayout {
    // Roughly a third of the points on [0, 1], graded mildly toward the
    // interface where curvature peaks; the rest on [1, rho_max].
    let na = (n_points / 3).max(60);
    let nb = (n_points - na).max(60);
    let rho_a: Vec<f64> = (0..na).map(|i| i as f64 / (na - 1) as f64).collect();
    let rho_b: Vec<f64> = (0..nb)
        .map(|j| {
            let s = j as f64 / (nb - 1) as f64;
            // cluster toward ρ = 1 where H still varies
            1.0 + (rho_max - 1.0) * (s * s * (0.35) + s * 0.65)
        })
        .collect();
    TwoRegionLayout { rho_a, rho_b }
}

fn initial_guess(layout: &TwoRegionLayout) -> Vec<f64> {
    let mut x = Vec::with_capacity(layout.n());
    let a0g = 0.78;
    for &rho in &layout.rho_a {
        x.push(-(a0g + 0.095 * rho * rho).ln());
    }
    let h1 = (-(a0g + 0.095f64).ln()).max(1e-3);
    for &rho in &layout.rho_b {
        x.push(h1.ln() - (rho.powf(1.5) - 1.0) - 0.75 * rho.ln());
    }
    x
}

/// Solve the profile two-point boundary value problem.
pub fn solve_profile(rho_max: f64, n_points: usize, tol: f64) -> Result<ProfileH> {
    if rho_max < 10.0 {
        return Err(Error::InvalidInput(format!("rho_max = {rho_max} < 10")));
    }
    if n_points < 200 {
        return Err(Error::InvalidInput(format!("n_points = {n_points} < 200")));
    }
    if tol <= 0.0 {
        return Err(Error::InvalidInput("tol must be positive".into()));
    }
    let layout = make_layout(rho_max, n_points);
    let x = newton_solve(&layout, initial_guess(&layout), tol, 60)?;
    build_profile(&layout, &x, rho_max, tol)
}

fn build_profile(layout: &TwoRegionLayout, x: &[f64], rho_max: f64, tol: f64) -> Result<ProfileH> {
    let na = layout.rho_a.len();
    let (wv, uv) = x.split_at(na);

    // Nodal derivatives by 4th-order stencils.
    let dw = differentiate(&layout.rho_a, wv);
    let du = differentiate(&layout.rho_b, uv);

    // Assemble the exported positive grid: region A without the axis node
    // and without duplicating ρ = 1.
    let mut rho = Vec::new();
    let mut h = Vec::new();
    let mut dh = Vec::new();
    for i in 1..na - 1 {
        let r = layout.rho_a[i];
        rho.push(r);
        h.push(wv[i] - 0.5 * r.ln());
        dh.push(dw[i] - 0.5 / r);
    }
    for j in 0..layout.rho_b.len() {
        let r = layout.rho_b[j];
        let hval = uv[j].exp();
        rho.push(r);
        h.push(hval);
        dh.push(du[j] * hval);
    }
    let f: Vec<f64> = rho.iter().zip(&dh).map(|(r, d)| 0.25 + 0.5 * r * d).collect();

    // a₀ by even-quadratic extrapolation of e^{-w} to the axis.
    let m = 6.min(na);
    let (mut s0, mut s2, mut s4, mut b0, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..m {
        let r2 = layout.rho_a[i] * layout.rho_a[i];
        let y = (-wv[i]).exp();
        s0 += 1.0;
        s2 += r2;
        s4 += r2 * r2;
        b0 += y;
        b2 += y * r2;
    }
    let det = s0 * s4 - s2 * s2;
    let a0 = (b0 * s4 - b2 * s2) / det;

    // Discrete residual in the (ρ∂ρ)²H form. The u-rows carry a factor
    // e^u relative to the H-form; the w-rows coincide with it.
    let d1a: Vec<Vec<f64>> = (0..na)
        .map(|i| {
            let lo = i.saturating_sub(2).min(na - 5);
            fd_weights(layout.rho_a[i], &layout.rho_a[lo..lo + 5], 1)
        })
        .collect();
    let d2a: Vec<Vec<f64>> = (0..na)
        .map(|i| {
            let lo = i.saturating_sub(2).min(na - 5);
            fd_weights(layout.rho_a[i], &layout.rho_a[lo..lo + 5], 2)
        })
        .collect();
    let nb = layout.rho_b.len();
    let d1b: Vec<Vec<f64>> = (0..nb)
        .map(|j| {
            let lo = j.saturating_sub(2).min(nb - 5);
            fd_weights(layout.rho_b[j], &layout.rho_b[lo..lo + 5], 1)
        })
        .collect();
    let d2b: Vec<Vec<f64>> = (0..nb)
        .map(|j| {
            let lo = j.saturating_sub(2).min(nb - 5);
            fd_weights(layout.rho_b[j], &layout.rho_b[lo..lo + 5], 2)
        })
        .collect();
    let res = residual_and_rows(layout, x, &d1a, &d2a, &d1b, &d2b);
    let mut residual_norm = 0.0f64;
    for i in 1..na - 1 {
        residual_norm = residual_norm.max(res[i].abs());
    }
    for j in 1..nb - 1 {
        residual_norm = residual_norm.max((res[na + j] * uv[j].exp()).abs());
    }
    if residual_norm > tol {
        return Err(Error::GridTooCoarse(format!(
            "mapped residual {residual_norm:.3e} exceeds tol {tol:.3e}"
        )));
    }

    // Tail fit on ρ ∈ [6, min(10, ρmax)]: log H ~ log A - (3/4) log ρ - c ρ^{3/2}.
    let (mut sx, mut sy, mut sxx, mut sxy, mut cnt) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (r, hv) in rho.iter().zip(&h) {
        if *r >= 6.0 && *r <= 10.0_f64.min(rho_max) && *hv > 0.0 {
            let xx = r.powf(1.5);
            let yy = hv.ln() + 0.75 * r.ln();
            sx += xx;
            sy += yy;
            sxx += xx * xx;
            sxy += xx * yy;
            cnt += 1.0;
        }
    }
    let slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
    let tail_c = -slope;
    let tail_a = ((sy - slope * sx) / cnt).exp();

    let w_dd = differentiate(&layout.rho_a, &dw);
    let dh_d = differentiate(&rho, &dh);
    let mut p = ProfileH {
        rho,
        h,
        dh,
        f,
        a0,
        rho_max,
        residual_norm,
        w_rho: layout.rho_a.clone(),
        w: wv.to_vec(),
        w_d: dw.clone(),
        w_dd,
        dh_d,
        tail_c,
        tail_a,
        interp: None,
    };
    p.build_interp();
    Ok(p)
}

impl ProfileH {
    pub fn build_interp(&mut self) {
        self.interp = Some(ProfileInterp {
            w: Hermite::new(&self.w_rho, &self.w, &self.w_d),
            dw: Hermite::new(&self.w_rho, &self.w_d, &self.w_dd),
            h: Hermite::new(&self.rho, &self.h, &self.dh),
            dh: Hermite::new(&self.rho, &self.dh, &self.dh_d),
        });
    }

    fn interp(&self) -> &ProfileInterp {
        self.interp
            .as_ref()
            .expect("profile interpolant missing; call build_interp after deserialization")
    }

    /// `(H, H')` at `rho ∈ [0, rho_max]`; uses the regular variable near
    /// the axis so the logarithm is exact.
    pub fn eval_h(&self, rho: f64) -> Result<(f64, f64)> {
        if rho > self.rho_max {
            return Err(Error::OutOfRange {
                rho,
                rho_max: self.rho_max,
            });
        }
        if rho <= 0.0 {
            return Err(Error::OutOfRange {
                rho,
                rho_max: self.rho_max,
            });
        }
        let it = self.interp();
        if rho <= 1.0 {
            let w = it.w.eval(rho);
            let dw = it.dw.eval(rho);
            Ok((w - 0.5 * rho.ln(), dw - 0.5 / rho))
        } else {
            Ok((it.h.eval(rho), it.dh.eval(rho)))
        }
    }

    /// `f(ρ) = 1/4 + ρH'/2`, with `f(0) = 0` exactly.
    pub fn eval_f(&self, rho: f64) -> Result<f64> {
        if rho > self.rho_max {
            return Err(Error::OutOfRange {
                rho,
                rho_max: self.rho_max,
            });
        }
        if rho == 0.0 {
            return Ok(0.0);
        }
        if rho <= 1.0 {
            // f = ρ w' / 2 identically on the regular region.
            Ok(0.5 * rho * self.interp().dw.eval(rho))
        } else {
            Ok(0.25 + 0.5 * rho * self.interp().dh.eval(rho))
        }
    }

    /// The regular variable `w = H + log(ρ)/2` and its derivative; valid
    /// on all of `[0, rho_max]` (continued by `H + log(ρ)/2` beyond 1).
    pub fn eval_w(&self, rho: f64) -> (f64, f64) {
        if rho <= 1.0 {
            let it = self.interp();
            (it.w.eval(rho), it.dw.eval(rho))
        } else if rho <= self.rho_max {
            let it = self.interp();
            (
                it.h.eval(rho) + 0.5 * rho.ln(),
                it.dh.eval(rho) + 0.5 / rho,
            )
        } else {
            let (h, dh) = self.eval_tail(rho);
            (h + 0.5 * rho.ln(), dh + 0.5 / rho)
        }
    }

    /// Tail model `H = A ρ^{-3/4} exp(-c ρ^{3/2})` for `ρ > rho_max`.
    pub fn eval_tail(&self, rho: f64) -> (f64, f64) {
        let h = self.tail_a * rho.powf(-0.75) * (-self.tail_c * rho.powf(1.5)).exp();
        let dh = h * (-0.75 / rho - 1.5 * self.tail_c * rho.sqrt());
        (h, dh)
    }

    /// `(H, H')` valid for every positive radius, switching to the tail
    /// model beyond the stored range.
    pub fn eval_h_any(&self, rho: f64) -> (f64, f64) {
        if rho <= self.rho_max {
            self.eval_h(rho).expect("rho in range")
        } else {
            self.eval_tail(rho)
        }
    }

    /// `f(ρ)` valid for every radius.
    pub fn eval_f_any(&self, rho: f64) -> f64 {
        if rho <= self.rho_max {
            self.eval_f(rho).expect("rho in range")
        } else {
            let (_, dh) = self.eval_tail(rho);
            0.25 + 0.5 * rho * dh
        }
    }
}

/// Pointwise residual of the profile equation `(ρ∂ρ)²H - (9/8)ρ³ sinh 2H`
/// evaluated with 7-point stencils on given samples. Independent of the
/// solver's own discretization; used for operator sanity checks and
/// grid-refinement studies.
pub fn ode_residual(rho: &[f64], h: &[f64]) -> Vec<f64> {
    let n = rho.len();
    assert!(n >= 7);
    let mut out = vec![0.0; n];
    for i in 0..n {
        let lo = i.saturating_sub(3).min(n - 7);
        let w1 = fd_weights(rho[i], &rho[lo..lo + 7], 1);
        let w2 = fd_weights(rho[i], &rho[lo..lo + 7], 2);
        let d1: f64 = (0..7).map(|k| w1[k] * h[lo + k]).sum();
        let d2: f64 = (0..7).map(|k| w2[k] * h[lo + k]).sum();
        let r = rho[i];
        out[i] = r * r * d2 + r * d1 - (9.0 / 8.0) * r * r * r * (2.0 * h[i]).sinh();
    }
    out
}

/// Independent Chebyshev collocation solve; returns the profile from a
/// spectral discretization with dense Newton. Used as the `a₀` oracle.
pub fn solve_profile_collocation(rho_max: f64, n_a: usize, n_b: usize) -> Result<ProfileH> {
    let cheb = |n: usize, a: f64, b: f64| -> (Vec<f64>, DMat) {
        // Chebyshev-Lobatto nodes ascending on [a, b] with the dense
        // first-derivative matrix.
        let nm = n - 1;
        let xs: Vec<f64> = (0..n)
            .map(|j| (std::f64::consts::PI * j as f64 / nm as f64).cos())
            .collect();
        let mut d = DMat::zeros(n, n);
        let c = |i: usize| -> f64 {
            if i == 0 || i == nm {
                2.0
            } else {
                1.0
            }
        };
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    d[(i, j)] = (c(i) / c(j)) * (-1.0f64).powi((i + j) as i32) / (xs[i] - xs[j]);
                }
            }
        }
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                if j != i {
                    s += d[(i, j)];
                }
            }
            d[(i, i)] = -s;
        }
        // Map x ∈ [1, -1] (descending) to ρ ∈ [a, b] ascending.
        let rho: Vec<f64> = xs.iter().map(|x| a + (b - a) * (1.0 - x) / 2.0).collect();
        let mut dm = DMat::zeros(n, n);
        let scale = -2.0 / (b - a);
        for i in 0..n {
            for j in 0..n {
                dm[(i, j)] = d[(i, j)] * scale;
            }
        }
        (rho, dm)
    };

    let (rho_a, da) = cheb(n_a, 0.0, 1.0);
    let (rho_b, db) = cheb(n_b, 1.0, rho_max);
    let n = n_a + n_b;

    let apply = |d: &DMat, v: &[f64], i: usize| -> f64 {
        (0..d.cols).map(|k| d[(i, k)] * v[k]).sum()
    };

    let residual = |x: &[f64]| -> Vec<f64> {
        let (w, u) = x.split_at(n_a);
        let wp: Vec<f64> = (0..n_a).map(|i| apply(&da, w, i)).collect();
        let wpp: Vec<f64> = (0..n_a).map(|i| apply(&da, &wp, i)).collect();
        let up: Vec<f64> = (0..n_b).map(|i| apply(&db, u, i)).collect();
        let upp: Vec<f64> = (0..n_b).map(|i| apply(&db, &up, i)).collect();
        let mut res = vec![0.0; n];
        res[0] = wp[0];
        for i in 1..n_a - 1 {
            let r = rho_a[i];
            let s = (9.0 / 16.0) * r * r * ((2.0 * w[i]).exp() - r * r * (-2.0 * w[i]).exp());
            res[i] = r * r * wpp[i] + r * wp[i] - s;
        }
        let h1 = u[0].exp();
        res[n_a - 1] = w[n_a - 1] - h1;
        res[n_a] = wp[n_a - 1] - 0.5 - up[0] * h1;
        for j in 1..n_b - 1 {
            let r = rho_b[j];
            let s = (9.0 / 8.0) * r * r * r * sinh2x_over_x(u[j].exp());
            res[n_a + j] = r * r * upp[j] + r * up[j] + r * r * up[j] * up[j] - s;
        }
        let rmx = rho_max;
        res[n - 1] = up[n_b - 1] + 1.5 * rmx.sqrt() + 0.75 / rmx;
        res
    };

    // Dense Newton with a finite-difference Jacobian (sizes are small).
    let layout_fd = make_layout(rho_max, 400);
    let seed = initial_guess(&layout_fd);
    let interp_a = Pchip::new(&layout_fd.rho_a, &seed[..layout_fd.rho_a.len()]);
    let interp_b = Pchip::new(&layout_fd.rho_b, &seed[layout_fd.rho_a.len()..]);
    let mut x: Vec<f64> = rho_a
        .iter()
        .map(|r| interp_a.eval(*r))
        .chain(rho_b.iter().map(|r| interp_b.eval(*r)))
        .collect();

    // Same mapped merit as the production solver: interior u-rows carry
    // the e^u factor of the (ρ∂ρ)²H form.
    let mapped = |x: &[f64], res: &[f64]| -> f64 {
        let mut m = 0.0f64;
        for (i, v) in res.iter().enumerate() {
            let w = if i > n_a && i < n - 1 { x[i].exp() } else { 1.0 };
            m = m.max((v * w).abs());
        }
        m
    };

    for _it in 0..80 {
        let res = residual(&x);
        let rnorm = mapped(&x, &res);
        if rnorm < 1e-11 {
            break;
        }
        let mut jac = DMat::zeros(n, n);
        for j in 0..n {
            let dxj = 1e-7 * (1.0 + x[j].abs());
            let mut xp = x.clone();
            xp[j] += dxj;
            let rp = residual(&xp);
            for i in 0..n {
                jac[(i, j)] = (rp[i] - res[i]) / dxj;
            }
        }
        let mut step = res.clone();
        lu_solve(&jac, &mut step).map_err(Error::NonConvergence)?;
        let mut lambda = 1.0;
        let mut ok = false;
        for _ in 0..30 {
            let xt: Vec<f64> = x.iter().zip(&step).map(|(a, s)| a - lambda * s).collect();
            let rt = residual(&xt);
            let rtn = mapped(&xt, &rt);
            if rtn < rnorm {
                x = xt;
                ok = true;
                break;
            }
            lambda *= 0.5;
        }
        if !ok {
            return Err(Error::NonConvergence("collocation Newton stalled".into()));
        }
    }
    let res = residual(&x);
    let rnorm = mapped(&x, &res);
    if rnorm > 1e-9 {
        return Err(Error::NonConvergence(format!(
            "collocation residual {rnorm:.2e}"
        )));
    }

    // Package through the same exporter using the collocation grids.
    let layout = TwoRegionLayout { rho_a, rho_b };
    // build_profile needs ≥5 nodes per region for its stencils; spectral
    // grids satisfy that.
    build_profile(&layout, &x, rho_max, 1e-6)
}
