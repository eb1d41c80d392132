//! Small dense kernels: symmetric Jacobi eigensolver and a one-sided
//! Jacobi SVD. Only used on modest sizes (Rayleigh-Ritz blocks, small
//! collocation systems, per-mode operators), where robustness matters
//! more than speed.

/// Dense row-major real matrix.
#[derive(Clone, Debug)]
pub struct DMat {
    pub rows: usize,
    pub cols: usize,
    pub a: Vec<f64>,
}

impl DMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            a: vec![0.0; rows * cols],
        }
    }

    pub fn eye(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }
}

impl std::ops::Index<(usize, usize)> for DMat {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.a[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DMat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.a[i * self.cols + j]
    }
}

/// Eigenvalues and eigenvectors of a small dense symmetric matrix by
/// cyclic Jacobi rotations. Returns eigenvalues ascending with the
/// eigenvectors as columns of the returned matrix.
pub fn sym_eig(m: &DMat) -> (Vec<f64>, DMat) {
    assert_eq!(m.rows, m.cols);
    let n = m.rows;
    let mut a = m.clone();
    let mut v = DMat::eye(n);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        if off.sqrt() < 1e-14 * (1.0 + frob(&a)) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vecs = DMat::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        for k in 0..n {
            vecs[(k, col)] = v[(k, i)];
        }
    }
    (vals, vecs)
}

fn frob(a: &DMat) -> f64 {
    a.a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Singular values of a dense real matrix (rows ≥ cols not required) by
/// one-sided Jacobi on columns; ascending order. Optionally also returns
/// the right singular vectors.
pub fn singular_values(m: &DMat, want_v: bool) -> (Vec<f64>, Option<DMat>) {
    let rows = m.rows;
    let cols = m.cols;
    let mut a = m.clone();
    let mut v = if want_v { Some(DMat::eye(cols)) } else { None };
    let scale: f64 = frob(&a).max(1e-300);
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = 0.0;
                for k in 0..rows {
                    let x = a[(k, p)];
                    let y = a[(k, q)];
                    app += x * x;
                    aqq += y * y;
                    apq += x * y;
                }
                if apq.abs() <= 1e-15 * scale * scale {
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..rows {
                    let x = a[(k, p)];
                    let y = a[(k, q)];
                    a[(k, p)] = c * x - s * y;
                    a[(k, q)] = s * x + c * y;
                }
                if let Some(vm) = v.as_mut() {
                    for k in 0..cols {
                        let x = vm[(k, p)];
                        let y = vm[(k, q)];
                        vm[(k, p)] = c * x - s * y;
                        vm[(k, q)] = s * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = (0..cols)
        .map(|j| (0..rows).map(|k| a[(k, j)] * a[(k, j)]).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&i, &j| sv[i].partial_cmp(&sv[j]).unwrap());
    sv = order.iter().map(|&i| sv[i]).collect();
    let vout = v.map(|vm| {
        let mut out = DMat::zeros(cols, cols);
        for (col, &i) in order.iter().enumerate() {
            for k in 0..cols {
                out[(k, col)] = vm[(k, i)];
            }
        }
        out
    });
    (sv, vout)
}

/// Dense LU solve with partial pivoting (small systems only).
pub fn lu_solve(m: &DMat, rhs: &mut [f64]) -> Result<(), String> {
    assert_eq!(m.rows, m.cols);
    let n = m.rows;
    let mut a = m.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    for col in 0..n {
        let mut piv = col;
        let mut best = a[(col, col)].abs();
        for r in col + 1..n {
            if a[(r, col)].abs() > best {
                best = a[(r, col)].abs();
                piv = r;
            }
        }
        if best == 0.0 {
            return Err(format!("dense LU: zero pivot at {col}"));
        }
        if piv != col {
            for j in 0..n {
                let t = a[(col, j)];
                a[(col, j)] = a[(piv, j)];
                a[(piv, j)] = t;
            }
            perm.swap(col, piv);
        }
        for r in col + 1..n {
            let f = a[(r, col)] / a[(col, col)];
            a[(r, col)] = f;
            for j in col + 1..n {
                let t = a[(col, j)] * f;
                a[(r, j)] -= t;
            }
        }
    }
    let b: Vec<f64> = perm.iter().map(|&i| rhs[i]).collect();
    rhs.copy_from_slice(&b);
    for col in 0..n {
        for r in col + 1..n {
            rhs[r] -= a[(r, col)] * rhs[col];
        }
    }
    for i in (0..n).rev() {
        let mut s = rhs[i];
        for j in i + 1..n {
            s -= a[(i, j)] * rhs[j];
        }
        rhs[i] = s / a[(i, i)];
    }
    Ok(())
}
