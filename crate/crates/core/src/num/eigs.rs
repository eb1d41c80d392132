//! Smallest eigenpairs of the symmetric-definite pencil `K x = λ B x`
//! via shift-inverted block subspace iteration, with optional dense-row
//! (Woodbury) corrections to `K` for orthogonality constraints.
//!
//! `K` is typically the Gram matrix `AᵀWA` of a discrete operator and
//! `B` the Gram matrix of the norm on the domain, so that `√λ_min` is a
//! discretization-norm-consistent smallest singular value.

use super::band::SymBand;
use super::dense::{lu_solve, sym_eig, DMat};
use super::rng::Rng;

/// `K_total = K_band + Σ w_r · r rᵀ` over dense rows, vs. the norm Gram `B`.
pub struct GramPencil {
    pub k: SymBand,
    pub b: SymBand,
    /// Dense constraint rows `(r, w)` entering `K_total` as `w · r rᵀ`.
    pub dense_rows: Vec<(Vec<f64>, f64)>,
}

struct WoodburySolver {
    kf: SymBand,
    /// Unfactored copy for one step of iterative refinement.
    kraw: SymBand,
    /// `Z = K⁻¹ R` columns, one per dense row.
    z: Vec<Vec<f64>>,
    rows: Vec<Vec<f64>>,
    /// Factor data of `(W⁻¹ + Rᵀ K⁻¹ R)`.
    small: Option<DMat>,
}

impl WoodburySolver {
    fn build(
        k: &SymBand,
        b: &SymBand,
        dense_rows: &[(Vec<f64>, f64)],
        shift_rel: f64,
    ) -> Result<Self, String> {
        let mut kf = k.clone();
        if shift_rel != 0.0 {
            // Shift scaled to K's magnitude so it is meaningful whatever
            // the relative scaling of the two Grams.
            let ratio = kf.max_diag().max(1e-300) / b.max_diag().max(1e-300);
            kf.add_scaled(b, shift_rel * ratio);
        }
        let kraw = kf.clone();
        kf.cholesky()?;
        let m = dense_rows.len();
        let mut z = Vec::with_capacity(m);
        let mut rows = Vec::with_capacity(m);
        for (r, _) in dense_rows {
            let mut zi = r.clone();
            kf.solve(&mut zi);
            z.push(zi);
            rows.push(r.clone());
        }
        let small = if m > 0 {
            let mut s = DMat::zeros(m, m);
            for i in 0..m {
                for j in 0..m {
                    s[(i, j)] = dot(&rows[i], &z[j]);
                }
                s[(i, i)] += 1.0 / dense_rows[i].1;
            }
            Some(s)
        } else {
            None
        };
        Ok(Self {
            kf,
            kraw,
            z,
            rows,
            small,
        })
    }

    /// Banded solve with one step of iterative refinement (keeps exact
    /// kernels resolvable well below the iteration floor).
    fn band_solve(&self, x: &mut Vec<f64>) {
        let rhs = x.clone();
        self.kf.solve(x);
        let mut ax = vec![0.0; x.len()];
        self.kraw.matvec(x, &mut ax);
        let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        self.kf.solve(&mut r);
        for (xi, ri) in x.iter_mut().zip(&r) {
            *xi += ri;
        }
    }

    fn solve(&self, x: &mut Vec<f64>) {
        self.band_solve(x);
        if let Some(s) = &self.small {
            let m = self.rows.len();
            let mut t: Vec<f64> = (0..m).map(|i| dot(&self.rows[i], x)).collect();
            lu_solve(s, &mut t).expect("woodbury small system singular");
            for i in 0..m {
                for (xk, zk) in x.iter_mut().zip(&self.z[i]) {
                    *xk -= t[i] * zk;
                }
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl GramPencil {
    /// Apply `K_total` to a vector.
    pub fn apply_k(&self, x: &[f64], y: &mut Vec<f64>) {
        self.k.matvec(x, y);
        for (r, w) in &self.dense_rows {
            let c = *w * dot(r, x);
            for (yk, rk) in y.iter_mut().zip(r) {
                *yk += c * rk;
            }
        }
    }

    /// Smallest `m` eigenvalues of `(K_total, B)` (ascending) and their
    /// B-orthonormal eigenvectors.
    pub fn smallest(&self, m: usize, iters: usize, seed: u64) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = self.k.n;
        let block = (m + 4).min(n);
        // Escalate the shift until the Cholesky succeeds; K is PSD so a
        // tiny multiple of B is enough in the singular case.
        let mut solver = None;
        for shift in [0.0, 1e-12, 1e-9, 1e-6, 1e-3] {
            match WoodburySolver::build(&self.k, &self.b, &self.dense_rows, shift) {
                Ok(s) => {
                    solver = Some((s, shift));
                    break;
                }
                Err(_) => continue,
            }
        }
        let (solver, shift) = solver.expect("pencil: K + shift·B never positive definite");

        let mut rng = Rng::seeded(seed ^ 0x5eed);
        let mut xs: Vec<Vec<f64>> = (0..block)
            .map(|_| (0..n).map(|_| rng.gauss()).collect())
            .collect();
        let mut prev = vec![f64::INFINITY; m];
        let mut vals = vec![0.0; block];
        let mut tmp = vec![0.0; n];
        for it in 0..iters {
            // Y = (K + shift·B)⁻¹ B X, then B-orthonormalize.
            for x in xs.iter_mut() {
                self.b.matvec(x, &mut tmp);
                let mut y = tmp.clone();
                solver.solve(&mut y);
                *x = y;
            }
            b_orthonormalize(&self.b, &mut xs, &mut tmp);
            // Rayleigh-Ritz on the block.
            let mut kr = DMat::zeros(block, block);
            let mut ky: Vec<Vec<f64>> = Vec::with_capacity(block);
            for x in &xs {
                let mut y = vec![0.0; n];
                self.apply_k(x, &mut y);
                ky.push(y);
            }
            for i in 0..block {
                for j in 0..block {
                    kr[(i, j)] = dot(&xs[i], &ky[j]);
                }
            }
            // symmetrize against roundoff
            for i in 0..block {
                for j in 0..i {
                    let s = 0.5 * (kr[(i, j)] + kr[(j, i)]);
                    kr[(i, j)] = s;
                    kr[(j, i)] = s;
                }
            }
            let (ev, vecs) = sym_eig(&kr);
            let mut rotated: Vec<Vec<f64>> = vec![vec![0.0; n]; block];
            for (col, row) in rotated.iter_mut().enumerate() {
                for i in 0..block {
                    let c = vecs[(i, col)];
                    if c != 0.0 {
                        for (rk, xk) in row.iter_mut().zip(&xs[i]) {
                            *rk += c * xk;
                        }
                    }
                }
            }
            xs = rotated;
            vals.clone_from_slice(&ev);
            let conv = (0..m).all(|i| {
                (vals[i] - prev[i]).abs() <= 1e-10 * vals[i].abs().max(1e-300) || vals[i].abs() < 1e-28
            });
            prev.copy_from_slice(&vals[..m]);
            if conv && it >= 4 {
                break;
            }
        }
        // Remove the shift contribution: λ_true = λ_shifted - shift_eff.
        let shift_eff = if shift == 0.0 {
            0.0
        } else {
            shift * self.k.max_diag().max(1e-300) / self.b.max_diag().max(1e-300)
        };
        let out_vals: Vec<f64> = vals[..m].iter().map(|v| v - shift_eff).collect();
        (out_vals, xs.into_iter().take(m).collect())
    }

    /// Largest eigenvalue of `(K_total, B)` by power iteration on `B⁻¹K`.
    pub fn largest(&self, iters: usize, seed: u64) -> f64 {
        let n = self.k.n;
        let mut bf = self.b.clone();
        bf.add_diag(1e-14);
        bf.cholesky().expect("norm Gram not positive definite");
        let mut rng = Rng::seeded(seed ^ 0xabcd);
        let mut x: Vec<f64> = (0..n).map(|_| rng.gauss()).collect();
        let mut lambda = 0.0;
        let mut y = vec![0.0; n];
        for _ in 0..iters {
            self.apply_k(&x, &mut y);
            let mut z = y.clone();
            bf.solve(&mut z);
            // Rayleigh quotient in the B-inner product.
            self.b.matvec(&z, &mut y);
            let num = dot(&z, &y);
            let nrm = num.sqrt().max(1e-300);
            for (xi, zi) in x.iter_mut().zip(&z) {
                *xi = zi / nrm;
            }
            let mut kx = vec![0.0; n];
            self.apply_k(&x, &mut kx);
            lambda = dot(&x, &kx);
        }
        lambda
    }
}

/// Gram-Schmidt in the B-inner product (two passes).
fn b_orthonormalize(b: &SymBand, xs: &mut [Vec<f64>], tmp: &mut Vec<f64>) {
    let k = xs.len();
    for i in 0..k {
        for _pass in 0..2 {
            for j in 0..i {
                b.matvec(&xs[j], tmp);
                let c = dot(&xs[i], tmp);
                let (head, tail) = xs.split_at_mut(i);
                for (xi, xj) in tail[0].iter_mut().zip(&head[j]) {
                    *xi -= c * xj;
                }
            }
        }
        b.matvec(&xs[i], tmp);
        let nrm = dot(&xs[i], tmp).max(0.0).sqrt();
        if nrm > 1e-150 {
            for v in xs[i].iter_mut() {
                *v /= nrm;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_of_diagonal_pencil() {
        let n = 50;
        let mut k = SymBand::zeros(n, 0);
        let mut b = SymBand::zeros(n, 0);
        for i in 0..n {
            k.add(i, i, (i + 1) as f64);
            b.add(i, i, 1.0);
        }
        let pencil = GramPencil {
            k,
            b,
            dense_rows: vec![],
        };
        let (vals, vecs) = pencil.smallest(3, 200, 1);
        assert!((vals[0] - 1.0).abs() < 1e-8, "{vals:?}");
        assert!((vals[1] - 2.0).abs() < 1e-8);
        assert!((vals[2] - 3.0).abs() < 1e-8);
        // ground vector concentrated on index 0
        assert!(vecs[0][0].abs() > 0.99);
    }

    #[test]
    fn dense_row_lifts_constrained_direction() {
        // K = diag(1..n) but with a huge penalty row on e₀: the smallest
        // eigenvalue moves from 1 to 2.
        let n = 30;
        let mut k = SymBand::zeros(n, 0);
        let mut b = SymBand::zeros(n, 0);
        for i in 0..n {
            k.add(i, i, (i + 1) as f64);
            b.add(i, i, 1.0);
        }
        let mut row = vec![0.0; n];
        row[0] = 1.0;
        let pencil = GramPencil {
            k,
            b,
            dense_rows: vec![(row, 1e8)],
        };
        let (vals, _) = pencil.smallest(2, 300, 2);
        assert!((vals[0] - 2.0).abs() < 1e-5, "{vals:?}");
    }

    #[test]
    fn largest_of_diagonal_pencil() {
        let n = 40;
        let mut k = SymBand::zeros(n, 0);
        let mut b = SymBand::zeros(n, 0);
        for i in 0..n {
            k.add(i, i, (i + 1) as f64);
            b.add(i, i, 2.0);
        }
        let pencil = GramPencil {
            k,
            b,
            dense_rows: vec![],
        };
        let top = pencil.largest(200, 3);
        assert!((top - n as f64 / 2.0).abs() < 1e-6 * n as f64, "top = {top}");
    }
}
