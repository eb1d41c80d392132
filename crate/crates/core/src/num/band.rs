//! Real banded matrices: general banded LU with partial pivoting and
//! symmetric positive-definite banded Cholesky.
//!
//! Complex operators are realified (interleaved re/im) before they reach
//! this module, so a single real implementation serves everything.

/// General banded square matrix in LAPACK-like storage with room for
/// pivoting fill-in: logical entry `(i, j)` with `|i - j| <= band` lives
/// at `data[i][j - i + band + band_extra]`.
#[derive(Clone, Debug)]
pub struct BandMatrix {
    pub n: usize,
    /// Bandwidth below and above the diagonal before factorization.
    pub band: usize,
    width: usize,
    data: Vec<f64>,
    pivots: Vec<usize>,
    factored: bool,
}

impl BandMatrix {
    pub fn zeros(n: usize, band: usize) -> Self {
        // Row storage spans [-band, +2·band] relative to the diagonal so
        // that row swaps during pivoting stay inside the band.
        let width = 3 * band + 1;
        Self {
            n,
            band,
            width,
            data: vec![0.0; n * width],
            pivots: vec![0; n],
            factored: false,
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.band >= i && j <= i + 2 * self.band);
        i * self.width + (j + self.band - i)
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(
            j + self.band >= i && j <= i + self.band,
            "entry ({i},{j}) outside bandwidth {}",
            self.band
        );
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.band < i || j > i + 2 * self.band {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    /// LU factorization with partial pivoting (rows only move downward
    /// within the band).
    pub fn factor(&mut self) -> Result<(), String> {
        assert!(!self.factored);
        let n = self.n;
        let b = self.band;
        for col in 0..n {
            // Pivot search among rows col..=col+b.
            let last = (col + b).min(n - 1);
            let mut piv = col;
            let mut best = self.get(col, col).abs();
            for r in col + 1..=last {
                let v = self.get(r, col).abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best == 0.0 {
                return Err(format!("banded LU: zero pivot at column {col}"));
            }
            self.pivots[col] = piv;
            if piv != col {
                // Swap the overlapping storage of rows col and piv.
                let hi = (col + 2 * b).min(n - 1);
                for j in col..=hi {
                    let a = self.idx(col, j);
                    let c = self.idx(piv, j);
                    self.data.swap(a, c);
                }
            }
            let d = self.data[self.idx(col, col)];
            for r in col + 1..=last {
                let m = self.data[self.idx(r, col)] / d;
                let p = self.idx(r, col);
                self.data[p] = m;
                if m != 0.0 {
                    let hi = (col + 2 * b).min(n - 1);
                    for j in col + 1..=hi {
                        let t = self.data[self.idx(col, j)] * m;
                        let k = self.idx(r, j);
                        self.data[k] -= t;
                    }
                }
            }
        }
        self.factored = true;
        Ok(())
    }

    /// Solve `A x = rhs` in place after [`Self::factor`].
    pub fn solve(&self, rhs: &mut [f64]) {
        assert!(self.factored);
        let n = self.n;
        let b = self.band;
        for col in 0..n {
            let piv = self.pivots[col];
            if piv != col {
                rhs.swap(col, piv);
            }
            let last = (col + b).min(n - 1);
            for r in col + 1..=last {
                rhs[r] -= self.data[self.idx(r, col)] * rhs[col];
            }
        }
        for i in (0..n).rev() {
            let hi = (i + 2 * b).min(n - 1);
            let mut s = rhs[i];
            for j in i + 1..=hi {
                s -= self.data[self.idx(i, j)] * rhs[j];
            }
            rhs[i] = s / self.data[self.idx(i, i)];
        }
    }
}

/// Symmetric banded matrix stored as the lower band; supports Gram-style
/// assembly `K += w·rᵀr` from sparse rows, Cholesky, solves, matvec.
#[derive(Clone, Debug)]
pub struct SymBand {
    pub n: usize,
    pub band: usize,
    /// `data[i][d]` = entry `(i, i - band + d)` for `d = 0..=band`.
    data: Vec<f64>,
    factored: bool,
}

impl SymBand {
    pub fn zeros(n: usize, band: usize) -> Self {
        Self {
            n,
            band,
            data: vec![0.0; n * (band + 1)],
            factored: false,
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        // requires j <= i and i - j <= band
        i * (self.band + 1) + (j + self.band - i)
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        assert!(r - c <= self.band, "entry ({i},{j}) outside bandwidth {}", self.band);
        let k = self.idx(r, c);
        self.data[k] += v;
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        if r - c > self.band {
            0.0
        } else {
            self.data[self.idx(r, c)]
        }
    }

    /// Accumulate the outer product `w · rowᵀ row` for a sparse row.
    /// Indices must be sorted ascending.
    pub fn add_gram_row(&mut self, row: &[(usize, f64)], w: f64) {
        for (p, &(i, vi)) in row.iter().enumerate() {
            for &(j, vj) in &row[..=p] {
                self.add(i, j, w * vi * vj);
            }
        }
    }

    pub fn max_diag(&self) -> f64 {
        (0..self.n)
            .map(|i| self.data[self.idx(i, i)].abs())
            .fold(0.0f64, f64::max)
    }

    pub fn add_diag(&mut self, shift: f64) {
        for i in 0..self.n {
            let k = self.idx(i, i);
            self.data[k] += shift;
        }
    }

    /// Add `c` times another symmetric band (bandwidth must fit).
    pub fn add_scaled(&mut self, other: &SymBand, c: f64) {
        assert!(other.band <= self.band && other.n == self.n);
        for i in 0..self.n {
            let lo = i.saturating_sub(other.band);
            for j in lo..=i {
                let v = other.get(i, j);
                if v != 0.0 {
                    self.add(i, j, c * v);
                }
            }
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert!(!self.factored, "matvec on factored matrix");
        y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.n {
            let lo = i.saturating_sub(self.band);
            for j in lo..=i {
                let v = self.data[self.idx(i, j)];
                if v != 0.0 {
                    y[i] += v * x[j];
                    if i != j {
                        y[j] += v * x[i];
                    }
                }
            }
        }
    }

    /// In-place Cholesky `K = L Lᵀ`; fails if not positive definite
    /// (including numerically singular pivots relative to the diagonal
    /// scale, so exactly-singular Gram matrices are reported rather
    /// than factored into garbage).
    pub fn cholesky(&mut self) -> Result<(), String> {
        assert!(!self.factored);
        let n = self.n;
        let b = self.band;
        let scale = (0..n)
            .map(|i| self.data[self.idx(i, i)].abs())
            .fold(0.0f64, f64::max)
            .max(1e-300);
        for i in 0..n {
            let lo = i.saturating_sub(b);
            for j in lo..=i {
                let mut s = self.data[self.idx(i, j)];
                let kmin = lo.max(j.saturating_sub(b));
                for k in kmin..j {
                    s -= self.data[self.idx(i, k)] * self.data[self.idx(j, k)];
                }
                if i == j {
                    if s <= 1e-14 * scale {
                        return Err(format!("cholesky: tiny pivot {s:.3e} at row {i}"));
                    }
                    let p = self.idx(i, i);
                    self.data[p] = s.sqrt();
                } else {
                    let d = self.data[self.idx(j, j)];
                    let p = self.idx(i, j);
                    self.data[p] = s / d;
                }
            }
        }
        self.factored = true;
        Ok(())
    }

    /// Solve `L Lᵀ x = rhs` in place after [`Self::cholesky`].
    pub fn solve(&self, rhs: &mut [f64]) {
        assert!(self.factored);
        let n = self.n;
        let b = self.band;
        for i in 0..n {
            let lo = i.saturating_sub(b);
            let mut s = rhs[i];
            for k in lo..i {
                s -= self.data[self.idx(i, k)] * rhs[k];
            }
            rhs[i] = s / self.data[self.idx(i, i)];
        }
        for i in (0..n).rev() {
            let hi = (i + b).min(n - 1);
            let mut s = rhs[i];
            for j in i + 1..=hi {
                // L(j, i) stored at row j.
                s -= self.data[self.idx(j, i)] * rhs[j];
            }
            rhs[i] = s / self.data[self.idx(i, i)];
        }
    }
}
