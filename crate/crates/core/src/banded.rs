//! Symmetric banded matrices and their Cholesky factors.
//!
//! Spline Hessians couple only coefficients whose bases overlap, so they have
//! half-bandwidth 3. Factorization and solves are `O(m · bw²)`. The smoothing
//! prior adds a dense rank-one term `c · 𝟙𝟙ᵀ`, handled here through the
//! Sherman–Morrison formula and the matrix determinant lemma.

use crate::error::{Error, Result};

/// Lower band of a symmetric `n × n` matrix with half-bandwidth `bw`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedSym {
    n: usize,
    bw: usize,
    // row i holds entries (i, i - bw ..= i); index (i, j) -> i * (bw + 1) + (bw + j - i)
    data: Vec<f64>,
}

impl BandedSym {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn index(&self, i: usize, j: usize) -> Option<usize> {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            None
        } else {
            Some(i * (self.bw + 1) + self.bw + j - i)
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.index(i, j).map_or(0.0, |k| self.data[k])
    }

    /// Adds `v` to entries `(i, j)` and `(j, i)`.
    ///
    /// Panics if `(i, j)` lies outside the band.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.index(i, j).expect("entry outside band");
        self.data[k] += v;
    }

    pub fn add_diagonal(&mut self, v: f64) {
        for i in 0..self.n {
            self.add(i, i, v);
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }

    /// `self += s · other`; both must share dimension and bandwidth.
    pub fn add_scaled(&mut self, other: &BandedSym, s: f64) {
        assert_eq!((self.n, self.bw), (other.n, other.bw));
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += s * y;
        }
    }

    /// Adds `w · r rᵀ` for a sparse vector `r` with four entries starting at `first`.
    #[inline]
    pub fn add_outer4(&mut self, first: usize, r: &[f64; 4], w: f64) {
        for a in 0..4 {
            let wa = w * r[a];
            for b in 0..=a {
                self.add(first + a, first + b, wa * r[b]);
            }
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            for j in lo..i {
                let v = self.get(i, j);
                y[i] += v * x[j];
                y[j] += v * x[i];
            }
            y[i] += self.get(i, i) * x[i];
        }
        y
    }

    pub fn max_abs_diagonal(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i).abs()).fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    /// Dense symmetric matrix stored with full bandwidth.
    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n, n.saturating_sub(1));
        for i in 0..n {
            for j in 0..=i {
                m.data[i * (m.bw + 1) + m.bw + j - i] = 0.5 * (rows[i][j] + rows[j][i]);
            }
        }
        m
    }

    /// Principal submatrix with the first row and column removed.
    pub fn drop_first(&self) -> Self {
        let n = self.n - 1;
        let mut m = Self::zeros(n, self.bw);
        for i in 0..n {
            for j in i.saturating_sub(self.bw)..=i {
                m.add(i, j, self.get(i + 1, j + 1));
            }
        }
        m
    }

    /// Cholesky factor `L Lᵀ`; `None` if the matrix is not positive definite.
    pub fn cholesky(&self) -> Option<BandedCholesky> {
        let (n, bw) = (self.n, self.bw);
        let mut l = self.data.clone();
        let at = |i: usize, j: usize| i * (bw + 1) + bw + j - i;
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let mut s = l[at(i, j)];
                let klo = lo.max(j.saturating_sub(bw));
                for k in klo..j {
                    s -= l[at(i, k)] * l[at(j, k)];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return None;
                    }
                    l[at(i, i)] = s.sqrt();
                } else {
                    l[at(i, j)] = s / l[at(j, j)];
                }
            }
        }
        Some(BandedCholesky { n, bw, l })
    }
}

/// Lower-triangular banded Cholesky factor.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandedCholesky {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.l[i * (self.bw + 1) + self.bw + j - i]
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(self.bw)..i {
                s -= self.at(i, k) * y[k];
            }
            y[i] = s / self.at(i, i);
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..(i + self.bw + 1).min(n) {
                s -= self.at(k, i) * y[k];
            }
            y[i] = s / self.at(i, i);
        }
        y
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.n).map(|i| self.at(i, i).ln()).sum::<f64>()
    }
}

/// Factorization of `B + c · 𝟙𝟙ᵀ` with `B` banded positive definite and `c ≥ 0`.
#[derive(Debug, Clone)]
pub struct RankOneUpdated {
    chol: BandedCholesky,
    c: f64,
    // B⁻¹ 𝟙
    b_inv_ones: Vec<f64>,
    denom: f64,
}

impl RankOneUpdated {
    pub fn new(b: &BandedSym, c: f64) -> Result<Self> {
        let chol = b
            .cholesky()
            .ok_or_else(|| Error::NotPositiveDefinite("banded part of the Hessian".into()))?;
        let b_inv_ones = chol.solve(&vec![1.0; b.dim()]);
        let denom = 1.0 + c * b_inv_ones.iter().sum::<f64>();
        if !(denom > 0.0) {
            return Err(Error::NotPositiveDefinite("rank-one update".into()));
        }
        Ok(Self {
            chol,
            c,
            b_inv_ones,
            denom,
        })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = self.chol.solve(rhs);
        let proj = self.c * x.iter().sum::<f64>() / self.denom;
        for (xi, u) in x.iter_mut().zip(&self.b_inv_ones) {
            *xi -= proj * u;
        }
        x
    }

    /// `log det(B + c 𝟙𝟙ᵀ) = log det B + log(1 + c 𝟙ᵀ B⁻¹ 𝟙)`.
    pub fn log_det(&self) -> f64 {
        self.chol.log_det() + self.denom.ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;

    fn random_spd(n: usize, bw: usize, seed: &[f64]) -> BandedSym {
        let mut m = BandedSym::zeros(n, bw);
        let mut s = 0;
        for i in 0..n {
            for j in i.saturating_sub(bw)..=i {
                m.add(i, j, seed[s % seed.len()] - 0.5);
                s += 1;
            }
        }
        m.add_diagonal(2.0 * (bw as f64 + 1.0));
        m
    }

    fn to_na(m: &BandedSym) -> DMatrix<f64> {
        let d = m.to_dense();
        DMatrix::from_fn(m.dim(), m.dim(), |i, j| d[i][j])
    }

    proptest! {
        #[test]
        fn solve_and_log_det_match_dense(
            n in 1usize..30,
            bw in 0usize..5,
            seed in proptest::collection::vec(0.0f64..1.0, 1..50),
            rhs in proptest::collection::vec(-5.0f64..5.0, 30),
            c in 0.0f64..100.0,
        ) {
            let m = random_spd(n, bw, &seed);
            let dense = to_na(&m);
            let b = DVector::from_column_slice(&rhs[..n]);
            let chol = m.cholesky().unwrap();
            let x = chol.solve(&rhs[..n]);
            let want = dense.clone().cholesky().unwrap().solve(&b);
            for i in 0..n {
                prop_assert!((x[i] - want[i]).abs() <= 1e-9 * (1.0 + want[i].abs()));
            }
            let want_ld = dense.determinant().ln();
            prop_assert!((chol.log_det() - want_ld).abs() <= 1e-9 * (1.0 + want_ld.abs()));

            let full = &dense + DMatrix::from_element(n, n, c);
            let r1 = RankOneUpdated::new(&m, c).unwrap();
            let x1 = r1.solve(&rhs[..n]);
            let want1 = full.clone().cholesky().unwrap().solve(&b);
            for i in 0..n {
                prop_assert!((x1[i] - want1[i]).abs() <= 1e-8 * (1.0 + want1[i].abs()));
            }
            let ld1 = full.determinant().ln();
            prop_assert!((r1.log_det() - ld1).abs() <= 1e-8 * (1.0 + ld1.abs()));
        }
    }

    #[test]
    fn indefinite_matrix_has_no_factor() {
        let mut m = BandedSym::zeros(3, 1);
        m.add(0, 0, 1.0);
        m.add(1, 1, -1.0);
        m.add(2, 2, 1.0);
        assert!(m.cholesky().is_none());
        assert!(RankOneUpdated::new(&m, 1.0).is_err());
    }

    #[test]
    fn mul_vec_matches_dense() {
        let m = random_spd(6, 2, &[0.1, 0.7, 0.3, 0.9, 0.4]);
        let x = [1.0, -2.0, 0.5, 3.0, 0.0, 1.5];
        let y = m.mul_vec(&x);
        let d = m.to_dense();
        for i in 0..6 {
            let want: f64 = (0..6).map(|j| d[i][j] * x[j]).sum();
            assert!((y[i] - want).abs() < 1e-12);
        }
        let round = BandedSym::from_dense(&d);
        assert_eq!(round.to_dense(), d);
        assert_eq!(m.drop_first().get(0, 0), m.get(1, 1));
    }
}
