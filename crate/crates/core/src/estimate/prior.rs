//! Gaussian smoothness prior on spline coefficients.
//!
//! ```text
//! log P(a) = −(V/2) Σ_i (Σ_j a_j F^j'(t'_i))² − (W/2)(mean(a) − log μ_c)² − log C
//! ```
//!
//! The derivative penalty `V·GᵀG` is singular along the constant vector, and
//! the `W` term fixes that direction, so the precision
//! `Q = V·GᵀG + (W/m²)·𝟙𝟙ᵀ` is positive definite and `C` is finite.
//! Because `GᵀG 𝟙 = 0`, the constant vector is an eigenvector of `Q` with
//! eigenvalue `W/m`, and
//!
//! ```text
//! log det Q = (m − 1) log V + log det⁺(GᵀG) + log(W/m)
//! ```
//!
//! where `det⁺` is the product of the nonzero eigenvalues. Only the last two
//! hyperparameter-dependent terms change during the outer search, so the
//! pseudo-determinant is computed once per basis.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::banded::BandedSym;
use crate::basis::NaturalTimeBasis;
use crate::error::{Error, Result};

/// `GᵀG` for a basis, with its pseudo-log-determinant.
#[derive(Debug, Clone)]
pub struct DerivativeGram {
    gram: BandedSym,
    log_pdet: f64,
}

impl DerivativeGram {
    /// Fails if `GᵀG` has rank below `m − 1`, which happens when there are
    /// too few events to pin down every basis slope.
    pub fn new(basis: &NaturalTimeBasis) -> Result<Self> {
        let m = basis.m();
        let mut gram = BandedSym::zeros(m, 3);
        for row in basis.deriv_rows() {
            gram.add_outer4(row.first, &row.weights, 1.0);
        }
        // For symmetric A with A𝟙 = 0 every cofactor is equal, so
        // det⁺(A) = m · det(A without its first row and column).
        let reduced = gram.drop_first().cholesky().ok_or_else(|| {
            Error::NotPositiveDefinite(format!(
                "smoothness prior: {} events cannot support m = {m} bases",
                basis.n()
            ))
        })?;
        let log_pdet = (m as f64).ln() + reduced.log_det();
        Ok(Self { gram, log_pdet })
    }

    pub fn matrix(&self) -> &BandedSym {
        &self.gram
    }

    pub fn log_pseudo_det(&self) -> f64 {
        self.log_pdet
    }
}

/// Proper Gaussian prior `N(log μ_c · 𝟙, Q⁻¹)`.
#[derive(Debug, Clone)]
pub struct SmoothnessPrior {
    basis: Arc<NaturalTimeBasis>,
    gram: Arc<DerivativeGram>,
    v: f64,
    w: f64,
    log_mu_c: f64,
    log_normalizer: f64,
}

impl SmoothnessPrior {
    pub fn new(basis: Arc<NaturalTimeBasis>, v: f64, w: f64, mu_c: f64) -> Result<Self> {
        let gram = Arc::new(DerivativeGram::new(&basis)?);
        Self::with_gram(basis, gram, v, w, mu_c)
    }

    /// Reuses a precomputed Gram matrix for the same basis.
    pub fn with_gram(
        basis: Arc<NaturalTimeBasis>,
        gram: Arc<DerivativeGram>,
        v: f64,
        w: f64,
        mu_c: f64,
    ) -> Result<Self> {
        for (name, x) in [("V", v), ("W", w), ("mu_c", mu_c)] {
            if !(x.is_finite() && x > 0.0) {
                return Err(Error::InvalidInput(format!("{name} must be finite and > 0, got {x}")));
            }
        }
        let m = basis.m() as f64;
        let log_det_q = (m - 1.0) * v.ln() + gram.log_pseudo_det() + (w / m).ln();
        let log_normalizer = 0.5 * m * (2.0 * PI).ln() - 0.5 * log_det_q;
        Ok(Self {
            basis,
            gram,
            v,
            w,
            log_mu_c: mu_c.ln(),
            log_normalizer,
        })
    }

    pub fn m(&self) -> usize {
        self.basis.m()
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn mu_c(&self) -> f64 {
        self.log_mu_c.exp()
    }

    /// Prior mean `log μ_c · 𝟙`.
    pub fn mean(&self) -> Vec<f64> {
        vec![self.log_mu_c; self.m()]
    }

    /// `(m/2) log 2π − ½ log det Q`.
    pub fn log_normalizer(&self) -> f64 {
        self.log_normalizer
    }

    /// `log det Q`.
    pub fn log_det_precision(&self) -> f64 {
        self.m() as f64 * (2.0 * PI).ln() - 2.0 * self.log_normalizer
    }

    /// Banded part `V·GᵀG` of the precision.
    pub fn banded_precision(&self) -> BandedSym {
        let mut p = self.gram.matrix().clone();
        p.scale(self.v);
        p
    }

    /// Weight `c = W/m²` of the rank-one part `c·𝟙𝟙ᵀ`.
    pub fn rank_one_weight(&self) -> f64 {
        let m = self.m() as f64;
        self.w / (m * m)
    }

    /// Full precision `Q` as a dense matrix.
    pub fn precision_dense(&self) -> Vec<Vec<f64>> {
        let c = self.rank_one_weight();
        let mut q = self.banded_precision().to_dense();
        q.iter_mut().flatten().for_each(|x| *x += c);
        q
    }

    fn check_len(&self, coeffs: &[f64]) -> Result<()> {
        if coeffs.len() == self.m() {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "prior has m = {}, got {} coefficients",
                self.m(),
                coeffs.len()
            )))
        }
    }

    /// `−½(a − mean)ᵀQ(a − mean) − log_normalizer`.
    pub fn log_density(&self, coeffs: &[f64]) -> Result<f64> {
        self.check_len(coeffs)?;
        let d: Vec<f64> = coeffs.iter().map(|a| a - self.log_mu_c).collect();
        let roughness: f64 = self.basis.deriv_rows().iter().map(|r| r.dot(&d).powi(2)).sum();
        let offset = d.iter().sum::<f64>() / self.m() as f64;
        Ok(-0.5 * self.v * roughness - 0.5 * self.w * offset * offset - self.log_normalizer)
    }

    /// `−Q(a − mean)`.
    pub fn gradient(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        self.check_len(coeffs)?;
        let d: Vec<f64> = coeffs.iter().map(|a| a - self.log_mu_c).collect();
        let mut g = self.gram.matrix().mul_vec(&d);
        let shift = self.rank_one_weight() * d.iter().sum::<f64>();
        for x in &mut g {
            *x = -self.v * *x - shift;
        }
        Ok(g)
    }
}

/// Free function form of [`SmoothnessPrior::log_density`].
pub fn log_prior(coeffs: &[f64], prior: &SmoothnessPrior) -> Result<f64> {
    prior.log_density(coeffs)
}
