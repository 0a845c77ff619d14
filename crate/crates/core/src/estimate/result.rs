//! Fitted-model record shared by all estimators, with its JSON and CSV forms.
//!
//! JSON field names are stable:
//! `model`, `label`, `window`, `n_events`, `kernel {alphas, betas}`,
//! `background` (tagged by `family`), `log_likelihood`,
//! `log_marginal_likelihood`, `num_parameters`, `score`, `branching_ratio`,
//! `background_curve [{t, mu}]`, `diagnostics`.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::background::{Background, BackgroundModel, ConstantBackground, PiecewiseLinearBackground, SplineBackground};
use crate::basis::NaturalTimeBasis;
use crate::error::{Error, Result};
use crate::events::{EventSequence, ObservationWindow};
use crate::kernel::ExponentialKernel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Const,
    PiecewiseLinear,
    Bcb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FittedBackground {
    Constant {
        mu_c: f64,
    },
    PiecewiseLinear {
        knot_times: Vec<f64>,
        knot_values: Vec<f64>,
    },
    Spline {
        coeffs: Vec<f64>,
        m: usize,
        /// Events per basis used to size the basis, when it was sized that way.
        k: Option<usize>,
        v: f64,
        w: f64,
        mu_c: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub t: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub converged: bool,
    pub evaluations: usize,
    pub restarts: usize,
    /// Max-norm of the inner gradient at the reported optimum.
    pub grad_norm: Option<f64>,
    pub warning: Option<String>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: ModelKind,
    pub label: String,
    pub window: ObservationWindow,
    pub n_events: usize,
    pub kernel: ExponentialKernel,
    pub background: FittedBackground,
    pub log_likelihood: f64,
    pub log_marginal_likelihood: Option<f64>,
    pub num_parameters: usize,
    pub score: f64,
    pub branching_ratio: f64,
    pub background_curve: Vec<CurvePoint>,
    pub diagnostics: Diagnostics,
}

impl FitResult {
    /// Rebuilds the fitted background on the sequence it was fitted to.
    pub fn background_model(&self, seq: &EventSequence) -> Result<BackgroundModel> {
        if seq.window() != self.window || seq.len() != self.n_events {
            return Err(Error::InvalidInput(format!(
                "fit was made on {} events in [{}, {}], got {} events in [{}, {}]",
                self.n_events,
                self.window.start(),
                self.window.end(),
                seq.len(),
                seq.window().start(),
                seq.window().end()
            )));
        }
        Ok(match &self.background {
            FittedBackground::Constant { mu_c } => {
                BackgroundModel::Constant(ConstantBackground::new(*mu_c, self.window)?)
            }
            FittedBackground::PiecewiseLinear {
                knot_times,
                knot_values,
            } => BackgroundModel::PiecewiseLinear(PiecewiseLinearBackground::new(
                knot_times.clone(),
                knot_values.clone(),
            )?),
            FittedBackground::Spline { coeffs, m, .. } => {
                let basis = Arc::new(NaturalTimeBasis::with_count(seq.len(), *m)?);
                BackgroundModel::Spline(SplineBackground::new(coeffs.clone(), basis, seq)?)
            }
        })
    }

    /// Kernel re-validated, for results read back from JSON.
    pub fn checked_kernel(&self) -> Result<ExponentialKernel> {
        ExponentialKernel::new(self.kernel.alphas().to_vec(), self.kernel.betas().to_vec())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let fit: Self = serde_json::from_str(s)?;
        fit.checked_kernel()?;
        Ok(fit)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut s = self.to_json()?;
        s.push('\n');
        std::fs::write(path, s)?;
        Ok(())
    }

    /// `t,mu` rows of the background curve.
    pub fn write_curve_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "mu"])?;
        for p in &self.background_curve {
            w.write_record([p.t.to_string(), p.mu.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `log L − p` for likelihood fits, `log ML − p_h` for the Bayesian model;
/// the negative of half the AIC or ABIC.
pub fn score(fit: &FitResult) -> f64 {
    let fit_value = match fit.model {
        ModelKind::Bcb => fit.log_marginal_likelihood.unwrap_or(f64::NEG_INFINITY),
        _ => fit.log_likelihood,
    };
    fit_value - fit.num_parameters as f64
}

/// Parameter (or hyperparameter) count charged by [`score`].
pub fn parameter_count(model: ModelKind, background_params: usize, order: usize) -> usize {
    match model {
        ModelKind::Const => 1 + 2 * order,
        ModelKind::PiecewiseLinear => background_params + 2 * order,
        ModelKind::Bcb => 2 * order + 2,
    }
}

/// Background rate at every segment start `t_0 = S, t_1, …, t_n` and at `T`.
pub fn background_curve<B: Background + ?Sized>(bg: &B, seq: &EventSequence) -> Vec<CurvePoint> {
    (0..=seq.len() + 1)
        .map(|i| {
            let t = seq.boundary(i);
            CurvePoint { t, mu: bg.rate(t) }
        })
        .collect()
}
