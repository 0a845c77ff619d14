//! Estimators: maximum likelihood for the constant and piecewise-linear
//! backgrounds, and the empirical-Bayes spline (BCB) model.

mod hyper;
mod map;
mod mle;
mod optim;
mod prior;
mod result;

use std::sync::Arc;

pub use hyper::{
    initial_kernel, optimize_hyperparams, optimize_hyperparams_with, HyperFit, HyperOptions, HyperParams, DEFAULT_W,
};
pub use map::{laplace_evidence, log_marginal_likelihood, map_estimate, Evidence, MapEstimate, MapOptions};
pub use mle::{fit_mle, fit_mle_with, MleOptions, ModelSpec};
pub use optim::{nelder_mead, NelderMeadOptions, NelderMeadResult};
pub use prior::{log_prior, DerivativeGram, SmoothnessPrior};
pub use result::{
    background_curve, parameter_count, score, CurvePoint, Diagnostics, FitResult, FittedBackground, ModelKind,
};

use crate::background::SplineBackground;
use crate::basis::NaturalTimeBasis;
use crate::error::Result;
use crate::events::EventSequence;

#[derive(Debug, Clone)]
pub struct BcbOptions {
    /// Events per basis function.
    pub k: usize,
    /// Starting hyperparameters; [`HyperParams::initial`] when `None`.
    pub init: Option<HyperParams>,
    pub search: HyperOptions,
}

impl Default for BcbOptions {
    fn default() -> Self {
        Self {
            k: 50,
            init: None,
            search: HyperOptions::default(),
        }
    }
}

/// Fits the spline-background model with an `order`-exponential kernel.
pub fn fit_bcb(seq: &EventSequence, order: usize, k: usize) -> Result<FitResult> {
    fit_bcb_with(
        seq,
        order,
        &BcbOptions {
            k,
            ..BcbOptions::default()
        },
    )
}

pub fn fit_bcb_with(seq: &EventSequence, order: usize, opts: &BcbOptions) -> Result<FitResult> {
    let basis = Arc::new(NaturalTimeBasis::build(seq.len(), opts.k)?);
    let init = match &opts.init {
        Some(h) => h.clone(),
        None => HyperParams::initial(seq, order)?,
    };
    let fit = optimize_hyperparams_with(seq, &basis, &init, &opts.search)?;
    let map = &fit.evidence.map;
    let bg = SplineBackground::new(map.coeffs.clone(), basis.clone(), seq)?;
    let h = &fit.hyper;
    let mut result = FitResult {
        model: ModelKind::Bcb,
        label: "BCB".into(),
        window: seq.window(),
        n_events: seq.len(),
        kernel: h.kernel.clone(),
        background: FittedBackground::Spline {
            coeffs: map.coeffs.clone(),
            m: basis.m(),
            k: Some(opts.k),
            v: h.v,
            w: h.w,
            mu_c: h.mu_c,
        },
        log_likelihood: map.log_likelihood,
        log_marginal_likelihood: Some(fit.evidence.log_marginal_likelihood),
        num_parameters: parameter_count(ModelKind::Bcb, basis.m(), order),
        score: 0.0,
        branching_ratio: h.kernel.branching_ratio(),
        background_curve: background_curve(&bg, seq),
        diagnostics: Diagnostics {
            converged: fit.converged,
            evaluations: fit.evaluations,
            restarts: fit.restarts,
            grad_norm: Some(map.grad_norm),
            warning: (!fit.converged).then(|| "hyperparameter search hit its evaluation budget".into()),
            seed: None,
        },
    };
    result.score = score(&result);
    Ok(result)
}
