//! Empirical-Bayes search over `θ_h = (α, β, V, μ_c)` for the spline model.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::basis::NaturalTimeBasis;
use crate::error::{Error, Result};
use crate::estimate::map::{Evidence, MapOptions, Posterior};
use crate::estimate::optim::{nelder_mead, NelderMeadOptions};
use crate::estimate::prior::DerivativeGram;
use crate::events::EventSequence;
use crate::kernel::ExponentialKernel;

/// Weight of the baseline-level term of the prior, held fixed.
pub const DEFAULT_W: f64 = 1e4;

// log-parameters beyond this magnitude are treated as infeasible
const LOG_BOUND: f64 = 40.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub kernel: ExponentialKernel,
    /// Smoothness weight `V`.
    pub v: f64,
    /// Baseline weight `W`.
    pub w: f64,
    /// Baseline rate `μ_c` per second.
    pub mu_c: f64,
}

impl HyperParams {
    pub fn new(kernel: ExponentialKernel, v: f64, w: f64, mu_c: f64) -> Result<Self> {
        for (name, x) in [("V", v), ("W", w), ("mu_c", mu_c)] {
            if !(x.is_finite() && x > 0.0) {
                return Err(Error::InvalidInput(format!("{name} must be finite and > 0, got {x}")));
            }
        }
        Ok(Self { kernel, v, w, mu_c })
    }

    /// Scale-aware starting point: `μ_c = n/L`, `α_j = 0.5/M`, `β_j` spread
    /// log-uniformly over `[0.1, 10]` times the mean event rate, `V = 1`.
    pub fn initial(seq: &EventSequence, order: usize) -> Result<Self> {
        Self::new(initial_kernel(seq, order)?, 1.0, DEFAULT_W, initial_rate(seq))
    }

    fn to_coords(&self) -> Vec<f64> {
        let mut x: Vec<f64> = self.kernel.alphas().iter().map(|a| a.max(1e-12).ln()).collect();
        x.extend(self.kernel.betas().iter().map(|b| b.ln()));
        x.push(self.v.ln());
        x.push(self.mu_c.ln());
        x
    }

    fn from_coords(x: &[f64], w: f64) -> Option<Self> {
        if x.iter().any(|v| !(v.abs() <= LOG_BOUND)) {
            return None;
        }
        let m = (x.len() - 2) / 2;
        let kernel = ExponentialKernel::new(
            x[..m].iter().map(|v| v.exp()).collect(),
            x[m..2 * m].iter().map(|v| v.exp()).collect(),
        )
        .ok()?;
        Self::new(kernel, x[2 * m].exp(), w, x[2 * m + 1].exp()).ok()
    }
}

fn initial_rate(seq: &EventSequence) -> f64 {
    (seq.len().max(1) as f64) / seq.window().length()
}

/// Starting kernel shared by every estimator.
pub fn initial_kernel(seq: &EventSequence, order: usize) -> Result<ExponentialKernel> {
    if order == 0 {
        return Err(Error::Config("kernel order M must be >= 1".into()));
    }
    let r = initial_rate(seq);
    let betas = if order == 1 {
        vec![r]
    } else {
        (0..order)
            .map(|j| r * 10f64.powf(-1.0 + 2.0 * j as f64 / (order - 1) as f64))
            .collect()
    };
    ExponentialKernel::new(vec![0.5 / order as f64; order], betas)
}

#[derive(Debug, Clone)]
pub struct HyperOptions {
    pub max_evals: usize,
    pub max_restarts: usize,
    pub map: MapOptions,
}

impl Default for HyperOptions {
    fn default() -> Self {
        Self {
            max_evals: 1500,
            max_restarts: 2,
            map: MapOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct HyperFit {
    pub hyper: HyperParams,
    pub evidence: Evidence,
    pub evaluations: usize,
    pub restarts: usize,
    /// False when the evaluation budget ran out first; the best point found is still returned.
    pub converged: bool,
    /// Best log marginal likelihood after each outer iteration.
    pub trace: Vec<f64>,
}

/// Maximizes the Laplace evidence over `(log α, log β, log V, log μ_c)` with
/// `W` fixed. Each inner MAP solve starts from the best mode found so far.
pub fn optimize_hyperparams(
    seq: &EventSequence,
    basis: &Arc<NaturalTimeBasis>,
    init: &HyperParams,
) -> Result<HyperFit> {
    optimize_hyperparams_with(seq, basis, init, &HyperOptions::default())
}

pub fn optimize_hyperparams_with(
    seq: &EventSequence,
    basis: &Arc<NaturalTimeBasis>,
    init: &HyperParams,
    opts: &HyperOptions,
) -> Result<HyperFit> {
    let gram = Arc::new(DerivativeGram::new(basis)?);
    let w = init.w;
    let order = init.kernel.order();
    let evaluate = |hyper: &HyperParams, warm: Option<&[f64]>| -> Result<Evidence> {
        let post = Posterior::new(seq, hyper, basis.clone(), gram.clone())?;
        let map = post.maximize(warm, &opts.map)?;
        post.evidence(map)
    };

    let mut best: Option<Evidence> = None;
    let start = evaluate(init, None);
    let mut first_error = None;
    match start {
        Ok(e) => best = Some(e),
        Err(e) => first_error = Some(e),
    }

    let mut steps = vec![0.5; 2 * order];
    steps.push(2.0);
    steps.push(0.3);
    let mut nm = NelderMeadOptions::new(steps);
    nm.max_evals = opts.max_evals;
    nm.max_restarts = opts.max_restarts;
    nm.f_tol = 1e-6;
    nm.x_tol = 1e-4;

    let mut best_f = best.as_ref().map_or(f64::INFINITY, |e| -e.log_marginal_likelihood);
    let mut best_x = init.to_coords();
    let result = nelder_mead(
        |x| {
            let Some(hyper) = HyperParams::from_coords(x, w) else {
                return f64::INFINITY;
            };
            if x == best_x.as_slice() && best.is_some() {
                return best_f;
            }
            let warm = best.as_ref().map(|e| e.map.coeffs.clone());
            match evaluate(&hyper, warm.as_deref()) {
                Ok(e) if e.log_marginal_likelihood.is_finite() => {
                    let f = -e.log_marginal_likelihood;
                    if f < best_f {
                        best_f = f;
                        best_x = x.to_vec();
                        best = Some(e);
                    }
                    f
                }
                _ => f64::INFINITY,
            }
        },
        &init.to_coords(),
        &nm,
    );

    let evidence = match best {
        Some(e) => e,
        None => {
            return Err(first_error.unwrap_or(Error::NotPositiveDefinite(
                "no hyperparameter setting gave a valid Laplace evidence".into(),
            )))
        }
    };
    let hyper = HyperParams::from_coords(&best_x, w).expect("feasible best point");
    Ok(HyperFit {
        hyper,
        evidence,
        evaluations: result.evaluations,
        restarts: result.restarts,
        converged: result.converged,
        trace: result.trace.iter().map(|f| -f).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::ObservationWindow;

    #[test]
    fn initial_values_scale_with_the_event_rate() {
        let w = ObservationWindow::new(0.0, 100.0).unwrap();
        let seq = EventSequence::new((0..200).map(|i| i as f64 * 0.5).collect(), w).unwrap();
        let h = HyperParams::initial(&seq, 3).unwrap();
        assert_eq!(h.mu_c, 2.0);
        assert_eq!(h.v, 1.0);
        assert_eq!(h.w, DEFAULT_W);
        assert_eq!(h.kernel.alphas(), &[0.5 / 3.0; 3]);
        let b = h.kernel.betas();
        assert!((b[0] - 0.2).abs() < 1e-12 && (b[1] - 2.0).abs() < 1e-12 && (b[2] - 20.0).abs() < 1e-12);
        assert_eq!(initial_kernel(&seq, 1).unwrap().betas(), &[2.0]);
        assert!(initial_kernel(&seq, 0).is_err());
    }

    #[test]
    fn coordinates_round_trip() {
        let k = ExponentialKernel::new(vec![0.2, 0.1], vec![3.0, 0.5]).unwrap();
        let h = HyperParams::new(k, 12.0, DEFAULT_W, 0.7).unwrap();
        let back = HyperParams::from_coords(&h.to_coords(), DEFAULT_W).unwrap();
        assert!((back.v - 12.0).abs() < 1e-12 && (back.mu_c - 0.7).abs() < 1e-12);
        for (a, b) in back.kernel.alphas().iter().zip(h.kernel.alphas()) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(HyperParams::from_coords(&[0.0, 0.0, 50.0, 0.0], DEFAULT_W).is_none());
    }
}
