//! Maximum likelihood for constant and piecewise-linear backgrounds.
//!
//! Both backgrounds are linear in their parameters `v` (the constant rate or
//! the knot values), so for a fixed kernel `log L(v)` is concave and is
//! maximized exactly by Newton's method. The kernel parameters are then
//! searched in log space on this profile likelihood.

use serde::{Deserialize, Serialize};

use crate::background::{BackgroundModel, ConstantBackground, PiecewiseLinearBackground};
use crate::banded::BandedSym;
use crate::error::{Error, Result};
use crate::estimate::hyper::initial_kernel;
use crate::estimate::optim::{nelder_mead, NelderMeadOptions};
use crate::estimate::result::{
    background_curve, parameter_count, score, Diagnostics, FitResult, FittedBackground, ModelKind,
};
use crate::events::EventSequence;
use crate::kernel::ExponentialKernel;
use crate::likelihood::LikelihoodWorkspace;

const LOG_BOUND: f64 = 40.0;

/// Background family for [`fit_mle`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelSpec {
    Const,
    /// Knot times spanning the window exactly.
    PiecewiseLinear {
        knots: Vec<f64>,
    },
}

#[derive(Debug, Clone)]
pub struct MleOptions {
    pub max_evals: usize,
    pub max_restarts: usize,
    /// Starting kernel; the scale-aware default when `None`.
    pub init_kernel: Option<ExponentialKernel>,
    /// Starting background parameters; `n/L` everywhere when `None`.
    pub init_background: Option<Vec<f64>>,
    pub label: Option<String>,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            max_evals: 2000,
            max_restarts: 2,
            init_kernel: None,
            init_background: None,
            label: None,
        }
    }
}

/// Background linear in `v`: `μ(t_i) = w0·v[k] + w1·v[k+1]`, `∫μ = c·v`.
struct LinearDesign {
    rows: Vec<(usize, f64, f64)>,
    integrals: Vec<f64>,
    floor: f64,
}

struct Profile {
    values: Vec<f64>,
    log_lik: f64,
    grad_norm: f64,
    converged: bool,
}

impl LinearDesign {
    fn new(seq: &EventSequence, spec: &ModelSpec) -> Result<Self> {
        let w = seq.window();
        let floor = 1e-8 * seq.len().max(1) as f64 / w.length();
        match spec {
            ModelSpec::Const => Ok(Self {
                rows: seq.times().iter().map(|_| (0, 1.0, 0.0)).collect(),
                integrals: vec![w.length()],
                floor,
            }),
            ModelSpec::PiecewiseLinear { knots } => {
                if knots.first() != Some(&w.start()) || knots.last() != Some(&w.end()) {
                    return Err(Error::InvalidInput(
                        "piecewise-linear knots must start and end at the window bounds".into(),
                    ));
                }
                let shape = PiecewiseLinearBackground::new(knots.clone(), vec![1.0; knots.len()])?;
                let rows = seq.times().iter().map(|&t| shape.interpolation_weights(t)).collect();
                let integrals = (0..knots.len())
                    .map(|k| {
                        let left = if k > 0 { knots[k] - knots[k - 1] } else { 0.0 };
                        let right = if k + 1 < knots.len() {
                            knots[k + 1] - knots[k]
                        } else {
                            0.0
                        };
                        0.5 * (left + right)
                    })
                    .collect();
                Ok(Self { rows, integrals, floor })
            }
        }
    }

    fn dim(&self) -> usize {
        self.integrals.len()
    }

    fn rate(&self, row: (usize, f64, f64), v: &[f64]) -> f64 {
        let (k, w0, w1) = row;
        let mut r = w0 * v[k];
        if w1 != 0.0 {
            r += w1 * v[k + 1];
        }
        r
    }

    fn value(&self, ws: &LikelihoodWorkspace, v: &[f64]) -> f64 {
        let mut total = -ws.kernel_term();
        for (&row, &e) in self.rows.iter().zip(ws.excitation()) {
            total += (self.rate(row, v) + e).ln();
        }
        total - self.integrals.iter().zip(v).map(|(c, x)| c * x).sum::<f64>()
    }

    /// Newton ascent in `u = log v` with `v ≥ floor`.
    fn maximize(&self, ws: &LikelihoodWorkspace, start: &[f64]) -> Profile {
        let dim = self.dim();
        let bw = dim.saturating_sub(1).min(1);
        let log_floor = self.floor.ln();
        let mut u: Vec<f64> = start.iter().map(|x| x.max(self.floor).ln()).collect();
        let mut v: Vec<f64> = u.iter().map(|x| x.exp()).collect();
        let mut f = self.value(ws, &v);
        let n_scale = self.rows.len().max(1) as f64;
        let mut converged = false;
        let mut grad_norm = f64::INFINITY;
        for _ in 0..200 {
            // gradient and negative Hessian in v
            let mut g = self.integrals.iter().map(|c| -c).collect::<Vec<_>>();
            let mut neg_h = BandedSym::zeros(dim, bw);
            for (&row, &e) in self.rows.iter().zip(ws.excitation()) {
                let (k, w0, w1) = row;
                let inv = 1.0 / (self.rate(row, &v) + e);
                g[k] += w0 * inv;
                neg_h.add(k, k, w0 * w0 * inv * inv);
                if w1 != 0.0 {
                    g[k + 1] += w1 * inv;
                    neg_h.add(k + 1, k + 1, w1 * w1 * inv * inv);
                    neg_h.add(k + 1, k, w0 * w1 * inv * inv);
                }
            }
            // chain rule to u: ∇_u = v∘g, −∇²_u = D(−H)D − diag(v∘g)
            let gu: Vec<f64> = v.iter().zip(&g).map(|(a, b)| a * b).collect();
            let free: Vec<bool> = (0..dim).map(|k| !(u[k] <= log_floor && gu[k] < 0.0)).collect();
            grad_norm = gu
                .iter()
                .zip(&free)
                .filter(|(_, f)| **f)
                .fold(0.0f64, |a, (b, _)| a.max(b.abs()));
            if grad_norm <= 1e-9 * n_scale {
                converged = true;
                break;
            }
            let mut nu = BandedSym::zeros(dim, bw);
            for i in 0..dim {
                for j in i.saturating_sub(bw)..=i {
                    let val = if free[i] && free[j] {
                        v[i] * v[j] * neg_h.get(i, j)
                    } else {
                        0.0
                    };
                    nu.add(i, j, val);
                }
                if free[i] {
                    nu.add(i, i, -gu[i]);
                } else {
                    nu.add(i, i, 1.0);
                }
            }
            let rhs: Vec<f64> = gu.iter().zip(&free).map(|(g, f)| if *f { *g } else { 0.0 }).collect();
            let mut tau = 0.0;
            let scale = nu.max_abs_diagonal().max(1e-300);
            let delta = loop {
                let mut m = nu.clone();
                m.add_diagonal(tau);
                if let Some(ch) = m.cholesky() {
                    break Some(ch.solve(&rhs));
                }
                tau = if tau == 0.0 { 1e-10 * scale } else { tau * 10.0 };
                if tau > 1e20 * scale {
                    break None;
                }
            };
            let Some(mut delta) = delta else { break };
            let big = delta.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            if big > 5.0 {
                delta.iter_mut().for_each(|d| *d *= 5.0 / big);
            }
            let mut step = 1.0;
            let mut moved = false;
            while step > 1e-10 {
                let tu: Vec<f64> = u
                    .iter()
                    .zip(&delta)
                    .map(|(a, d)| (a + step * d).max(log_floor))
                    .collect();
                let tv: Vec<f64> = tu.iter().map(|x| x.exp()).collect();
                let tf = self.value(ws, &tv);
                if tf.is_finite() && tf >= f {
                    moved = tf > f || tu != u;
                    u = tu;
                    v = tv;
                    f = tf;
                    break;
                }
                step *= 0.5;
            }
            if !moved {
                converged = grad_norm <= 1e-6 * n_scale;
                break;
            }
        }
        Profile {
            values: v,
            log_lik: f,
            grad_norm,
            converged,
        }
    }
}

fn kernel_coords(k: &ExponentialKernel) -> Vec<f64> {
    k.alphas()
        .iter()
        .map(|a| a.max(1e-12).ln())
        .chain(k.betas().iter().map(|b| b.ln()))
        .collect()
}

fn kernel_from_coords(x: &[f64]) -> Option<ExponentialKernel> {
    if x.iter().any(|v| !(v.abs() <= LOG_BOUND)) {
        return None;
    }
    let m = x.len() / 2;
    ExponentialKernel::new(
        x[..m].iter().map(|v| v.exp()).collect(),
        x[m..].iter().map(|v| v.exp()).collect(),
    )
    .ok()
}

/// Maximum-likelihood fit with an `order`-exponential kernel.
///
/// A piecewise-linear fit first fits the constant model and starts from it,
/// so its likelihood is never below the nested constant fit.
pub fn fit_mle(seq: &EventSequence, spec: &ModelSpec, order: usize) -> Result<FitResult> {
    fit_mle_with(seq, spec, order, &MleOptions::default())
}

pub fn fit_mle_with(seq: &EventSequence, spec: &ModelSpec, order: usize, opts: &MleOptions) -> Result<FitResult> {
    let mut opts = opts.clone();
    if let (ModelSpec::PiecewiseLinear { knots }, None) = (spec, &opts.init_kernel) {
        let base = fit_mle_with(
            seq,
            &ModelSpec::Const,
            order,
            &MleOptions {
                label: None,
                init_background: None,
                ..opts.clone()
            },
        )?;
        opts.init_kernel = Some(base.kernel.clone());
        if let FittedBackground::Constant { mu_c } = base.background {
            opts.init_background.get_or_insert_with(|| vec![mu_c; knots.len()]);
        }
    }

    let design = LinearDesign::new(seq, spec)?;
    let kernel0 = match &opts.init_kernel {
        Some(k) if k.order() == order => k.clone(),
        Some(k) => {
            return Err(Error::Config(format!(
                "initial kernel has order {}, expected {order}",
                k.order()
            )))
        }
        None => initial_kernel(seq, order)?,
    };
    let v0 = match &opts.init_background {
        Some(v) if v.len() == design.dim() => v.clone(),
        Some(v) => {
            return Err(Error::Config(format!(
                "initial background has {} values, expected {}",
                v.len(),
                design.dim()
            )))
        }
        None => vec![(seq.len().max(1) as f64) / seq.window().length(); design.dim()],
    };

    let mut best: Option<(Vec<f64>, Profile)> = None;
    let profile = |x: &[f64], warm: &[f64]| -> Option<Profile> {
        let kernel = kernel_from_coords(x)?;
        let ws = LikelihoodWorkspace::new(seq, &kernel).ok()?;
        let p = design.maximize(&ws, warm);
        p.log_lik.is_finite().then_some(p)
    };
    let x0 = kernel_coords(&kernel0);
    if let Some(p) = profile(&x0, &v0) {
        best = Some((x0.clone(), p));
    }
    let mut nm = NelderMeadOptions::new(vec![0.5; 2 * order]);
    nm.max_evals = opts.max_evals;
    nm.max_restarts = opts.max_restarts;
    nm.f_tol = 1e-7;
    nm.x_tol = 1e-5;
    let result = nelder_mead(
        |x| {
            if let Some((bx, bp)) = &best {
                if bx.as_slice() == x {
                    return -bp.log_lik;
                }
            }
            let warm = best.as_ref().map_or(v0.clone(), |(_, p)| p.values.clone());
            match profile(x, &warm) {
                Some(p) => {
                    let f = -p.log_lik;
                    if best.as_ref().is_none_or(|(_, b)| p.log_lik > b.log_lik) {
                        best = Some((x.to_vec(), p));
                    }
                    f
                }
                None => f64::INFINITY,
            }
        },
        &x0,
        &nm,
    );
    let (bx, bp) = best.ok_or_else(|| Error::InvalidInput("likelihood is not finite for any kernel tried".into()))?;
    let kernel = kernel_from_coords(&bx).expect("feasible best point");

    let (model, background, bg_model) = match spec {
        ModelSpec::Const => {
            let mu_c = bp.values[0];
            (
                ModelKind::Const,
                FittedBackground::Constant { mu_c },
                BackgroundModel::Constant(ConstantBackground::new(mu_c, seq.window())?),
            )
        }
        ModelSpec::PiecewiseLinear { knots } => (
            ModelKind::PiecewiseLinear,
            FittedBackground::PiecewiseLinear {
                knot_times: knots.clone(),
                knot_values: bp.values.clone(),
            },
            BackgroundModel::PiecewiseLinear(PiecewiseLinearBackground::new(knots.clone(), bp.values.clone())?),
        ),
    };
    let label = opts.label.clone().unwrap_or_else(|| match spec {
        ModelSpec::Const => "CONST".to_string(),
        ModelSpec::PiecewiseLinear { knots } => format!("PL{}", knots.len()),
    });
    let converged = result.converged && bp.converged;
    let warning = (!converged).then(|| {
        if !result.converged {
            "kernel search hit its evaluation budget".to_string()
        } else {
            "background Newton iteration did not converge".to_string()
        }
    });
    let mut fit = FitResult {
        model,
        label,
        window: seq.window(),
        n_events: seq.len(),
        branching_ratio: kernel.branching_ratio(),
        kernel,
        background,
        log_likelihood: bp.log_lik,
        log_marginal_likelihood: None,
        num_parameters: parameter_count(model, design.dim(), order),
        score: 0.0,
        background_curve: background_curve(&bg_model, seq),
        diagnostics: Diagnostics {
            converged,
            evaluations: result.evaluations,
            restarts: result.restarts,
            grad_norm: Some(bp.grad_norm),
            warning,
            seed: None,
        },
    };
    fit.score = score(&fit);
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::ObservationWindow;
    use crate::likelihood::log_likelihood;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn poisson(rng: &mut ChaCha8Rng, len: f64, bound: f64, f: impl Fn(f64) -> f64) -> EventSequence {
        let mut t = 0.0;
        let mut out = Vec::new();
        loop {
            t += -rng.random::<f64>().ln() / bound;
            if t >= len {
                break;
            }
            if rng.random::<f64>() * bound < f(t) {
                out.push(t);
            }
        }
        EventSequence::new(out, ObservationWindow::new(0.0, len).unwrap()).unwrap()
    }

    #[test]
    fn homogeneous_poisson_gives_rate_and_no_excitation() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let mut ratios = Vec::new();
        let mut alphas = Vec::new();
        for _ in 0..20 {
            let seq = poisson(&mut rng, 1000.0, 1.5, |_| 1.5);
            let fit = fit_mle(&seq, &ModelSpec::Const, 1).unwrap();
            let FittedBackground::Constant { mu_c } = fit.background else {
                panic!()
            };
            alphas.push(fit.branching_ratio);
            assert_eq!(fit.num_parameters, 3);
            ratios.push(mu_c / seq.mean_rate());
        }
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        assert!((mean - 1.0).abs() < 0.05, "mean ratio {mean}");
        // individual fits can absorb rate noise into a slow kernel
        alphas.sort_by(f64::total_cmp);
        assert!(alphas[alphas.len() / 2] < 0.02, "{alphas:?}");
        assert!(alphas[alphas.len() - 1] < 0.2, "{alphas:?}");
    }

    #[test]
    fn reported_likelihood_matches_the_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let seq = poisson(&mut rng, 500.0, 3.0, |t| 1.0 + 2.0 * (t / 500.0));
        let knots = PiecewiseLinearBackground::regular_knots(seq.window(), 100.0).unwrap();
        for spec in [ModelSpec::Const, ModelSpec::PiecewiseLinear { knots }] {
            let fit = fit_mle(&seq, &spec, 2).unwrap();
            let bg = fit.background_model(&seq).unwrap();
            let direct = log_likelihood(&seq, &fit.kernel, &bg).unwrap();
            assert_relative_eq!(fit.log_likelihood, direct, max_relative = 1e-10);
            assert_eq!(fit.score, fit.log_likelihood - fit.num_parameters as f64);
        }
    }

    #[test]
    fn piecewise_linear_nests_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..3 {
            let seq = poisson(&mut rng, 800.0, 2.0, |t| if t < 400.0 { 0.5 } else { 2.0 });
            let knots = PiecewiseLinearBackground::regular_knots(seq.window(), 200.0).unwrap();
            let c = fit_mle(&seq, &ModelSpec::Const, 1).unwrap();
            let pl = fit_mle(&seq, &ModelSpec::PiecewiseLinear { knots }, 1).unwrap();
            assert!(pl.log_likelihood >= c.log_likelihood - 1e-4);
            assert_eq!(pl.num_parameters, 5 + 2);
        }
    }

    #[test]
    fn inner_newton_matches_closed_form_for_poisson() {
        // with no excitation the constant MLE is n / L
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let seq = poisson(&mut rng, 300.0, 2.0, |_| 2.0);
        let design = LinearDesign::new(&seq, &ModelSpec::Const).unwrap();
        let ws = LikelihoodWorkspace::new(&seq, &ExponentialKernel::single(0.0, 1.0).unwrap()).unwrap();
        let p = design.maximize(&ws, &[7.0]);
        assert!(p.converged);
        assert_relative_eq!(p.values[0], seq.mean_rate(), max_relative = 1e-9);
    }

    #[test]
    fn empty_knot_interval_hits_the_floor() {
        let w = ObservationWindow::new(0.0, 100.0).unwrap();
        let seq = EventSequence::new((0..50).map(|i| 50.0 + i as f64).collect(), w).unwrap();
        let design = LinearDesign::new(
            &seq,
            &ModelSpec::PiecewiseLinear {
                knots: vec![0.0, 25.0, 50.0, 100.0],
            },
        )
        .unwrap();
        let ws = LikelihoodWorkspace::new(&seq, &ExponentialKernel::single(0.0, 1.0).unwrap()).unwrap();
        let p = design.maximize(&ws, &[0.5; 4]);
        assert!(p.converged);
        assert!(p.values[0] <= 1e-6 && p.values[1] <= 1e-6);
        assert!(p.values[3] > 0.5);
    }

    #[test]
    fn rejects_knots_not_spanning_the_window() {
        let w = ObservationWindow::new(0.0, 10.0).unwrap();
        let seq = EventSequence::new(vec![1.0, 2.0], w).unwrap();
        let spec = ModelSpec::PiecewiseLinear { knots: vec![0.0, 5.0] };
        assert!(fit_mle(&seq, &spec, 1).is_err());
    }
}
