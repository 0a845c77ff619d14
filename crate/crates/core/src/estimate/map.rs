//! Posterior mode of the spline coefficients and the Laplace evidence.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::banded::{BandedCholesky, BandedSym, RankOneUpdated};
use crate::basis::NaturalTimeBasis;
use crate::error::{Error, Result};
use crate::estimate::hyper::HyperParams;
use crate::estimate::prior::{DerivativeGram, SmoothnessPrior};
use crate::events::EventSequence;
use crate::likelihood::{LikelihoodWorkspace, SplineLikelihood};

#[derive(Debug, Clone)]
pub struct MapOptions {
    pub max_iterations: usize,
    /// Convergence when `max_j |∂/∂a_j| ≤ grad_tol · m`.
    pub grad_tol: f64,
}

impl Default for MapOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            grad_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapEstimate {
    pub coeffs: Vec<f64>,
    pub log_likelihood: f64,
    pub log_prior: f64,
    /// Max-norm of the posterior gradient at `coeffs`.
    pub grad_norm: f64,
    pub iterations: usize,
}

/// Laplace approximation to the marginal likelihood at a MAP point.
#[derive(Debug, Clone, PartialEq)]
pub struct Evidence {
    pub log_marginal_likelihood: f64,
    /// `log det H` for `H = −∇²(log L + log P)` at the mode.
    pub log_det_hessian: f64,
    pub map: MapEstimate,
}

/// Log-posterior `log L(a) + log P(a)` for fixed hyperparameters.
pub(crate) struct Posterior {
    ws: LikelihoodWorkspace,
    basis: Arc<NaturalTimeBasis>,
    prior: SmoothnessPrior,
}

struct PointEval {
    log_lik: f64,
    log_prior: f64,
    gradient: Vec<f64>,
    // −∇² log L + V·GᵀG; the full negative Hessian adds c·𝟙𝟙ᵀ
    banded: BandedSym,
}

impl PointEval {
    fn value(&self) -> f64 {
        self.log_lik + self.log_prior
    }
}

/// Factorization of `B + c·𝟙𝟙ᵀ`.
enum Factor {
    RankOne(RankOneUpdated),
    Dense(BandedCholesky),
}

impl Factor {
    fn new(b: &BandedSym, c: f64) -> Option<Self> {
        if let Ok(f) = RankOneUpdated::new(b, c) {
            return Some(Factor::RankOne(f));
        }
        // B alone may be indefinite while B + c𝟙𝟙ᵀ is not
        let mut dense = b.to_dense();
        dense.iter_mut().flatten().for_each(|x| *x += c);
        BandedSym::from_dense(&dense).cholesky().map(Factor::Dense)
    }

    fn log_det(&self) -> f64 {
        match self {
            Factor::RankOne(f) => f.log_det(),
            Factor::Dense(f) => f.log_det(),
        }
    }
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

impl Posterior {
    pub(crate) fn new(
        seq: &EventSequence,
        hyper: &HyperParams,
        basis: Arc<NaturalTimeBasis>,
        gram: Arc<DerivativeGram>,
    ) -> Result<Self> {
        if basis.n() != seq.len() {
            return Err(Error::InvalidInput(format!(
                "basis built for n = {} events, sequence has {}",
                basis.n(),
                seq.len()
            )));
        }
        let ws = LikelihoodWorkspace::new(seq, &hyper.kernel)?;
        let prior = SmoothnessPrior::with_gram(basis.clone(), gram, hyper.v, hyper.w, hyper.mu_c)?;
        Ok(Self { ws, basis, prior })
    }

    fn likelihood(&self) -> SplineLikelihood<'_> {
        SplineLikelihood::new(&self.ws, &self.basis).expect("sizes checked at construction")
    }

    fn value(&self, a: &[f64]) -> Result<f64> {
        Ok(self.likelihood().value(a)? + self.prior.log_density(a)?)
    }

    fn eval(&self, a: &[f64]) -> Result<PointEval> {
        let lik = self.likelihood().evaluate(a, true)?;
        let prior_grad = self.prior.gradient(a)?;
        let gradient = lik.gradient.iter().zip(&prior_grad).map(|(x, y)| x + y).collect();
        let mut banded = self.prior.banded_precision();
        banded.add_scaled(&lik.hessian.expect("requested"), -1.0);
        Ok(PointEval {
            log_lik: lik.value,
            log_prior: self.prior.log_density(a)?,
            gradient,
            banded,
        })
    }

    /// Damped Newton ascent from `start` (prior mean when `None`).
    pub(crate) fn maximize(&self, start: Option<&[f64]>, opts: &MapOptions) -> Result<MapEstimate> {
        let m = self.basis.m();
        let mut a = match start {
            Some(s) if s.len() == m => s.to_vec(),
            Some(s) => {
                return Err(Error::InvalidInput(format!(
                    "warm start has {} coefficients, expected {m}",
                    s.len()
                )))
            }
            None => self.prior.mean(),
        };
        let c = self.prior.rank_one_weight();
        let tol = opts.grad_tol * m as f64;
        let mut point = self.eval(&a)?;
        let done = |a: Vec<f64>, p: &PointEval, it: usize| MapEstimate {
            coeffs: a,
            log_likelihood: p.log_lik,
            log_prior: p.log_prior,
            grad_norm: max_norm(&p.gradient),
            iterations: it,
        };
        for it in 0..opts.max_iterations {
            if max_norm(&point.gradient) <= tol {
                // one more full step lands within rounding of the mode
                if let Ok(delta) = self.newton_direction(&point, c) {
                    let trial: Vec<f64> = a.iter().zip(&delta).map(|(x, d)| x + d).collect();
                    if let Ok(p) = self.eval(&trial) {
                        if p.value() >= point.value() {
                            return Ok(done(trial, &p, it + 1));
                        }
                    }
                }
                return Ok(done(a, &point, it));
            }
            let delta = self.newton_direction(&point, c)?;
            let slope: f64 = delta.iter().zip(&point.gradient).map(|(d, g)| d * g).sum();
            let f0 = point.value();
            let mut step = 1.0;
            let big = max_norm(&delta);
            if big > 10.0 {
                step = 10.0 / big;
            }
            let accepted = loop {
                let trial: Vec<f64> = a.iter().zip(&delta).map(|(x, d)| x + step * d).collect();
                if let Ok(f) = self.value(&trial) {
                    if f >= f0 + 1e-4 * step * slope {
                        break Some(trial);
                    }
                }
                step *= 0.5;
                if step < 1e-12 {
                    break None;
                }
            };
            match accepted {
                Some(next) => {
                    a = next;
                    point = self.eval(&a)?;
                }
                None if slope <= 1e-12 * (1.0 + f0.abs()) => {
                    // at the optimum to within rounding of the objective
                    return Ok(done(a, &point, it));
                }
                None => break,
            }
        }
        if max_norm(&point.gradient) <= tol {
            return Ok(done(a, &point, opts.max_iterations));
        }
        Err(Error::NonConvergence {
            iterations: opts.max_iterations,
            grad_norm: max_norm(&point.gradient),
            best: a,
        })
    }

    /// Solves `H δ = ∇`, adding Levenberg damping `τI` until `H + τI` factors.
    fn newton_direction(&self, point: &PointEval, c: f64) -> Result<Vec<f64>> {
        let scale = point.banded.max_abs_diagonal().max(1e-12);
        let mut tau = 0.0;
        for _ in 0..40 {
            let mut b = point.banded.clone();
            if tau > 0.0 {
                b.add_diagonal(tau);
            }
            if let Ok(f) = RankOneUpdated::new(&b, c) {
                return Ok(f.solve(&point.gradient));
            }
            tau = if tau == 0.0 { 1e-8 * scale } else { tau * 10.0 };
        }
        Err(Error::NotPositiveDefinite(
            "posterior Hessian, even with damping".into(),
        ))
    }

    /// Laplace evidence at a mode returned by [`Posterior::maximize`].
    pub(crate) fn evidence(&self, map: MapEstimate) -> Result<Evidence> {
        let point = self.eval(&map.coeffs)?;
        let factor = Factor::new(&point.banded, self.prior.rank_one_weight())
            .ok_or_else(|| Error::NotPositiveDefinite("posterior Hessian at the mode (saddle point)".into()))?;
        let m = self.basis.m() as f64;
        let log_det = factor.log_det();
        Ok(Evidence {
            log_marginal_likelihood: 0.5 * m * (2.0 * PI).ln() - 0.5 * log_det + point.value(),
            log_det_hessian: log_det,
            map,
        })
    }
}

/// Posterior mode of the spline coefficients under `hyper`.
pub fn map_estimate(
    seq: &EventSequence,
    hyper: &HyperParams,
    basis: &Arc<NaturalTimeBasis>,
    warm_start: Option<&[f64]>,
) -> Result<MapEstimate> {
    let gram = Arc::new(DerivativeGram::new(basis)?);
    Posterior::new(seq, hyper, basis.clone(), gram)?.maximize(warm_start, &MapOptions::default())
}

/// MAP estimate followed by the Laplace approximation.
pub fn laplace_evidence(
    seq: &EventSequence,
    hyper: &HyperParams,
    basis: &Arc<NaturalTimeBasis>,
    warm_start: Option<&[f64]>,
) -> Result<Evidence> {
    let gram = Arc::new(DerivativeGram::new(basis)?);
    let post = Posterior::new(seq, hyper, basis.clone(), gram)?;
    let map = post.maximize(warm_start, &MapOptions::default())?;
    post.evidence(map)
}

/// `(m/2) log 2π − ½ log det H + log L(a*) + log P(a*)`.
pub fn log_marginal_likelihood(seq: &EventSequence, hyper: &HyperParams, basis: &Arc<NaturalTimeBasis>) -> Result<f64> {
    Ok(laplace_evidence(seq, hyper, basis, None)?.log_marginal_likelihood)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::ObservationWindow;
    use crate::kernel::ExponentialKernel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Inhomogeneous Poisson sample with rate `f` bounded by `bound`.
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

    fn hyper(alpha: f64, beta: f64, v: f64, mu_c: f64) -> HyperParams {
        HyperParams::new(ExponentialKernel::single(alpha, beta).unwrap(), v, 1e4, mu_c).unwrap()
    }

    #[test]
    fn stationary_limit_is_flat() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let seq = poisson(&mut rng, 500.0, 3.0, |t| 1.0 + 2.0 * (t / 500.0));
        let basis = Arc::new(NaturalTimeBasis::build(seq.len(), 50).unwrap());
        let map = map_estimate(&seq, &hyper(0.2, 1.0, 1e8, seq.mean_rate()), &basis, None).unwrap();
        let (lo, hi) = basis
            .log_rates(&map.coeffs)
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), x| (l.min(*x), h.max(*x)));
        assert!(hi - lo <= 2e-2, "spread {}", hi - lo);
    }

    #[test]
    fn poisson_map_tracks_the_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rate = |t: f64| 2.0 + 6.0 * (-((t - 300.0) / 80.0).powi(2)).exp();
        let seq = poisson(&mut rng, 600.0, 8.0, rate);
        let basis = Arc::new(NaturalTimeBasis::build(seq.len(), 50).unwrap());
        let h = hyper(0.0, 1.0, 50.0, seq.mean_rate());
        let map = map_estimate(&seq, &h, &basis, None).unwrap();
        assert!(map.grad_norm <= 1e-6 * basis.m() as f64);
        let bg = crate::background::SplineBackground::new(map.coeffs, basis, &seq).unwrap();
        use crate::background::Background;
        // histogram estimate on 60 s bins
        for b in 0..10 {
            let (lo, hi) = (b as f64 * 60.0, (b + 1) as f64 * 60.0);
            let count = seq.times().iter().filter(|&&t| t >= lo && t < hi).count() as f64;
            let est = bg.integral(lo, hi);
            assert!(
                (est - count).abs() <= 4.0 * count.sqrt() + 5.0,
                "bin {b}: {est} vs {count}"
            );
        }
    }

    #[test]
    fn poisson_posterior_has_a_unique_mode() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let seq = poisson(&mut rng, 300.0, 4.0, |t| 1.0 + 3.0 * (t / 300.0));
        let basis = Arc::new(NaturalTimeBasis::build(seq.len(), 30).unwrap());
        let h = hyper(0.0, 1.0, 5.0, 2.0);
        let a: Vec<f64> = (0..basis.m()).map(|_| rng.random_range(-2.0..2.0)).collect();
        let b: Vec<f64> = (0..basis.m()).map(|_| rng.random_range(-2.0..2.0)).collect();
        let ma = map_estimate(&seq, &h, &basis, Some(&a)).unwrap();
        let mb = map_estimate(&seq, &h, &basis, Some(&b)).unwrap();
        for (x, y) in ma.coeffs.iter().zip(&mb.coeffs) {
            assert!((x - y).abs() <= 1e-6);
        }
    }

    #[test]
    fn map_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let seq = poisson(&mut rng, 200.0, 3.0, |_| 3.0);
        let basis = Arc::new(NaturalTimeBasis::build(seq.len(), 40).unwrap());
        let h = hyper(0.3, 2.0, 10.0, 3.0);
        let x = laplace_evidence(&seq, &h, &basis, None).unwrap();
        let y = laplace_evidence(&seq, &h, &basis, None).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn evidence_penalty_grows_like_half_m_log_inverse_v() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let seq = poisson(&mut rng, 400.0, 5.0, |t| 1.0 + 4.0 * (t / 400.0));
        let basis = Arc::new(NaturalTimeBasis::build(seq.len(), 100).unwrap());
        let m = basis.m() as f64;
        let gap = |v: f64| {
            let e = laplace_evidence(&seq, &hyper(0.0, 1.0, v, seq.mean_rate()), &basis, None).unwrap();
            e.log_marginal_likelihood - e.map.log_likelihood
        };
        let (v1, v2) = (1e-6, 1e-8);
        let slope = (gap(v1) - gap(v2)) / ((1.0 / v1).ln() - (1.0 / v2).ln());
        assert!((slope + 0.5 * (m - 1.0)).abs() <= 0.05 * m, "slope {slope}, m {m}");
    }

    #[test]
    fn wrong_warm_start_length_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let seq = poisson(&mut rng, 100.0, 2.0, |_| 2.0);
        let basis = Arc::new(NaturalTimeBasis::build(seq.len(), 40).unwrap());
        let h = hyper(0.1, 1.0, 1.0, 2.0);
        assert!(map_estimate(&seq, &h, &basis, Some(&[0.0])).is_err());
    }
}
