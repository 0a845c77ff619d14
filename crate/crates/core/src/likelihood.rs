//! Conditional intensity, compensator, and exact log-likelihood.
//!
//! For a history `t_1 < … < t_n` in `[S, T]` the log-likelihood is
//!
//! ```text
//! log L = Σ_i log λ(t_i) − ∫_S^T μ(t) dt − Σ_i Σ_j α_j (1 − exp(−β_j (T − t_i)))
//! ```
//!
//! The excitation `Σ_{k<i} g(t_i − t_k)` is accumulated with the running
//! sums `R_j(i) = exp(−β_j Δ_i)(R_j(i−1) + 1)`, giving `O(nM)` cost.
//! [`log_likelihood_direct`] keeps the explicit double sum as a reference.

use crate::background::Background;
use crate::banded::BandedSym;
use crate::basis::NaturalTimeBasis;
use crate::error::{Error, Result};
use crate::events::EventSequence;
use crate::kernel::ExponentialKernel;

/// Kernel-dependent quantities of the log-likelihood for one sequence.
///
/// None of these depend on the background, so a workspace is built once per
/// kernel and reused across background parameter updates.
#[derive(Debug, Clone)]
pub struct LikelihoodWorkspace {
    order: usize,
    decay_states: Vec<f64>,
    excitation: Vec<f64>,
    gaps: Vec<f64>,
    kernel_term: f64,
}

impl LikelihoodWorkspace {
    pub fn new(seq: &EventSequence, kernel: &ExponentialKernel) -> Result<Self> {
        let times = seq.times();
        let n = times.len();
        let order = kernel.order();
        let mut decay_states = vec![0.0; n * order];
        let mut excitation = vec![0.0; n];
        for i in 1..n {
            let dt = times[i] - times[i - 1];
            for (j, (_, beta)) in kernel.components().enumerate() {
                decay_states[i * order + j] = (-beta * dt).exp() * (decay_states[(i - 1) * order + j] + 1.0);
            }
        }
        for i in 0..n {
            let mut e = 0.0;
            for (j, (alpha, beta)) in kernel.components().enumerate() {
                e += alpha * beta * decay_states[i * order + j];
            }
            if !e.is_finite() {
                return Err(Error::Overflow { index: i + 1 });
            }
            excitation[i] = e;
        }
        let end = seq.window().end();
        let kernel_term = times.iter().map(|&t| kernel.integral_unchecked(end - t)).sum();
        Ok(Self {
            order,
            decay_states,
            excitation,
            gaps: seq.segment_lengths(),
            kernel_term,
        })
    }

    /// `R_j(i)` for event `i = 1..=n`, one entry per exponential.
    pub fn decay_states(&self, i: usize) -> &[f64] {
        &self.decay_states[(i - 1) * self.order..i * self.order]
    }

    /// `Σ_{k<i} g(t_i − t_k)` for events `i = 1..=n` (index `i − 1`).
    pub fn excitation(&self) -> &[f64] {
        &self.excitation
    }

    /// Segment lengths `t_{i+1} − t_i`, `i = 0..=n`.
    pub fn gaps(&self) -> &[f64] {
        &self.gaps
    }

    /// `Σ_i Σ_j α_j (1 − exp(−β_j (T − t_i)))`.
    pub fn kernel_term(&self) -> f64 {
        self.kernel_term
    }

    pub fn len(&self) -> usize {
        self.excitation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.excitation.is_empty()
    }
}

/// `λ(t | H_t) = μ(t) + Σ_{t_k < t} g(t − t_k)`.
pub fn intensity_at<B: Background + ?Sized>(
    t: f64,
    seq: &EventSequence,
    kernel: &ExponentialKernel,
    bg: &B,
) -> Result<f64> {
    bg.check_sequence(seq)?;
    seq.window().check_contains(t)?;
    let excitation: f64 = seq
        .times()
        .iter()
        .take_while(|&&tk| tk < t)
        .map(|&tk| kernel.eval_unchecked(t - tk))
        .sum();
    Ok(bg.rate(t) + excitation)
}

/// Exact log-likelihood via the `O(nM)` recursion.
pub fn log_likelihood<B: Background + ?Sized>(seq: &EventSequence, kernel: &ExponentialKernel, bg: &B) -> Result<f64> {
    bg.check_sequence(seq)?;
    let ws = LikelihoodWorkspace::new(seq, kernel)?;
    let mut event_term = 0.0;
    for (i, (&t, &e)) in seq.times().iter().zip(ws.excitation()).enumerate() {
        let lambda = bg.rate(t) + e;
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Overflow { index: i + 1 });
        }
        event_term += lambda.ln();
    }
    let w = seq.window();
    finite(event_term - bg.integral(w.start(), w.end()) - ws.kernel_term())
}

/// Reference log-likelihood by explicit `O(n²M)` summation over event pairs.
pub fn log_likelihood_direct<B: Background + ?Sized>(
    seq: &EventSequence,
    kernel: &ExponentialKernel,
    bg: &B,
) -> Result<f64> {
    bg.check_sequence(seq)?;
    let times = seq.times();
    let end = seq.window().end();
    let mut event_term = 0.0;
    for (i, &ti) in times.iter().enumerate() {
        let mut lambda = bg.rate(ti);
        for &tk in &times[..i] {
            for (alpha, beta) in kernel.components() {
                lambda += alpha * beta * (-beta * (ti - tk)).exp();
            }
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Overflow { index: i + 1 });
        }
        event_term += lambda.ln();
    }
    let mut triggered = 0.0;
    for &ti in times {
        for (alpha, beta) in kernel.components() {
            triggered += alpha * (1.0 - (-beta * (end - ti)).exp());
        }
    }
    let w = seq.window();
    finite(event_term - bg.integral(w.start(), w.end()) - triggered)
}

fn finite(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Overflow { index: 0 })
    }
}

/// `∫_{t_a}^{t_b} λ(t) dt` in closed form.
pub fn compensator<B: Background + ?Sized>(
    seq: &EventSequence,
    kernel: &ExponentialKernel,
    bg: &B,
    t_a: f64,
    t_b: f64,
) -> Result<f64> {
    bg.check_sequence(seq)?;
    let w = seq.window();
    w.check_contains(t_a)?;
    w.check_contains(t_b)?;
    if t_b < t_a {
        return Err(Error::Domain(format!("reversed interval [{t_a}, {t_b}]")));
    }
    if t_b == t_a {
        return Ok(0.0);
    }
    let mut total = bg.integral(t_a, t_b);
    for &tk in seq.times().iter().take_while(|&&tk| tk < t_b) {
        let from = (t_a - tk).max(0.0);
        for (alpha, beta) in kernel.components() {
            total += alpha * ((-beta * from).exp() - (-beta * (t_b - tk)).exp());
        }
    }
    Ok(total)
}

/// Compensator of every segment `[t_i, t_{i+1}]`, `i = 0..=n` (with `t_0 = S`,
/// `t_{n+1} = T`), in `O(nM)`.
pub fn segment_compensators<B: Background + ?Sized>(
    seq: &EventSequence,
    kernel: &ExponentialKernel,
    bg: &B,
) -> Result<Vec<f64>> {
    bg.check_sequence(seq)?;
    let ws = LikelihoodWorkspace::new(seq, kernel)?;
    let n = seq.len();
    let gaps = ws.gaps();
    let mut out = Vec::with_capacity(n + 1);
    out.push(bg.integral(seq.boundary(0), seq.boundary(1)));
    for i in 1..=n {
        let states = ws.decay_states(i);
        let mut triggered = 0.0;
        for (j, (alpha, beta)) in kernel.components().enumerate() {
            // events up to and including t_i excite the segment that starts at t_i
            triggered += -alpha * (-beta * gaps[i]).exp_m1() * (states[j] + 1.0);
        }
        out.push(bg.integral(seq.boundary(i), seq.boundary(i + 1)) + triggered);
    }
    Ok(out)
}

/// Compensators between consecutive events, `∫_{t_i}^{t_{i+1}} λ`, `i = 1..n−1`.
pub fn interval_compensators<B: Background + ?Sized>(
    seq: &EventSequence,
    kernel: &ExponentialKernel,
    bg: &B,
) -> Result<Vec<f64>> {
    let n = seq.len();
    if n < 2 {
        return Ok(Vec::new());
    }
    let seg = segment_compensators(seq, kernel, bg)?;
    Ok(seg[1..n].to_vec())
}

/// Value, gradient, and Hessian of `log L` with respect to spline coefficients.
#[derive(Debug, Clone)]
pub struct SplineEvaluation {
    pub value: f64,
    pub gradient: Vec<f64>,
    /// `∂² log L / ∂a_j ∂a_k`, half-bandwidth 3.
    pub hessian: Option<BandedSym>,
}

/// Log-likelihood as a function of the spline coefficients `a` for a fixed
/// kernel. Event `i` sees the rate of segment `i`, `μ_i = exp(Σ_j a_j f_i^j)`.
#[derive(Debug, Clone, Copy)]
pub struct SplineLikelihood<'a> {
    ws: &'a LikelihoodWorkspace,
    basis: &'a NaturalTimeBasis,
}

impl<'a> SplineLikelihood<'a> {
    pub fn new(ws: &'a LikelihoodWorkspace, basis: &'a NaturalTimeBasis) -> Result<Self> {
        if ws.len() != basis.n() {
            return Err(Error::InvalidInput(format!(
                "workspace has {} events, basis was built for {}",
                ws.len(),
                basis.n()
            )));
        }
        Ok(Self { ws, basis })
    }

    /// `log L(a)` only.
    pub fn value(&self, coeffs: &[f64]) -> Result<f64> {
        let rows = self.basis.value_rows();
        let gaps = self.ws.gaps();
        let mut total = -self.ws.kernel_term();
        for (i, row) in rows[..gaps.len()].iter().enumerate() {
            let eta = row.dot(coeffs);
            total -= eta.exp() * gaps[i];
            if i >= 1 {
                total += log_add(eta, self.ws.excitation[i - 1]);
            }
            if !total.is_finite() {
                return Err(Error::Overflow { index: i });
            }
        }
        Ok(total)
    }

    pub fn evaluate(&self, coeffs: &[f64], with_hessian: bool) -> Result<SplineEvaluation> {
        let m = self.basis.m();
        if coeffs.len() != m {
            return Err(Error::InvalidInput(format!(
                "expected {m} coefficients, got {}",
                coeffs.len()
            )));
        }
        let rows = self.basis.value_rows();
        let gaps = self.ws.gaps();
        let mut value = -self.ws.kernel_term();
        let mut gradient = vec![0.0; m];
        let mut hessian = with_hessian.then(|| BandedSym::zeros(m, 3));
        for (i, row) in rows[..gaps.len()].iter().enumerate() {
            let eta = row.dot(coeffs);
            let mu = eta.exp();
            // d/da of the compensator piece −μ_i Δ_i, and its curvature
            let mut d1 = -mu * gaps[i];
            let mut d2 = -mu * gaps[i];
            value -= mu * gaps[i];
            if i >= 1 {
                let log_lambda = log_add(eta, self.ws.excitation[i - 1]);
                let share = (eta - log_lambda).exp();
                value += log_lambda;
                d1 += share;
                d2 += share - share * share;
            }
            if !value.is_finite() {
                return Err(Error::Overflow { index: i });
            }
            for (r, w) in row.weights.iter().enumerate() {
                gradient[row.first + r] += d1 * w;
            }
            if let Some(h) = hessian.as_mut() {
                h.add_outer4(row.first, &row.weights, d2);
            }
        }
        Ok(SplineEvaluation {
            value,
            gradient,
            hessian,
        })
    }
}

/// `log(exp(log_mu) + excitation)` without overflowing either term.
#[inline]
fn log_add(log_mu: f64, excitation: f64) -> f64 {
    if excitation <= 0.0 {
        return log_mu;
    }
    let log_e = excitation.ln();
    let (hi, lo) = if log_mu > log_e {
        (log_mu, log_e)
    } else {
        (log_e, log_mu)
    };
    hi + (lo - hi).exp().ln_1p()
}

/// `∂ log L / ∂a_j` for a spline background.
pub fn loglik_grad_coeffs(
    seq: &EventSequence,
    kernel: &ExponentialKernel,
    basis: &NaturalTimeBasis,
    coeffs: &[f64],
) -> Result<Vec<f64>> {
    let ws = LikelihoodWorkspace::new(seq, kernel)?;
    Ok(SplineLikelihood::new(&ws, basis)?.evaluate(coeffs, false)?.gradient)
}

/// `∂² log L / ∂a_j ∂a_k` for a spline background (symmetric, banded).
pub fn loglik_hessian_coeffs(
    seq: &EventSequence,
    kernel: &ExponentialKernel,
    basis: &NaturalTimeBasis,
    coeffs: &[f64],
) -> Result<BandedSym> {
    let ws = LikelihoodWorkspace::new(seq, kernel)?;
    let eval = SplineLikelihood::new(&ws, basis)?.evaluate(coeffs, true)?;
    Ok(eval.hessian.expect("requested"))
}
