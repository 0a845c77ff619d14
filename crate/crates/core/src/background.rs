//! Background-rate families: constant, piecewise linear, and log-linear spline.

use std::sync::Arc;

use crate::basis::NaturalTimeBasis;
use crate::error::{Error, Result};
use crate::events::{EventSequence, ObservationWindow};

/// A strictly positive rate function on an observation window.
///
/// Implemented by the fitted families in [`BackgroundModel`] and by the
/// analytic scenarios used for simulation, so likelihood, compensator, and
/// thinning code can run against either.
pub trait Background: Send + Sync {
    fn window(&self) -> ObservationWindow;

    /// Rate at `t`; callers guarantee `t` lies in the window.
    fn rate(&self, t: f64) -> f64;

    /// Exact `∫_a^b μ(t) dt` for `start ≤ a ≤ b ≤ end`.
    fn integral(&self, a: f64, b: f64) -> f64;

    /// An upper bound of the rate over `[a, b]`.
    fn upper_bound(&self, a: f64, b: f64) -> f64;

    /// Times where the rate may jump or change form. Thinning never lets a
    /// dominating-rate horizon straddle one of these.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Checks that this background can be paired with `seq`.
    fn check_sequence(&self, seq: &EventSequence) -> Result<()> {
        if self.window() != seq.window() {
            return Err(Error::InvalidInput(format!(
                "background window {:?} does not match sequence window {:?}",
                self.window(),
                seq.window()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstantBackground {
    mu_c: f64,
    window: ObservationWindow,
}

impl ConstantBackground {
    pub fn new(mu_c: f64, window: ObservationWindow) -> Result<Self> {
        if !(mu_c.is_finite() && mu_c > 0.0) {
            return Err(Error::InvalidInput(format!("constant rate must be > 0, got {mu_c}")));
        }
        Ok(Self { mu_c, window })
    }

    pub fn mu_c(&self) -> f64 {
        self.mu_c
    }
}

/// Linear interpolation between positive knot values; the knots span the window.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearBackground {
    knot_times: Vec<f64>,
    knot_values: Vec<f64>,
    // ∫ from the first knot to knot k
    cumulative: Vec<f64>,
}

impl PiecewiseLinearBackground {
    pub fn new(knot_times: Vec<f64>, knot_values: Vec<f64>) -> Result<Self> {
        if knot_times.len() < 2 {
            return Err(Error::InvalidInput(
                "piecewise linear background needs >= 2 knots".into(),
            ));
        }
        if knot_times.len() != knot_values.len() {
            return Err(Error::InvalidInput(format!(
                "{} knot times but {} knot values",
                knot_times.len(),
                knot_values.len()
            )));
        }
        if knot_times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidInput("knot times must be strictly increasing".into()));
        }
        if let Some(v) = knot_values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidInput(format!("knot values must be > 0, got {v}")));
        }
        ObservationWindow::new(knot_times[0], *knot_times.last().unwrap())?;
        let mut cumulative = Vec::with_capacity(knot_times.len());
        cumulative.push(0.0);
        for k in 1..knot_times.len() {
            let area = 0.5 * (knot_values[k - 1] + knot_values[k]) * (knot_times[k] - knot_times[k - 1]);
            cumulative.push(cumulative[k - 1] + area);
        }
        Ok(Self {
            knot_times,
            knot_values,
            cumulative,
        })
    }

    /// Knots every `spacing` seconds from the window start, with the window
    /// end as the last knot; the final piece absorbs any remainder, so it is
    /// between one and two spacings long (a 6h10m session at 2h spacing gives
    /// knots at 0h, 2h, 4h, 6h10m).
    pub fn regular_knots(window: ObservationWindow, spacing: f64) -> Result<Vec<f64>> {
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::Config(format!("knot spacing must be > 0, got {spacing}")));
        }
        let mut knots = vec![window.start()];
        let mut j = 1.0;
        while window.start() + j * spacing <= window.end() - spacing {
            knots.push(window.start() + j * spacing);
            j += 1.0;
        }
        knots.push(window.end());
        Ok(knots)
    }

    pub fn knot_times(&self) -> &[f64] {
        &self.knot_times
    }

    pub fn knot_values(&self) -> &[f64] {
        &self.knot_values
    }

    fn piece(&self, t: f64) -> usize {
        let k = self.knot_times.partition_point(|&x| x <= t);
        k.clamp(1, self.knot_times.len() - 1) - 1
    }

    /// Hat-function weights: `μ(t) = w0 · v[k] + w1 · v[k + 1]`.
    pub(crate) fn interpolation_weights(&self, t: f64) -> (usize, f64, f64) {
        let k = self.piece(t);
        let (t0, t1) = (self.knot_times[k], self.knot_times[k + 1]);
        let frac = (t - t0) / (t1 - t0);
        (k, 1.0 - frac, frac)
    }

    fn antiderivative(&self, t: f64) -> f64 {
        let k = self.piece(t);
        let t0 = self.knot_times[k];
        let v0 = self.knot_values[k];
        let vt = self.rate(t);
        self.cumulative[k] + 0.5 * (v0 + vt) * (t - t0)
    }
}

/// Log-linear spline background `μ(t) = exp(Σ_j a_j f^j(t))`, constant over
/// each inter-event segment of the sequence the basis was built from.
#[derive(Debug, Clone)]
pub struct SplineBackground {
    coeffs: Vec<f64>,
    basis: Arc<NaturalTimeBasis>,
    events: EventSequence,
    log_rates: Vec<f64>,
    rates: Vec<f64>,
}

impl SplineBackground {
    pub fn new(coeffs: Vec<f64>, basis: Arc<NaturalTimeBasis>, events: &EventSequence) -> Result<Self> {
        if coeffs.len() != basis.m() {
            return Err(Error::InvalidInput(format!(
                "spline has {} coefficients but the basis has m = {}",
                coeffs.len(),
                basis.m()
            )));
        }
        if basis.n() != events.len() {
            return Err(Error::InvalidInput(format!(
                "basis built for n = {} events, sequence has {}",
                basis.n(),
                events.len()
            )));
        }
        let log_rates = basis.log_rates(&coeffs);
        let rates = log_rates.iter().map(|l| l.exp()).collect();
        Ok(Self {
            coeffs,
            basis,
            events: events.clone(),
            log_rates,
            rates,
        })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn basis(&self) -> &NaturalTimeBasis {
        &self.basis
    }

    pub fn events(&self) -> &EventSequence {
        &self.events
    }

    /// `μ_i` for segments `i = 0..=n`.
    pub fn segment_rates(&self) -> &[f64] {
        &self.rates
    }

    /// `log μ_i` for segments `i = 0..=n`.
    pub fn segment_log_rates(&self) -> &[f64] {
        &self.log_rates
    }
}

impl PartialEq for SplineBackground {
    fn eq(&self, other: &Self) -> bool {
        self.coeffs == other.coeffs && *self.basis == *other.basis && self.events == other.events
    }
}

/// The three background families compared by the estimators.
#[derive(Debug, Clone, PartialEq)]
pub enum BackgroundModel {
    Constant(ConstantBackground),
    PiecewiseLinear(PiecewiseLinearBackground),
    Spline(SplineBackground),
}

impl BackgroundModel {
    /// `μ(t)` with a domain check against the window.
    pub fn eval(&self, t: f64) -> Result<f64> {
        self.window().check_contains(t)?;
        Ok(self.rate(t))
    }

    /// `∫_S^T μ(t) dt` over the sequence's window.
    pub fn integral_over(&self, seq: &EventSequence) -> Result<f64> {
        self.check_sequence(seq)?;
        let w = seq.window();
        Ok(self.integral(w.start(), w.end()))
    }
}

impl Background for ConstantBackground {
    fn window(&self) -> ObservationWindow {
        self.window
    }

    fn rate(&self, _t: f64) -> f64 {
        self.mu_c
    }

    fn integral(&self, a: f64, b: f64) -> f64 {
        self.mu_c * (b - a)
    }

    fn upper_bound(&self, _a: f64, _b: f64) -> f64 {
        self.mu_c
    }
}

impl Background for PiecewiseLinearBackground {
    fn window(&self) -> ObservationWindow {
        ObservationWindow::new(self.knot_times[0], *self.knot_times.last().unwrap()).expect("validated at construction")
    }

    fn rate(&self, t: f64) -> f64 {
        let (k, w0, w1) = self.interpolation_weights(t);
        w0 * self.knot_values[k] + w1 * self.knot_values[k + 1]
    }

    fn integral(&self, a: f64, b: f64) -> f64 {
        self.antiderivative(b) - self.antiderivative(a)
    }

    fn upper_bound(&self, a: f64, b: f64) -> f64 {
        let inside = self
            .knot_times
            .iter()
            .zip(&self.knot_values)
            .filter(|(t, _)| **t > a && **t < b)
            .map(|(_, v)| *v);
        inside.fold(self.rate(a).max(self.rate(b)), f64::max)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.knot_times.clone()
    }
}

impl Background for SplineBackground {
    fn window(&self) -> ObservationWindow {
        self.events.window()
    }

    fn rate(&self, t: f64) -> f64 {
        self.rates[self.events.segment_index(t)]
    }

    fn integral(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let first = self.events.segment_index(a);
        let last = self.events.segment_index(b);
        (first..=last)
            .map(|i| {
                let lo = self.events.boundary(i).max(a);
                let hi = self.events.boundary(i + 1).min(b);
                if hi > lo {
                    self.rates[i] * (hi - lo)
                } else {
                    0.0
                }
            })
            .sum()
    }

    fn upper_bound(&self, a: f64, b: f64) -> f64 {
        let first = self.events.segment_index(a);
        let last = self.events.segment_index(b);
        self.rates[first..=last].iter().cloned().fold(0.0, f64::max)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.events.times().to_vec()
    }

    fn check_sequence(&self, seq: &EventSequence) -> Result<()> {
        if self.events != *seq {
            return Err(Error::InvalidInput(
                "spline background was built from a different event sequence".into(),
            ));
        }
        Ok(())
    }
}

impl Background for BackgroundModel {
    fn window(&self) -> ObservationWindow {
        match self {
            BackgroundModel::Constant(b) => b.window(),
            BackgroundModel::PiecewiseLinear(b) => b.window(),
            BackgroundModel::Spline(b) => b.window(),
        }
    }

    fn rate(&self, t: f64) -> f64 {
        match self {
            BackgroundModel::Constant(b) => b.rate(t),
            BackgroundModel::PiecewiseLinear(b) => b.rate(t),
            BackgroundModel::Spline(b) => b.rate(t),
        }
    }

    fn integral(&self, a: f64, b: f64) -> f64 {
        match self {
            BackgroundModel::Constant(bg) => bg.integral(a, b),
            BackgroundModel::PiecewiseLinear(bg) => bg.integral(a, b),
            BackgroundModel::Spline(bg) => bg.integral(a, b),
        }
    }

    fn upper_bound(&self, a: f64, b: f64) -> f64 {
        match self {
            BackgroundModel::Constant(bg) => bg.upper_bound(a, b),
            BackgroundModel::PiecewiseLinear(bg) => bg.upper_bound(a, b),
            BackgroundModel::Spline(bg) => bg.upper_bound(a, b),
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self {
            BackgroundModel::Constant(bg) => bg.breakpoints(),
            BackgroundModel::PiecewiseLinear(bg) => bg.breakpoints(),
            BackgroundModel::Spline(bg) => bg.breakpoints(),
        }
    }

    fn check_sequence(&self, seq: &EventSequence) -> Result<()> {
        match self {
            BackgroundModel::Constant(bg) => bg.check_sequence(seq),
            BackgroundModel::PiecewiseLinear(bg) => bg.check_sequence(seq),
            BackgroundModel::Spline(bg) => bg.check_sequence(seq),
        }
    }
}

/// Free function form of [`BackgroundModel::eval`].
pub fn background_eval(bg: &BackgroundModel, t: f64) -> Result<f64> {
    bg.eval(t)
}

/// Free function form of [`BackgroundModel::integral_over`].
pub fn background_integral(bg: &BackgroundModel, seq: &EventSequence) -> Result<f64> {
    bg.integral_over(seq)
}
