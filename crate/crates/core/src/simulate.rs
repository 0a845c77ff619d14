//! Exact simulation by thinning, and the synthetic background scenarios.
//!
//! The excitation `E(t) = Σ_j E_j(t)` only decays between events, so its
//! current value bounds it over any lookahead horizon. The background is
//! bounded on each horizon by its [`Background::upper_bound`]; horizons end
//! at background breakpoints or after a fixed step of `L/256`.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::background::{Background, BackgroundModel, ConstantBackground, PiecewiseLinearBackground};
use crate::error::{Error, Result};
use crate::events::{EventSequence, ObservationWindow};
use crate::kernel::ExponentialKernel;

/// Lookahead steps per window for the dominating rate.
const HORIZON_STEPS: f64 = 256.0;
/// Sample points per horizon when bounding an analytic rate.
const BOUND_SAMPLES: usize = 17;
const BOUND_SAFETY: f64 = 1.05;

/// Quadratic intraday profile, lowest at mid-window.
///
/// `μ(t) = μ_min (1 + (r − 1) x²)` with `x = (t − mid) / (L/2)`, so the rate
/// at both window ends is `r` times the midday rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UShape {
    pub window: ObservationWindow,
    pub mu_min: f64,
    pub ratio: f64,
}

impl UShape {
    pub const DEFAULT_RATIO: f64 = 5.0;

    pub fn new(window: ObservationWindow, mu_min: f64, ratio: f64) -> Result<Self> {
        if !(mu_min.is_finite() && mu_min > 0.0 && ratio.is_finite() && ratio >= 1.0) {
            return Err(Error::InvalidInput(format!(
                "U-shape needs mu_min > 0 and ratio >= 1, got {mu_min}, {ratio}"
            )));
        }
        Ok(Self { window, mu_min, ratio })
    }

    /// Profile with the given average rate over the window.
    pub fn with_mean(window: ObservationWindow, mean_rate: f64, ratio: f64) -> Result<Self> {
        Self::new(window, mean_rate / (1.0 + (ratio - 1.0) / 3.0), ratio)
    }

    fn mid(&self) -> f64 {
        0.5 * (self.window.start() + self.window.end())
    }

    fn half(&self) -> f64 {
        0.5 * self.window.length()
    }
}

/// Constant baseline with a jump by factor `J` at `t_news` relaxing back
/// exponentially: `μ(t) = b (1 + (J − 1) e^{−(t − t_news)/τ})` for `t ≥ t_news`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewsShock {
    pub window: ObservationWindow,
    pub baseline: f64,
    pub t_news: f64,
    pub jump: f64,
    pub relax: f64,
}

impl NewsShock {
    pub const DEFAULT_JUMP: f64 = 10.0;
    /// Relaxation time as a fraction of the window length.
    pub const DEFAULT_RELAX_FRACTION: f64 = 0.05;

    pub fn new(window: ObservationWindow, baseline: f64, t_news: f64, jump: f64, relax: f64) -> Result<Self> {
        window.check_contains(t_news)?;
        let ok = baseline.is_finite()
            && baseline > 0.0
            && jump.is_finite()
            && jump >= 1.0
            && relax.is_finite()
            && relax > 0.0;
        if !ok {
            return Err(Error::InvalidInput(format!(
                "news shock needs baseline > 0, jump >= 1, relax > 0, got {baseline}, {jump}, {relax}"
            )));
        }
        Ok(Self {
            window,
            baseline,
            t_news,
            jump,
            relax,
        })
    }
}

/// Default U-shape (endpoint/midday ratio 5) with the given mean rate.
pub fn scenario_ushape(window: ObservationWindow, mean_rate: f64) -> Result<UShape> {
    UShape::with_mean(window, mean_rate, UShape::DEFAULT_RATIO)
}

/// Default news shock (jump 10, relaxation 5% of the window).
pub fn scenario_news_shock(window: ObservationWindow, t_news: f64, baseline: f64) -> Result<NewsShock> {
    NewsShock::new(
        window,
        baseline,
        t_news,
        NewsShock::DEFAULT_JUMP,
        NewsShock::DEFAULT_RELAX_FRACTION * window.length(),
    )
}

fn sampled_bound(rate: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let last = (BOUND_SAMPLES - 1) as f64;
    let peak = (0..BOUND_SAMPLES)
        .map(|k| rate(a + (b - a) * k as f64 / last))
        .fold(0.0, f64::max);
    peak * BOUND_SAFETY
}

impl Background for UShape {
    fn window(&self) -> ObservationWindow {
        self.window
    }

    fn rate(&self, t: f64) -> f64 {
        let x = (t - self.mid()) / self.half();
        self.mu_min * (1.0 + (self.ratio - 1.0) * x * x)
    }

    fn integral(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let (mid, half) = (self.mid(), self.half());
        let cubic = ((b - mid).powi(3) - (a - mid).powi(3)) / (3.0 * half * half);
        self.mu_min * ((b - a) + (self.ratio - 1.0) * cubic)
    }

    fn upper_bound(&self, a: f64, b: f64) -> f64 {
        sampled_bound(|t| self.rate(t), a, b)
    }
}

impl Background for NewsShock {
    fn window(&self) -> ObservationWindow {
        self.window
    }

    fn rate(&self, t: f64) -> f64 {
        if t < self.t_news {
            self.baseline
        } else {
            self.baseline * (1.0 + (self.jump - 1.0) * (-(t - self.t_news) / self.relax).exp())
        }
    }

    fn integral(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let mut total = self.baseline * (b - a);
        let lo = a.max(self.t_news);
        if b > lo {
            let decay = |t: f64| (-(t - self.t_news) / self.relax).exp();
            total += self.baseline * (self.jump - 1.0) * self.relax * (decay(lo) - decay(b));
        }
        total
    }

    fn upper_bound(&self, a: f64, b: f64) -> f64 {
        sampled_bound(|t| self.rate(t), a, b)
    }

    fn breakpoints(&self) -> Vec<f64> {
        vec![self.t_news]
    }
}

/// Serializable description of a simulation background.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scenario", rename_all = "snake_case")]
pub enum ScenarioSpec {
    Constant {
        mu: f64,
    },
    UShape {
        mean_rate: f64,
        ratio: f64,
    },
    NewsShock {
        baseline: f64,
        t_news: f64,
        jump: f64,
        relax: f64,
    },
    PiecewiseLinear {
        knot_times: Vec<f64>,
        knot_values: Vec<f64>,
    },
}

impl ScenarioSpec {
    pub fn build(&self, window: ObservationWindow) -> Result<Box<dyn Background>> {
        Ok(match self {
            ScenarioSpec::Constant { mu } => Box::new(BackgroundModel::Constant(ConstantBackground::new(*mu, window)?)),
            ScenarioSpec::UShape { mean_rate, ratio } => Box::new(UShape::with_mean(window, *mean_rate, *ratio)?),
            ScenarioSpec::NewsShock {
                baseline,
                t_news,
                jump,
                relax,
            } => Box::new(NewsShock::new(window, *baseline, *t_news, *jump, *relax)?),
            ScenarioSpec::PiecewiseLinear {
                knot_times,
                knot_values,
            } => {
                let pl = PiecewiseLinearBackground::new(knot_times.clone(), knot_values.clone())?;
                if pl.window() != window {
                    return Err(Error::InvalidInput(
                        "piecewise-linear knots must span the window".into(),
                    ));
                }
                Box::new(BackgroundModel::PiecewiseLinear(pl))
            }
        })
    }
}

/// RNG for one replicate: the seed picks the generator, the replicate its stream.
pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

/// One realization on `bg`'s window, reproducible from `seed`.
pub fn simulate<B: Background + ?Sized>(bg: &B, kernel: &ExponentialKernel, seed: u64) -> Result<EventSequence> {
    simulate_with_rng(bg, kernel, &mut replicate_rng(seed, 0))
}

pub fn simulate_with_rng<B: Background + ?Sized, R: Rng + ?Sized>(
    bg: &B,
    kernel: &ExponentialKernel,
    rng: &mut R,
) -> Result<EventSequence> {
    if !kernel.is_stable() {
        return Err(Error::UnstableKernel(kernel.branching_ratio()));
    }
    let window = bg.window();
    let (start, end) = (window.start(), window.end());
    let step = window.length() / HORIZON_STEPS;
    let mut breaks: Vec<f64> = bg
        .breakpoints()
        .into_iter()
        .filter(|b| *b > start && *b < end)
        .collect();
    breaks.sort_by(f64::total_cmp);

    let alphas = kernel.alphas();
    let betas = kernel.betas();
    let mut excitation = vec![0.0; kernel.order()];
    let decay = |ex: &mut [f64], dt: f64| {
        for (e, b) in ex.iter_mut().zip(betas) {
            *e *= (-b * dt).exp();
        }
    };

    let mut times = Vec::new();
    let mut t = start;
    while t < end {
        let next_break = breaks.get(breaks.partition_point(|b| *b <= t)).copied().unwrap_or(end);
        let horizon = next_break.min(t + step).min(end);
        let bg_bound = bg.upper_bound(t, horizon);
        if !(bg_bound.is_finite() && bg_bound >= 0.0) {
            return Err(Error::UnboundedBackground(t));
        }
        let bound = bg_bound + excitation.iter().sum::<f64>();
        let wait = if bound > 0.0 {
            -(1.0 - rng.random::<f64>()).ln() / bound
        } else {
            f64::INFINITY
        };
        if t + wait >= horizon {
            decay(&mut excitation, horizon - t);
            t = horizon;
            continue;
        }
        decay(&mut excitation, wait);
        t += wait;
        let lambda = bg.rate(t) + excitation.iter().sum::<f64>();
        if rng.random::<f64>() * bound <= lambda && times.last().is_none_or(|last| t > *last) {
            times.push(t);
            for (e, (a, b)) in excitation.iter_mut().zip(alphas.iter().zip(betas)) {
                *e += a * b;
            }
        }
    }
    EventSequence::new(times, window)
}

/// Replicates `0..count`, each on its own RNG stream, computed in parallel.
pub fn simulate_replicates<B: Background + ?Sized>(
    bg: &B,
    kernel: &ExponentialKernel,
    seed: u64,
    count: usize,
) -> Result<Vec<EventSequence>> {
    (0..count as u64)
        .into_par_iter()
        .map(|r| simulate_with_rng(bg, kernel, &mut replicate_rng(seed, r)))
        .collect()
}

/// Contents of `manifest.json` for a batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub replicates: usize,
    pub window: ObservationWindow,
    pub kernel: ExponentialKernel,
    pub background: ScenarioSpec,
    pub files: Vec<String>,
}

/// Writes `replicate_NNNN.csv` files and `manifest.json` into `dir`.
pub fn write_batch(
    dir: impl AsRef<Path>,
    window: ObservationWindow,
    scenario: &ScenarioSpec,
    kernel: &ExponentialKernel,
    seed: u64,
    replicates: usize,
) -> Result<Manifest> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let bg = scenario.build(window)?;
    let seqs = simulate_replicates(bg.as_ref(), kernel, seed, replicates)?;
    let files: Vec<String> = (0..replicates).map(|r| format!("replicate_{r:04}.csv")).collect();
    seqs.par_iter()
        .zip(&files)
        .try_for_each(|(seq, name)| seq.to_path(dir.join(name)))?;
    let manifest = Manifest {
        seed,
        replicates,
        window,
        kernel: kernel.clone(),
        background: scenario.clone(),
        files,
    };
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    std::fs::write(dir.join("manifest.json"), json)?;
    Ok(manifest)
}
