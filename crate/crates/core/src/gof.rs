//! Time-rescaling residuals and Kolmogorov–Smirnov tests.
//!
//! Under the true model the compensators `Λ_i = ∫_{t_i}^{t_{i+1}} λ` of the
//! inter-event intervals are i.i.d. unit exponentials, so
//! `τ_i = 1 − e^{−Λ_i}` is uniform on `[0, 1)`. Each session gives a KS
//! p-value; the collection of p-values is itself tested for uniformity.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::background::Background;
use crate::error::{Error, Result};
use crate::events::EventSequence;
use crate::kernel::ExponentialKernel;
use crate::likelihood::interval_compensators;

pub const MIN_KS_SAMPLES: usize = 5;
pub const MIN_SESSIONS: usize = 10;
pub const SIGNIFICANCE: f64 = 0.05;

/// `τ_i = 1 − exp(−∫_{t_i}^{t_{i+1}} λ)` for `i = 1..n−1`.
pub fn rescaled_intervals<B: Background + ?Sized>(
    seq: &EventSequence,
    kernel: &ExponentialKernel,
    bg: &B,
) -> Result<Vec<f64>> {
    if seq.len() < 2 {
        log::warn!("{} events give no inter-event intervals to rescale", seq.len());
        bg.check_sequence(seq)?;
        return Ok(Vec::new());
    }
    Ok(interval_compensators(seq, kernel, bg)?
        .into_iter()
        .map(|c| -(-c).exp_m1())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub n: usize,
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample KS test against Uniform(0, 1).
///
/// The p-value is the asymptotic Kolmogorov tail at Stephens' effective
/// sample size, `(√N + 0.12 + 0.11/√N)·D`; plain `√N·D` is conservative at
/// a few hundred samples, enough for a second-level test over many
/// sessions to flag it.
pub fn ks_test_uniform(values: &[f64]) -> Result<KsResult> {
    if values.len() < MIN_KS_SAMPLES {
        return Err(Error::TooFewSamples {
            need: MIN_KS_SAMPLES,
            got: values.len(),
        });
    }
    if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidInput(format!("KS values must lie in [0, 1], got {v}")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let statistic = sorted
        .iter()
        .enumerate()
        .map(|(i, x)| ((i + 1) as f64 / n - x).max(x - i as f64 / n))
        .fold(0.0, f64::max);
    Ok(KsResult {
        n: sorted.len(),
        statistic,
        p_value: kolmogorov_survival((n.sqrt() + 0.12 + 0.11 / n.sqrt()) * statistic),
    })
}

/// `P(K > z)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(z: f64) -> f64 {
    if z <= 0.0 {
        return 1.0;
    }
    let p = if z < 1.18 {
        // Jacobi theta form converges fast for small z
        let mut cdf = 0.0;
        for k in 1..=100 {
            let j = (2 * k - 1) as f64;
            cdf += (-j * j * std::f64::consts::PI.powi(2) / (8.0 * z * z)).exp();
        }
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / z * cdf
    } else {
        let mut s = 0.0;
        for k in 1..=100 {
            let k = k as f64;
            let sign = if k as u64 % 2 == 1 { 1.0 } else { -1.0 };
            s += sign * (-2.0 * k * k * z * z).exp();
        }
        2.0 * s
    };
    p.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondLevel {
    /// Uniformity of the p-values is not rejected at the 5% level.
    pub pass: bool,
    pub sessions: usize,
    pub statistic: f64,
    pub p_value: f64,
}

/// KS uniformity test on per-session p-values; passes iff `p > 0.05`.
pub fn second_level_ks(p_values: &[f64]) -> Result<SecondLevel> {
    if p_values.len() < MIN_SESSIONS {
        return Err(Error::TooFewSamples {
            need: MIN_SESSIONS,
            got: p_values.len(),
        });
    }
    let ks = ks_test_uniform(p_values)?;
    Ok(SecondLevel {
        pass: ks.p_value > SIGNIFICANCE,
        sessions: ks.n,
        statistic: ks.statistic,
        p_value: ks.p_value,
    })
}

/// First-level test of one fitted session.
pub fn session_ks<B: Background + ?Sized>(seq: &EventSequence, kernel: &ExponentialKernel, bg: &B) -> Result<KsResult> {
    ks_test_uniform(&rescaled_intervals(seq, kernel, bg)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRow {
    pub session: String,
    pub n: usize,
    pub statistic: f64,
    pub p_value: f64,
}

/// `session,n,statistic,p_value` rows.
pub fn write_session_csv<W: Write>(rows: &[SessionRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Rescaled intervals, one per line, under a `tau` header.
pub fn write_intervals_csv<W: Write>(taus: &[f64], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["tau"])?;
    for t in taus {
        w.write_record([t.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
