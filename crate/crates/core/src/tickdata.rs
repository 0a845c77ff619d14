//! Transaction records to market-movement events.
//!
//! Pipeline for one session: keep the contract with the largest traded
//! volume, drop trades that do not move the price, keep a price move when it
//! continues the direction of the previous move or exceeds one tick, then
//! spread the integer-second timestamps with uniform jitter.
//!
//! Input is CSV with header `timestamp,price,volume,contract`, timestamps in
//! integer seconds and prices in integer currency units.

use std::collections::BTreeMap;
use std::io::Read;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{EventSequence, ObservationWindow};
use crate::simulate::replicate_rng;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TickRecord {
    pub timestamp: i64,
    pub price: i64,
    pub volume: u64,
    pub contract: String,
}

/// Which price change a move's direction is compared with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignReference {
    /// The previous record that changed the price.
    #[default]
    PreviousChange,
    /// The immediately preceding record, whose change may be zero.
    PreviousTransaction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    /// Session open, in the records' timestamp units.
    pub start: i64,
    /// Session close.
    pub end: i64,
    pub tick_size: i64,
    pub jitter_seed: u64,
    pub sign_reference: SignReference,
}

impl Default for SessionConfig {
    /// A 9:00–15:10 session with timestamps counted from the open, tick 5.
    fn default() -> Self {
        Self {
            start: 0,
            end: 22_200,
            tick_size: 5,
            jitter_seed: 0,
            sign_reference: SignReference::default(),
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tick_size <= 0 {
            return Err(Error::Config(format!("tick size must be > 0, got {}", self.tick_size)));
        }
        if self.end <= self.start {
            return Err(Error::Config(format!(
                "session end {} must be after start {}",
                self.end, self.start
            )));
        }
        Ok(())
    }

    pub fn window(&self) -> Result<ObservationWindow> {
        ObservationWindow::new(self.start as f64, self.end as f64)
    }

    fn contains(&self, t: i64) -> bool {
        t >= self.start && t <= self.end
    }
}

/// Reads and validates records; errors carry the 1-based file line.
pub fn read_ticks<R: Read>(reader: R) -> Result<Vec<TickRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out: Vec<TickRecord> = Vec::new();
    let mut last_time: BTreeMap<String, i64> = BTreeMap::new();
    for (idx, row) in rdr.deserialize::<TickRecord>().enumerate() {
        // header is line 1
        let line = idx + 2;
        let rec = row.map_err(|e| Error::Parse {
            line: e.position().map_or(line, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let bad = |message: String| Error::Parse { line, message };
        if rec.price <= 0 {
            return Err(bad(format!("price must be > 0, got {}", rec.price)));
        }
        if rec.volume == 0 {
            return Err(bad("volume must be > 0".into()));
        }
        if let Some(prev) = last_time.get(&rec.contract) {
            if rec.timestamp < *prev {
                return Err(bad(format!(
                    "timestamp {} precedes {} for contract {}",
                    rec.timestamp, prev, rec.contract
                )));
            }
        }
        last_time.insert(rec.contract.clone(), rec.timestamp);
        out.push(rec);
    }
    Ok(out)
}

/// Contract with the largest total volume inside the session; ties go to
/// the lexicographically smallest id.
pub fn select_active_contract(records: &[TickRecord], session: &SessionConfig) -> Result<String> {
    let mut volume: BTreeMap<&str, u64> = BTreeMap::new();
    for r in records.iter().filter(|r| session.contains(r.timestamp)) {
        *volume.entry(&r.contract).or_default() += r.volume;
    }
    // BTreeMap iterates ids in ascending order, so the first maximum wins ties
    let mut best: Option<(&str, u64)> = None;
    for (id, v) in volume {
        if best.is_none_or(|(_, bv)| v > bv) {
            best = Some((id, v));
        }
    }
    best.map(|(id, _)| id.to_string())
        .ok_or_else(|| Error::InvalidInput("no transactions inside the session".into()))
}

/// Timestamps of the retained price moves, in input order.
pub fn filter_movements(records: &[TickRecord], cfg: &SessionConfig) -> Vec<i64> {
    let mut kept = Vec::new();
    let mut prev_price: Option<i64> = None;
    let mut last_change = 0i64;
    for r in records {
        let delta = prev_price.map_or(0, |p| r.price - p);
        prev_price = Some(r.price);
        if delta == 0 {
            if cfg.sign_reference == SignReference::PreviousTransaction {
                last_change = 0;
            }
            continue;
        }
        let continues = last_change != 0 && delta.signum() == last_change.signum();
        if continues || delta.abs() > cfg.tick_size {
            kept.push(r.timestamp);
        }
        last_change = delta;
    }
    kept
}

/// Each time plus an independent Uniform(−0.5, 0.5), then sorted.
pub fn jitter_timestamps(times: &[i64], seed: u64) -> Vec<f64> {
    let mut rng = replicate_rng(seed, 0);
    let mut out: Vec<f64> = times.iter().map(|&t| t as f64 + rng.random_range(-0.5..0.5)).collect();
    out.sort_by(f64::total_cmp);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSummary {
    pub contract: Option<String>,
    pub session_records: usize,
    pub contract_records: usize,
    pub retained: usize,
    /// `retained / contract_records`, zero for an empty session.
    pub retained_fraction: f64,
}

/// Full pipeline for one session.
///
/// Jittered times that leave the session window are reflected back across
/// the nearer boundary so the count is preserved.
pub fn extract_events(records: &[TickRecord], cfg: &SessionConfig) -> Result<(EventSequence, FilterSummary)> {
    cfg.validate()?;
    let window = cfg.window()?;
    let session_records = records.iter().filter(|r| cfg.contains(r.timestamp)).count();
    if session_records == 0 {
        let summary = FilterSummary {
            contract: None,
            session_records: 0,
            contract_records: 0,
            retained: 0,
            retained_fraction: 0.0,
        };
        return Ok((EventSequence::empty(window), summary));
    }
    let contract = select_active_contract(records, cfg)?;
    let chosen: Vec<TickRecord> = records
        .iter()
        .filter(|r| r.contract == contract && cfg.contains(r.timestamp))
        .cloned()
        .collect();
    let kept = filter_movements(&chosen, cfg);
    let (lo, hi) = (window.start(), window.end());
    let mut times: Vec<f64> = jitter_timestamps(&kept, cfg.jitter_seed)
        .into_iter()
        .map(|t| {
            if t < lo {
                2.0 * lo - t
            } else if t > hi {
                2.0 * hi - t
            } else {
                t
            }
        })
        .collect();
    times.sort_by(f64::total_cmp);
    let summary = FilterSummary {
        contract: Some(contract),
        session_records,
        contract_records: chosen.len(),
        retained: times.len(),
        retained_fraction: times.len() as f64 / chosen.len() as f64,
    };
    Ok((EventSequence::new(times, window)?, summary))
}
