//! Observation windows and event sequences.
//!
//! An [`EventSequence`] is the universal input of the crate: strictly
//! increasing event times inside a closed window `[start, end]`. Events that
//! fall exactly on either endpoint are accepted.
//!
//! The text format is a single column of times preceded by two header lines:
//!
//! ```text
//! # start=0
//! # end=22200
//! 0.731
//! 12.4
//! ```
//!
//! Times are written with the shortest decimal representation that parses
//! back to the same `f64`, so a read/write cycle is exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed observation interval `[start, end]` in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationWindow {
    start: f64,
    end: f64,
}

impl ObservationWindow {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !start.is_finite() || !end.is_finite() {
            return Err(Error::InvalidInput(format!(
                "window bounds must be finite, got [{start}, {end}]"
            )));
        }
        if start >= end {
            return Err(Error::InvalidInput(format!(
                "window start {start} must be before end {end}"
            )));
        }
        Ok(Self { start, end })
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t <= self.end
    }

    pub(crate) fn check_contains(&self, t: f64) -> Result<()> {
        if self.contains(t) {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "t = {t} is outside the observation window [{}, {}]",
                self.start, self.end
            )))
        }
    }
}

/// Strictly increasing event times within an observation window.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSequence {
    times: Vec<f64>,
    window: ObservationWindow,
}

impl EventSequence {
    pub fn new(times: Vec<f64>, window: ObservationWindow) -> Result<Self> {
        for (i, &t) in times.iter().enumerate() {
            if !t.is_finite() || !window.contains(t) {
                return Err(Error::InvalidInput(format!(
                    "event {i} at t = {t} lies outside [{}, {}]",
                    window.start, window.end
                )));
            }
            if i > 0 && times[i - 1] >= t {
                return Err(Error::InvalidInput(format!(
                    "event times must be strictly increasing (index {i}: {} >= {t})",
                    times[i - 1]
                )));
            }
        }
        Ok(Self { times, window })
    }

    pub fn empty(window: ObservationWindow) -> Self {
        Self {
            times: Vec::new(),
            window,
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn window(&self) -> ObservationWindow {
        self.window
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Mean event rate `n / (T - S)`.
    pub fn mean_rate(&self) -> f64 {
        self.times.len() as f64 / self.window.length()
    }

    /// Boundary `t_i` for `i = 0..=n+1`, with `t_0 = S` and `t_{n+1} = T`.
    pub fn boundary(&self, i: usize) -> f64 {
        let n = self.times.len();
        match i {
            0 => self.window.start,
            i if i == n + 1 => self.window.end,
            i => self.times[i - 1],
        }
    }

    /// Index of the inter-event segment `[t_i, t_{i+1})` containing `t`.
    ///
    /// Segments run `i = 0..=n`; the window end belongs to segment `n`.
    pub fn segment_index(&self, t: f64) -> usize {
        self.times.partition_point(|&x| x <= t)
    }

    /// Segment lengths `t_{i+1} - t_i` for `i = 0..=n`.
    pub fn segment_lengths(&self) -> Vec<f64> {
        let n = self.times.len();
        (0..=n).map(|i| self.boundary(i + 1) - self.boundary(i)).collect()
    }

    /// Same events expressed in a time unit `factor` times larger
    /// (`factor = 60` converts seconds to minutes).
    pub fn rescaled(&self, factor: f64) -> Result<Self> {
        let window = ObservationWindow::new(self.window.start / factor, self.window.end / factor)?;
        Self::new(self.times.iter().map(|t| t / factor).collect(), window)
    }

    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut start = None;
        let mut end = None;
        let mut times = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(header) = trimmed.strip_prefix('#') {
                let (key, value) = header.split_once('=').ok_or_else(|| Error::Parse {
                    line: line_no,
                    message: format!("expected `# key=value` header, got `{trimmed}`"),
                })?;
                let value: f64 = value.trim().parse().map_err(|_| Error::Parse {
                    line: line_no,
                    message: format!("header value `{}` is not a number", value.trim()),
                })?;
                match key.trim() {
                    "start" => start = Some(value),
                    "end" => end = Some(value),
                    other => {
                        return Err(Error::Parse {
                            line: line_no,
                            message: format!("unknown header key `{other}`"),
                        })
                    }
                }
                continue;
            }
            let t: f64 = trimmed.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("`{trimmed}` is not an event time"),
            })?;
            times.push(t);
        }
        let (Some(start), Some(end)) = (start, end) else {
            return Err(Error::Parse {
                line: 1,
                message: "missing `# start=` / `# end=` header lines".into(),
            });
        };
        Self::new(times, ObservationWindow::new(start, end)?)
    }

    pub fn write_csv<W: Write>(&self, mut writer: W) -> Result<()> {
        writeln!(writer, "# start={}", self.window.start)?;
        writeln!(writer, "# end={}", self.window.end)?;
        for t in &self.times {
            writeln!(writer, "{t}")?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(BufReader::new(File::open(path)?))
    }

    pub fn to_path(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(BufWriter::new(File::create(path)?))
    }
}
