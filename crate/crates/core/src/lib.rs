//! Hawkes process estimation with a time-dependent background rate.
//!
//! The crate fits self-exciting point processes whose triggering kernel is a
//! sum of exponentials and whose background rate is either constant,
//! piecewise linear, or a log-linear cubic B-spline with variable-width
//! bases estimated by empirical Bayes. Around the estimators sit a
//! thinning simulator, time-rescaling goodness-of-fit tests, and a tick-data
//! filter that turns raw transactions into market-movement events.

// `!(x > 0.0)` rejects NaN along with nonpositive values; indexed loops
// mirror the banded-matrix algebra.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod background;
pub mod banded;
pub mod basis;
pub mod cli;
pub mod error;
pub mod estimate;
pub mod events;
pub mod gof;
pub mod kernel;
pub mod likelihood;
pub mod simulate;
pub mod tickdata;

#[cfg(test)]
mod testutil;

pub use background::{Background, BackgroundModel, ConstantBackground, PiecewiseLinearBackground, SplineBackground};
pub use basis::NaturalTimeBasis;
pub use error::{Error, Result};
pub use events::{EventSequence, ObservationWindow};
pub use kernel::ExponentialKernel;
