//! Closed-loop scenario execution and metrics.
//!
//! Scripted objects follow timed waypoints; the ego replans at a fixed
//! cadence with one of the three methods, follows the funnel path between
//! cycles, and accrues completion, planning and collision metrics.

mod metrics;
mod run;
mod scenario;
mod synthetic;

pub use metrics::*;
pub use run::*;
pub use scenario::*;
pub use synthetic::*;
