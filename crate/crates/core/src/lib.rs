//! Exact arithmetic for the horizontal component `x` of the Peano curve:
//! evaluation and block structure, quadratic variation along Lebesgue
//! partitions of grids `cℤ + r`, level crossings, truncated variation,
//! the limit constant `C_p` and the local-time profile.
//!
//! All quantities are exact rationals (or `a + b√2` offsets) computed by
//! descent over the nine-fold block structure of `x`. Loops that fan out
//! over independent work take an [`Exec`]; with the `parallel` feature off
//! every path runs sequentially and returns identical results.

pub mod curve;
pub mod error;
pub mod exact;
pub mod exec;
pub mod lebesgue;
pub mod limits;
pub mod local_time;

pub use curve::{x_eval, y_eval, TernaryTime};
pub use error::{Error, Result};
pub use exact::{ExactReal, Rational};
pub use exec::Exec;
pub use lebesgue::{crossings, hit_sequence, qv, truncated_variation, CrossingCounts, Grid};
pub use limits::{c_p_limit, GridFamily};
pub use local_time::{local_time_profile, phi, LocalTimeProfile, TestFunction};
