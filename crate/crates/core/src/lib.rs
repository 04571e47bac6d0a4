//! Simulation and ergodicity diagnostics for Markov-Feller semigroups on
//! the half-line `[0, ∞)`.
//!
//! * [`measure`]: state points, test functions, finitely supported measures
//!   and the bounded-Lipschitz distance.
//! * [`exact_ctmc`]: a chain with closed-form transition probabilities that
//!   is asymptotically stable but lacks the e-property at `0`.
//! * [`ifs_jump`]: iterated function systems with place-dependent
//!   probabilities and exponential jump times.
//! * [`montecarlo`]: seeded, parallel estimators with Hoeffding intervals.
//! * [`diagnostics`]: eventual-continuity profiles, e-property witnesses,
//!   lower-bound scans, stability reports and assumption checkers.

pub mod diagnostics;
pub mod error;
pub mod exact_ctmc;
pub mod ifs_jump;
pub mod measure;
pub mod montecarlo;
pub mod stream;

pub use error::{Error, Result};
pub use measure::{bl_distance, bump_function, pair, Ball, EmpiricalMeasure, Interval, StatePoint, TestFunction};
pub use montecarlo::{Estimate, McConfig, MarkovProcess};
