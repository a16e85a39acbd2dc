//! Two-stage active-set method for smooth minimization over a box.
//!
//! A solve alternates an active-set move, which fixes the variables estimated
//! to be at a bound, with a truncated-Newton step on the remaining ones, all
//! inside a non-monotone line-search framework. The crate also ships a
//! projected-gradient baseline, a small problem corpus and a
//! performance-profile harness.

pub mod activeset;
pub mod bench;
pub mod direction;
pub mod driver;
pub mod error;
pub mod nonmonotone;
pub mod problem;
pub mod problems;

pub use activeset::{ActiveSetPartition, EpsilonState, IndexClass, MultiplierEstimates};
pub use driver::{solve, solve_with_observer, SolveEvent, SolveReport, SolveStatus, SolverConfig};
pub use error::{Error, Result};
pub use problem::{BoxBounds, EvalCounters, KnownOptimum, Objective, ProblemInstance};
