//! Baseline solver, suite runner and performance profiles.

mod baseline;
mod profile;
mod suite;

pub use baseline::{projected_gradient_solve, BaselineConfig};
pub use profile::{performance_profile, write_profile_csv, Profile, ProfileCurve, ProfileMetric};
pub use suite::{run_suite, MetricsRow, MetricsTable, SolverKind, SuiteOptions};
