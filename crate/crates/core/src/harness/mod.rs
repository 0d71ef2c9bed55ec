//! Sweeps over block lengths, exponent regression and theorem-level reports.

pub mod regression;
pub mod report;
pub mod sweep;

pub use regression::{estimate_exponent, fit_log_slope, ExponentEstimate, MIN_FIT_POINTS};
pub use report::{theorem_report, Check, CheckStatus, ReportConfig, TheoremReport};
pub use sweep::{
    read_sweep_csv, run_sweep, write_sweep_csv, write_sweep_outputs, SweepConfig, SweepRecord,
    SweepSummary,
};
