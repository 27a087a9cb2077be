//! Stopping times, stopped moments, exceedance and law-of-large-numbers
//! estimators, coupling-error moments, chaos surrogates, density
//! discrepancies and rate regressions.

mod discrepancy;
mod fit;
mod lln;
mod moments;
mod stopping;

pub use discrepancy::density_discrepancy;
pub use fit::{log_log_fit, rate_fit, RateFit};
pub use lln::{lln_deviation, LlnRecord};
pub use moments::{chaos_statistics, coupling_error, coupling_error_moment, ChaosRecord, Estimate};
pub use stopping::{exceed_probability, stopped_moment, stopped_stats, stopping_time, threshold, StoppedStats, StoppingTime};
