//! Parameter sweeps, alpha/beta tuning and trace analyses.

pub mod analysis;
pub mod sweep;
pub mod tune;

pub use analysis::{
    correlation_p_value, deviation_report, pearson, position_change_series, position_change_stats,
    ChangeCounts, ChangeSeries, Correlation, DeviationReport, Observation,
};
pub use sweep::{aggregate, marginal, marginal_means, sweep, Combination, SweepRow, SweepSpec};
pub use tune::{race, tune_alpha_beta, TuneOutcome, TuneRow, TuneSpec};
