//! Statistics over finished runs.

mod bootstrap;
mod stats;
mod summary;
mod variance;

pub use bootstrap::{bootstrap_ci, bootstrap_table_ci, quantile_sorted, resample_table, BootstrapSpec, Interval, DEFAULT_RESAMPLES};
pub use stats::{cohens_d, holm_bonferroni, mean, sample_std, sample_var, welch_test, HolmResult, TestResult, ALPHA, VARIANCE_FLOOR};
pub use summary::{curve_band, learning_curve, summarize_batch, BatchSummary, SeedValue};
pub use variance::{
    anchored_decomposition, crossed_anova, crossed_anova_with_ci, mean_squares, AnchoredDecomposition, Components,
    CrossedDecomposition, MeanSquares, ShareIntervals,
};
