//! Observation statistics on networks and the evaluation harness.

mod cca;
mod eval;
mod observe;

pub use cca::{cca, CcaResult};
pub use eval::{
    ablation_run, baseline_run, evaluate, held_out_truth, holdout_split, run_variant, ContributionTable, Metrics,
    MetricsReport, Variant,
};
pub use observe::{
    sampling_test, social_correlation, temporal_correlation, GroupRatio, Neighborhood, RateReport, RateRow,
    SamplingConfig, SamplingRow, SamplingTestReport, SliceSelection,
};
