//! Statistical comparison of evaluation results: per-class summaries,
//! histograms, two-sample Kolmogorov-Smirnov tests, correlation and cutoff
//! curves.

pub mod export;
pub mod ks;
pub mod report;
pub mod summary;

pub use ks::{ks_heatmap, ks_statistic, ks_two_sample, ks_two_sample_binned, KsHeatmap, KsMode, KsOptions, KsResult};
pub use report::{Entry, EvalReport, ReportMetadata, Skip, SweepCurve};
pub use summary::{
    cutoff_curve, cutoff_fraction, histogram, pearson, per_class_aggregate, summarize, ClassRow, Summary, OVERALL,
};
