//! Outcome measures: therapist-patient deviation, ankle workspace, step
//! geometry, effort and paired statistics.

pub mod deviation;
pub mod dtw;
pub mod effort;
pub mod report;
pub mod spatial;
pub mod stats;

pub use deviation::{
    absolute_temporal_deviation, spatial_deviation, stride_deviation, temporal_deviation, StrideDeviation,
};
pub use dtw::{dtw_align, Alignment, WarpPath};
pub use effort::{age_predicted_max_hr, hr_percent_max, BorgRpe};
pub use report::{MetricRow, MetricsReport, TTestRow, MEAN_BLOCK};
pub use spatial::{convex_hull, hull_area, step_height, step_length, workspace_area, AreaMode};
pub use stats::{aggregate_blocks, paired_t_test, BlockAggregate, TTestResult};
