//! Design evaluation: sample metrics, HT estimation, variance estimators, the
//! kernel MSE bound and the Monte Carlo harness.

mod estimate;
mod kernel;
mod metrics;
mod montecarlo;

pub use estimate::{ht_total, local_mean_variance, srs_variance};
pub use kernel::{check_rkhs_bound, energy_kernel, mmd_squared, BoundCheck};
pub use metrics::{
    balance_deviation, gram_pseudo_inverse, local_balance, local_balance_with, spatial_balance,
    voronoi, VoronoiAssignment, PINV_RELATIVE_CUTOFF,
};
pub use montecarlo::{
    coverage, monte_carlo, DesignSummary, MeanSd, MetricContext, MetricsReport, SampleMetrics,
    SampleRow, TargetEstimate, TargetSummary, CI_MULTIPLIER,
};
