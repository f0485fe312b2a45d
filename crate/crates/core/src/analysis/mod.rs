//! Dataset characterization and the IoU versus region-size regression.

mod boxplot;
mod plots;
mod regression;
mod stats;

pub use boxplot::{boxplot, quantile, BoxplotSummary};
pub use plots::{emit_plots, regression_csv, stats_artifacts, Artifact, PlotFormat};
pub use regression::{
    fit_iou_size, ln_gamma, regularized_incomplete_beta, student_t_two_sided, RegressionResult,
    SIGNIFICANCE,
};
pub use stats::{
    compute_stats, subpart_records, BucketCounts, DatasetStats, Distribution, Factor, GroupStats,
    HoleCounts, PartHistogram, PolygonCounts, ShapeSplit, SubpartRecord,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::metrics::QueryScore;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AnalysisError {
    #[error("no values")]
    Empty,
    #[error("non-finite value")]
    NonFinite,
    #[error("regression needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("region sizes must be positive")]
    NonPositiveSize,
    #[error("all region sizes are equal; slope is undefined")]
    DegenerateFit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupBy {
    #[default]
    Level,
    Category,
    All,
}

/// `(ground-truth area, iou)` points keyed by group. Queries whose category
/// is absent from the image have no region size and are left out.
pub fn regression_points(
    scores: &[QueryScore],
    dataset: &Dataset,
    group_by: GroupBy,
) -> BTreeMap<String, Vec<(f64, f64)>> {
    let mut groups: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for s in scores.iter().filter(|s| s.truth_area > 0) {
        let key = match group_by {
            GroupBy::Level => format!("{}/{}", s.specificity.as_str(), s.level.as_str()),
            GroupBy::Category => {
                format!("{}/{}", s.specificity.as_str(), dataset.path_of(s.category))
            }
            GroupBy::All => s.specificity.as_str().to_string(),
        };
        groups
            .entry(key)
            .or_default()
            .push((s.truth_area as f64, s.iou.value()));
    }
    groups
}
