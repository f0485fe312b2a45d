//! Evaluation of hierarchical object / part / subpart segmentation.
//!
//! The crate scores model outputs against ground truth with per-level mIoU,
//! the spatial consistency score (mean child-in-parent containment over
//! related prediction pairs), the semantic consistency score (share of
//! triple-foreground pixels whose labels form a valid taxonomy chain) and
//! yes/no recognition accuracy. It also computes dataset shape statistics and
//! the IoU versus region-size regression.

pub mod analysis;
pub mod dataset;
pub mod exec;
pub mod fraction;
pub mod geometry;
pub mod metrics;
pub mod taxonomy;

pub use exec::Execution;
pub use fraction::{Fraction, RatioMean, Tally};
pub use taxonomy::{CategoryPath, Level, Specificity, Taxonomy};
