use serde::{Deserialize, Serialize};

use super::AnalysisError;

/// Five-number summary with Tukey whiskers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxplotSummary {
    pub n: usize,
    pub mean: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub whisker_lo: f64,
    pub whisker_hi: f64,
    /// Values outside `[q25 - 1.5 IQR, q75 + 1.5 IQR]`, ascending.
    pub outliers: Vec<f64>,
}

/// Quantile of sorted data by linear interpolation between closest ranks
/// (position `p * (n - 1)`).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (sorted[hi] - sorted[lo]) * frac
    }
}

pub fn boxplot(values: &[f64]) -> Result<BoxplotSummary, AnalysisError> {
    if values.is_empty() {
        return Err(AnalysisError::Empty);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(AnalysisError::NonFinite);
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    Ok(summarize_sorted(&sorted))
}

pub(crate) fn summarize_sorted(sorted: &[f64]) -> BoxplotSummary {
    let q25 = quantile(sorted, 0.25);
    let median = quantile(sorted, 0.5);
    let q75 = quantile(sorted, 0.75);
    let iqr = q75 - q25;
    let (fence_lo, fence_hi) = (q25 - 1.5 * iqr, q75 + 1.5 * iqr);
    let inside = |v: &&f64| **v >= fence_lo && **v <= fence_hi;
    let whisker_lo = *sorted
        .iter()
        .find(inside)
        .expect("median lies within the fences");
    let whisker_hi = *sorted
        .iter()
        .rev()
        .find(inside)
        .expect("median lies within the fences");
    BoxplotSummary {
        n: sorted.len(),
        mean: crate::fraction::stable_sum(sorted.iter().copied()) / sorted.len() as f64,
        q25,
        median,
        q75,
        whisker_lo,
        whisker_hi,
        outliers: sorted.iter().copied().filter(|v| !inside(&v)).collect(),
    }
}
