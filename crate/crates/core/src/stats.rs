//! Small descriptive statistics shared across modules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spreads below this are treated as zero when normalizing by σ.
pub const ZERO_SPREAD: f64 = 1e-10;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation (divides by n).
pub fn population_std(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Divides each value by the population σ of the vector, or maps every value
/// to zero when σ is below [`ZERO_SPREAD`].
pub fn scale_by_std(xs: &[f64]) -> Vec<f64> {
    let sigma = population_std(xs);
    if sigma < ZERO_SPREAD {
        vec![0.0; xs.len()]
    } else {
        xs.iter().map(|x| x / sigma).collect()
    }
}

/// Percentile of already sorted data, linear interpolation between order
/// statistics at rank `q * (n - 1)`.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let rank = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = rank - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

fn sorted_copy(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("median input"));
    }
    Ok(percentile_sorted(&sorted_copy(values), 0.5))
}

/// Box-plot summary: median with 10th/90th percentile whiskers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub median: f64,
    pub p10: f64,
    pub p90: f64,
    pub n: usize,
    /// Values strictly outside `[p10, p90]`, in input order.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub outliers: Vec<f64>,
}

pub fn aggregate_boxstats(values: &[f64]) -> Result<BoxStats> {
    if values.is_empty() {
        return Err(Error::Empty("box statistics input"));
    }
    let sorted = sorted_copy(values);
    let p10 = percentile_sorted(&sorted, 0.1);
    let p90 = percentile_sorted(&sorted, 0.9);
    let outliers = values
        .iter()
        .copied()
        .filter(|&v| v < p10 || v > p90)
        .collect();
    Ok(BoxStats {
        median: percentile_sorted(&sorted, 0.5),
        p10,
        p90,
        n: values.len(),
        outliers,
    })
}
