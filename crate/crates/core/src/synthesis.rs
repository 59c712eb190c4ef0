//! Inference synthesis: forecast-implied inferences, the weighted network
//! inference and its confidence bands.
//!
//! Inferences are plain `Vec<f64>`: one element for regression, one
//! probability per label for classification. Everything here is evaluated
//! component-wise; covariance between labels is ignored.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{regrets_to_weights, PotentialParams};

/// Quantiles of the 1σ and 2σ limits of a Gaussian.
pub const DEFAULT_QUANTILES: [f64; 4] = [0.0228, 0.1587, 0.8413, 0.9772];

/// Probabilities are clamped to `[ε, 1 - ε]` before taking a logit.
pub const LOGIT_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Regression,
    Classification,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Regression => "regression",
            TaskKind::Classification => "classification",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regression" => Ok(TaskKind::Regression),
            "classification" => Ok(TaskKind::Classification),
            other => Err(Error::Config(format!("unknown task type {other:?}"))),
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Logit of `p` after clamping to `[eps, 1 - eps]`.
pub fn logit(p: f64, eps: f64) -> f64 {
    let p = p.clamp(eps, 1.0 - eps);
    (p / (1.0 - p)).ln()
}

/// One participant's inference with its label set.
///
/// Regression inferences carry a single unlabeled value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledInference {
    pub producer: usize,
    pub labels: Vec<String>,
    pub values: Vec<f64>,
}

impl LabeledInference {
    pub fn scalar(producer: usize, value: f64) -> Self {
        LabeledInference {
            producer,
            labels: Vec::new(),
            values: vec![value],
        }
    }

    pub fn labeled<S: Into<String>>(producer: usize, pairs: impl IntoIterator<Item = (S, f64)>) -> Self {
        let (labels, values) = pairs.into_iter().map(|(l, v)| (l.into(), v)).unzip();
        LabeledInference {
            producer,
            labels,
            values,
        }
    }

    /// Decodes an inference reported in logit form.
    pub fn from_logits<S: Into<String>>(
        producer: usize,
        pairs: impl IntoIterator<Item = (S, f64)>,
    ) -> Self {
        let mut inf = Self::labeled(producer, pairs);
        for v in &mut inf.values {
            *v = sigmoid(*v);
        }
        inf
    }

    pub fn validate(&self, kind: TaskKind) -> Result<()> {
        match kind {
            TaskKind::Regression => {
                if self.values.len() != 1 {
                    return Err(Error::LengthMismatch {
                        what: "regression inference",
                        expected: 1,
                        found: self.values.len(),
                    });
                }
                if !self.values[0].is_finite() {
                    return Err(Error::param("inference", self.values[0], "must be finite"));
                }
            }
            TaskKind::Classification => {
                if self.labels.len() != self.values.len() {
                    return Err(Error::LengthMismatch {
                        what: "labels",
                        expected: self.values.len(),
                        found: self.labels.len(),
                    });
                }
                for &v in &self.values {
                    if !(0.0..=1.0).contains(&v) {
                        return Err(Error::param("probability", v, "must lie in [0, 1]"));
                    }
                }
                let total: f64 = self.values.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::param("probability sum", total, "must be 1"));
                }
            }
        }
        Ok(())
    }
}

/// Aligns classification inferences onto the sorted union of their labels.
/// Labels a producer did not report get probability zero; reported values
/// are kept as they are.
pub fn align_label_sets(raw: &[LabeledInference]) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut union = BTreeSet::new();
    for inf in raw {
        if inf.labels.len() != inf.values.len() {
            return Err(Error::LengthMismatch {
                what: "labels",
                expected: inf.values.len(),
                found: inf.labels.len(),
            });
        }
        let mut seen = BTreeSet::new();
        for label in &inf.labels {
            if !seen.insert(label.as_str()) {
                return Err(Error::DuplicateLabel {
                    label: label.clone(),
                    producer: inf.producer,
                });
            }
            union.insert(label.clone());
        }
    }
    let labels: Vec<String> = union.into_iter().collect();
    let rows = raw
        .iter()
        .map(|inf| {
            let mut row = vec![0.0; labels.len()];
            for (label, &v) in inf.labels.iter().zip(&inf.values) {
                // union is sorted, so binary search always hits
                let idx = labels.binary_search(label).expect("label in union");
                row[idx] = v;
            }
            row
        })
        .collect();
    Ok((labels, rows))
}

/// Forecasted log10 losses, one row per forecaster covering every raw
/// inference producer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastMatrix {
    producers: usize,
    rows: Vec<Vec<f64>>,
}

impl ForecastMatrix {
    pub fn new(producers: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        for row in &rows {
            if row.len() != producers {
                return Err(Error::LengthMismatch {
                    what: "forecast row",
                    expected: producers,
                    found: row.len(),
                });
            }
            if let Some(&bad) = row.iter().find(|v| !v.is_finite()) {
                return Err(Error::param("forecasted log loss", bad, "must be finite"));
            }
        }
        Ok(ForecastMatrix { producers, rows })
    }

    pub fn producers(&self) -> usize {
        self.producers
    }

    pub fn forecasters(&self) -> usize {
        self.rows.len()
    }

    /// Forecast by forecaster `k` of producer `j`'s log loss.
    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.rows[k][j]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.rows[k]
    }
}

/// Weights forecaster `k` implies for the raw inferences.
///
/// The forecast regret of producer `j` is the mean forecasted log loss minus
/// the forecast for `j`, so a producer forecast to beat the average gets a
/// positive regret. Regrets then go through [`regrets_to_weights`].
pub fn forecast_weights(row: &[f64], params: PotentialParams) -> Result<Vec<f64>> {
    if row.is_empty() {
        return Err(Error::Empty("forecast row"));
    }
    let mean = row.iter().sum::<f64>() / row.len() as f64;
    let regrets: Vec<f64> = row.iter().map(|l| mean - l).collect();
    regrets_to_weights(&regrets, params)
}

fn weighted_mean(values: &[Vec<f64>], weights: &[f64], kind: TaskKind) -> Vec<f64> {
    let dims = values[0].len();
    let total: f64 = weights.iter().sum();
    let mut out = vec![0.0; dims];
    for (v, &w) in values.iter().zip(weights) {
        for (o, x) in out.iter_mut().zip(v) {
            *o += w * x;
        }
    }
    for o in &mut out {
        *o /= total;
    }
    if kind == TaskKind::Classification {
        let sum: f64 = out.iter().sum();
        if sum > 0.0 {
            for o in &mut out {
                *o = (*o / sum).clamp(0.0, 1.0);
            }
        }
    }
    out
}

fn check_dims(values: &[Vec<f64>]) -> Result<usize> {
    let first = values.first().ok_or(Error::Empty("inference set"))?;
    let dims = first.len();
    if dims == 0 {
        return Err(Error::Empty("inference vector"));
    }
    for v in values {
        if v.len() != dims {
            return Err(Error::LengthMismatch {
                what: "inference vector",
                expected: dims,
                found: v.len(),
            });
        }
    }
    Ok(dims)
}

/// The inference forecaster `k` implies: raw inferences weighted by
/// [`forecast_weights`] of the forecaster's row.
pub fn forecast_implied_inference(
    raw: &[Vec<f64>],
    forecasts: &ForecastMatrix,
    k: usize,
    params: PotentialParams,
    kind: TaskKind,
) -> Result<Vec<f64>> {
    check_dims(raw)?;
    if forecasts.producers() != raw.len() {
        return Err(Error::LengthMismatch {
            what: "forecast producers",
            expected: raw.len(),
            found: forecasts.producers(),
        });
    }
    if k >= forecasts.forecasters() {
        return Err(Error::param("forecaster index", k as f64, "out of range"));
    }
    let weights = forecast_weights(forecasts.row(k), params)?;
    Ok(weighted_mean(raw, &weights, kind))
}

/// Raw inferences followed by forecast-implied inferences, with one strictly
/// positive weight each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedInferenceSet {
    values: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl CombinedInferenceSet {
    pub fn new(values: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        check_dims(&values)?;
        if weights.len() != values.len() {
            return Err(Error::LengthMismatch {
                what: "weights",
                expected: values.len(),
                found: weights.len(),
            });
        }
        if let Some(&bad) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::param("weight", bad, "must be positive and finite"));
        }
        Ok(CombinedInferenceSet { values, weights })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.values[0].len()
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// The set with entry `l` removed, or `None` if nothing would remain.
    pub fn without(&self, l: usize) -> Option<Self> {
        if self.values.len() <= 1 || l >= self.values.len() {
            return None;
        }
        let mut values = self.values.clone();
        let mut weights = self.weights.clone();
        values.remove(l);
        weights.remove(l);
        Some(CombinedInferenceSet { values, weights })
    }
}

/// Weighted mean over the combined set; classification output sums to one.
pub fn network_inference(combined: &CombinedInferenceSet, kind: TaskKind) -> Vec<f64> {
    weighted_mean(&combined.values, &combined.weights, kind)
}

/// Shrinks each inference's deviation from the network inference by `1/√N`.
pub fn adjust_for_variance(combined: &CombinedInferenceSet, net: &[f64]) -> Vec<Vec<f64>> {
    let scale = 1.0 / (combined.len() as f64).sqrt();
    combined
        .values
        .iter()
        .map(|v| v.iter().zip(net).map(|(x, m)| m + (x - m) * scale).collect())
        .collect()
}

/// Sorted sample points of a weighted CDF, `C_l = (c_l - w_l / 2) / c_L`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedCdf {
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
    pub cdf: Vec<f64>,
}

/// Sorts `values` ascending (ties keep input order), permutes the weights
/// alongside and builds the mid-point weighted CDF.
pub fn weighted_cdf(values: &[f64], weights: &[f64]) -> Result<WeightedCdf> {
    if values.len() != weights.len() {
        return Err(Error::LengthMismatch {
            what: "CDF weights",
            expected: values.len(),
            found: weights.len(),
        });
    }
    if values.is_empty() {
        return Err(Error::Empty("CDF input"));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let values: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let weights: Vec<f64> = order.iter().map(|&i| weights[i]).collect();
    let total: f64 = weights.iter().sum();
    let mut running = 0.0;
    let cdf = weights
        .iter()
        .map(|&w| {
            running += w;
            (running - 0.5 * w) / total
        })
        .collect();
    Ok(WeightedCdf {
        values,
        weights,
        cdf,
    })
}

impl WeightedCdf {
    /// Value at quantile `q`. Classification interpolates in logit space,
    /// regression linearly; `q` outside `[C_1, C_L]` returns the end value.
    pub fn quantile(&self, q: f64, kind: TaskKind) -> f64 {
        // largest index with C <= q
        let upper = self.cdf.partition_point(|&c| c <= q);
        if upper == 0 {
            return self.values[0];
        }
        let l = upper - 1;
        if l + 1 >= self.values.len() {
            return self.values[l];
        }
        let t = (q - self.cdf[l]) / (self.cdf[l + 1] - self.cdf[l]);
        let (a, b) = (self.values[l], self.values[l + 1]);
        match kind {
            TaskKind::Regression => a + t * (b - a),
            TaskKind::Classification => {
                let (la, lb) = (logit(a, LOGIT_EPSILON), logit(b, LOGIT_EPSILON));
                sigmoid(la + t * (lb - la))
            }
        }
    }
}

/// Per-quantile band values; `values[qi][c]` is quantile `qi` of component `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceBands {
    pub quantiles: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl ConfidenceBands {
    /// Band values of component `c` across all quantiles.
    pub fn component(&self, c: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[c]).collect()
    }
}

/// Weighted-percentile confidence bands of the variance-adjusted combined
/// inferences, computed independently per component.
pub fn confidence_intervals(
    combined: &CombinedInferenceSet,
    net: &[f64],
    quantiles: &[f64],
    kind: TaskKind,
) -> Result<ConfidenceBands> {
    if net.len() != combined.dims() {
        return Err(Error::LengthMismatch {
            what: "network inference",
            expected: combined.dims(),
            found: net.len(),
        });
    }
    for pair in quantiles.windows(2) {
        if pair[1] < pair[0] {
            return Err(Error::param("quantile", pair[1], "quantiles must ascend"));
        }
    }
    if let Some(&bad) = quantiles.iter().find(|q| !(**q > 0.0 && **q < 1.0)) {
        return Err(Error::param("quantile", bad, "must lie in (0, 1)"));
    }
    let adjusted = adjust_for_variance(combined, net);
    let mut values = vec![vec![0.0; net.len()]; quantiles.len()];
    let mut column = Vec::with_capacity(adjusted.len());
    for c in 0..net.len() {
        column.clear();
        column.extend(adjusted.iter().map(|v| v[c]));
        let cdf = weighted_cdf(&column, &combined.weights)?;
        for (qi, &q) in quantiles.iter().enumerate() {
            values[qi][c] = cdf.quantile(q, kind);
        }
    }
    Ok(ConfidenceBands {
        quantiles: quantiles.to_vec(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn fiducial() -> PotentialParams {
        PotentialParams::new(3.0, 0.75).unwrap()
    }

    #[test]
    fn align_two_workers() {
        let raw = vec![
            LabeledInference::labeled(0, [("A", 0.6), ("B", 0.4)]),
            LabeledInference::labeled(1, [("A", 0.5), ("C", 0.5)]),
        ];
        let (labels, rows) = align_label_sets(&raw).unwrap();
        assert_eq!(labels, vec!["A", "B", "C"]);
        assert_eq!(rows, vec![vec![0.6, 0.4, 0.0], vec![0.5, 0.0, 0.5]]);
    }

    #[test]
    fn align_identity_for_single_worker() {
        let raw = vec![LabeledInference::labeled(0, [("x", 0.2), ("y", 0.8)])];
        let (labels, rows) = align_label_sets(&raw).unwrap();
        assert_eq!(labels, vec!["x", "y"]);
        assert_eq!(rows, vec![vec![0.2, 0.8]]);
    }

    #[test]
    fn align_rejects_duplicates() {
        let raw = vec![LabeledInference::labeled(3, [("A", 0.5), ("A", 0.5)])];
        assert!(matches!(
            align_label_sets(&raw),
            Err(Error::DuplicateLabel { producer: 3, .. })
        ));
    }

    #[test]
    fn align_random_subsets_keep_row_sums() {
        // brute-force oracle: look each label up by linear scan
        let mut src = crate::rng::RandomSource::new(17);
        let universe = ["A", "B", "C", "D", "E"];
        for _ in 0..200 {
            let raw: Vec<LabeledInference> = (0..5)
                .map(|j| {
                    let k = 1 + src.index(5).unwrap();
                    let picks = src.choose_distinct(5, k).unwrap();
                    let probs = src.dirichlet(&vec![1.0; k]).unwrap();
                    LabeledInference::labeled(j, picks.iter().map(|&i| universe[i]).zip(probs))
                })
                .collect();
            let (labels, rows) = align_label_sets(&raw).unwrap();
            let mut expected_labels: Vec<&str> = Vec::new();
            for inf in &raw {
                for l in &inf.labels {
                    if !expected_labels.contains(&l.as_str()) {
                        expected_labels.push(l);
                    }
                }
            }
            expected_labels.sort();
            assert_eq!(labels, expected_labels);
            for (inf, row) in raw.iter().zip(&rows) {
                let before: f64 = inf.values.iter().sum();
                let after: f64 = row.iter().sum();
                assert!((before - after).abs() < 1e-12);
                for (li, label) in labels.iter().enumerate() {
                    let want = inf
                        .labels
                        .iter()
                        .position(|l| l == label)
                        .map_or(0.0, |p| inf.values[p]);
                    assert_eq!(row[li], want);
                }
            }
        }
    }

    #[test]
    fn logit_transport_round_trip() {
        let inf = LabeledInference::from_logits(0, [("A", logit(0.3, 1e-12)), ("B", logit(0.7, 1e-12))]);
        assert_relative_eq!(inf.values[0], 0.3, max_relative = 1e-12);
        assert_relative_eq!(inf.values[1], 0.7, max_relative = 1e-12);
        inf.validate(TaskKind::Classification).unwrap();
    }

    #[test]
    fn validate_rejects_bad_inferences() {
        assert!(LabeledInference::scalar(0, f64::NAN).validate(TaskKind::Regression).is_err());
        let off = LabeledInference::labeled(0, [("A", 0.6), ("B", 0.6)]);
        assert!(off.validate(TaskKind::Classification).is_err());
    }

    #[test]
    fn forecast_implied_equal_forecasts_is_plain_mean() {
        let raw = vec![vec![0.1], vec![0.4], vec![0.7]];
        let fm = ForecastMatrix::new(3, vec![vec![-2.0, -2.0, -2.0]]).unwrap();
        let v = forecast_implied_inference(&raw, &fm, 0, fiducial(), TaskKind::Regression).unwrap();
        assert_relative_eq!(v[0], 0.4, max_relative = 1e-12);
    }

    #[test]
    fn forecast_implied_single_raw() {
        let raw = vec![vec![0.25]];
        let fm = ForecastMatrix::new(1, vec![vec![-1.3]]).unwrap();
        let v = forecast_implied_inference(&raw, &fm, 0, fiducial(), TaskKind::Regression).unwrap();
        assert_eq!(v, vec![0.25]);
    }

    #[test]
    fn forecast_implied_hand_evaluation() {
        let raw = vec![vec![0.0], vec![1.0]];
        let fm = ForecastMatrix::new(2, vec![vec![-1.0, -3.0]]).unwrap();
        let v = forecast_implied_inference(&raw, &fm, 0, fiducial(), TaskKind::Regression).unwrap();
        let w0 = 3.0 / (5.25f64.exp() + 1.0);
        let w1 = 3.0 / ((-0.75f64).exp() + 1.0);
        assert_relative_eq!(v[0], w1 / (w0 + w1), max_relative = 1e-12);
        assert!((v[0] - 0.992373).abs() < 1e-6);
    }

    #[test]
    fn forecast_matrix_validation() {
        assert!(ForecastMatrix::new(2, vec![vec![1.0]]).is_err());
        assert!(ForecastMatrix::new(1, vec![vec![f64::NEG_INFINITY]]).is_err());
        let fm = ForecastMatrix::new(2, vec![vec![-1.0, -2.0]]).unwrap();
        assert!(forecast_implied_inference(&[], &fm, 0, fiducial(), TaskKind::Regression).is_err());
        assert!(
            forecast_implied_inference(&[vec![0.0], vec![1.0]], &fm, 1, fiducial(), TaskKind::Regression)
                .is_err()
        );
    }

    #[test]
    fn network_inference_examples() {
        let set = CombinedInferenceSet::new(vec![vec![0.2], vec![0.4]], vec![1.0, 1.0]).unwrap();
        assert_relative_eq!(network_inference(&set, TaskKind::Regression)[0], 0.3, max_relative = 1e-12);

        let set = CombinedInferenceSet::new(vec![vec![0.2], vec![0.4]], vec![1e9, 1.0]).unwrap();
        assert!((network_inference(&set, TaskKind::Regression)[0] - 0.2).abs() < 1e-8);

        let set =
            CombinedInferenceSet::new(vec![vec![0.6, 0.4], vec![0.2, 0.8]], vec![1.0, 3.0]).unwrap();
        let net = network_inference(&set, TaskKind::Classification);
        assert_relative_eq!(net[0], 0.3, max_relative = 1e-12);
        assert_relative_eq!(net[1], 0.7, max_relative = 1e-12);
    }

    #[test]
    fn combined_set_validation() {
        assert!(CombinedInferenceSet::new(vec![], vec![]).is_err());
        assert!(CombinedInferenceSet::new(vec![vec![0.1]], vec![0.0]).is_err());
        assert!(CombinedInferenceSet::new(vec![vec![0.1]], vec![1.0, 2.0]).is_err());
        assert!(CombinedInferenceSet::new(vec![vec![0.1], vec![0.1, 0.2]], vec![1.0, 1.0]).is_err());
        let one = CombinedInferenceSet::new(vec![vec![0.1]], vec![1.0]).unwrap();
        assert!(one.without(0).is_none());
    }

    #[test]
    fn variance_adjustment_examples() {
        let one = CombinedInferenceSet::new(vec![vec![0.9]], vec![1.0]).unwrap();
        assert_eq!(adjust_for_variance(&one, &[0.5]), vec![vec![0.9]]);

        let four = CombinedInferenceSet::new(vec![vec![0.9]; 4], vec![1.0; 4]).unwrap();
        assert_relative_eq!(adjust_for_variance(&four, &[0.5])[0][0], 0.7, max_relative = 1e-12);
    }

    #[test]
    fn variance_adjustment_preserves_weighted_mean() {
        let set = CombinedInferenceSet::new(
            vec![vec![0.1], vec![-0.3], vec![0.8], vec![0.05]],
            vec![0.5, 1.5, 0.2, 2.0],
        )
        .unwrap();
        let net = network_inference(&set, TaskKind::Regression);
        let adj = adjust_for_variance(&set, &net);
        let total: f64 = set.weights().iter().sum();
        let m: f64 = adj.iter().zip(set.weights()).map(|(v, w)| v[0] * w).sum::<f64>() / total;
        assert_relative_eq!(m, net[0], max_relative = 1e-12);
    }

    #[test]
    fn cdf_examples() {
        let cdf = weighted_cdf(&[1.0, 2.0], &[1.0, 1.0]).unwrap();
        assert_eq!(cdf.cdf, vec![0.25, 0.75]);
        let n = 7;
        let cdf = weighted_cdf(&vec![0.0; n], &vec![2.0; n]).unwrap();
        for (l, c) in cdf.cdf.iter().enumerate() {
            assert_relative_eq!(*c, (l as f64 + 0.5) / n as f64, max_relative = 1e-12);
        }
        assert!(weighted_cdf(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn cdf_sorts_with_weights() {
        let cdf = weighted_cdf(&[3.0, 1.0, 2.0], &[3.0, 1.0, 2.0]).unwrap();
        assert_eq!(cdf.values, vec![1.0, 2.0, 3.0]);
        assert_eq!(cdf.weights, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn cdf_random_weights_strictly_increasing() {
        let mut src = crate::rng::RandomSource::new(5);
        for _ in 0..1000 {
            let n = 1 + src.index(30).unwrap();
            let values: Vec<f64> = (0..n).map(|_| src.normal(0.0, 1.0).unwrap()).collect();
            let weights: Vec<f64> = (0..n).map(|_| src.uniform(1e-3, 5.0).unwrap()).collect();
            let cdf = weighted_cdf(&values, &weights).unwrap();
            assert!(cdf.cdf.iter().all(|&c| c > 0.0 && c < 1.0));
            assert!(cdf.cdf.windows(2).all(|p| p[1] > p[0]));
        }
    }

    #[test]
    fn bands_identical_inferences() {
        let set = CombinedInferenceSet::new(vec![vec![0.37]; 5], vec![1.0, 2.0, 0.5, 1.0, 3.0]).unwrap();
        let net = network_inference(&set, TaskKind::Regression);
        let b = confidence_intervals(&set, &net, &DEFAULT_QUANTILES, TaskKind::Regression).unwrap();
        for row in &b.values {
            assert_relative_eq!(row[0], 0.37, max_relative = 1e-12);
        }
        let set = CombinedInferenceSet::new(vec![vec![0.2, 0.8]; 3], vec![1.0; 3]).unwrap();
        let net = network_inference(&set, TaskKind::Classification);
        let b = confidence_intervals(&set, &net, &DEFAULT_QUANTILES, TaskKind::Classification).unwrap();
        for row in &b.values {
            assert_relative_eq!(row[0], 0.2, max_relative = 1e-12);
            assert_relative_eq!(row[1], 0.8, max_relative = 1e-12);
        }
    }

    #[test]
    fn band_at_cdf_point_equals_adjusted_value() {
        // four equal weights: C = 0.125, 0.375, 0.625, 0.875
        let set = CombinedInferenceSet::new(
            vec![vec![0.1, 0.9], vec![0.3, 0.7], vec![0.6, 0.4], vec![0.2, 0.8]],
            vec![1.0; 4],
        )
        .unwrap();
        let net = network_inference(&set, TaskKind::Classification);
        let adj = adjust_for_variance(&set, &net);
        let b = confidence_intervals(&set, &net, &[0.375], TaskKind::Classification).unwrap();
        let mut col: Vec<f64> = adj.iter().map(|v| v[0]).collect();
        col.sort_by(|a, b| a.total_cmp(b));
        assert_relative_eq!(b.values[0][0], col[1], max_relative = 1e-12);

        let rset = CombinedInferenceSet::new(vec![vec![1.0], vec![4.0], vec![2.0], vec![3.0]], vec![1.0; 4])
            .unwrap();
        let rnet = network_inference(&rset, TaskKind::Regression);
        let b = confidence_intervals(&rset, &rnet, &[0.625], TaskKind::Regression).unwrap();
        let radj = adjust_for_variance(&rset, &rnet);
        assert_relative_eq!(b.values[0][0], radj[3][0], max_relative = 1e-12);
    }

    // Textbook weighted-percentile routine: piecewise-linear interpolation of
    // the (mid-point CDF, value) polyline, flat beyond the ends.
    fn textbook_weighted_percentile(values: &[f64], weights: &[f64], q: f64) -> f64 {
        let mut pairs: Vec<(f64, f64)> = values.iter().copied().zip(weights.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        let mut xs = Vec::new();
        let mut acc = 0.0;
        for p in &pairs {
            xs.push((acc + p.1 / 2.0) / total);
            acc += p.1;
        }
        if q <= xs[0] {
            return pairs[0].0;
        }
        if q >= xs[xs.len() - 1] {
            return pairs[pairs.len() - 1].0;
        }
        for i in 0..xs.len() - 1 {
            if q >= xs[i] && q <= xs[i + 1] {
                let f = (q - xs[i]) / (xs[i + 1] - xs[i]);
                return pairs[i].0 * (1.0 - f) + pairs[i + 1].0 * f;
            }
        }
        unreachable!()
    }

    #[test]
    fn regression_bands_match_textbook_routine() {
        let raw = [0.031, -0.12, 0.2, 0.075, -0.01];
        let set = CombinedInferenceSet::new(raw.iter().map(|&v| vec![v]).collect(), vec![1.0; 5]).unwrap();
        let net = network_inference(&set, TaskKind::Regression);
        let adjusted: Vec<f64> = raw.iter().map(|v| net[0] + (v - net[0]) / 5f64.sqrt()).collect();
        let qs = [0.0228, 0.05, 0.1587, 0.3, 0.5, 0.8413, 0.9, 0.9772];
        let b = confidence_intervals(&set, &net, &qs, TaskKind::Regression).unwrap();
        for (qi, &q) in qs.iter().enumerate() {
            let want = textbook_weighted_percentile(&adjusted, &[1.0; 5], q);
            assert!((b.values[qi][0] - want).abs() < 1e-10, "q={q}");
        }
    }

    #[test]
    fn band_validation() {
        let set = CombinedInferenceSet::new(vec![vec![0.1], vec![0.2]], vec![1.0, 1.0]).unwrap();
        assert!(confidence_intervals(&set, &[0.15], &[0.0], TaskKind::Regression).is_err());
        assert!(confidence_intervals(&set, &[0.15], &[0.8, 0.2], TaskKind::Regression).is_err());
        assert!(confidence_intervals(&set, &[0.15, 0.1], &[0.5], TaskKind::Regression).is_err());
    }

    fn simplex_rows(n: usize, dims: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
        proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, dims), n).prop_map(|rows| {
            rows.into_iter()
                .map(|r| {
                    let s: f64 = r.iter().sum::<f64>() + 1e-9;
                    r.iter().map(|v| (v + 1e-9 / r.len() as f64) / s).collect()
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn classification_outputs_stay_in_bounds(
            rows in simplex_rows(6, 4),
            weights in proptest::collection::vec(0.01f64..10.0, 6),
        ) {
            let set = CombinedInferenceSet::new(rows, weights).unwrap();
            let net = network_inference(&set, TaskKind::Classification);
            prop_assert!((net.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let b = confidence_intervals(&set, &net, &DEFAULT_QUANTILES, TaskKind::Classification).unwrap();
            for c in 0..4 {
                let col = b.component(c);
                prop_assert!(col.iter().all(|v| (0.0..=1.0).contains(v)));
                prop_assert!(col.windows(2).all(|p| p[1] >= p[0] - 1e-15));
            }
        }

        #[test]
        fn regression_bands_monotone(
            vals in proptest::collection::vec(-1.0f64..1.0, 1..25),
            seed in any::<u64>(),
        ) {
            let mut src = crate::rng::RandomSource::new(seed);
            let weights: Vec<f64> = vals.iter().map(|_| src.uniform(0.01, 3.0).unwrap()).collect();
            let set = CombinedInferenceSet::new(vals.iter().map(|&v| vec![v]).collect(), weights).unwrap();
            let net = network_inference(&set, TaskKind::Regression);
            let b = confidence_intervals(&set, &net, &[0.01, 0.0228, 0.1587, 0.5, 0.8413, 0.9772, 0.99], TaskKind::Regression).unwrap();
            let col = b.component(0);
            prop_assert!(col.windows(2).all(|p| p[1] >= p[0]));
        }

        #[test]
        fn permutation_invariance(
            rows in simplex_rows(5, 3),
            weights in proptest::collection::vec(0.01f64..10.0, 5),
            shift in 0usize..5,
        ) {
            let set = CombinedInferenceSet::new(rows.clone(), weights.clone()).unwrap();
            let mut r2 = rows;
            let mut w2 = weights;
            r2.rotate_left(shift);
            w2.rotate_left(shift);
            r2.swap(0, 4);
            w2.swap(0, 4);
            let set2 = CombinedInferenceSet::new(r2, w2).unwrap();
            let n1 = network_inference(&set, TaskKind::Classification);
            let n2 = network_inference(&set2, TaskKind::Classification);
            for (a, b) in n1.iter().zip(&n2) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            let b1 = confidence_intervals(&set, &n1, &DEFAULT_QUANTILES, TaskKind::Classification).unwrap();
            let b2 = confidence_intervals(&set2, &n2, &DEFAULT_QUANTILES, TaskKind::Classification).unwrap();
            for (ra, rb) in b1.values.iter().zip(&b2.values) {
                for (a, b) in ra.iter().zip(rb) {
                    prop_assert!((a - b).abs() < 1e-9);
                }
            }
        }
    }
}
