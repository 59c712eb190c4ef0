//! Synthetic ground truth and participant behaviour.
//!
//! Regression targets are log returns of a mock asset price. Classification
//! targets are Dirichlet probability vectors whose argmax is taken as the
//! label that occurred. Inferers perturb the truth, forecasters perturb the
//! log losses those inferences will incur, and reputers report the true log
//! losses with a per-epoch offset.
//!
//! All logarithms of losses, errors and spreads are base 10.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{Purpose, RandomSource, Role};
use crate::synthesis::{logit, sigmoid, LOGIT_EPSILON};

/// Decay rate of the experience factor per epoch.
pub const EXPERIENCE_RATE: f64 = 0.03;

/// Steepness of the sigmoid that makes context sensitivity bimodal.
pub const CONTEXT_STEEPNESS: f64 = 10.0;

/// Constants of the synthetic world. Error distributions are log-normal in
/// base 10 and given by their median and multiplicative spread, so
/// `log10(error) ~ N(log10(median), log10(spread))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    pub returns_mean: f64,
    pub returns_std: f64,
    pub initial_price: f64,

    pub inferer_error_median: f64,
    pub inferer_error_spread: f64,
    pub inferer_bias_std: f64,

    pub forecaster_error_median: f64,
    pub forecaster_error_spread: f64,
    pub forecaster_bias_std: f64,

    pub reputer_error_median: f64,
    pub reputer_error_spread: f64,
    pub reputer_bias_std: f64,
    pub stake_slope: f64,
    pub stake_minimum: f64,

    /// Multiplier on the error and bias of outperforming inferers.
    pub outperformance_factor: f64,
    pub outperformers_per_epoch: usize,

    /// Boost on classification perturbations.
    pub class_boost: f64,
    pub n_labels: usize,
    pub balance: f64,
    pub variation: f64,

    /// Losses are clamped to this before taking logs.
    pub loss_floor: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        let returns_std = 0.1;
        WorldConfig {
            returns_mean: 0.01,
            returns_std,
            initial_price: 1.0,
            inferer_error_median: 2.0 * returns_std,
            inferer_error_spread: 1.5,
            inferer_bias_std: 0.5 * returns_std,
            forecaster_error_median: 0.6,
            forecaster_error_spread: 1.5,
            forecaster_bias_std: 0.3,
            reputer_error_median: 0.1,
            reputer_error_spread: 1.25,
            reputer_bias_std: 0.05,
            stake_slope: 2.0,
            stake_minimum: 1.6e5,
            outperformance_factor: 0.3,
            outperformers_per_epoch: 1,
            class_boost: 3.0,
            n_labels: 3,
            balance: 0.5,
            variation: 0.5,
            loss_floor: 1e-300,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("returns_std", self.returns_std),
            ("initial_price", self.initial_price),
            ("inferer_error_median", self.inferer_error_median),
            ("inferer_error_spread", self.inferer_error_spread),
            ("forecaster_error_median", self.forecaster_error_median),
            ("forecaster_error_spread", self.forecaster_error_spread),
            ("reputer_error_median", self.reputer_error_median),
            ("reputer_error_spread", self.reputer_error_spread),
            ("stake_slope", self.stake_slope),
            ("stake_minimum", self.stake_minimum),
            ("outperformance_factor", self.outperformance_factor),
            ("class_boost", self.class_boost),
            ("loss_floor", self.loss_floor),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("balance", self.balance), ("variation", self.variation)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if self.n_labels < 2 {
            return Err(Error::Config("n_labels must be at least 2".into()));
        }
        Ok(())
    }
}

fn log_normal_params(median: f64, spread: f64) -> (f64, f64) {
    (median.log10(), spread.log10())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfererProfile {
    pub id: usize,
    pub bias: f64,
    pub error: f64,
}

impl InfererProfile {
    pub fn generate(src: &mut RandomSource, cfg: &WorldConfig, id: usize) -> Result<Self> {
        let (m, s) = log_normal_params(cfg.inferer_error_median, cfg.inferer_error_spread);
        let error = src.log10_normal(m, s)?;
        let bias = src.normal(0.0, cfg.inferer_bias_std)?;
        Ok(InfererProfile { id, bias, error })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecasterProfile {
    pub id: usize,
    pub bias: f64,
    pub error: f64,
    pub context_sensitivity: f64,
}

impl ForecasterProfile {
    pub fn generate(src: &mut RandomSource, cfg: &WorldConfig, id: usize) -> Result<Self> {
        let (m, s) = log_normal_params(cfg.forecaster_error_median, cfg.forecaster_error_spread);
        let error = src.log10_normal(m, s)?;
        let bias = src.normal(0.0, cfg.forecaster_bias_std)?;
        let x = src.uniform(0.0, 1.0)?;
        Ok(ForecasterProfile {
            id,
            bias,
            error,
            context_sensitivity: context_sensitivity(x),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReputerProfile {
    pub id: usize,
    pub bias: f64,
    pub error: f64,
    pub stake: f64,
}

impl ReputerProfile {
    pub fn generate(src: &mut RandomSource, cfg: &WorldConfig, id: usize) -> Result<Self> {
        let (m, s) = log_normal_params(cfg.reputer_error_median, cfg.reputer_error_spread);
        let error = src.log10_normal(m, s)?;
        let bias = src.normal(0.0, cfg.reputer_bias_std)?;
        let stake = src.pareto(cfg.stake_slope, cfg.stake_minimum)?;
        Ok(ReputerProfile {
            id,
            bias,
            error,
            stake,
        })
    }
}

/// Profiles for a whole network, each drawn from its own keyed stream.
pub fn generate_profiles(
    root: &RandomSource,
    cfg: &WorldConfig,
    n_inferers: usize,
    n_forecasters: usize,
    n_reputers: usize,
) -> Result<(Vec<InfererProfile>, Vec<ForecasterProfile>, Vec<ReputerProfile>)> {
    let inferers = (0..n_inferers)
        .map(|j| InfererProfile::generate(&mut root.stream(Role::Inferer, j, 0, Purpose::Profile), cfg, j))
        .collect::<Result<_>>()?;
    let forecasters = (0..n_forecasters)
        .map(|k| {
            ForecasterProfile::generate(&mut root.stream(Role::Forecaster, k, 0, Purpose::Profile), cfg, k)
        })
        .collect::<Result<_>>()?;
    let reputers = (0..n_reputers)
        .map(|m| ReputerProfile::generate(&mut root.stream(Role::Reputer, m, 0, Purpose::Profile), cfg, m))
        .collect::<Result<_>>()?;
    Ok((inferers, forecasters, reputers))
}

/// Ground truth of one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GroundTruth {
    Regression {
        returns: f64,
    },
    Classification {
        probabilities: Vec<f64>,
        /// One-hot vector of the label that occurred.
        outcome: Vec<f64>,
    },
}

impl GroundTruth {
    /// Loss of `inference` against this truth.
    pub fn loss(&self, inference: &[f64]) -> Result<f64> {
        match self {
            GroundTruth::Regression { returns } => {
                if inference.len() != 1 {
                    return Err(Error::LengthMismatch {
                        what: "regression inference",
                        expected: 1,
                        found: inference.len(),
                    });
                }
                Ok(loss_regression(inference[0], *returns))
            }
            GroundTruth::Classification { outcome, .. } => loss_classification(inference, outcome),
        }
    }
}

/// Returns and the price path they imply.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsSeries {
    pub returns: Vec<f64>,
    /// `prices[0]` is the initial price; `prices[i]` follows `i` returns.
    pub prices: Vec<f64>,
}

/// Return of epoch `epoch`, drawn from that epoch's ground-truth stream.
pub fn returns_at(root: &RandomSource, epoch: usize, mean: f64, std: f64) -> Result<f64> {
    root.stream(Role::World, 0, epoch, Purpose::GroundTruth)
        .normal(mean, std)
}

pub fn prices_from_returns(initial_price: f64, returns: &[f64]) -> Vec<f64> {
    let mut prices = Vec::with_capacity(returns.len() + 1);
    prices.push(initial_price);
    let mut cumulative = 0.0;
    for r in returns {
        cumulative += r;
        prices.push(initial_price * cumulative.exp());
    }
    prices
}

pub fn gen_returns_series(root: &RandomSource, n_epochs: usize, mean: f64, std: f64) -> Result<ReturnsSeries> {
    if n_epochs == 0 {
        return Err(Error::param("n_epochs", 0.0, "must be at least 1"));
    }
    let returns = (0..n_epochs)
        .map(|i| returns_at(root, i, mean, std))
        .collect::<Result<Vec<_>>>()?;
    let prices = prices_from_returns(1.0, &returns);
    Ok(ReturnsSeries { returns, prices })
}

/// `(1 + e^{-0.03 i}) / 2`: falls from 1 at epoch 0 towards 1/2.
pub fn experience_factor(epoch: usize) -> f64 {
    0.5 * (1.0 + (-EXPERIENCE_RATE * epoch as f64).exp())
}

/// Truth plus a normal perturbation whose mean and std are the inferer's
/// bias and error scaled by `f_out * f_xp`.
pub fn raw_inference_regression(
    src: &mut RandomSource,
    profile: &InfererProfile,
    truth: f64,
    f_out: f64,
    f_xp: f64,
) -> Result<f64> {
    let f = f_out * f_xp;
    Ok(truth + src.normal(f * profile.bias, f * profile.error)?)
}

/// Dirichlet concentrations from balance `b` and variation `v`:
/// `(2c / (n + 1))^{2(1 - √b)} * 10^{2(1 - 2v)}` for `c = 1..=n`.
pub fn gen_alpha_vector(n_labels: usize, balance: f64, variation: f64) -> Result<Vec<f64>> {
    if n_labels < 2 {
        return Err(Error::param("label count", n_labels as f64, "must be at least 2"));
    }
    if !(0.0..=1.0).contains(&balance) {
        return Err(Error::param("balance", balance, "must lie in [0, 1]"));
    }
    if !(0.0..=1.0).contains(&variation) {
        return Err(Error::param("variation", variation, "must lie in [0, 1]"));
    }
    let exponent = 2.0 * (1.0 - balance.sqrt());
    let scale = 10f64.powf(2.0 * (1.0 - 2.0 * variation));
    let mid = (n_labels + 1) as f64;
    Ok((1..=n_labels)
        .map(|c| (2.0 * c as f64 / mid).powf(exponent) * scale)
        .collect())
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn one_hot(len: usize, index: usize) -> Vec<f64> {
    let mut v = vec![0.0; len];
    v[index] = 1.0;
    v
}

/// Dirichlet probability vector and the one-hot outcome at its argmax.
pub fn gen_ground_truth_class(src: &mut RandomSource, alpha: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let probabilities = src.dirichlet(alpha)?;
    let outcome = one_hot(probabilities.len(), argmax(&probabilities));
    Ok((probabilities, outcome))
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Perturbs each label probability in logit space by `δ_c / (P_c (1 - P_c))`
/// with independent `δ_c ~ N(f μ, f σ)`, `f = f_class * f_out * f_xp`, then
/// renormalizes onto the simplex.
pub fn raw_inference_classification(
    src: &mut RandomSource,
    profile: &InfererProfile,
    probabilities: &[f64],
    f_out: f64,
    f_xp: f64,
    f_class: f64,
) -> Result<Vec<f64>> {
    if probabilities.is_empty() {
        return Err(Error::Empty("ground-truth probabilities"));
    }
    let f = f_class * f_out * f_xp;
    // log of sigmoid(z), kept in log space so that the normalization cannot
    // divide by an underflowed sum
    let mut log_s = Vec::with_capacity(probabilities.len());
    for &p in probabilities {
        let p = p.clamp(LOGIT_EPSILON, 1.0 - LOGIT_EPSILON);
        let delta = src.normal(f * profile.bias, f * profile.error)?;
        let z = logit(p, LOGIT_EPSILON) + delta / (p * (1.0 - p));
        log_s.push(-softplus(-z));
    }
    let max = log_s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = log_s.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = out.iter().sum();
    for v in &mut out {
        *v /= total;
    }
    Ok(out)
}

/// `sigmoid(10 (x - 1/2))`, pushing uniform draws towards 0 and 1.
pub fn context_sensitivity(x: f64) -> f64 {
    sigmoid(CONTEXT_STEEPNESS * (x - 0.5))
}

/// Forecast of a log loss: the target interpolated by context sensitivity
/// between the losses with and without outperformance, plus a normal
/// perturbation with mean `f_xp μ_k` and std `f_xp σ_k`.
pub fn forecasted_log_loss(
    src: &mut RandomSource,
    profile: &ForecasterProfile,
    loss_with_outperf: f64,
    loss_without_outperf: f64,
    f_xp: f64,
) -> Result<f64> {
    let f = profile.context_sensitivity;
    let target = f * loss_with_outperf + (1.0 - f) * loss_without_outperf;
    Ok(target + src.normal(f_xp * profile.bias, f_xp * profile.error)?)
}

/// True log losses shifted by one shared draw `δ ~ N(μ_m, σ_m)`.
pub fn reputer_reported_losses(
    src: &mut RandomSource,
    profile: &ReputerProfile,
    true_log_losses: &[f64],
) -> Result<Vec<f64>> {
    let delta = src.normal(profile.bias, profile.error)?;
    Ok(true_log_losses.iter().map(|l| l + delta).collect())
}

pub fn loss_regression(inference: f64, returns: f64) -> f64 {
    (inference - returns).powi(2)
}

/// Summed squared error against the one-hot outcome.
pub fn loss_classification(inference: &[f64], outcome: &[f64]) -> Result<f64> {
    if inference.len() != outcome.len() {
        return Err(Error::LengthMismatch {
            what: "classification inference",
            expected: outcome.len(),
            found: inference.len(),
        });
    }
    Ok(inference.iter().zip(outcome).map(|(i, o)| (i - o).powi(2)).sum())
}

/// `log10(max(loss, floor))`.
pub fn log_loss(loss: f64, floor: f64) -> f64 {
    loss.max(floor).log10()
}
