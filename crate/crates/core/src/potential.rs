//! The softplus potential and the regret bookkeeping built on it.
//!
//! The potential `ln(1 + e^{p(x - c)})` maps normalized scores to rewards;
//! its gradient `p / (e^{-p(x - c)} + 1)` maps normalized regrets to weights.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::scale_by_std;

/// Slope `p` and offset `c` of the potential function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialParams {
    pub p: f64,
    pub c: f64,
}

impl PotentialParams {
    pub const DEFAULT_OFFSET: f64 = 0.75;

    pub fn new(p: f64, c: f64) -> Result<Self> {
        if !(p.is_finite() && p > 0.0) {
            return Err(Error::param("slope p", p, "must be positive"));
        }
        if !c.is_finite() {
            return Err(Error::param("offset c", c, "must be finite"));
        }
        Ok(PotentialParams { p, c })
    }

    /// Slope `p` at the default offset.
    pub fn with_slope(p: f64) -> Result<Self> {
        Self::new(p, Self::DEFAULT_OFFSET)
    }
}

impl Default for PotentialParams {
    fn default() -> Self {
        PotentialParams {
            p: 3.0,
            c: Self::DEFAULT_OFFSET,
        }
    }
}

/// `ln(1 + e^{p(x - c)})`, evaluated as `max(0, z) + ln(1 + e^{-|z|})`.
pub fn potential(params: PotentialParams, x: f64) -> f64 {
    let z = params.p * (x - params.c);
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// `p / (e^{-p(x - c)} + 1)`.
pub fn potential_grad(params: PotentialParams, x: f64) -> f64 {
    let z = params.p * (x - params.c);
    let sigmoid = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    params.p * sigmoid
}

/// Normalizes regrets by their population σ and maps them through
/// [`potential_grad`]. Zero spread gives equal weights.
pub fn regrets_to_weights(regrets: &[f64], params: PotentialParams) -> Result<Vec<f64>> {
    if regrets.is_empty() {
        return Err(Error::Empty("regret vector"));
    }
    Ok(scale_by_std(regrets)
        .into_iter()
        .map(|x| potential_grad(params, x))
        .collect())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::param("EMA alpha", alpha, "must lie in (0, 1]"))
    }
}

/// `alpha * (net - participant) + (1 - alpha) * prev`, with log losses.
pub fn ema_update(
    prev: f64,
    network_log_loss: f64,
    participant_log_loss: f64,
    alpha: f64,
) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(alpha * (network_log_loss - participant_log_loss) + (1.0 - alpha) * prev)
}

/// EMA regrets for every combined inference source: raw inferences first,
/// then forecast-implied inferences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretLedger {
    regrets: Vec<f64>,
    alpha: f64,
}

impl RegretLedger {
    /// All regrets start at zero.
    pub fn new(participants: usize, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(RegretLedger {
            regrets: vec![0.0; participants],
            alpha,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn regrets(&self) -> &[f64] {
        &self.regrets
    }

    pub fn len(&self) -> usize {
        self.regrets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regrets.is_empty()
    }

    pub fn weights(&self, params: PotentialParams) -> Result<Vec<f64>> {
        regrets_to_weights(&self.regrets, params)
    }

    pub fn update(&mut self, network_log_loss: f64, participant_log_losses: &[f64]) -> Result<()> {
        if participant_log_losses.len() != self.regrets.len() {
            return Err(Error::LengthMismatch {
                what: "participant log losses",
                expected: self.regrets.len(),
                found: participant_log_losses.len(),
            });
        }
        for (r, &l) in self.regrets.iter_mut().zip(participant_log_losses) {
            *r = ema_update(*r, network_log_loss, l, self.alpha)?;
        }
        Ok(())
    }
}
