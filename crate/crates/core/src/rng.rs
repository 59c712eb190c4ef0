//! Keyed, replayable random streams.
//!
//! A run owns one root [`RandomSource`] built from its 64-bit seed. Every
//! random quantity in the synthetic world is drawn from a sub-stream derived
//! from the root by a [`StreamKey`] of (role, actor index, epoch, purpose).
//! Derivation hashes the key, so it does not depend on how many draws were
//! taken elsewhere: adding an actor or an extra draw for one actor leaves the
//! draws of every other actor untouched.
//!
//! All logarithmic samplers work in base 10.

use rand::distr::Uniform;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Pareto, StandardNormal};

use crate::error::{Error, Result};

/// Who a stream belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    World,
    Inferer,
    Forecaster,
    Reputer,
}

/// What a stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Profile,
    GroundTruth,
    Outperformer,
    RawInference,
    Forecast,
    Report,
}

impl Role {
    fn tag(self) -> u64 {
        match self {
            Role::World => 0x57_4f_52_4c_44,
            Role::Inferer => 0x49_4e_46,
            Role::Forecaster => 0x46_4f_52,
            Role::Reputer => 0x52_45_50,
        }
    }
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Profile => 1,
            Purpose::GroundTruth => 2,
            Purpose::Outperformer => 3,
            Purpose::RawInference => 4,
            Purpose::Forecast => 5,
            Purpose::Report => 6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub role: Role,
    pub actor: u64,
    pub epoch: u64,
    pub purpose: Purpose,
}

impl StreamKey {
    pub fn new(role: Role, actor: usize, epoch: usize, purpose: Purpose) -> Self {
        StreamKey {
            role,
            actor: actor as u64,
            epoch: epoch as u64,
            purpose,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seedable pseudo-random source. Not cryptographic.
#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        RandomSource {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream for `key`. Depends only on this source's seed and
    /// the key, never on the current stream position.
    pub fn substream(&self, key: StreamKey) -> RandomSource {
        let mut h = splitmix64(self.seed);
        for part in [key.role.tag(), key.actor, key.epoch, key.purpose.tag()] {
            h = splitmix64(h ^ part);
        }
        RandomSource::new(h)
    }

    /// Shorthand for [`RandomSource::substream`].
    pub fn stream(&self, role: Role, actor: usize, epoch: usize, purpose: Purpose) -> Self {
        self.substream(StreamKey::new(role, actor, epoch, purpose))
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// One draw from N(mean, std). `std == 0` returns `mean` exactly.
    pub fn normal(&mut self, mean: f64, std: f64) -> Result<f64> {
        if !mean.is_finite() {
            return Err(Error::param("mean", mean, "must be finite"));
        }
        if !std.is_finite() || std < 0.0 {
            return Err(Error::param("std", std, "must be finite and non-negative"));
        }
        let z = self.standard_normal();
        Ok(mean + std * z)
    }

    /// Returns `10^x` with `x ~ N(m, s)`.
    pub fn log10_normal(&mut self, m: f64, s: f64) -> Result<f64> {
        let x = self.normal(m, s)?;
        Ok(10f64.powf(x))
    }

    /// One draw from U[lo, hi). A degenerate interval returns `lo`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> Result<f64> {
        if !lo.is_finite() {
            return Err(Error::param("lo", lo, "must be finite"));
        }
        if !hi.is_finite() || hi < lo {
            return Err(Error::param("hi", hi, "must be finite and >= lo"));
        }
        if lo == hi {
            return Ok(lo);
        }
        let dist = Uniform::new(lo, hi).map_err(|_| Error::param("hi", hi, "empty range"))?;
        Ok(dist.sample(&mut self.rng))
    }

    /// Pareto draw with CDF `1 - (minimum / x)^slope` for `x >= minimum`.
    pub fn pareto(&mut self, slope: f64, minimum: f64) -> Result<f64> {
        if !(slope.is_finite() && slope > 0.0) {
            return Err(Error::param("slope", slope, "must be positive"));
        }
        if !(minimum.is_finite() && minimum > 0.0) {
            return Err(Error::param("minimum", minimum, "must be positive"));
        }
        let dist = Pareto::new(minimum, slope)
            .map_err(|_| Error::param("slope", slope, "rejected by Pareto"))?;
        // Guard against rounding just below the scale for huge slopes.
        Ok(dist.sample(&mut self.rng).max(minimum))
    }

    /// Dirichlet draw by normalizing independent Gamma(alpha_c, 1) variates.
    ///
    /// Gamma variates are formed in log space so that very small
    /// concentrations cannot underflow every component to zero.
    pub fn dirichlet(&mut self, alpha: &[f64]) -> Result<Vec<f64>> {
        if alpha.is_empty() {
            return Err(Error::Empty("dirichlet alpha"));
        }
        let mut log_g = Vec::with_capacity(alpha.len());
        for &a in alpha {
            if !(a.is_finite() && a > 0.0) {
                return Err(Error::param("alpha", a, "components must be positive"));
            }
            log_g.push(self.log_gamma_variate(a)?);
        }
        let max = log_g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut out: Vec<f64> = log_g.iter().map(|&l| (l - max).exp()).collect();
        let total: f64 = out.iter().sum();
        for v in &mut out {
            *v /= total;
        }
        Ok(out)
    }

    // ln of a Gamma(shape, 1) variate; uses G(a) = G(a + 1) * U^(1/a) below 1.
    fn log_gamma_variate(&mut self, shape: f64) -> Result<f64> {
        let boosted = if shape < 1.0 { shape + 1.0 } else { shape };
        let gamma =
            Gamma::new(boosted, 1.0).map_err(|_| Error::param("alpha", shape, "rejected by Gamma"))?;
        let g: f64 = gamma.sample(&mut self.rng);
        let mut log_g = g.ln();
        if shape < 1.0 {
            // (0, 1] so the log stays finite.
            let u: f64 = 1.0 - self.rng.random::<f64>();
            log_g += u.ln() / shape;
        }
        Ok(log_g)
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> Result<usize> {
        if n == 0 {
            return Err(Error::Empty("index range"));
        }
        Ok(self.rng.random_range(0..n))
    }

    /// `k` distinct indices from `0..n`, in draw order.
    pub fn choose_distinct(&mut self, n: usize, k: usize) -> Result<Vec<usize>> {
        if k > n {
            return Err(Error::param("count", k as f64, "exceeds population"));
        }
        Ok(rand::seq::index::sample(&mut self.rng, n, k).into_vec())
    }
}
