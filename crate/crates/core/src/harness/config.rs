use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::incentives::{RewardSlopes, DEFAULT_SCORE_FLOOR};
use crate::potential::PotentialParams;
use crate::synthesis::{TaskKind, DEFAULT_QUANTILES};
use crate::world::WorldConfig;

/// The five tunable slopes and the EMA rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParameterSet {
    /// Slope of the regret-to-weight mapping.
    pub p: f64,
    pub log10_alpha: f64,
    /// Slope of the inference reward curve.
    pub p_i: f64,
    /// Slope of the forecast reward curve.
    pub p_f: f64,
    /// Exponent of the reputer reward power law.
    pub p_r: f64,
}

impl Default for ParameterSet {
    fn default() -> Self {
        ParameterSet {
            p: 3.0,
            log10_alpha: -1.0,
            p_i: 3.0,
            p_f: 3.0,
            p_r: 1.0,
        }
    }
}

impl ParameterSet {
    pub fn alpha(&self) -> f64 {
        10f64.powf(self.log10_alpha)
    }

    pub fn slopes(&self) -> RewardSlopes {
        RewardSlopes {
            inference: self.p_i,
            forecast: self.p_f,
            reputation: self.p_r,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("p", self.p), ("p_i", self.p_i), ("p_f", self.p_f), ("p_r", self.p_r)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.log10_alpha.is_finite() && self.log10_alpha <= 0.0) {
            return Err(Error::Config(format!(
                "log10_alpha must be at most 0, got {}",
                self.log10_alpha
            )));
        }
        Ok(())
    }
}

/// Numbers of inferers, forecasters and reputers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Composition {
    pub n_i: usize,
    pub n_f: usize,
    pub n_r: usize,
}

impl Composition {
    /// The six compositions of the standard sweep.
    pub const STANDARD: [Composition; 6] = [
        Composition::new_const(5, 3, 5),
        Composition::new_const(10, 5, 5),
        Composition::new_const(15, 7, 5),
        Composition::new_const(20, 10, 5),
        Composition::new_const(25, 12, 5),
        Composition::new_const(30, 15, 5),
    ];

    const fn new_const(n_i: usize, n_f: usize, n_r: usize) -> Self {
        Composition { n_i, n_f, n_r }
    }

    pub fn new(n_i: usize, n_f: usize, n_r: usize) -> Result<Self> {
        let c = Composition { n_i, n_f, n_r };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_i == 0 || self.n_r == 0 {
            return Err(Error::Config(format!(
                "composition {self} needs at least one inferer and one reputer"
            )));
        }
        Ok(())
    }

    /// Size of the combined inference set.
    pub fn combined(&self) -> usize {
        self.n_i + self.n_f
    }
}

impl Default for Composition {
    fn default() -> Self {
        Composition::STANDARD[0]
    }
}

impl fmt::Display for Composition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.n_i, self.n_f, self.n_r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisConfig {
    /// Offset `c` shared by the weight mapping and the reward curves.
    pub offset: f64,
    pub quantiles: Vec<f64>,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            offset: PotentialParams::DEFAULT_OFFSET,
            quantiles: DEFAULT_QUANTILES.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IncentiveConfig {
    pub budget: f64,
    pub score_floor: f64,
}

impl Default for IncentiveConfig {
    fn default() -> Self {
        IncentiveConfig {
            budget: 1.0,
            score_floor: DEFAULT_SCORE_FLOOR,
        }
    }
}

/// Everything one run needs. Loaded from TOML; every field is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub task: TaskKind,
    pub seed: u64,
    pub n_epochs: usize,
    pub params: ParameterSet,
    pub composition: Composition,
    /// Compositions for sweeps; the standard six when empty.
    pub compositions: Vec<Composition>,
    pub world: WorldConfig,
    pub synthesis: SynthesisConfig,
    pub incentives: IncentiveConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            task: TaskKind::Regression,
            seed: 0,
            n_epochs: 1000,
            params: ParameterSet::default(),
            composition: Composition::default(),
            compositions: Vec::new(),
            world: WorldConfig::default(),
            synthesis: SynthesisConfig::default(),
            incentives: IncentiveConfig::default(),
        }
    }
}

impl SimConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: SimConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_epochs == 0 {
            return Err(Error::Config("n_epochs must be at least 1".into()));
        }
        self.params.validate()?;
        self.composition.validate()?;
        for c in &self.compositions {
            c.validate()?;
        }
        self.world.validate()?;
        PotentialParams::new(self.params.p, self.synthesis.offset)?;
        if self.synthesis.quantiles.iter().any(|q| !(*q > 0.0 && *q < 1.0)) {
            return Err(Error::Config("quantiles must lie in (0, 1)".into()));
        }
        if !(self.incentives.budget > 0.0 && self.incentives.score_floor > 0.0) {
            return Err(Error::Config("budget and score_floor must be positive".into()));
        }
        Ok(())
    }

    /// Sweep compositions: the configured list or the standard six.
    pub fn sweep_compositions(&self) -> Vec<Composition> {
        if self.compositions.is_empty() {
            Composition::STANDARD.to_vec()
        } else {
            self.compositions.clone()
        }
    }
}
