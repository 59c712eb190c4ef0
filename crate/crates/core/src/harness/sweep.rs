use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Composition, ParameterSet, SimConfig};
use super::engine::{run_simulation, EpochOutcome};
use crate::error::{Error, Result};
use crate::stats::{aggregate_boxstats, BoxStats};
use crate::synthesis::TaskKind;

/// One of the five swept parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    P,
    Alpha,
    Pi,
    Pf,
    Pr,
}

impl Axis {
    pub const ALL: [Axis; 5] = [Axis::P, Axis::Alpha, Axis::Pi, Axis::Pf, Axis::Pr];

    /// Name used in the `param_name` column.
    pub fn column_name(self) -> &'static str {
        match self {
            Axis::P => "p",
            Axis::Alpha => "log10_alpha",
            Axis::Pi => "p_i",
            Axis::Pf => "p_f",
            Axis::Pr => "p_r",
        }
    }

    /// The standard grid of this axis.
    pub fn default_values(self) -> Vec<f64> {
        match self {
            Axis::P => grid(1.0, 5.0, 0.5),
            Axis::Alpha => grid(-5.0, 0.0, 0.5),
            Axis::Pi | Axis::Pf => grid(1.0, 5.0, 1.0),
            Axis::Pr => grid(0.5, 1.5, 0.25),
        }
    }

    pub fn default_value(self) -> f64 {
        self.get(&ParameterSet::default())
    }

    pub fn get(self, params: &ParameterSet) -> f64 {
        match self {
            Axis::P => params.p,
            Axis::Alpha => params.log10_alpha,
            Axis::Pi => params.p_i,
            Axis::Pf => params.p_f,
            Axis::Pr => params.p_r,
        }
    }

    pub fn set(self, params: &mut ParameterSet, value: f64) {
        match self {
            Axis::P => params.p = value,
            Axis::Alpha => params.log10_alpha = value,
            Axis::Pi => params.p_i = value,
            Axis::Pf => params.p_f = value,
            Axis::Pr => params.p_r = value,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.column_name())
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "p" => Ok(Axis::P),
            "alpha" | "log10_alpha" => Ok(Axis::Alpha),
            "pi" | "p_i" => Ok(Axis::Pi),
            "pf" | "p_f" => Ok(Axis::Pf),
            "pr" | "p_r" => Ok(Axis::Pr),
            other => Err(Error::Config(format!("unknown axis {other:?}"))),
        }
    }
}

/// Inclusive arithmetic grid, rounded to ten decimals so that values print
/// cleanly.
pub fn grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=n)
        .map(|k| ((start + k as f64 * step) * 1e10).round() / 1e10)
        .collect()
}

/// One row of sweep output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub task: TaskKind,
    pub param_name: String,
    pub param_value: f64,
    #[serde(rename = "N_i")]
    pub n_i: usize,
    #[serde(rename = "N_f")]
    pub n_f: usize,
    #[serde(rename = "N_r")]
    pub n_r: usize,
    pub seed: u64,
    pub epoch: usize,
    pub network_loss: f64,
    pub reward_spread: f64,
    pub mean_reward_inference: f64,
    pub mean_reward_forecast: f64,
    pub mean_reward_reputation: f64,
}

impl SweepRow {
    pub fn composition(&self) -> Composition {
        Composition {
            n_i: self.n_i,
            n_f: self.n_f,
            n_r: self.n_r,
        }
    }
}

/// Rows for a finished run.
pub fn rows_from_outcomes(
    task: TaskKind,
    param_name: &str,
    param_value: f64,
    composition: Composition,
    seed: u64,
    outcomes: &[EpochOutcome],
) -> Vec<SweepRow> {
    outcomes
        .iter()
        .map(|o| SweepRow {
            task,
            param_name: param_name.to_string(),
            param_value,
            n_i: composition.n_i,
            n_f: composition.n_f,
            n_r: composition.n_r,
            seed,
            epoch: o.epoch,
            network_loss: o.network_loss,
            reward_spread: o.reward_spread,
            mean_reward_inference: o.mean_rewards[0],
            mean_reward_forecast: o.mean_rewards[1],
            mean_reward_reputation: o.mean_rewards[2],
        })
        .collect()
}

/// One run of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepCell {
    pub axis: Axis,
    pub value: f64,
    pub composition: Composition,
    pub seed: u64,
}

/// One-at-a-time sweep: each axis varies alone with the others held at the
/// base parameters.
#[derive(Debug, Clone)]
pub struct SweepPlan {
    pub base: SimConfig,
    pub axes: Vec<(Axis, Vec<f64>)>,
    pub compositions: Vec<Composition>,
    pub seeds: Vec<u64>,
}

impl SweepPlan {
    /// Standard grid of `axis` over the configured compositions and seeds
    /// `0..n_seeds`.
    pub fn standard(base: SimConfig, axis: Axis, n_seeds: u64) -> Self {
        let compositions = base.sweep_compositions();
        SweepPlan {
            base,
            axes: vec![(axis, axis.default_values())],
            compositions,
            seeds: (0..n_seeds).collect(),
        }
    }

    /// Cells in output order: axis, value, composition, seed.
    pub fn cells(&self) -> Vec<SweepCell> {
        let mut cells = Vec::new();
        for (axis, values) in &self.axes {
            for &value in values {
                for &composition in &self.compositions {
                    for &seed in &self.seeds {
                        cells.push(SweepCell {
                            axis: *axis,
                            value,
                            composition,
                            seed,
                        });
                    }
                }
            }
        }
        cells
    }

    pub fn expected_rows(&self) -> usize {
        self.cells().len() * self.base.n_epochs
    }

    pub fn config_for(&self, cell: &SweepCell) -> SimConfig {
        let mut cfg = self.base.clone();
        cell.axis.set(&mut cfg.params, cell.value);
        cfg.composition = cell.composition;
        cfg.seed = cell.seed;
        cfg
    }

    fn validate(&self) -> Result<()> {
        if self.axes.iter().all(|(_, v)| v.is_empty()) {
            return Err(Error::Empty("sweep grid"));
        }
        if self.compositions.is_empty() {
            return Err(Error::Empty("sweep compositions"));
        }
        if self.seeds.is_empty() {
            return Err(Error::Empty("sweep seeds"));
        }
        self.base.validate()
    }
}

/// A run that failed; the sweep continues without its rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedRun {
    pub param_name: String,
    pub param_value: f64,
    pub composition: Composition,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub task: TaskKind,
    pub rows: Vec<SweepRow>,
    pub failures: Vec<FailedRun>,
}

impl SweepResult {
    pub fn aggregates(&self) -> Result<SweepAggregates> {
        aggregate_rows(self.task, &self.rows)
    }
}

/// Runs every cell of `plan`, in parallel batches, handing finished rows to
/// `sink` in plan order.
pub fn sweep_parameters<F>(plan: &SweepPlan, mut sink: F) -> Result<SweepResult>
where
    F: FnMut(&[SweepRow]) -> Result<()>,
{
    plan.validate()?;
    let cells = plan.cells();
    let batch = (rayon::current_num_threads() * 2).max(1);
    let mut rows = Vec::with_capacity(cells.len() * plan.base.n_epochs);
    let mut failures = Vec::new();
    for chunk in cells.chunks(batch) {
        let results: Vec<_> = chunk
            .par_iter()
            .map(|cell| {
                let cfg = plan.config_for(cell);
                run_simulation(&cfg).map(|outcomes| {
                    rows_from_outcomes(
                        cfg.task,
                        cell.axis.column_name(),
                        cell.value,
                        cell.composition,
                        cell.seed,
                        &outcomes,
                    )
                })
            })
            .collect();
        for (cell, result) in chunk.iter().zip(results) {
            match result {
                Ok(run_rows) => {
                    sink(&run_rows)?;
                    rows.extend(run_rows);
                }
                Err(e) => failures.push(FailedRun {
                    param_name: cell.axis.column_name().to_string(),
                    param_value: cell.value,
                    composition: cell.composition,
                    seed: cell.seed,
                    error: e.to_string(),
                }),
            }
        }
    }
    Ok(SweepResult {
        task: plan.base.task,
        rows,
        failures,
    })
}

/// Median with 10th/90th percentiles and sample count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Percentiles {
    pub median: f64,
    pub p10: f64,
    pub p90: f64,
    pub n: usize,
}

impl From<&BoxStats> for Percentiles {
    fn from(b: &BoxStats) -> Self {
        Percentiles {
            median: b.median,
            p10: b.p10,
            p90: b.p90,
            n: b.n,
        }
    }
}

/// Summary of one axis value, for one composition or pooled over all of
/// them (`composition` is `None`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateEntry {
    pub param_name: String,
    pub param_value: f64,
    pub composition: Option<Composition>,
    pub network_loss: Percentiles,
    pub reward_spread: Percentiles,
    pub mean_reward_inference: f64,
    pub mean_reward_forecast: f64,
    pub mean_reward_reputation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAggregates {
    pub task: TaskKind,
    pub entries: Vec<AggregateEntry>,
}

impl SweepAggregates {
    pub fn find(&self, param_name: &str, param_value: f64, composition: Option<Composition>) -> Option<&AggregateEntry> {
        self.entries.iter().find(|e| {
            e.param_name == param_name && e.param_value == param_value && e.composition == composition
        })
    }

    /// Pooled entries of one parameter, in order of appearance.
    pub fn pooled(&self, param_name: &str) -> Vec<&AggregateEntry> {
        self.entries
            .iter()
            .filter(|e| e.param_name == param_name && e.composition.is_none())
            .collect()
    }
}

#[derive(Default)]
struct Group {
    loss: Vec<f64>,
    spread: Vec<f64>,
    rewards: [f64; 3],
}

impl Group {
    fn push(&mut self, r: &SweepRow) {
        self.loss.push(r.network_loss);
        self.spread.push(r.reward_spread);
        self.rewards[0] += r.mean_reward_inference;
        self.rewards[1] += r.mean_reward_forecast;
        self.rewards[2] += r.mean_reward_reputation;
    }

    fn entry(&self, param_name: &str, param_value: f64, composition: Option<Composition>) -> Result<AggregateEntry> {
        let n = self.loss.len() as f64;
        Ok(AggregateEntry {
            param_name: param_name.to_string(),
            param_value,
            composition,
            network_loss: (&aggregate_boxstats(&self.loss)?).into(),
            reward_spread: (&aggregate_boxstats(&self.spread)?).into(),
            mean_reward_inference: self.rewards[0] / n,
            mean_reward_forecast: self.rewards[1] / n,
            mean_reward_reputation: self.rewards[2] / n,
        })
    }
}

/// Box statistics per (parameter, value, composition) and pooled over
/// compositions, in order of first appearance. Pooling mixes every epoch of
/// every composition and seed.
pub fn aggregate_rows(task: TaskKind, rows: &[SweepRow]) -> Result<SweepAggregates> {
    type Key = (String, u64, Option<Composition>);
    let mut order: Vec<Key> = Vec::new();
    let mut value_rank: HashMap<(String, u64), usize> = HashMap::new();
    let mut groups: HashMap<Key, Group> = HashMap::new();
    for r in rows {
        let bits = r.param_value.to_bits();
        let next = value_rank.len();
        value_rank.entry((r.param_name.clone(), bits)).or_insert(next);
        for comp in [Some(r.composition()), None] {
            let key = (r.param_name.clone(), bits, comp);
            groups
                .entry(key.clone())
                .or_insert_with(|| {
                    order.push(key);
                    Group::default()
                })
                .push(r);
        }
    }
    // per-value blocks: compositions first, then the pooled entry
    order.sort_by_key(|k| (value_rank[&(k.0.clone(), k.1)], k.2.is_none()));
    let entries = order
        .iter()
        .map(|k| groups[k].entry(&k.0, f64::from_bits(k.1), k.2))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepAggregates { task, entries })
}
