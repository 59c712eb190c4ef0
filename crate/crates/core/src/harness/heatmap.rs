use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Composition, SimConfig};
use super::engine::Simulation;
use super::sweep::grid;
use crate::error::{Error, Result};
use crate::stats::{mean, median};
use crate::synthesis::TaskKind;

/// Grid of compositions and candidate slopes for the optimal-`p` study.
#[derive(Debug, Clone)]
pub struct HeatmapPlan {
    /// Task, epoch count and all non-slope settings.
    pub base: SimConfig,
    pub n_i: Vec<usize>,
    pub n_f: Vec<usize>,
    pub n_r: usize,
    pub p_values: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl HeatmapPlan {
    /// Candidate slopes studied for each task.
    pub fn default_p_values(task: TaskKind) -> Vec<f64> {
        match task {
            TaskKind::Regression => grid(2.0, 3.6, 0.1),
            TaskKind::Classification => grid(3.0, 6.0, 0.2),
        }
    }

    /// Inferers 3 to 10 against forecasters 1 to 10 with five reputers.
    pub fn standard(base: SimConfig, n_seeds: u64) -> Self {
        let p_values = Self::default_p_values(base.task);
        HeatmapPlan {
            base,
            n_i: (3..=10).collect(),
            n_f: (1..=10).collect(),
            n_r: 5,
            p_values,
            seeds: (0..n_seeds).collect(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_i.is_empty() || self.n_f.is_empty() {
            return Err(Error::Empty("heatmap composition range"));
        }
        if self.p_values.is_empty() {
            return Err(Error::Empty("heatmap slope candidates"));
        }
        if self.seeds.is_empty() {
            return Err(Error::Empty("heatmap seeds"));
        }
        self.base.validate()
    }
}

/// Median optimal slope per composition; `cells[r][c]` belongs to
/// `n_i = rows[r]`, `n_f = cols[c]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub task: TaskKind,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub cells: Vec<Vec<f64>>,
    pub n_r: usize,
    pub p_values: Vec<f64>,
    pub seeds: Vec<u64>,
    pub n_epochs: usize,
    pub grand_mean: f64,
}

/// Median network loss over the epochs of one run.
pub fn median_run_loss(cfg: &SimConfig) -> Result<f64> {
    let mut sim = Simulation::new(cfg)?;
    let mut losses = Vec::with_capacity(cfg.n_epochs);
    for _ in 0..cfg.n_epochs {
        losses.push(sim.run_epoch()?.network_loss);
    }
    median(&losses)
}

/// Index of the smallest value; ties go to the earliest index.
fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// For each composition and seed, the candidate slope with the lowest median
/// loss (ties to the smaller slope); then the median of that over seeds.
pub fn heatmap_optimal_p(plan: &HeatmapPlan) -> Result<Heatmap> {
    plan.validate()?;
    let mut p_values = plan.p_values.clone();
    p_values.sort_by(f64::total_cmp);

    let mut jobs = Vec::new();
    for (r, &n_i) in plan.n_i.iter().enumerate() {
        for (c, &n_f) in plan.n_f.iter().enumerate() {
            for (s, &seed) in plan.seeds.iter().enumerate() {
                for (k, &p) in p_values.iter().enumerate() {
                    jobs.push((r, c, s, k, n_i, n_f, seed, p));
                }
            }
        }
    }
    let losses = jobs
        .par_iter()
        .map(|&(_, _, _, _, n_i, n_f, seed, p)| {
            let mut cfg = plan.base.clone();
            cfg.composition = Composition::new(n_i, n_f, plan.n_r)?;
            cfg.seed = seed;
            cfg.params.p = p;
            median_run_loss(&cfg)
        })
        .collect::<Result<Vec<_>>>()?;

    let (nr, nc, ns, np) = (plan.n_i.len(), plan.n_f.len(), plan.seeds.len(), p_values.len());
    let mut cells = vec![vec![0.0; nc]; nr];
    for (r, row) in cells.iter_mut().enumerate() {
        for (c, cell) in row.iter_mut().enumerate() {
            let optima: Vec<f64> = (0..ns)
                .map(|s| {
                    let start = ((r * nc + c) * ns + s) * np;
                    p_values[argmin(&losses[start..start + np])]
                })
                .collect();
            *cell = median(&optima)?;
        }
    }
    let grand_mean = mean(&cells.concat());
    Ok(Heatmap {
        task: plan.base.task,
        rows: plan.n_i.clone(),
        cols: plan.n_f.clone(),
        cells,
        n_r: plan.n_r,
        p_values,
        seeds: plan.seeds.clone(),
        n_epochs: plan.base.n_epochs,
        grand_mean,
    })
}
