use serde::{Deserialize, Serialize};

use super::config::{Composition, ParameterSet, SimConfig};
use crate::error::{Error, Result};
use crate::incentives::{
    allocate_rewards, one_out_score, reputer_consensus, reputer_score, RewardAllocation, ScoreBoard,
};
use crate::potential::{PotentialParams, RegretLedger};
use crate::rng::{Purpose, RandomSource, Role};
use crate::synthesis::{
    confidence_intervals, forecast_implied_inference, network_inference, CombinedInferenceSet,
    ConfidenceBands, ForecastMatrix, TaskKind,
};
use crate::world::{
    experience_factor, forecasted_log_loss, gen_alpha_vector, gen_ground_truth_class, generate_profiles,
    log_loss, raw_inference_classification, raw_inference_regression, reputer_reported_losses,
    ForecasterProfile, GroundTruth, InfererProfile, ReputerProfile, WorldConfig,
};

/// Everything produced by one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochOutcome {
    pub epoch: usize,
    pub truth: GroundTruth,
    pub outperformers: Vec<usize>,
    /// Raw inferences followed by forecast-implied inferences.
    pub inferences: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub network_inference: Vec<f64>,
    pub bands: ConfidenceBands,
    pub network_loss: f64,
    /// True loss of each combined inference.
    pub participant_losses: Vec<f64>,
    /// Consensus log losses: network, each participant, then each one-out
    /// network inference.
    pub consensus: Vec<f64>,
    pub scores: ScoreBoard,
    pub rewards: RewardAllocation,
    pub mean_rewards: [f64; 3],
    pub reward_spread: f64,
}

/// State of one simulated network.
#[derive(Debug, Clone)]
pub struct Simulation {
    task: TaskKind,
    params: ParameterSet,
    composition: Composition,
    world: WorldConfig,
    offset: f64,
    quantiles: Vec<f64>,
    budget: f64,
    score_floor: f64,
    root: RandomSource,
    alpha_vector: Vec<f64>,
    inferers: Vec<InfererProfile>,
    forecasters: Vec<ForecasterProfile>,
    reputers: Vec<ReputerProfile>,
    ledger: RegretLedger,
    epoch: usize,
}

impl Simulation {
    /// Draws all profiles from the configured seed.
    pub fn new(cfg: &SimConfig) -> Result<Self> {
        let c = cfg.composition;
        let root = RandomSource::new(cfg.seed);
        let (inf, fc, rep) = generate_profiles(&root, &cfg.world, c.n_i, c.n_f, c.n_r)?;
        Self::with_profiles(cfg, inf, fc, rep)
    }

    /// Uses the given profiles; the composition is taken from their counts.
    pub fn with_profiles(
        cfg: &SimConfig,
        inferers: Vec<InfererProfile>,
        forecasters: Vec<ForecasterProfile>,
        reputers: Vec<ReputerProfile>,
    ) -> Result<Self> {
        cfg.validate()?;
        let composition = Composition::new(inferers.len(), forecasters.len(), reputers.len())?;
        let alpha_vector = gen_alpha_vector(cfg.world.n_labels, cfg.world.balance, cfg.world.variation)?;
        Ok(Simulation {
            task: cfg.task,
            params: cfg.params,
            composition,
            world: cfg.world.clone(),
            offset: cfg.synthesis.offset,
            quantiles: cfg.synthesis.quantiles.clone(),
            budget: cfg.incentives.budget,
            score_floor: cfg.incentives.score_floor,
            root: RandomSource::new(cfg.seed),
            alpha_vector,
            inferers,
            forecasters,
            reputers,
            ledger: RegretLedger::new(composition.combined(), cfg.params.alpha())?,
            epoch: 0,
        })
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn composition(&self) -> Composition {
        self.composition
    }

    pub fn ledger(&self) -> &RegretLedger {
        &self.ledger
    }

    pub fn inferers(&self) -> &[InfererProfile] {
        &self.inferers
    }

    pub fn forecasters(&self) -> &[ForecasterProfile] {
        &self.forecasters
    }

    pub fn reputers(&self) -> &[ReputerProfile] {
        &self.reputers
    }

    fn ground_truth(&self, i: usize) -> Result<GroundTruth> {
        let mut src = self.root.stream(Role::World, 0, i, Purpose::GroundTruth);
        match self.task {
            TaskKind::Regression => Ok(GroundTruth::Regression {
                returns: src.normal(self.world.returns_mean, self.world.returns_std)?,
            }),
            TaskKind::Classification => {
                let (probabilities, outcome) = gen_ground_truth_class(&mut src, &self.alpha_vector)?;
                Ok(GroundTruth::Classification {
                    probabilities,
                    outcome,
                })
            }
        }
    }

    fn raw_inference(&self, truth: &GroundTruth, j: usize, f_out: f64, f_xp: f64) -> Result<Vec<f64>> {
        let mut src = self.root.stream(Role::Inferer, j, self.epoch, Purpose::RawInference);
        let profile = &self.inferers[j];
        match truth {
            GroundTruth::Regression { returns } => Ok(vec![raw_inference_regression(
                &mut src, profile, *returns, f_out, f_xp,
            )?]),
            GroundTruth::Classification { probabilities, .. } => raw_inference_classification(
                &mut src,
                profile,
                probabilities,
                f_out,
                f_xp,
                self.world.class_boost,
            ),
        }
    }

    fn log_loss_of(&self, truth: &GroundTruth, inference: &[f64]) -> Result<f64> {
        Ok(log_loss(truth.loss(inference)?, self.world.loss_floor))
    }

    pub fn run_epoch(&mut self) -> Result<EpochOutcome> {
        let i = self.epoch;
        let c = self.composition;
        let n = c.combined();
        let f_xp = experience_factor(i);
        let weight_params = PotentialParams::new(self.params.p, self.offset)?;

        // (1) ground truth
        let truth = self.ground_truth(i)?;

        // (2) outperformers
        let k_out = self.world.outperformers_per_epoch.min(c.n_i);
        let outperformers = self
            .root
            .stream(Role::World, 0, i, Purpose::Outperformer)
            .choose_distinct(c.n_i, k_out)?;

        // (3) raw inferences, and (4) the losses forecasters target: with the
        // outperformance that happened, and as if it had not
        let mut raw = Vec::with_capacity(c.n_i);
        let mut with_out = Vec::with_capacity(c.n_i);
        let mut without_out = Vec::with_capacity(c.n_i);
        for j in 0..c.n_i {
            let outperforming = outperformers.contains(&j);
            let f_out = if outperforming {
                self.world.outperformance_factor
            } else {
                1.0
            };
            let inference = self.raw_inference(&truth, j, f_out, f_xp)?;
            let l_with = self.log_loss_of(&truth, &inference)?;
            let l_without = if outperforming {
                let plain = self.raw_inference(&truth, j, 1.0, f_xp)?;
                self.log_loss_of(&truth, &plain)?
            } else {
                l_with
            };
            raw.push(inference);
            with_out.push(l_with);
            without_out.push(l_without);
        }

        // (5) forecasted losses and (6) forecast-implied inferences
        let mut inferences = raw.clone();
        if c.n_f > 0 {
            let mut rows = Vec::with_capacity(c.n_f);
            for (k, profile) in self.forecasters.iter().enumerate() {
                let mut src = self.root.stream(Role::Forecaster, k, i, Purpose::Forecast);
                let row = (0..c.n_i)
                    .map(|j| forecasted_log_loss(&mut src, profile, with_out[j], without_out[j], f_xp))
                    .collect::<Result<Vec<_>>>()?;
                rows.push(row);
            }
            let matrix = ForecastMatrix::new(c.n_i, rows)?;
            for k in 0..c.n_f {
                inferences.push(forecast_implied_inference(&raw, &matrix, k, weight_params, self.task)?);
            }
        }

        // (7) weights, network inference and bands
        let weights = self.ledger.weights(weight_params)?;
        let combined = CombinedInferenceSet::new(inferences, weights)?;
        let net = network_inference(&combined, self.task);
        let bands = confidence_intervals(&combined, &net, &self.quantiles, self.task)?;

        // (8) true losses: network, participants, one-out networks
        let network_loss = truth.loss(&net)?;
        let participant_losses = combined
            .values()
            .iter()
            .map(|v| truth.loss(v))
            .collect::<Result<Vec<_>>>()?;
        let floor = self.world.loss_floor;
        let mut true_log = Vec::with_capacity(1 + 2 * n);
        true_log.push(log_loss(network_loss, floor));
        true_log.extend(participant_losses.iter().map(|l| log_loss(*l, floor)));
        for l in 0..n {
            // a sole participant has no one-out network; its one-out loss is
            // the network loss and its score is zero
            let one_out = match combined.without(l) {
                Some(rest) => truth.loss(&network_inference(&rest, self.task))?,
                None => network_loss,
            };
            true_log.push(log_loss(one_out, floor));
        }

        // (9) reputer reports and consensus
        let reports = self
            .reputers
            .iter()
            .enumerate()
            .map(|(m, profile)| {
                let mut src = self.root.stream(Role::Reputer, m, i, Purpose::Report);
                reputer_reported_losses(&mut src, profile, &true_log)
            })
            .collect::<Result<Vec<_>>>()?;
        let stakes: Vec<f64> = self.reputers.iter().map(|r| r.stake).collect();
        let consensus = reputer_consensus(&reports, &stakes)?;

        // (10) regret update from consensus log losses
        self.ledger.update(consensus[0], &consensus[1..=n])?;

        // (11) scores and rewards
        let worker_scores: Vec<f64> = (0..n)
            .map(|l| one_out_score(consensus[0], consensus[1 + n + l]))
            .collect();
        let reputer_scores = reports
            .iter()
            .map(|r| reputer_score(r, &consensus, self.score_floor))
            .collect::<Result<Vec<_>>>()?;
        let scores = ScoreBoard {
            epoch: i,
            inferers: worker_scores[..c.n_i].to_vec(),
            forecasters: worker_scores[c.n_i..].to_vec(),
            reputers: reputer_scores,
        };
        let rewards = allocate_rewards(&scores, &stakes, self.offset, self.params.slopes(), self.budget)?;
        let mean_rewards = rewards.mean_rewards();
        let reward_spread = rewards.reward_spread();

        debug_assert!((rewards.total() - self.budget).abs() <= 1e-9 * self.budget);
        debug_assert!(network_loss >= 0.0 && reward_spread >= 0.0);
        debug_assert!(
            self.task == TaskKind::Regression
                || combined
                    .values()
                    .iter()
                    .chain(std::iter::once(&net))
                    .all(|v| (v.iter().sum::<f64>() - 1.0).abs() < 1e-9)
        );

        self.epoch += 1;
        Ok(EpochOutcome {
            epoch: i,
            truth,
            outperformers,
            inferences: combined.values().to_vec(),
            weights: combined.weights().to_vec(),
            network_inference: net,
            bands,
            network_loss,
            participant_losses,
            consensus,
            scores,
            rewards,
            mean_rewards,
            reward_spread,
        })
    }
}

/// Runs `cfg.n_epochs` epochs from freshly drawn profiles.
pub fn run_simulation(cfg: &SimConfig) -> Result<Vec<EpochOutcome>> {
    if cfg.n_epochs == 0 {
        return Err(Error::Config("n_epochs must be at least 1".into()));
    }
    let mut sim = Simulation::new(cfg)?;
    (0..cfg.n_epochs).map(|_| sim.run_epoch()).collect()
}
