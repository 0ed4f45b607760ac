//! The off-policy training loop.
//!
//! Each update round runs, in order: disjoint batch draw, reward-model step,
//! Q^/V^ step, critic target and update, actor update. Every source of
//! randomness has its own stream derived from the run seed, so a run is a
//! pure function of (configuration, seed) and DR/baseline runs with the same
//! seed see the same environment, exploration noise, batches and initial
//! networks.

use std::time::Instant;

use rand::{Rng, RngCore};

use crate::agents::actor::{actor_update, ActorObjective, SacNoise};
use crate::agents::policy::{standard_normal_vec, Policy, PolicyKind};
use crate::dr_critic::{CriticConfig, CriticMode, DrCritic, DrTargetBatch, NextActions};
use crate::envs::{wrap_noisy, Environment, NoiseConfig, NoisyEnv};
use crate::error::{Error, Result};
use crate::harness::MetricsRow;
use crate::replay::{ReplayBuffer, Transition};
use crate::reward_model::{QvConfig, QvModel, RewardNet};
use crate::rng::{derive_seed, stream, StreamRng};

/// Stream labels mixed with the run seed.
pub mod streams {
    pub const ENV_RESET: u64 = 1;
    pub const REWARD_NOISE: u64 = 2;
    pub const EXPLORATION: u64 = 3;
    pub const SAMPLING: u64 = 4;
    pub const NEXT_ACTION: u64 = 5;
    pub const ACTOR_NOISE: u64 = 6;
    pub const EVAL: u64 = 7;
    pub const INIT_ACTOR: u64 = 8;
    pub const INIT_CRITIC: u64 = 9;
    pub const INIT_REWARD: u64 = 10;
    pub const INIT_QV: u64 = 11;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Ddpg,
    Td3,
    Sac,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Ddpg => "ddpg",
            Algorithm::Td3 => "td3",
            Algorithm::Sac => "sac",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ddpg" => Some(Algorithm::Ddpg),
            "td3" => Some(Algorithm::Td3),
            "sac" => Some(Algorithm::Sac),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub algorithm: Algorithm,
    pub critic_mode: CriticMode,
    pub gamma: f64,
    pub tau: f64,
    /// Polyak rate of the Q^ target.
    pub tau_model: f64,
    /// Fraction of the action bound.
    pub exploration_noise_std: f64,
    pub td3_policy_delay: usize,
    pub td3_target_noise_std: f64,
    pub td3_target_noise_clip: f64,
    pub sac_entropy_coeff: f64,
    /// Every `update_interval` env steps, run that many update rounds.
    pub update_interval: usize,
    pub warmup_steps: usize,
    pub batch_model: usize,
    pub batch_ac: usize,
    /// Feed the same batch to the model and to the actor-critic.
    pub shared_samples: bool,
    pub lr_reward: f64,
    pub lr_qv: f64,
    pub lr_critic: f64,
    pub lr_actor: f64,
    pub hidden: Vec<usize>,
    pub buffer_capacity: usize,
    /// Skip model training, leaving R^, Q^ and V^ at their initial values.
    pub freeze_model: bool,
    pub target_clip: Option<f64>,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Ddpg,
            critic_mode: CriticMode::Dr,
            gamma: 0.99,
            tau: 0.005,
            tau_model: 0.01,
            exploration_noise_std: 0.1,
            td3_policy_delay: 2,
            td3_target_noise_std: 0.2,
            td3_target_noise_clip: 0.5,
            sac_entropy_coeff: 0.2,
            update_interval: 1,
            warmup_steps: 1000,
            batch_model: 128,
            batch_ac: 128,
            shared_samples: false,
            lr_reward: 1e-3,
            lr_qv: 1e-3,
            lr_critic: 5e-4,
            lr_actor: 1e-4,
            hidden: vec![64, 64],
            buffer_capacity: 100_000,
            freeze_model: false,
            target_clip: None,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |k: &str, why: &str| Err(Error::Config(format!("{k}: {why}")));
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return bad("gamma", "must lie in [0, 1)");
        }
        for (k, v) in [("tau", self.tau), ("tau_model", self.tau_model)] {
            if !(v > 0.0 && v <= 1.0) {
                return bad(k, "must lie in (0, 1]");
            }
        }
        for (k, v) in [
            ("exploration_noise", self.exploration_noise_std),
            ("td3_target_noise", self.td3_target_noise_std),
            ("td3_noise_clip", self.td3_target_noise_clip),
            ("sac_alpha", self.sac_entropy_coeff),
            ("lr_reward", self.lr_reward),
            ("lr_qv", self.lr_qv),
            ("lr_critic", self.lr_critic),
            ("lr_actor", self.lr_actor),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(k, "must be finite and non-negative");
            }
        }
        for (k, v) in [
            ("td3_policy_delay", self.td3_policy_delay),
            ("update_interval", self.update_interval),
            ("warmup", self.warmup_steps),
            ("batch_model", self.batch_model),
            ("batch_ac", self.batch_ac),
            ("buffer_capacity", self.buffer_capacity),
        ] {
            if v == 0 {
                return bad(k, "must be positive");
            }
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden", "needs at least one positive layer width");
        }
        if let Some(c) = self.target_clip {
            if !(c > 0.0) {
                return bad("target_clip", "must be positive");
            }
        }
        Ok(())
    }

    fn trains_model(&self) -> bool {
        self.critic_mode == CriticMode::Dr && !self.freeze_model
    }
}

/// Run length, evaluation cadence, and seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSchedule {
    pub total_steps: usize,
    pub eval_interval: usize,
    pub eval_episodes: usize,
    pub seed: u64,
    /// Record elapsed milliseconds in `wall_ms`; otherwise it stays 0 so
    /// repeated runs produce identical files.
    pub record_wall_time: bool,
}

impl RunSchedule {
    pub fn validate(&self, warmup: usize) -> Result<()> {
        if self.total_steps == 0 || self.eval_interval == 0 || self.eval_episodes == 0 {
            return Err(Error::Config("steps, eval_interval and eval_episodes must be positive".into()));
        }
        if self.total_steps < warmup {
            return Err(Error::Config(format!(
                "steps: {} is shorter than the {warmup}-step warmup",
                self.total_steps
            )));
        }
        Ok(())
    }
}

/// One stage of an update round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Sample,
    Reward,
    Qv,
    Critic,
    Actor,
}

/// Everything an update round computed.
#[derive(Debug, Clone)]
pub struct RoundReport {
    pub round: usize,
    pub phases: Vec<Phase>,
    pub model_slots: Vec<usize>,
    pub ac_slots: Vec<usize>,
    pub targets: DrTargetBatch,
    pub critic_loss: f64,
    pub reward_mse: f64,
    pub qv_loss: f64,
    pub actor_objective: Option<f64>,
}

#[derive(Debug, Clone, Default)]
struct Accumulator {
    rounds: usize,
    critic_loss: f64,
    reward_mse: f64,
    qv_loss: f64,
    correction: f64,
    actor_rounds: usize,
    actor_objective: f64,
}

impl Accumulator {
    fn add(&mut self, r: &RoundReport) {
        self.rounds += 1;
        self.critic_loss += r.critic_loss;
        self.reward_mse += r.reward_mse;
        self.qv_loss += r.qv_loss;
        self.correction += r.targets.correction_mean();
        if let Some(a) = r.actor_objective {
            self.actor_rounds += 1;
            self.actor_objective += a;
        }
    }

    fn mean(total: f64, n: usize) -> f64 {
        if n == 0 {
            0.0
        } else {
            total / n as f64
        }
    }
}

/// A single training run: agent, model, buffer, environments and streams.
pub struct Trainer {
    pub config: AgentConfig,
    pub policy: Policy,
    pub critic: DrCritic,
    pub reward: RewardNet,
    pub qv: QvModel,
    pub buffer: ReplayBuffer,
    env: NoisyEnv,
    eval_env: Box<dyn Environment>,
    env_rng: StreamRng,
    exploration_rng: StreamRng,
    sampling_rng: StreamRng,
    next_action_rng: StreamRng,
    actor_rng: StreamRng,
    eval_rng: StreamRng,
    obs: Vec<f64>,
    env_steps: usize,
    rounds: usize,
    episodes: u64,
    accum: Accumulator,
}

impl Trainer {
    pub fn new(env: Box<dyn Environment>, noise: NoiseConfig, config: AgentConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let spec = env.spec();
        spec.validate()?;
        let (o, a, b) = (spec.obs_dim, spec.action_dim, spec.action_bound);
        let kind = match config.algorithm {
            Algorithm::Sac => PolicyKind::SquashedGaussian,
            _ => PolicyKind::Deterministic,
        };
        let policy = Policy::new(kind, o, a, b, &config.hidden, config.lr_actor, &mut stream(seed, streams::INIT_ACTOR))?;
        let critic_config = CriticConfig {
            gamma: config.gamma,
            tau: config.tau,
            learning_rate: config.lr_critic,
            twin: config.algorithm != Algorithm::Ddpg,
            entropy_coeff: if config.algorithm == Algorithm::Sac {
                config.sac_entropy_coeff
            } else {
                0.0
            },
            target_clip: config.target_clip,
        };
        let critic = DrCritic::new(
            o,
            a,
            &config.hidden,
            config.critic_mode,
            critic_config,
            &mut stream(seed, streams::INIT_CRITIC),
        )?;
        let reward = RewardNet::new(o, a, &config.hidden, config.lr_reward, &mut stream(seed, streams::INIT_REWARD))?;
        let qv = QvModel::new(
            o,
            a,
            &config.hidden,
            QvConfig {
                gamma: config.gamma,
                tau: config.tau_model,
                learning_rate: config.lr_qv,
            },
            &mut stream(seed, streams::INIT_QV),
        )?;
        let eval_env = env.boxed_clone();
        let mut env = wrap_noisy(env, noise, derive_seed(seed, streams::REWARD_NOISE))?;
        let mut env_rng = stream(seed, streams::ENV_RESET);
        let obs = env.reset(env_rng.next_u64());
        Ok(Self {
            buffer: ReplayBuffer::new(config.buffer_capacity, o, a)?,
            policy,
            critic,
            reward,
            qv,
            env,
            eval_env,
            env_rng,
            exploration_rng: stream(seed, streams::EXPLORATION),
            sampling_rng: stream(seed, streams::SAMPLING),
            next_action_rng: stream(seed, streams::NEXT_ACTION),
            actor_rng: stream(seed, streams::ACTOR_NOISE),
            eval_rng: stream(seed, streams::EVAL),
            obs,
            env_steps: 0,
            rounds: 0,
            episodes: 0,
            accum: Accumulator::default(),
            config,
        })
    }

    pub fn env_steps(&self) -> usize {
        self.env_steps
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    /// Acts once, stores the transition, and runs any update rounds that are
    /// due. Returns their reports.
    pub fn env_step(&mut self) -> Result<Vec<RoundReport>> {
        let spec = self.env.spec();
        let step = self.env_steps;
        let action = if step < self.config.warmup_steps {
            let b = spec.action_bound;
            (0..spec.action_dim)
                .map(|_| self.exploration_rng.random_range(-b..=b))
                .collect()
        } else {
            self.policy
                .select_action(&self.obs, &mut self.exploration_rng, true, self.config.exploration_noise_std)
                .map_err(|e| e.at_step(step))?
        };
        let res = self.env.step(&action).map_err(|e| e.at_step(step))?;
        let over = res.episode_over();
        let next_obs = res.next_obs;
        self.buffer.push(Transition {
            obs: std::mem::replace(&mut self.obs, next_obs.clone()),
            action,
            reward: res.reward,
            next_obs,
            done: res.done,
            truncated: res.truncated,
        })?;
        if over {
            self.episodes += 1;
            self.obs = self.env.reset(self.env_rng.next_u64());
        }
        self.env_steps += 1;

        let n = self.config.update_interval;
        let mut reports = Vec::new();
        if self.env_steps >= self.config.warmup_steps && self.env_steps % n == 0 {
            for _ in 0..n {
                match self.update_round() {
                    Ok(Some(r)) => {
                        self.accum.add(&r);
                        reports.push(r);
                    }
                    Ok(None) => break,
                    Err(e) => return Err(e.at_step(step)),
                }
            }
        }
        Ok(reports)
    }

    /// One full update round, or `None` while the buffer is too small.
    pub fn update_round(&mut self) -> Result<Option<RoundReport>> {
        let cfg = &self.config;
        let (model_slots, ac_slots) = if cfg.shared_samples {
            if self.buffer.len() < cfg.batch_ac {
                return Ok(None);
            }
            let s = self.buffer.sample_distinct_indices(&mut self.sampling_rng, cfg.batch_ac)?;
            (s.clone(), s)
        } else {
            if self.buffer.len() < cfg.batch_model + cfg.batch_ac {
                return Ok(None);
            }
            self.buffer
                .sample_disjoint_indices(&mut self.sampling_rng, cfg.batch_model, cfg.batch_ac)?
        };
        let mut phases = vec![Phase::Sample];
        let model_batch = self.buffer.resolve(&model_slots);
        let ac_batch = self.buffer.resolve(&ac_slots);

        let (mut reward_mse, mut qv_loss) = (0.0, 0.0);
        if cfg.trains_model() {
            reward_mse = self.reward.train_reward_step(&model_batch)?;
            phases.push(Phase::Reward);
            let (q, v) = self.qv.train_qv_step(&self.reward, &self.policy, &model_batch)?;
            qv_loss = q + v;
            phases.push(Phase::Qv);
        }

        let next = next_actions(cfg, &self.policy, &ac_batch, &mut self.next_action_rng)?;
        let targets = match cfg.critic_mode {
            CriticMode::Dr => self.critic.dr_target(&self.qv, &self.policy, &next, &ac_batch)?,
            CriticMode::BaselineTd => self.critic.baseline_td_target(&next, &ac_batch)?,
        };
        let critic_loss = self.critic.critic_update(&targets, &ac_batch)?;
        phases.push(Phase::Critic);

        let actor_due = cfg.algorithm != Algorithm::Td3 || self.rounds % cfg.td3_policy_delay == 0;
        let actor_objective = if actor_due {
            let states: Vec<&[f64]> = ac_batch.iter().map(|t| t.obs.as_slice()).collect();
            let obj = if cfg.algorithm == Algorithm::Sac {
                let dim = self.policy.action_dim();
                let eps: Vec<Vec<f64>> = states
                    .iter()
                    .map(|_| standard_normal_vec(&mut self.actor_rng, dim))
                    .collect();
                let objective = ActorObjective::Sac(SacNoise {
                    eps: &eps,
                    alpha: cfg.sac_entropy_coeff,
                });
                actor_update(&mut self.policy, &self.critic, &states, &objective, cfg.tau)?
            } else {
                actor_update(&mut self.policy, &self.critic, &states, &ActorObjective::Deterministic, cfg.tau)?
            };
            phases.push(Phase::Actor);
            Some(obj)
        } else {
            None
        };

        let report = RoundReport {
            round: self.rounds,
            phases,
            model_slots,
            ac_slots,
            targets,
            critic_loss,
            reward_mse,
            qv_loss,
            actor_objective,
        };
        self.rounds += 1;
        Ok(Some(report))
    }

    /// Greedy episodes on the clean evaluation copy; returns (mean, population std).
    pub fn evaluate(&mut self, episodes: usize) -> Result<(f64, f64)> {
        let mut returns = Vec::with_capacity(episodes);
        for _ in 0..episodes {
            let mut obs = self.eval_env.reset(self.eval_rng.next_u64());
            let mut total = 0.0;
            loop {
                let mut a = self.policy.act(&obs)?;
                self.policy.clip(&mut a);
                let r = self.eval_env.step(&a)?;
                total += r.reward;
                if r.episode_over() {
                    break;
                }
                obs = r.next_obs;
            }
            returns.push(total);
        }
        Ok(mean_and_pop_std(&returns))
    }

    fn metrics_row(&mut self, schedule: &RunSchedule, start: Instant) -> Result<MetricsRow> {
        let (mean, std) = self.evaluate(schedule.eval_episodes)?;
        let a = std::mem::take(&mut self.accum);
        Ok(MetricsRow {
            step: self.env_steps as u64,
            episode: self.episodes,
            eval_return_mean: mean,
            eval_return_std: std,
            critic_loss: Accumulator::mean(a.critic_loss, a.rounds),
            reward_model_mse: Accumulator::mean(a.reward_mse, a.rounds),
            qv_loss: Accumulator::mean(a.qv_loss, a.rounds),
            dr_correction_mean: Accumulator::mean(a.correction, a.rounds),
            actor_objective: Accumulator::mean(a.actor_objective, a.actor_rounds),
            wall_ms: if schedule.record_wall_time {
                start.elapsed().as_millis() as u64
            } else {
                0
            },
            seed: schedule.seed,
        })
    }

    /// Runs the schedule, handing each metrics row to `sink` as it is produced.
    pub fn run_with(&mut self, schedule: &RunSchedule, mut sink: impl FnMut(&MetricsRow)) -> Result<Vec<MetricsRow>> {
        schedule.validate(self.config.warmup_steps)?;
        let start = Instant::now();
        let mut rows = Vec::new();
        while self.env_steps < schedule.total_steps {
            self.env_step()?;
            if self.env_steps % schedule.eval_interval == 0 || self.env_steps == schedule.total_steps {
                let row = self.metrics_row(schedule, start)?;
                sink(&row);
                rows.push(row);
            }
        }
        Ok(rows)
    }
}

/// Actions for the target critic at each `s'`.
fn next_actions(
    cfg: &AgentConfig,
    policy: &Policy,
    batch: &[&Transition],
    rng: &mut StreamRng,
) -> Result<NextActions> {
    match cfg.algorithm {
        Algorithm::Ddpg => NextActions::from_target_policy(policy, batch),
        Algorithm::Td3 => {
            let b = policy.action_bound();
            let std = cfg.td3_target_noise_std * b;
            let clip = cfg.td3_target_noise_clip * b;
            let next_obs: Vec<&[f64]> = batch.iter().map(|t| t.next_obs.as_slice()).collect();
            let mut actions = policy.act_batch_with(&policy.target_params, &next_obs)?;
            for a in &mut actions {
                for (x, z) in a.iter_mut().zip(standard_normal_vec(rng, policy.action_dim())) {
                    *x += (std * z).clamp(-clip, clip);
                }
                policy.clip(a);
            }
            Ok(NextActions { actions, log_probs: None })
        }
        Algorithm::Sac => {
            let next_obs: Vec<&[f64]> = batch.iter().map(|t| t.next_obs.as_slice()).collect();
            let eps: Vec<Vec<f64>> = batch
                .iter()
                .map(|_| standard_normal_vec(rng, policy.action_dim()))
                .collect();
            let samples = policy.sample_batch_with_noise(&policy.params, &next_obs, &eps)?;
            let log_probs = samples.iter().map(|s| s.log_prob).collect();
            Ok(NextActions {
                actions: samples.into_iter().map(|s| s.action).collect(),
                log_probs: Some(log_probs),
            })
        }
    }
}

pub fn mean_and_pop_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Builds a trainer and runs it to completion.
pub fn train_run(
    env: Box<dyn Environment>,
    noise: NoiseConfig,
    config: AgentConfig,
    schedule: &RunSchedule,
) -> Result<Vec<MetricsRow>> {
    let mut trainer = Trainer::new(env, noise, config, schedule.seed)?;
    trainer.run_with(schedule, |_| {})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::make_env;

    fn small(algorithm: Algorithm, mode: CriticMode) -> AgentConfig {
        AgentConfig {
            algorithm,
            critic_mode: mode,
            warmup_steps: 40,
            batch_model: 8,
            batch_ac: 8,
            hidden: vec![16, 16],
            ..AgentConfig::default()
        }
    }

    #[test]
    fn phases_run_in_order() {
        let mut t = Trainer::new(make_env("pendulum").unwrap(), NoiseConfig::clean(), small(Algorithm::Ddpg, CriticMode::Dr), 1)
            .unwrap();
        let mut seen = 0;
        for _ in 0..60 {
            for r in t.env_step().unwrap() {
                assert_eq!(r.phases, vec![Phase::Sample, Phase::Reward, Phase::Qv, Phase::Critic, Phase::Actor]);
                seen += 1;
            }
        }
        assert_eq!(seen, 21);
    }

    #[test]
    fn batches_are_disjoint() {
        let mut t = Trainer::new(make_env("pointmass").unwrap(), NoiseConfig::clean(), small(Algorithm::Sac, CriticMode::Dr), 2)
            .unwrap();
        for _ in 0..50 {
            for r in t.env_step().unwrap() {
                assert!(r.model_slots.iter().all(|s| !r.ac_slots.contains(s)));
            }
        }
    }

    #[test]
    fn td3_updates_actor_every_other_round() {
        let mut t = Trainer::new(make_env("pendulum").unwrap(), NoiseConfig::clean(), small(Algorithm::Td3, CriticMode::Dr), 3)
            .unwrap();
        let mut last = t.policy.params.clone();
        for _ in 0..50 {
            for r in t.env_step().unwrap() {
                let moved = t.policy.params != last;
                assert_eq!(r.actor_objective.is_some(), r.round % 2 == 0);
                assert_eq!(moved, r.round % 2 == 0);
                last = t.policy.params.clone();
            }
        }
    }

    #[test]
    fn baseline_mode_trains_no_model() {
        let mut t = Trainer::new(
            make_env("massspring").unwrap(),
            NoiseConfig::clean(),
            small(Algorithm::Ddpg, CriticMode::BaselineTd),
            4,
        )
        .unwrap();
        let r0 = t.reward.params.clone();
        let q0 = t.qv.q_params.clone();
        for _ in 0..50 {
            for r in t.env_step().unwrap() {
                assert_eq!(r.phases, vec![Phase::Sample, Phase::Critic, Phase::Actor]);
            }
        }
        assert_eq!(t.reward.params, r0);
        assert_eq!(t.qv.q_params, q0);
    }

    #[test]
    fn actions_stay_in_bounds() {
        let mut t = Trainer::new(make_env("pendulum").unwrap(), NoiseConfig::clean(), small(Algorithm::Td3, CriticMode::Dr), 5)
            .unwrap();
        for _ in 0..80 {
            t.env_step().unwrap();
        }
        assert!(t.buffer.iter_chronological().all(|tr| tr.action.iter().all(|a| a.abs() <= 2.0)));
    }

    #[test]
    fn run_is_deterministic() {
        let schedule = RunSchedule {
            total_steps: 120,
            eval_interval: 60,
            eval_episodes: 1,
            seed: 9,
            record_wall_time: false,
        };
        let a = train_run(make_env("pointmass").unwrap(), NoiseConfig { mu: 0.0, sigma: 0.5 }, small(Algorithm::Sac, CriticMode::Dr), &schedule)
            .unwrap();
        let b = train_run(make_env("pointmass").unwrap(), NoiseConfig { mu: 0.0, sigma: 0.5 }, small(Algorithm::Sac, CriticMode::Dr), &schedule)
            .unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_invalid_config() {
        let mut c = AgentConfig::default();
        c.gamma = 1.0;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = AgentConfig::default();
        c.td3_policy_delay = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn population_std() {
        assert_eq!(mean_and_pop_std(&[10.0, 20.0]), (15.0, 5.0));
    }
}
