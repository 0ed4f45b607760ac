//! Built-in environments, the Gaussian reward-corruption wrapper and exact
//! tabular value oracles.

mod continuous;
mod noisy;
pub mod tabular;

pub use continuous::{ConstantReward, MassSpring, Pendulum, PointMass};
pub use noisy::{wrap_noisy, NoiseConfig, NoisyEnv};
pub use tabular::{
    finite_horizon_policy_value, tabular_policy_value, TabularEnv, TabularMdp,
};

use crate::error::{Error, Result};

/// Shape of an environment's observation and action spaces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvSpec {
    pub obs_dim: usize,
    pub action_dim: usize,
    /// Actions live in the symmetric box `[-action_bound, action_bound]`.
    pub action_bound: f64,
    pub max_episode_steps: usize,
}

impl EnvSpec {
    pub fn validate(&self) -> Result<()> {
        if self.obs_dim == 0 || self.action_dim == 0 {
            return Err(Error::Config("observation and action dims must be positive".into()));
        }
        if !(self.action_bound > 0.0) || !self.action_bound.is_finite() {
            return Err(Error::Config("action bound must be positive".into()));
        }
        if self.max_episode_steps == 0 {
            return Err(Error::Config("max_episode_steps must be at least 1".into()));
        }
        Ok(())
    }

    pub fn clip_action(&self, action: &[f64]) -> Vec<f64> {
        action
            .iter()
            .map(|a| a.clamp(-self.action_bound, self.action_bound))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next_obs: Vec<f64>,
    pub reward: f64,
    /// A true terminal state was reached; do not bootstrap through it.
    pub done: bool,
    /// The time limit cut the episode; bootstrapping continues through it.
    pub truncated: bool,
}

impl StepResult {
    pub fn episode_over(&self) -> bool {
        self.done || self.truncated
    }
}

/// A resettable, single-threaded simulator.
///
/// Implementations clip incoming actions to the declared box before applying
/// dynamics and refuse to step once an episode has ended.
pub trait Environment: Send {
    fn spec(&self) -> EnvSpec;
    fn reset(&mut self, seed: u64) -> Vec<f64>;
    fn step(&mut self, action: &[f64]) -> Result<StepResult>;
    fn boxed_clone(&self) -> Box<dyn Environment>;
}

impl Clone for Box<dyn Environment> {
    fn clone(&self) -> Self {
        self.boxed_clone()
    }
}

/// Step counter shared by all built-in environments.
#[derive(Debug, Clone, Default)]
pub(crate) struct EpisodeClock {
    steps: usize,
    over: bool,
    started: bool,
}

impl EpisodeClock {
    pub fn reset(&mut self) {
        self.steps = 0;
        self.over = false;
        self.started = true;
    }

    pub fn begin_step(&self, spec: &EnvSpec, action: &[f64]) -> Result<()> {
        if !self.started {
            return Err(Error::Usage("step called before reset".into()));
        }
        if self.over {
            return Err(Error::Usage("step called after episode end without reset".into()));
        }
        if action.len() != spec.action_dim {
            return Err(Error::Usage(format!(
                "action has length {}, environment expects {}",
                action.len(),
                spec.action_dim
            )));
        }
        Ok(())
    }

    /// Advances the counter; returns the truncation flag.
    pub fn finish_step(&mut self, spec: &EnvSpec, done: bool) -> bool {
        self.steps += 1;
        let truncated = self.steps >= spec.max_episode_steps;
        self.over = done || truncated;
        truncated
    }
}

/// Environment names addressable from the command line:
/// `pendulum`, `pointmass`, `massspring`, `chain-N`, `constant` / `constant-C`.
pub fn make_env(name: &str) -> Result<Box<dyn Environment>> {
    match name {
        "pendulum" => Ok(Box::new(Pendulum::default())),
        "pointmass" => Ok(Box::new(PointMass::default())),
        "massspring" => Ok(Box::new(MassSpring::default())),
        "constant" => Ok(Box::new(ConstantReward::new(1.0))),
        _ => {
            if let Some(n) = name.strip_prefix("chain-") {
                let n: usize = n
                    .parse()
                    .map_err(|_| Error::Config(format!("env: cannot parse chain size in '{name}'")))?;
                let mdp = TabularMdp::chain(n, 0.9)?;
                return Ok(Box::new(TabularEnv::new(mdp, 50)?));
            }
            if let Some(c) = name.strip_prefix("constant-") {
                let c: f64 = c
                    .parse()
                    .map_err(|_| Error::Config(format!("env: cannot parse reward in '{name}'")))?;
                return Ok(Box::new(ConstantReward::new(c)));
            }
            Err(Error::Config(format!("env: unknown environment '{name}'")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_resolve() {
        for name in ["pendulum", "pointmass", "massspring", "chain-5", "constant", "constant-2.5"] {
            let env = make_env(name).unwrap();
            env.spec().validate().unwrap();
        }
        assert!(matches!(make_env("halfcheetah"), Err(Error::Config(_))));
        assert!(matches!(make_env("chain-x"), Err(Error::Config(_))));
    }

    #[test]
    fn episode_length_capped() {
        for name in ["pendulum", "pointmass", "massspring", "chain-3"] {
            let mut env = make_env(name).unwrap();
            let spec = env.spec();
            env.reset(1);
            let zero = vec![0.0; spec.action_dim];
            let mut n = 0;
            loop {
                let r = env.step(&zero).unwrap();
                n += 1;
                if r.episode_over() {
                    assert!(r.truncated);
                    break;
                }
            }
            assert_eq!(n, spec.max_episode_steps);
            assert!(matches!(env.step(&zero), Err(Error::Usage(_))));
        }
    }

    #[test]
    fn step_requires_reset() {
        let mut env = make_env("pendulum").unwrap();
        assert!(matches!(env.step(&[0.0]), Err(Error::Usage(_))));
    }
}
