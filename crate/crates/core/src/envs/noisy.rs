use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use super::{EnvSpec, Environment, StepResult};
use crate::error::{Error, Result};
use crate::rng::StreamRng;

/// Additive Gaussian reward corruption `r~ = r + N(mu, sigma^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseConfig {
    pub mu: f64,
    pub sigma: f64,
}

impl NoiseConfig {
    pub fn clean() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::Config(format!(
                "noise sigma must be non-negative, got {}",
                self.sigma
            )));
        }
        if !self.mu.is_finite() {
            return Err(Error::Config("noise mu must be finite".into()));
        }
        Ok(())
    }

    pub fn is_clean(&self) -> bool {
        self.mu == 0.0 && self.sigma == 0.0
    }
}

/// Wraps an environment and corrupts only its reward channel, drawing from a
/// dedicated stream so dynamics and observations are untouched.
#[derive(Clone)]
pub struct NoisyEnv {
    inner: Box<dyn Environment>,
    noise: NoiseConfig,
    rng: StreamRng,
    last_clean_reward: f64,
}

pub fn wrap_noisy(inner: Box<dyn Environment>, noise: NoiseConfig, seed: u64) -> Result<NoisyEnv> {
    noise.validate()?;
    Ok(NoisyEnv {
        inner,
        noise,
        rng: StreamRng::seed_from_u64(seed),
        last_clean_reward: 0.0,
    })
}

impl NoisyEnv {
    pub fn noise(&self) -> NoiseConfig {
        self.noise
    }

    /// The uncorrupted reward of the most recent step.
    pub fn last_clean_reward(&self) -> f64 {
        self.last_clean_reward
    }

    pub fn inner(&self) -> &dyn Environment {
        self.inner.as_ref()
    }
}

impl Environment for NoisyEnv {
    fn spec(&self) -> EnvSpec {
        self.inner.spec()
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        self.inner.reset(seed)
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        let mut r = self.inner.step(action)?;
        self.last_clean_reward = r.reward;
        if self.noise.is_clean() {
            return Ok(r);
        }
        if self.noise.sigma == 0.0 {
            r.reward += self.noise.mu;
        } else {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            r.reward += self.noise.mu + self.noise.sigma * z;
        }
        Ok(r)
    }

    fn boxed_clone(&self) -> Box<dyn Environment> {
        Box::new(self.clone())
    }
}
