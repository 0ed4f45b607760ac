use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::approx::{Activation, AdamState, Mlp, OutputActivation, ParameterVector};
use crate::error::{Error, Result};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
/// Stabilizer inside the tanh-squashing log-Jacobian.
pub const SQUASH_EPS: f64 = 1e-6;

const HALF_LOG_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    /// `s -> bound * tanh(.)`
    Deterministic,
    /// `s -> (mean, log_std)`, action `bound * tanh(mean + std * eps)`.
    SquashedGaussian,
}

/// Gaussian head outputs for one state.
#[derive(Debug, Clone)]
pub struct GaussianHead {
    pub mean: Vec<f64>,
    pub log_std: Vec<f64>,
    /// Whether each raw log-std output sat inside the clamp range.
    pub log_std_active: Vec<bool>,
}

/// One reparameterized draw from a squashed Gaussian policy.
#[derive(Debug, Clone)]
pub struct SquashedSample {
    pub action: Vec<f64>,
    pub pre_squash: Vec<f64>,
    pub log_prob: f64,
}

/// An actor network with its Polyak target copy and optimizer.
#[derive(Debug, Clone)]
pub struct Policy {
    kind: PolicyKind,
    mlp: Mlp<f64>,
    pub params: ParameterVector<f64>,
    pub target_params: ParameterVector<f64>,
    pub optimizer: AdamState<f64>,
    action_dim: usize,
    action_bound: f64,
}

impl Policy {
    pub fn new<R: Rng + ?Sized>(
        kind: PolicyKind,
        obs_dim: usize,
        action_dim: usize,
        action_bound: f64,
        hidden: &[usize],
        learning_rate: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(hidden);
        let output = match kind {
            PolicyKind::Deterministic => {
                sizes.push(action_dim);
                OutputActivation::ScaledTanh(action_bound)
            }
            PolicyKind::SquashedGaussian => {
                sizes.push(2 * action_dim);
                OutputActivation::Identity
            }
        };
        let mlp = Mlp::new(sizes, Activation::Relu, output)?;
        let params = mlp.init(rng);
        Self::from_parts(kind, mlp, params, action_bound, learning_rate)
    }

    /// Builds a policy around an explicit network and parameters.
    pub fn from_parts(
        kind: PolicyKind,
        mlp: Mlp<f64>,
        params: ParameterVector<f64>,
        action_bound: f64,
        learning_rate: f64,
    ) -> Result<Self> {
        if !(action_bound > 0.0) {
            return Err(Error::Config("action bound must be positive".into()));
        }
        let action_dim = match kind {
            PolicyKind::Deterministic => mlp.output_dim(),
            PolicyKind::SquashedGaussian => {
                if mlp.output_dim() % 2 != 0 {
                    return Err(Error::Config(
                        "gaussian policy network must output (mean, log_std) pairs".into(),
                    ));
                }
                mlp.output_dim() / 2
            }
        };
        let optimizer = AdamState::new(params.len(), learning_rate);
        Ok(Self {
            kind,
            target_params: params.clone(),
            params,
            optimizer,
            mlp,
            action_dim,
            action_bound,
        })
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn mlp(&self) -> &Mlp<f64> {
        &self.mlp
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn action_bound(&self) -> f64 {
        self.action_bound
    }

    pub fn clip(&self, a: &mut [f64]) {
        for x in a {
            *x = x.clamp(-self.action_bound, self.action_bound);
        }
    }

    pub fn gaussian_head(&self, params: &ParameterVector<f64>, obs: &[f64]) -> Result<GaussianHead> {
        let out = self.mlp.forward(params, obs)?;
        Ok(split_gaussian(&out, self.action_dim))
    }

    /// The greedy action under `params`: `pi(s)` for deterministic policies,
    /// `bound * tanh(mean)` for squashed Gaussians.
    pub fn act_with(&self, params: &ParameterVector<f64>, obs: &[f64]) -> Result<Vec<f64>> {
        match self.kind {
            PolicyKind::Deterministic => self.mlp.forward(params, obs),
            PolicyKind::SquashedGaussian => {
                let head = self.gaussian_head(params, obs)?;
                Ok(head
                    .mean
                    .iter()
                    .map(|m| self.action_bound * m.tanh())
                    .collect())
            }
        }
    }

    /// [`Policy::act_with`] over a batch of observations.
    pub fn act_batch_with(&self, params: &ParameterVector<f64>, obs: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        let out = self.mlp.forward_many(params, obs)?;
        Ok(match self.kind {
            PolicyKind::Deterministic => out,
            PolicyKind::SquashedGaussian => out
                .into_iter()
                .map(|o| {
                    o[..self.action_dim]
                        .iter()
                        .map(|m| self.action_bound * m.tanh())
                        .collect()
                })
                .collect(),
        })
    }

    pub fn act_batch(&self, obs: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        self.act_batch_with(&self.params, obs)
    }

    pub fn act(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.act_with(&self.params, obs)
    }

    pub fn target_act(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.act_with(&self.target_params, obs)
    }

    /// Reparameterized sample `bound * tanh(mean + std * eps)` with its log
    /// density.
    pub fn sample_with_noise(
        &self,
        params: &ParameterVector<f64>,
        obs: &[f64],
        eps: &[f64],
    ) -> Result<SquashedSample> {
        if self.kind != PolicyKind::SquashedGaussian {
            return Err(Error::Usage("sampling requires a squashed gaussian policy".into()));
        }
        let head = self.gaussian_head(params, obs)?;
        Ok(self.squash_sample(&head, eps))
    }

    /// [`Policy::sample_with_noise`] over a batch, one noise row per
    /// observation.
    pub fn sample_batch_with_noise(
        &self,
        params: &ParameterVector<f64>,
        obs: &[&[f64]],
        eps: &[Vec<f64>],
    ) -> Result<Vec<SquashedSample>> {
        if self.kind != PolicyKind::SquashedGaussian {
            return Err(Error::Usage("sampling requires a squashed gaussian policy".into()));
        }
        if eps.len() != obs.len() {
            return Err(Error::Usage(format!("{} noise rows for {} observations", eps.len(), obs.len())));
        }
        let out = self.mlp.forward_many(params, obs)?;
        Ok(out
            .iter()
            .zip(eps)
            .map(|(o, e)| self.squash_sample(&split_gaussian(o, self.action_dim), e))
            .collect())
    }

    fn squash_sample(&self, head: &GaussianHead, eps: &[f64]) -> SquashedSample {
        let pre_squash: Vec<f64> = head
            .mean
            .iter()
            .zip(&head.log_std)
            .zip(eps)
            .map(|((m, ls), e)| m + ls.exp() * e)
            .collect();
        let log_prob = squashed_log_prob(&head.mean, &head.log_std, &pre_squash);
        let action = pre_squash
            .iter()
            .map(|u| self.action_bound * u.tanh())
            .collect();
        SquashedSample {
            action,
            pre_squash,
            log_prob,
        }
    }

    pub fn sample<R: Rng + ?Sized>(
        &self,
        params: &ParameterVector<f64>,
        obs: &[f64],
        rng: &mut R,
    ) -> Result<SquashedSample> {
        let eps = standard_normal_vec(rng, self.action_dim);
        self.sample_with_noise(params, obs, &eps)
    }

    /// Log density of the squashed action `tanh(u)` given the pre-squash
    /// value `u`, under the online parameters.
    pub fn sac_log_prob(&self, obs: &[f64], pre_squash: &[f64]) -> Result<f64> {
        if self.kind != PolicyKind::SquashedGaussian {
            return Err(Error::Usage("log density requires a squashed gaussian policy".into()));
        }
        let head = self.gaussian_head(&self.params, obs)?;
        Ok(squashed_log_prob(&head.mean, &head.log_std, pre_squash))
    }

    /// Behavior action. Deterministic policies add `N(0, (noise_std * bound)^2)`
    /// per coordinate when exploring; Gaussian policies sample when exploring
    /// and act greedily otherwise. The result is always inside the box.
    pub fn select_action<R: Rng + ?Sized>(
        &self,
        obs: &[f64],
        rng: &mut R,
        explore: bool,
        noise_std: f64,
    ) -> Result<Vec<f64>> {
        let mut a = match (self.kind, explore) {
            (PolicyKind::Deterministic, true) => {
                let mut a = self.act(obs)?;
                for x in &mut a {
                    let z: f64 = StandardNormal.sample(rng);
                    *x += noise_std * self.action_bound * z;
                }
                a
            }
            (PolicyKind::SquashedGaussian, true) => self.sample(&self.params, obs, rng)?.action,
            (_, false) => self.act(obs)?,
        };
        self.clip(&mut a);
        Ok(a)
    }
}

pub(crate) fn split_gaussian(out: &[f64], action_dim: usize) -> GaussianHead {
    let mean = out[..action_dim].to_vec();
    let raw = &out[action_dim..2 * action_dim];
    let log_std = raw.iter().map(|r| r.clamp(LOG_STD_MIN, LOG_STD_MAX)).collect();
    let log_std_active = raw
        .iter()
        .map(|&r| (LOG_STD_MIN..=LOG_STD_MAX).contains(&r))
        .collect();
    GaussianHead {
        mean,
        log_std,
        log_std_active,
    }
}

/// Diagonal Gaussian log density at `u` plus the tanh correction
/// `-sum log(1 - tanh(u)^2 + SQUASH_EPS)`.
pub fn squashed_log_prob(mean: &[f64], log_std: &[f64], u: &[f64]) -> f64 {
    mean.iter()
        .zip(log_std)
        .zip(u)
        .map(|((m, ls), ui)| {
            let z = (ui - m) / ls.exp();
            let t = ui.tanh();
            -0.5 * z * z - ls - HALF_LOG_2PI - (1.0 - t * t + SQUASH_EPS).ln()
        })
        .sum()
}

pub(crate) fn standard_normal_vec<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}
