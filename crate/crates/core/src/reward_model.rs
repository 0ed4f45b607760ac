//! The model half of the doubly robust critic: a learned reward function
//! `R^(s, a)` and a pair of heads `Q^(s, a)`, `V^(s)` fitted by TD on
//! predicted rewards.
//!
//! The reward net regresses observed (possibly corrupted) rewards, so under
//! zero-mean noise it converges to the clean conditional mean. The Q head
//! bootstraps `R^(s, a) + gamma Q^_target(s', pi(s'))` through a Polyak
//! target; the V head regresses `Q^(s, pi(s))` with that value held fixed,
//! keeping it a separate, lagging estimate rather than an alias of Q^.

use rand::Rng;

use crate::agents::Policy;
use crate::approx::{
    polyak_update_in_place, Activation, AdamState, LossTarget, Mlp, OutputActivation,
    ParameterVector, Sample,
};
use crate::error::{Component, Error, Result};
use crate::replay::Transition;

/// `r + gamma * next`, with the bootstrap dropped on true terminals only.
#[inline]
pub fn bootstrap(reward: f64, gamma: f64, done: bool, next_value: f64) -> f64 {
    if done {
        reward
    } else {
        reward + gamma * next_value
    }
}

pub(crate) fn scalar_net(input_dim: usize, hidden: &[usize]) -> Result<Mlp<f64>> {
    let mut sizes = vec![input_dim];
    sizes.extend_from_slice(hidden);
    sizes.push(1);
    Mlp::new(sizes, Activation::Relu, OutputActivation::Identity)
}

fn squared_batch<'a>(inputs: &'a [Vec<f64>], targets: &'a [[f64; 1]]) -> Vec<Sample<'a, f64>> {
    inputs
        .iter()
        .zip(targets)
        .map(|(x, t)| Sample {
            input: x,
            target: LossTarget::Squared(t),
        })
        .collect()
}

/// Learned reward function.
#[derive(Debug, Clone)]
pub struct RewardNet {
    pub mlp: Mlp<f64>,
    pub params: ParameterVector<f64>,
    pub optimizer: AdamState<f64>,
}

impl RewardNet {
    /// Hidden layers are randomly initialized; the output layer starts at zero.
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        learning_rate: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mlp = scalar_net(obs_dim + action_dim, hidden)?;
        let mut params = mlp.init(rng);
        params.zero_last_layer();
        Ok(Self {
            optimizer: AdamState::new(params.len(), learning_rate),
            mlp,
            params,
        })
    }

    pub fn predict_reward(&self, obs: &[f64], action: &[f64]) -> Result<f64> {
        let mut x = obs.to_vec();
        x.extend_from_slice(action);
        Ok(self.mlp.forward(&self.params, &x)?[0])
    }

    /// Mean squared error of `params` against observed rewards.
    pub fn loss_with(&self, params: &ParameterVector<f64>, batch: &[&Transition]) -> Result<f64> {
        let (inputs, targets) = reward_rows(batch);
        self.mlp.loss(params, &squared_batch(&inputs, &targets))
    }

    pub fn loss_and_gradient(
        &self,
        params: &ParameterVector<f64>,
        batch: &[&Transition],
    ) -> Result<(f64, ParameterVector<f64>)> {
        let (inputs, targets) = reward_rows(batch);
        self.mlp.loss_and_gradient(params, &squared_batch(&inputs, &targets))
    }

    /// One Adam step on the reward regression loss; returns the pre-step MSE.
    pub fn train_reward_step(&mut self, batch: &[&Transition]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Usage("reward step on an empty batch".into()));
        }
        let (loss, grad) = self.loss_and_gradient(&self.params, batch)?;
        if !loss.is_finite() {
            return Err(Error::numeric(Component::RewardModel, "non-finite loss, step refused"));
        }
        self.optimizer
            .step(&mut self.params, &grad)
            .map_err(|e| relabel(e, Component::RewardModel))?;
        Ok(loss)
    }
}

pub(crate) fn concat(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut x = Vec::with_capacity(a.len() + b.len());
    x.extend_from_slice(a);
    x.extend_from_slice(b);
    x
}

pub(crate) fn as_slices(rows: &[Vec<f64>]) -> Vec<&[f64]> {
    rows.iter().map(|r| r.as_slice()).collect()
}

fn reward_rows(batch: &[&Transition]) -> (Vec<Vec<f64>>, Vec<[f64; 1]>) {
    batch.iter().map(|t| (t.state_action(), [t.reward])).unzip()
}

fn relabel(e: Error, component: Component) -> Error {
    match e {
        Error::Numeric { detail, .. } => Error::Numeric { component, detail },
        other => other,
    }
}

/// Hyperparameters of the Q^/V^ model.
#[derive(Debug, Clone, Copy)]
pub struct QvConfig {
    pub gamma: f64,
    pub tau: f64,
    pub learning_rate: f64,
}

/// Model action-value and state-value heads.
#[derive(Debug, Clone)]
pub struct QvModel {
    pub q_mlp: Mlp<f64>,
    pub q_params: ParameterVector<f64>,
    pub q_target_params: ParameterVector<f64>,
    pub q_optimizer: AdamState<f64>,
    pub v_mlp: Mlp<f64>,
    pub v_params: ParameterVector<f64>,
    pub v_optimizer: AdamState<f64>,
    pub config: QvConfig,
}

impl QvModel {
    /// Both heads start with a zero output layer, so they predict 0 until
    /// trained.
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        config: QvConfig,
        rng: &mut R,
    ) -> Result<Self> {
        if !(config.gamma >= 0.0 && config.gamma < 1.0) {
            return Err(Error::Config(format!("gamma {} outside [0, 1)", config.gamma)));
        }
        let q_mlp = scalar_net(obs_dim + action_dim, hidden)?;
        let v_mlp = scalar_net(obs_dim, hidden)?;
        let mut q_params = q_mlp.init(rng);
        q_params.zero_last_layer();
        let mut v_params = v_mlp.init(rng);
        v_params.zero_last_layer();
        Ok(Self {
            q_target_params: q_params.clone(),
            q_optimizer: AdamState::new(q_params.len(), config.learning_rate),
            v_optimizer: AdamState::new(v_params.len(), config.learning_rate),
            q_mlp,
            q_params,
            v_mlp,
            v_params,
            config,
        })
    }

    pub fn predict_q(&self, obs: &[f64], action: &[f64]) -> Result<f64> {
        let mut x = obs.to_vec();
        x.extend_from_slice(action);
        Ok(self.q_mlp.forward(&self.q_params, &x)?[0])
    }

    /// State value; takes no action argument.
    pub fn predict_v(&self, obs: &[f64]) -> Result<f64> {
        Ok(self.v_mlp.forward(&self.v_params, obs)?[0])
    }

    /// `R^(s, a) + gamma (1 - done) Q^_target(s', pi(s'))` per transition.
    pub fn q_targets(
        &self,
        reward: &RewardNet,
        policy: &Policy,
        batch: &[&Transition],
    ) -> Result<Vec<f64>> {
        let sa: Vec<Vec<f64>> = batch.iter().map(|t| t.state_action()).collect();
        let r_hat = reward.mlp.forward_many(&reward.params, &as_slices(&sa))?;
        let next_obs: Vec<&[f64]> = batch.iter().map(|t| t.next_obs.as_slice()).collect();
        let next_actions = policy.act_batch(&next_obs)?;
        let next_sa: Vec<Vec<f64>> = next_obs.iter().zip(&next_actions).map(|(s, a)| concat(s, a)).collect();
        let q_next = self.q_mlp.forward_many(&self.q_target_params, &as_slices(&next_sa))?;
        batch
            .iter()
            .zip(r_hat.iter().zip(&q_next))
            .map(|(t, (r, q))| {
                let y = bootstrap(r[0], self.config.gamma, t.done, q[0]);
                if !y.is_finite() {
                    return Err(Error::numeric(Component::QHead, "non-finite Q^ target"));
                }
                Ok(y)
            })
            .collect()
    }

    /// `Q^(s, pi(s))` per transition under the current Q head.
    pub fn v_targets(&self, policy: &Policy, batch: &[&Transition]) -> Result<Vec<f64>> {
        let obs: Vec<&[f64]> = batch.iter().map(|t| t.obs.as_slice()).collect();
        let q = self.q_at_policy(policy, &obs)?;
        if q.iter().any(|y| !y.is_finite()) {
            return Err(Error::numeric(Component::VHead, "non-finite V^ target"));
        }
        Ok(q)
    }

    /// `Q^(s, pi(s))` for each state.
    pub fn q_at_policy(&self, policy: &Policy, obs: &[&[f64]]) -> Result<Vec<f64>> {
        let actions = policy.act_batch(obs)?;
        let sa: Vec<Vec<f64>> = obs.iter().zip(&actions).map(|(s, a)| concat(s, a)).collect();
        Ok(self
            .q_mlp
            .forward_many(&self.q_params, &as_slices(&sa))?
            .into_iter()
            .map(|o| o[0])
            .collect())
    }

    pub fn predict_v_batch(&self, obs: &[&[f64]]) -> Result<Vec<f64>> {
        Ok(self
            .v_mlp
            .forward_many(&self.v_params, obs)?
            .into_iter()
            .map(|o| o[0])
            .collect())
    }

    pub fn q_loss_and_gradient(
        &self,
        params: &ParameterVector<f64>,
        targets: &[f64],
        batch: &[&Transition],
    ) -> Result<(f64, ParameterVector<f64>)> {
        let inputs: Vec<Vec<f64>> = batch.iter().map(|t| t.state_action()).collect();
        let targets: Vec<[f64; 1]> = targets.iter().map(|&y| [y]).collect();
        self.q_mlp.loss_and_gradient(params, &squared_batch(&inputs, &targets))
    }

    pub fn q_loss_with(
        &self,
        params: &ParameterVector<f64>,
        targets: &[f64],
        batch: &[&Transition],
    ) -> Result<f64> {
        let inputs: Vec<Vec<f64>> = batch.iter().map(|t| t.state_action()).collect();
        let targets: Vec<[f64; 1]> = targets.iter().map(|&y| [y]).collect();
        self.q_mlp.loss(params, &squared_batch(&inputs, &targets))
    }

    pub fn v_loss_and_gradient(
        &self,
        params: &ParameterVector<f64>,
        targets: &[f64],
        batch: &[&Transition],
    ) -> Result<(f64, ParameterVector<f64>)> {
        let inputs: Vec<Vec<f64>> = batch.iter().map(|t| t.obs.clone()).collect();
        let targets: Vec<[f64; 1]> = targets.iter().map(|&y| [y]).collect();
        self.v_mlp.loss_and_gradient(params, &squared_batch(&inputs, &targets))
    }

    pub fn v_loss_with(
        &self,
        params: &ParameterVector<f64>,
        targets: &[f64],
        batch: &[&Transition],
    ) -> Result<f64> {
        let inputs: Vec<Vec<f64>> = batch.iter().map(|t| t.obs.clone()).collect();
        let targets: Vec<[f64; 1]> = targets.iter().map(|&y| [y]).collect();
        self.v_mlp.loss(params, &squared_batch(&inputs, &targets))
    }

    /// One Adam step per head followed by the Q-target Polyak update.
    /// Both target sets are computed before either head moves. Returns the
    /// pre-step `(q_loss, v_loss)`.
    pub fn train_qv_step(
        &mut self,
        reward: &RewardNet,
        policy: &Policy,
        batch: &[&Transition],
    ) -> Result<(f64, f64)> {
        if batch.is_empty() {
            return Err(Error::Usage("qv step on an empty batch".into()));
        }
        let q_targets = self.q_targets(reward, policy, batch)?;
        let v_targets = self.v_targets(policy, batch)?;
        let (q_loss, q_grad) = self.q_loss_and_gradient(&self.q_params, &q_targets, batch)?;
        let (v_loss, v_grad) = self.v_loss_and_gradient(&self.v_params, &v_targets, batch)?;
        if !q_loss.is_finite() {
            return Err(Error::numeric(Component::QHead, "non-finite loss, step refused"));
        }
        if !v_loss.is_finite() {
            return Err(Error::numeric(Component::VHead, "non-finite loss, step refused"));
        }
        self.q_optimizer
            .step(&mut self.q_params, &q_grad)
            .map_err(|e| relabel(e, Component::QHead))?;
        self.v_optimizer
            .step(&mut self.v_params, &v_grad)
            .map_err(|e| relabel(e, Component::VHead))?;
        polyak_update_in_place(&mut self.q_target_params, &self.q_params, self.config.tau)?;
        Ok((q_loss, v_loss))
    }
}
