//! Online/target critics and the doubly robust regression target
//!
//! `y = Q^(s, pi(s)) + [r + gamma (1 - done) Q_target(s', a') - V^(s)]`.
//!
//! Next actions `a'` (and, for the entropy-regularized variant, their log
//! densities) are supplied by the caller, so this module never touches an
//! RNG. With a zero model the target collapses to the plain TD target.

use rand::Rng;

use crate::agents::Policy;
use crate::approx::{polyak_update_in_place, AdamState, LossTarget, Mlp, ParameterVector, Sample};
use crate::error::{Component, Error, Result};
use crate::replay::Transition;
use crate::reward_model::{as_slices, bootstrap, scalar_net, QvModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriticMode {
    Dr,
    BaselineTd,
}

impl CriticMode {
    pub fn name(self) -> &'static str {
        match self {
            CriticMode::Dr => "dr",
            CriticMode::BaselineTd => "td",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CriticConfig {
    pub gamma: f64,
    pub tau: f64,
    pub learning_rate: f64,
    /// Two critics with a min-over-twins bootstrap.
    pub twin: bool,
    /// Weight of `-log pi(a'|s')` in the bootstrap; 0 disables it.
    pub entropy_coeff: f64,
    /// Diagnostic clamp on `|y|`.
    pub target_clip: Option<f64>,
}

/// One critic network's parameter sets.
#[derive(Debug, Clone)]
pub struct CriticHead {
    pub params: ParameterVector<f64>,
    pub target_params: ParameterVector<f64>,
    pub optimizer: AdamState<f64>,
}

#[derive(Debug, Clone)]
pub struct DrCritic {
    pub mlp: Mlp<f64>,
    pub heads: Vec<CriticHead>,
    pub mode: CriticMode,
    pub config: CriticConfig,
}

/// Actions fed to the target critic at `s'`.
#[derive(Debug, Clone)]
pub struct NextActions {
    pub actions: Vec<Vec<f64>>,
    /// `log pi(a'|s')`, present for the entropy-regularized variant.
    pub log_probs: Option<Vec<f64>>,
}

impl NextActions {
    /// `a' = pi_target(s')` for every transition.
    pub fn from_target_policy(policy: &Policy, batch: &[&Transition]) -> Result<Self> {
        let next_obs: Vec<&[f64]> = batch.iter().map(|t| t.next_obs.as_slice()).collect();
        let actions = policy.act_batch_with(&policy.target_params, &next_obs)?;
        Ok(Self {
            actions,
            log_probs: None,
        })
    }
}

/// Regression targets aligned to a batch, plus the per-transition
/// correction term `r + gamma (1 - done) Q_target - V^` (just the bootstrap
/// in baseline mode).
#[derive(Debug, Clone, PartialEq)]
pub struct DrTargetBatch {
    pub targets: Vec<f64>,
    pub corrections: Vec<f64>,
}

impl DrTargetBatch {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn correction_mean(&self) -> f64 {
        if self.corrections.is_empty() {
            0.0
        } else {
            self.corrections.iter().sum::<f64>() / self.corrections.len() as f64
        }
    }
}

fn critic_input(obs: &[f64], action: &[f64]) -> Vec<f64> {
    let mut x = Vec::with_capacity(obs.len() + action.len());
    x.extend_from_slice(obs);
    x.extend_from_slice(action);
    x
}

impl DrCritic {
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        mode: CriticMode,
        config: CriticConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let mlp = scalar_net(obs_dim + action_dim, hidden)?;
        let count = if config.twin { 2 } else { 1 };
        let heads = (0..count).map(|_| CriticHead::fresh(&mlp, config.learning_rate, rng)).collect();
        Self::from_parts(mlp, heads, mode, config)
    }

    pub fn from_parts(
        mlp: Mlp<f64>,
        heads: Vec<CriticHead>,
        mode: CriticMode,
        config: CriticConfig,
    ) -> Result<Self> {
        if !(config.tau > 0.0 && config.tau <= 1.0) {
            return Err(Error::Config(format!("tau {} outside (0, 1]", config.tau)));
        }
        if !(config.gamma >= 0.0 && config.gamma < 1.0) {
            return Err(Error::Config(format!("gamma {} outside [0, 1)", config.gamma)));
        }
        if heads.is_empty() || heads.len() > 2 {
            return Err(Error::Config("a critic has one or two heads".into()));
        }
        Ok(Self {
            mlp,
            heads,
            mode,
            config,
        })
    }

    pub fn num_heads(&self) -> usize {
        self.heads.len()
    }

    pub fn q_with(&self, params: &ParameterVector<f64>, obs: &[f64], action: &[f64]) -> Result<f64> {
        Ok(self.mlp.forward(params, &critic_input(obs, action))?[0])
    }

    pub fn q(&self, head: usize, obs: &[f64], action: &[f64]) -> Result<f64> {
        self.q_with(&self.heads[head].params, obs, action)
    }

    /// Minimum over target heads.
    pub fn target_q(&self, obs: &[f64], action: &[f64]) -> Result<f64> {
        let x = critic_input(obs, action);
        let mut best = f64::INFINITY;
        for h in &self.heads {
            best = best.min(self.mlp.forward(&h.target_params, &x)?[0]);
        }
        Ok(best)
    }

    /// `Q(s, a)` of one online head and its gradient with respect to `a`.
    pub fn action_gradient(&self, head: usize, obs: &[f64], action: &[f64]) -> Result<(f64, Vec<f64>)> {
        let params = &self.heads[head].params;
        let trace = self.mlp.forward_trace(params, &critic_input(obs, action))?;
        let q = trace.output()[0];
        let d_in = self.mlp.backward(params, &trace, &[1.0], None);
        Ok((q, d_in[obs.len()..].to_vec()))
    }

    /// Online head with the smaller value at `(s, a)` and its action gradient.
    pub fn min_action_gradient(&self, obs: &[f64], action: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut best = self.action_gradient(0, obs, action)?;
        for head in 1..self.heads.len() {
            let cand = self.action_gradient(head, obs, action)?;
            if cand.0 < best.0 {
                best = cand;
            }
        }
        Ok(best)
    }

    /// Batched [`DrCritic::action_gradient`]: values and `dQ/da` rows.
    pub fn action_gradient_batch(
        &self,
        head: usize,
        obs: &[&[f64]],
        actions: &[Vec<f64>],
    ) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let params = &self.heads[head].params;
        let inputs: Vec<Vec<f64>> = obs.iter().zip(actions).map(|(s, a)| critic_input(s, a)).collect();
        let trace = self.mlp.forward_batch(params, &as_slices(&inputs))?;
        let q = trace.output().to_vec();
        let ones = vec![1.0; q.len()];
        let d_in = self.mlp.backward_batch(params, &trace, &ones, None, true);
        let width = self.mlp.input_dim();
        let grads = obs
            .iter()
            .enumerate()
            .map(|(i, s)| d_in[i * width + s.len()..(i + 1) * width].to_vec())
            .collect();
        Ok((q, grads))
    }

    /// Per pair, the online head with the smaller value and its action
    /// gradient.
    pub fn min_action_gradient_batch(
        &self,
        obs: &[&[f64]],
        actions: &[Vec<f64>],
    ) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let (mut q, mut grads) = self.action_gradient_batch(0, obs, actions)?;
        for head in 1..self.heads.len() {
            let (q2, g2) = self.action_gradient_batch(head, obs, actions)?;
            for (i, (v, g)) in q2.into_iter().zip(g2).enumerate() {
                if v < q[i] {
                    q[i] = v;
                    grads[i] = g;
                }
            }
        }
        Ok((q, grads))
    }

    /// Elementwise minimum over target heads for a batch of pairs.
    pub fn target_q_batch(&self, inputs: &[&[f64]]) -> Result<Vec<f64>> {
        let mut best = vec![f64::INFINITY; inputs.len()];
        for h in &self.heads {
            let out = self.mlp.forward_batch(&h.target_params, inputs)?;
            for (b, &q) in best.iter_mut().zip(out.output()) {
                *b = b.min(q);
            }
        }
        Ok(best)
    }

    /// `Q_target(s', a') - alpha log pi(a'|s')` per transition; 0 where the
    /// bootstrap is masked.
    fn bootstrap_values(&self, next: &NextActions, batch: &[&Transition]) -> Result<Vec<f64>> {
        if next.actions.len() != batch.len() {
            return Err(Error::Usage(format!(
                "{} next actions for a batch of {}",
                next.actions.len(),
                batch.len()
            )));
        }
        let inputs: Vec<Vec<f64>> = batch
            .iter()
            .zip(&next.actions)
            .map(|(t, a)| critic_input(&t.next_obs, a))
            .collect();
        let q = self.target_q_batch(&as_slices(&inputs))?;
        let mut out = Vec::with_capacity(batch.len());
        for (i, t) in batch.iter().enumerate() {
            if t.done {
                out.push(0.0);
                continue;
            }
            let mut v = q[i];
            if !v.is_finite() {
                return Err(Error::numeric(Component::TargetCritic, "non-finite Q_target"));
            }
            if let Some(lp) = &next.log_probs {
                if self.config.entropy_coeff != 0.0 {
                    v -= self.config.entropy_coeff * lp[i];
                }
            }
            out.push(v);
        }
        Ok(out)
    }

    fn clip(&self, y: f64) -> f64 {
        match self.config.target_clip {
            Some(c) => y.clamp(-c, c),
            None => y,
        }
    }

    /// `r + gamma (1 - done) Q_target(s', a')`.
    pub fn baseline_td_target(&self, next: &NextActions, batch: &[&Transition]) -> Result<DrTargetBatch> {
        let boot = self.bootstrap_values(next, batch)?;
        let mut targets = Vec::with_capacity(batch.len());
        let mut corrections = Vec::with_capacity(batch.len());
        for (t, b) in batch.iter().zip(boot) {
            let c = bootstrap(t.reward, self.config.gamma, t.done, b);
            if !c.is_finite() {
                return Err(Error::numeric(Component::TargetCritic, "non-finite TD target"));
            }
            corrections.push(c);
            targets.push(self.clip(c));
        }
        Ok(DrTargetBatch { targets, corrections })
    }

    /// The doubly robust target with `Q^(s, pi(s))` taken at the online
    /// policy's greedy action.
    pub fn dr_target(
        &self,
        qv: &QvModel,
        policy: &Policy,
        next: &NextActions,
        batch: &[&Transition],
    ) -> Result<DrTargetBatch> {
        if self.mode != CriticMode::Dr {
            return Err(Error::Usage("doubly robust target requested from a baseline critic".into()));
        }
        let boot = self.bootstrap_values(next, batch)?;
        let obs: Vec<&[f64]> = batch.iter().map(|t| t.obs.as_slice()).collect();
        let q_hats = qv.q_at_policy(policy, &obs)?;
        let v_hats = qv.predict_v_batch(&obs)?;
        let mut targets = Vec::with_capacity(batch.len());
        let mut corrections = Vec::with_capacity(batch.len());
        for (((t, b), q_hat), v_hat) in batch.iter().zip(boot).zip(q_hats).zip(v_hats) {
            if !q_hat.is_finite() {
                return Err(Error::numeric(Component::ModelQ, "non-finite Q^(s, pi(s))"));
            }
            if !v_hat.is_finite() {
                return Err(Error::numeric(Component::ModelV, "non-finite V^(s)"));
            }
            let c = bootstrap(t.reward, self.config.gamma, t.done, b) - v_hat;
            let y = q_hat + c;
            if !y.is_finite() {
                return Err(Error::numeric(Component::TargetCritic, "non-finite DR target"));
            }
            corrections.push(c);
            targets.push(self.clip(y));
        }
        Ok(DrTargetBatch { targets, corrections })
    }

    /// Mean squared error of one head under `params` and its gradient.
    pub fn loss_and_gradient(
        &self,
        params: &ParameterVector<f64>,
        targets: &[f64],
        batch: &[&Transition],
    ) -> Result<(f64, ParameterVector<f64>)> {
        let inputs: Vec<Vec<f64>> = batch.iter().map(|t| t.state_action()).collect();
        let ts: Vec<[f64; 1]> = targets.iter().map(|&y| [y]).collect();
        let samples: Vec<Sample<'_, f64>> = inputs
            .iter()
            .zip(&ts)
            .map(|(x, t)| Sample {
                input: x,
                target: LossTarget::Squared(t),
            })
            .collect();
        self.mlp.loss_and_gradient(params, &samples)
    }

    pub fn loss_with(
        &self,
        params: &ParameterVector<f64>,
        targets: &[f64],
        batch: &[&Transition],
    ) -> Result<f64> {
        let inputs: Vec<Vec<f64>> = batch.iter().map(|t| t.state_action()).collect();
        let ts: Vec<[f64; 1]> = targets.iter().map(|&y| [y]).collect();
        let samples: Vec<Sample<'_, f64>> = inputs
            .iter()
            .zip(&ts)
            .map(|(x, t)| Sample {
                input: x,
                target: LossTarget::Squared(t),
            })
            .collect();
        self.mlp.loss(params, &samples)
    }

    /// One Adam step per head toward the shared targets, then Polyak updates.
    /// Returns the pre-step loss averaged over heads.
    pub fn critic_update(&mut self, targets: &DrTargetBatch, batch: &[&Transition]) -> Result<f64> {
        if targets.len() != batch.len() {
            return Err(Error::Usage("targets not aligned with batch".into()));
        }
        if batch.is_empty() {
            return Err(Error::Usage("critic update on an empty batch".into()));
        }
        if targets.targets.iter().any(|y| !y.is_finite()) {
            return Err(Error::numeric(Component::Critic, "non-finite target"));
        }
        let mut steps = Vec::with_capacity(self.heads.len());
        for h in &self.heads {
            let (loss, grad) = self.loss_and_gradient(&h.params, &targets.targets, batch)?;
            if !loss.is_finite() {
                return Err(Error::numeric(Component::Critic, "non-finite loss, step refused"));
            }
            steps.push((loss, grad));
        }
        let tau = self.config.tau;
        let mut total = 0.0;
        for (h, (loss, grad)) in self.heads.iter_mut().zip(steps) {
            h.optimizer.step(&mut h.params, &grad).map_err(|e| match e {
                Error::Numeric { detail, .. } => Error::numeric(Component::Critic, detail),
                other => other,
            })?;
            polyak_update_in_place(&mut h.target_params, &h.params, tau)?;
            total += loss;
        }
        Ok(total / self.heads.len() as f64)
    }
}

impl CriticHead {
    pub fn fresh<R: Rng + ?Sized>(mlp: &Mlp<f64>, learning_rate: f64, rng: &mut R) -> Self {
        Self::from_params(mlp.init(rng), learning_rate)
    }

    pub fn from_params(params: ParameterVector<f64>, learning_rate: f64) -> Self {
        Self {
            target_params: params.clone(),
            optimizer: AdamState::new(params.len(), learning_rate),
            params,
        }
    }
}
