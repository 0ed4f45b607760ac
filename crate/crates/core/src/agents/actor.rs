//! Actor objectives and their analytic gradients through the critic.
//!
//! Deterministic: `J = mean_s Q_1(s, pi(s))`.
//! Squashed Gaussian: `J = mean_s [min_k Q_k(s, a~) - alpha log pi(a~|s)]`
//! with `a~ = bound * tanh(mean + std * eps)` and `eps` held fixed.

use crate::agents::policy::{split_gaussian, squashed_log_prob, Policy, PolicyKind, SQUASH_EPS};
use crate::approx::{polyak_update_in_place, ParameterVector};
use crate::dr_critic::DrCritic;
use crate::error::{Component, Error, Result};

/// Per-call inputs of the stochastic objective.
#[derive(Debug, Clone)]
pub struct SacNoise<'a> {
    /// One standard-normal vector per state.
    pub eps: &'a [Vec<f64>],
    pub alpha: f64,
}

fn check_states(states: &[&[f64]]) -> Result<()> {
    if states.is_empty() {
        return Err(Error::Usage("actor update on an empty batch".into()));
    }
    Ok(())
}

/// `mean_s Q_1(s, pi_params(s))`.
pub fn deterministic_objective(
    policy: &Policy,
    params: &ParameterVector<f64>,
    critic: &DrCritic,
    states: &[&[f64]],
) -> Result<f64> {
    check_states(states)?;
    let mut total = 0.0;
    for s in states {
        let a = policy.mlp().forward(params, s)?;
        total += critic.q(0, s, &a)?;
    }
    Ok(total / states.len() as f64)
}

/// Objective and `dJ/dparams` via the critic's action gradient.
pub fn deterministic_gradient(
    policy: &Policy,
    params: &ParameterVector<f64>,
    critic: &DrCritic,
    states: &[&[f64]],
) -> Result<(f64, ParameterVector<f64>)> {
    check_states(states)?;
    let scale = 1.0 / states.len() as f64;
    let trace = policy.mlp().forward_batch(params, states)?;
    let actions: Vec<Vec<f64>> = (0..trace.n).map(|i| trace.output_row(i).to_vec()).collect();
    let (q, dq_da) = critic.action_gradient_batch(0, states, &actions)?;
    let upstream: Vec<f64> = dq_da.iter().flatten().map(|g| g * scale).collect();
    let mut grad = params.zeros_like();
    policy.mlp().backward_batch(params, &trace, &upstream, Some(&mut grad), false);
    Ok((q.iter().sum::<f64>() * scale, grad))
}

/// `mean_s [min_k Q_k(s, a~) - alpha log pi(a~|s)]` under fixed noise.
pub fn sac_objective(
    policy: &Policy,
    params: &ParameterVector<f64>,
    critic: &DrCritic,
    states: &[&[f64]],
    noise: &SacNoise<'_>,
) -> Result<f64> {
    check_states(states)?;
    let mut total = 0.0;
    for (s, eps) in states.iter().zip(noise.eps) {
        let sample = policy.sample_with_noise(params, s, eps)?;
        let (q, _) = critic.min_action_gradient(s, &sample.action)?;
        total += q - noise.alpha * sample.log_prob;
    }
    Ok(total / states.len() as f64)
}

/// Reparameterized gradient of [`sac_objective`]. The log-std path is cut
/// wherever the clamp is active.
pub fn sac_gradient(
    policy: &Policy,
    params: &ParameterVector<f64>,
    critic: &DrCritic,
    states: &[&[f64]],
    noise: &SacNoise<'_>,
) -> Result<(f64, ParameterVector<f64>)> {
    check_states(states)?;
    if policy.kind() != PolicyKind::SquashedGaussian {
        return Err(Error::Usage("stochastic objective needs a squashed gaussian policy".into()));
    }
    if noise.eps.len() != states.len() {
        return Err(Error::Usage("one noise vector per state required".into()));
    }
    let dim = policy.action_dim();
    let bound = policy.action_bound();
    let alpha = noise.alpha;
    let scale = 1.0 / states.len() as f64;
    let trace = policy.mlp().forward_batch(params, states)?;
    let mut heads = Vec::with_capacity(states.len());
    let mut pre = Vec::with_capacity(states.len());
    let mut actions = Vec::with_capacity(states.len());
    for (i, eps) in noise.eps.iter().enumerate() {
        let head = split_gaussian(trace.output_row(i), dim);
        let u: Vec<f64> = (0..dim).map(|k| head.mean[k] + head.log_std[k].exp() * eps[k]).collect();
        actions.push(u.iter().map(|x| bound * x.tanh()).collect::<Vec<f64>>());
        pre.push(u);
        heads.push(head);
    }
    let (q, dq_da) = critic.min_action_gradient_batch(states, &actions)?;
    let mut total = 0.0;
    let mut upstream = vec![0.0; 2 * dim * states.len()];
    for i in 0..states.len() {
        let (head, u, eps) = (&heads[i], &pre[i], &noise.eps[i]);
        let log_prob = squashed_log_prob(&head.mean, &head.log_std, u);
        total += q[i] - alpha * log_prob;
        let up = &mut upstream[2 * dim * i..2 * dim * (i + 1)];
        for k in 0..dim {
            let t = u[k].tanh();
            let sech2 = 1.0 - t * t;
            let dobj_du = dq_da[i][k] * bound * sech2 - alpha * 2.0 * t * sech2 / (sech2 + SQUASH_EPS);
            up[k] = dobj_du * scale;
            up[dim + k] = if head.log_std_active[k] {
                (dobj_du * head.log_std[k].exp() * eps[k] + alpha) * scale
            } else {
                0.0
            };
        }
    }
    let mut grad = params.zeros_like();
    policy.mlp().backward_batch(params, &trace, &upstream, Some(&mut grad), false);
    Ok((total * scale, grad))
}

/// Which objective an actor step ascends.
#[derive(Debug, Clone)]
pub enum ActorObjective<'a> {
    Deterministic,
    Sac(SacNoise<'a>),
}

/// One Adam ascent step on the actor objective followed by the Polyak update
/// of the target policy. The critic is only read. Returns the pre-step
/// objective.
pub fn actor_update(
    policy: &mut Policy,
    critic: &DrCritic,
    states: &[&[f64]],
    objective: &ActorObjective<'_>,
    tau: f64,
) -> Result<f64> {
    let (obj, mut grad) = match objective {
        ActorObjective::Deterministic => deterministic_gradient(policy, &policy.params, critic, states)?,
        ActorObjective::Sac(noise) => sac_gradient(policy, &policy.params, critic, states, noise)?,
    };
    if !obj.is_finite() {
        return Err(Error::numeric(Component::Actor, "non-finite objective, step refused"));
    }
    grad.scale(-1.0);
    policy.optimizer.step(&mut policy.params, &grad).map_err(|e| match e {
        Error::Numeric { detail, .. } => Error::numeric(Component::Actor, detail),
        other => other,
    })?;
    polyak_update_in_place(&mut policy.target_params, &policy.params, tau)?;
    Ok(obj)
}
