//! Off-policy evaluation on tabular MDPs: per-decision importance sampling,
//! the direct method, and doubly robust estimators (contextual-bandit and
//! sequential), plus a Monte Carlo study harness against the exact
//! finite-horizon value.
//!
//! Models are either stationary ([`MdpModel`]) or staged by decision step
//! ([`StagedModel`]). Over a finite horizon only the staged model built from
//! the steps-to-go values is exact; the stationary infinite-horizon model
//! overstates the value near the end of the horizon.
//!
//! Sequential DR runs backwards over a trajectory,
//! `V(t) = V^(s_t) + rho_t (r_t + gamma V(t+1) - Q^(s_t, a_t))`, with
//! `V(T) = 0`. Per-decision IS uses the same nesting,
//! `G(t) = rho_t (r_t + gamma G(t+1))`, which equals
//! `sum_t gamma^t (prod_{k<=t} rho_k) r_t` and makes the zero-model reduction
//! exact in floating point.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::envs::{finite_horizon_policy_value, tabular_policy_value, TabularMdp};
use crate::error::{Error, Result};
use crate::rng::stream;
use crate::scalar::Scalar;

/// One logged decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoggedStep<T> {
    pub state: usize,
    pub action: usize,
    pub reward: T,
    pub next_state: usize,
    /// `beta(action | state)` as recorded by the logger.
    pub behavior_prob: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoggedTrajectory<T> {
    steps: Vec<LoggedStep<T>>,
}

impl<T: Scalar> LoggedTrajectory<T> {
    pub fn new(steps: Vec<LoggedStep<T>>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::Config("a trajectory needs at least one step".into()));
        }
        for (t, s) in steps.iter().enumerate() {
            let p = s.behavior_prob;
            if !(p > T::zero() && p <= T::one()) {
                return Err(Error::Coverage {
                    step: t,
                    pi_prob: f64::NAN,
                });
            }
        }
        Ok(Self { steps })
    }

    pub fn steps(&self) -> &[LoggedStep<T>] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Tabular reward, value and action-value estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct MdpModel<T> {
    pub reward_estimate: Vec<Vec<T>>,
    pub value_estimate: Vec<T>,
    pub action_value_estimate: Vec<Vec<T>>,
    pub discount: T,
}

impl<T: Scalar> MdpModel<T> {
    pub fn zeros(n_states: usize, n_actions: usize, discount: T) -> Self {
        Self {
            reward_estimate: vec![vec![T::zero(); n_actions]; n_states],
            value_estimate: vec![T::zero(); n_states],
            action_value_estimate: vec![vec![T::zero(); n_actions]; n_states],
            discount,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.value_estimate.iter().all(|v| v.is_finite())
            && self
                .reward_estimate
                .iter()
                .chain(&self.action_value_estimate)
                .all(|row| row.iter().all(|v| v.is_finite()))
    }

    /// Largest violation of `Q^ = R^ + gamma P V^` and `V^ = sum_a pi Q^`.
    pub fn bellman_residual(&self, mdp: &TabularMdp<T>, policy: &[Vec<T>]) -> T {
        let mut worst = T::zero();
        for s in 0..mdp.n_states() {
            let mut v = T::zero();
            for a in 0..mdp.n_actions() {
                let next: T = mdp
                    .transition(s, a)
                    .iter()
                    .zip(&self.value_estimate)
                    .map(|(&p, &x)| p * x)
                    .sum();
                let q = self.reward_estimate[s][a] + self.discount * next;
                worst = worst.max((q - self.action_value_estimate[s][a]).abs());
                v += policy[s][a] * self.action_value_estimate[s][a];
            }
            worst = worst.max((v - self.value_estimate[s]).abs());
        }
        worst
    }
}

/// One [`MdpModel`] per decision step.
#[derive(Debug, Clone, PartialEq)]
pub struct StagedModel<T> {
    pub stages: Vec<MdpModel<T>>,
}

impl<T: Scalar> StagedModel<T> {
    pub fn discount(&self) -> T {
        self.stages.first().map_or(T::zero(), |m| m.discount)
    }

    /// The same stationary model at every step.
    pub fn repeated(model: &MdpModel<T>, horizon: usize) -> Self {
        Self {
            stages: vec![model.clone(); horizon],
        }
    }
}

/// How the estimators' model is built from the true MDP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelQuality {
    /// Staged steps-to-go values for the study horizon.
    Exact,
    /// Infinite-horizon values at every step.
    Stationary,
    Zero,
    /// Exact action values plus `N(0, eps^2)` noise per entry.
    Perturbed(f64),
}

impl ModelQuality {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Self::Exact),
            "stationary" => Ok(Self::Stationary),
            "zero" => Ok(Self::Zero),
            _ => {
                let eps = s
                    .strip_prefix("perturbed:")
                    .and_then(|e| e.parse::<f64>().ok())
                    .filter(|e| e.is_finite() && *e >= 0.0)
                    .ok_or_else(|| {
                        Error::Config(format!("model: `{s}` is not exact, stationary, zero or perturbed:EPS"))
                    })?;
                Ok(Self::Perturbed(eps))
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Exact => "exact".into(),
            Self::Stationary => "stationary".into(),
            Self::Zero => "zero".into(),
            Self::Perturbed(e) => format!("perturbed:{e}"),
        }
    }
}

/// `pi / beta`.
pub fn importance_weight<T: Scalar>(pi_prob: T, beta_prob: T) -> Result<T> {
    if !(beta_prob > T::zero()) {
        return Err(Error::Coverage {
            step: 0,
            pi_prob: pi_prob.as_f64(),
        });
    }
    Ok(pi_prob / beta_prob)
}

fn step_weight<T: Scalar>(pi: &[Vec<T>], step: &LoggedStep<T>, t: usize) -> Result<T> {
    importance_weight(pi[step.state][step.action], step.behavior_prob).map_err(|e| match e {
        Error::Coverage { pi_prob, .. } => Error::Coverage { step: t, pi_prob },
        other => other,
    })
}

/// `V^ + rho (r - R^)`.
pub fn dr_bandit<T: Scalar>(v_hat: T, rho: T, r: T, r_hat: T) -> T {
    v_hat + rho * (r - r_hat)
}

pub fn dr_sequential<T: Scalar>(traj: &LoggedTrajectory<T>, pi: &[Vec<T>], model: &MdpModel<T>) -> Result<T> {
    dr_with(traj, pi, model.discount, |_| model)
}

/// Sequential DR with stage `t` of `model` used at decision step `t`.
pub fn dr_staged<T: Scalar>(traj: &LoggedTrajectory<T>, pi: &[Vec<T>], model: &StagedModel<T>) -> Result<T> {
    if model.stages.len() < traj.len() {
        return Err(Error::Config(format!(
            "model has {} stages for a {}-step trajectory",
            model.stages.len(),
            traj.len()
        )));
    }
    dr_with(traj, pi, model.discount(), |t| &model.stages[t])
}

fn dr_with<'m, T: Scalar + 'm>(
    traj: &LoggedTrajectory<T>,
    pi: &[Vec<T>],
    g: T,
    stage: impl Fn(usize) -> &'m MdpModel<T>,
) -> Result<T> {
    let mut v = T::zero();
    for (t, step) in traj.steps.iter().enumerate().rev() {
        let rho = step_weight(pi, step, t)?;
        let m = stage(t);
        let q = m.action_value_estimate[step.state][step.action];
        v = m.value_estimate[step.state] + rho * (step.reward + g * v - q);
    }
    Ok(v)
}

/// Per-decision importance sampling.
pub fn is_estimate<T: Scalar>(traj: &LoggedTrajectory<T>, pi: &[Vec<T>], discount: T) -> Result<T> {
    let mut v = T::zero();
    for (t, step) in traj.steps.iter().enumerate().rev() {
        let rho = step_weight(pi, step, t)?;
        v = rho * (step.reward + discount * v);
    }
    Ok(v)
}

/// `sum_s d0(s) V^(s)`.
pub fn dm_estimate<T: Scalar>(model: &MdpModel<T>, initial_distribution: &[T]) -> Result<T> {
    if initial_distribution.len() != model.value_estimate.len() {
        return Err(Error::Config("initial distribution does not match model size".into()));
    }
    Ok(initial_distribution
        .iter()
        .zip(&model.value_estimate)
        .map(|(&d, &v)| d * v)
        .sum())
}

/// Builds a stationary model. Action values are `R + gamma P V_pi` with
/// the infinite-horizon `V_pi` (plus noise when perturbed) and state values
/// are their `pi`-average, so `V^` is always consistent with `Q^` under `pi`.
/// `Exact` and `Stationary` coincide here.
pub fn build_model<T: Scalar, R: Rng + ?Sized>(
    mdp: &TabularMdp<T>,
    pi: &[Vec<T>],
    quality: ModelQuality,
    rng: &mut R,
) -> Result<MdpModel<T>> {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    if quality == ModelQuality::Zero {
        return Ok(MdpModel::zeros(ns, na, mdp.discount()));
    }
    let v_pi = tabular_policy_value(mdp, pi)?;
    Ok(model_from_values(mdp, pi, &v_pi, quality, rng))
}

/// Builds a `horizon`-stage model. For `Exact` and `Perturbed`, stage `t`
/// holds `Q^_t = R + gamma P V_{H-t-1}` from the finite-horizon values, so
/// the exact model has zero Bellman error against the truncated return.
pub fn build_staged_model<T: Scalar, R: Rng + ?Sized>(
    mdp: &TabularMdp<T>,
    pi: &[Vec<T>],
    horizon: usize,
    quality: ModelQuality,
    rng: &mut R,
) -> Result<StagedModel<T>> {
    match quality {
        ModelQuality::Zero | ModelQuality::Stationary => {
            Ok(StagedModel::repeated(&build_model(mdp, pi, quality, rng)?, horizon))
        }
        ModelQuality::Exact | ModelQuality::Perturbed(_) => {
            let mut stages = Vec::with_capacity(horizon);
            for t in 0..horizon {
                let v_next = finite_horizon_policy_value(mdp, pi, horizon - t - 1)?;
                stages.push(model_from_values(mdp, pi, &v_next, quality, rng));
            }
            Ok(StagedModel { stages })
        }
    }
}

fn model_from_values<T: Scalar, R: Rng + ?Sized>(
    mdp: &TabularMdp<T>,
    pi: &[Vec<T>],
    v_next: &[T],
    quality: ModelQuality,
    rng: &mut R,
) -> MdpModel<T> {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let mut q = mdp.action_values(v_next);
    if let ModelQuality::Perturbed(eps) = quality {
        if eps != 0.0 {
            for row in &mut q {
                for x in row.iter_mut() {
                    let z: f64 = StandardNormal.sample(rng);
                    *x += T::lit(eps * z);
                }
            }
        }
    }
    let v = (0..ns)
        .map(|s| (0..na).map(|a| pi[s][a] * q[s][a]).sum())
        .collect();
    MdpModel {
        reward_estimate: mdp.rewards().to_vec(),
        value_estimate: v,
        action_value_estimate: q,
        discount: mdp.discount(),
    }
}

fn draw_categorical<T: Scalar, R: Rng + ?Sized>(probs: &[T], rng: &mut R) -> usize {
    let u = T::lit(rng.random::<f64>());
    let mut acc = T::zero();
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding left u above the final partial sum: last non-zero entry
    probs.iter().rposition(|&p| p > T::zero()).unwrap_or(0)
}

/// Rolls out `horizon` steps under `beta`, logging its probabilities.
pub fn sample_trajectory<T: Scalar, R: Rng + ?Sized>(
    mdp: &TabularMdp<T>,
    beta: &[Vec<T>],
    horizon: usize,
    rng: &mut R,
) -> Result<LoggedTrajectory<T>> {
    mdp.check_policy(beta)?;
    let mut s = draw_categorical(mdp.initial_distribution(), rng);
    let mut steps = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let a = draw_categorical(&beta[s], rng);
        let next = draw_categorical(mdp.transition(s, a), rng);
        steps.push(LoggedStep {
            state: s,
            action: a,
            reward: mdp.reward(s, a),
            next_state: next,
            behavior_prob: beta[s][a],
        });
        s = next;
    }
    LoggedTrajectory::new(steps)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    Is,
    Dm,
    Dr,
}

impl Estimator {
    pub const ALL: [Estimator; 3] = [Estimator::Is, Estimator::Dm, Estimator::Dr];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Is => "is",
            Estimator::Dm => "dm",
            Estimator::Dr => "dr",
        }
    }
}

/// Monte Carlo statistics of one estimator across resamples. Each resample
/// estimate is the mean over its trajectories; `variance` is the unbiased
/// sample variance of those estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorStats {
    pub estimator: Estimator,
    pub mean: f64,
    pub variance: f64,
    pub mse: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudySetup<'a, T> {
    pub mdp: &'a TabularMdp<T>,
    pub pi: &'a [Vec<T>],
    pub beta: &'a [Vec<T>],
    pub horizon: usize,
    pub n_trajectories: usize,
    pub n_resamples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub quality: ModelQuality,
    /// Exact `horizon`-step value of `pi` from the initial distribution.
    pub truth: f64,
    pub stats: Vec<EstimatorStats>,
}

impl StudyResult {
    pub fn get(&self, e: Estimator) -> &EstimatorStats {
        self.stats.iter().find(|s| s.estimator == e).expect("every estimator is reported")
    }
}

const TRAJECTORY_STREAM: u64 = 0x7472616a;
const MODEL_STREAM: u64 = 0x6d6f64;

/// Runs IS, DM and DR over the same resampled trajectory sets. Trajectories
/// depend only on the seed, so studies for different model qualities share
/// them exactly.
pub fn estimator_study<T: Scalar>(setup: &StudySetup<'_, T>, quality: ModelQuality) -> Result<StudyResult> {
    let mdp = setup.mdp;
    if setup.horizon == 0 || setup.horizon > 50 || mdp.n_states() > 20 {
        return Err(Error::Config("study limited to 20 states and horizons 1..=50".into()));
    }
    if setup.n_trajectories == 0 || setup.n_resamples < 2 {
        return Err(Error::Config("need at least one trajectory and two resamples".into()));
    }
    mdp.check_policy(setup.pi)?;
    mdp.check_policy(setup.beta)?;
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            if setup.pi[s][a] > T::zero() && setup.beta[s][a] == T::zero() {
                return Err(Error::Coverage {
                    step: 0,
                    pi_prob: setup.pi[s][a].as_f64(),
                });
            }
        }
    }
    let model = build_staged_model(mdp, setup.pi, setup.horizon, quality, &mut stream(setup.seed, MODEL_STREAM))?;
    let truth: f64 = finite_horizon_policy_value(mdp, setup.pi, setup.horizon)?
        .iter()
        .zip(mdp.initial_distribution())
        .map(|(&v, &d)| (v * d).as_f64())
        .sum();
    let dm = dm_estimate(&model.stages[0], mdp.initial_distribution())?.as_f64();
    let mut rng = stream(setup.seed, TRAJECTORY_STREAM);
    let mut samples: [Vec<f64>; 3] = Default::default();
    for _ in 0..setup.n_resamples {
        let (mut is_sum, mut dr_sum) = (0.0, 0.0);
        for _ in 0..setup.n_trajectories {
            let traj = sample_trajectory(mdp, setup.beta, setup.horizon, &mut rng)?;
            is_sum += is_estimate(&traj, setup.pi, mdp.discount())?.as_f64();
            dr_sum += dr_staged(&traj, setup.pi, &model)?.as_f64();
        }
        let n = setup.n_trajectories as f64;
        samples[0].push(is_sum / n);
        samples[1].push(dm);
        samples[2].push(dr_sum / n);
    }
    let stats = Estimator::ALL
        .iter()
        .zip(&samples)
        .map(|(&estimator, xs)| summarize(estimator, xs, truth))
        .collect();
    Ok(StudyResult { quality, truth, stats })
}

fn summarize(estimator: Estimator, xs: &[f64], truth: f64) -> EstimatorStats {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let variance = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    let mse = xs.iter().map(|x| (x - truth) * (x - truth)).sum::<f64>() / n;
    EstimatorStats {
        estimator,
        mean,
        variance,
        mse,
        std_error: (variance / n).sqrt(),
    }
}

/// Two-action policy table taking action 1 with probability `p` everywhere.
pub fn constant_policy<T: Scalar>(n_states: usize, p: f64) -> Vec<Vec<T>> {
    vec![vec![T::lit(1.0 - p), T::lit(p)]; n_states]
}
