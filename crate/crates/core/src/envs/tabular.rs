//! Finite MDPs and their exact policy values.

use rand::{Rng, SeedableRng};

use super::{EnvSpec, Environment, EpisodeClock, StepResult};
use crate::error::{Error, Result};
use crate::rng::StreamRng;
use crate::scalar::Scalar;

const ROW_SUM_TOL: f64 = 1e-12;

/// A finite MDP with a known model.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp<T> {
    n_states: usize,
    n_actions: usize,
    /// `transition[s][a][s']`
    transition: Vec<Vec<Vec<T>>>,
    /// `reward[s][a]`
    reward: Vec<Vec<T>>,
    discount: T,
    initial: Vec<T>,
}

fn check_distribution<T: Scalar>(p: &[T], what: &str) -> Result<()> {
    if p.iter().any(|&x| !(x >= T::zero()) || !x.is_finite()) {
        return Err(Error::Config(format!("{what}: negative or non-finite probability")));
    }
    let sum: T = p.iter().copied().sum();
    if (sum - T::one()).abs().as_f64() > ROW_SUM_TOL {
        return Err(Error::Config(format!("{what}: probabilities sum to {sum}, not 1")));
    }
    Ok(())
}

impl<T: Scalar> TabularMdp<T> {
    pub fn new(
        transition: Vec<Vec<Vec<T>>>,
        reward: Vec<Vec<T>>,
        discount: T,
        initial: Vec<T>,
    ) -> Result<Self> {
        let n_states = transition.len();
        if n_states == 0 {
            return Err(Error::Config("mdp needs at least one state".into()));
        }
        let n_actions = transition[0].len();
        if n_actions == 0 {
            return Err(Error::Config("mdp needs at least one action".into()));
        }
        if !(discount >= T::zero() && discount < T::one()) {
            return Err(Error::Config(format!("discount {discount} outside [0, 1)")));
        }
        if reward.len() != n_states || initial.len() != n_states {
            return Err(Error::Config("reward/initial tables do not match state count".into()));
        }
        for s in 0..n_states {
            if transition[s].len() != n_actions || reward[s].len() != n_actions {
                return Err(Error::Config(format!("state {s}: ragged action tables")));
            }
            for a in 0..n_actions {
                if transition[s][a].len() != n_states {
                    return Err(Error::Config(format!("P[{s}][{a}] has wrong length")));
                }
                check_distribution(&transition[s][a], &format!("P[{s}][{a}]"))?;
                if !reward[s][a].is_finite() {
                    return Err(Error::Config(format!("R[{s}][{a}] is not finite")));
                }
            }
        }
        check_distribution(&initial, "initial distribution")?;
        Ok(Self {
            n_states,
            n_actions,
            transition,
            reward,
            discount,
            initial,
        })
    }

    /// Two-action chain of `n` states starting in state 0.
    ///
    /// Action 1 ("right") advances with probability 0.8 and otherwise stays;
    /// action 0 ("left") moves back deterministically. The last state pays 1
    /// for either action and taking "left" in state 0 pays 0.2.
    pub fn chain(n: usize, discount: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("chain needs at least one state".into()));
        }
        let z = T::zero();
        let mut transition = vec![vec![vec![z; n]; 2]; n];
        let mut reward = vec![vec![z; 2]; n];
        for s in 0..n {
            transition[s][0][s.saturating_sub(1)] += T::one();
            let right = (s + 1).min(n - 1);
            transition[s][1][right] += T::lit(0.8);
            transition[s][1][s] += T::lit(0.2);
        }
        reward[0][0] = T::lit(0.2);
        reward[n - 1][0] = T::one();
        reward[n - 1][1] = T::one();
        let mut initial = vec![z; n];
        initial[0] = T::one();
        Self::new(transition, reward, T::lit(discount), initial)
    }

    /// One state, one action, reward `r`, self-loop forever.
    pub fn single_state(r: f64, discount: f64) -> Result<Self> {
        Self::new(
            vec![vec![vec![T::one()]]],
            vec![vec![T::lit(r)]],
            T::lit(discount),
            vec![T::one()],
        )
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn discount(&self) -> T {
        self.discount
    }

    pub fn initial_distribution(&self) -> &[T] {
        &self.initial
    }

    pub fn transition(&self, s: usize, a: usize) -> &[T] {
        &self.transition[s][a]
    }

    pub fn reward(&self, s: usize, a: usize) -> T {
        self.reward[s][a]
    }

    pub fn rewards(&self) -> &[Vec<T>] {
        &self.reward
    }

    pub fn with_discount(&self, discount: T) -> Result<Self> {
        Self::new(
            self.transition.clone(),
            self.reward.clone(),
            discount,
            self.initial.clone(),
        )
    }

    pub fn check_policy(&self, policy: &[Vec<T>]) -> Result<()> {
        if policy.len() != self.n_states {
            return Err(Error::Config("policy table does not match state count".into()));
        }
        for (s, row) in policy.iter().enumerate() {
            if row.len() != self.n_actions {
                return Err(Error::Config(format!("policy row {s} has wrong length")));
            }
            check_distribution(row, &format!("policy row {s}"))?;
        }
        Ok(())
    }

    /// `(R_pi, P_pi)` for a stochastic policy table.
    fn policy_model(&self, policy: &[Vec<T>]) -> (Vec<T>, Vec<Vec<T>>) {
        let n = self.n_states;
        let mut r_pi = vec![T::zero(); n];
        let mut p_pi = vec![vec![T::zero(); n]; n];
        for s in 0..n {
            for a in 0..self.n_actions {
                let w = policy[s][a];
                r_pi[s] += w * self.reward[s][a];
                for (sp, &p) in self.transition[s][a].iter().enumerate() {
                    p_pi[s][sp] += w * p;
                }
            }
        }
        (r_pi, p_pi)
    }

    /// Action values `Q(s, a) = R(s, a) + discount * sum_s' P(s'|s, a) V(s')`.
    pub fn action_values(&self, values: &[T]) -> Vec<Vec<T>> {
        (0..self.n_states)
            .map(|s| {
                (0..self.n_actions)
                    .map(|a| {
                        let next: T = self.transition[s][a]
                            .iter()
                            .zip(values)
                            .map(|(&p, &v)| p * v)
                            .sum();
                        self.reward[s][a] + self.discount * next
                    })
                    .collect()
            })
            .collect()
    }

    /// `||V - (R_pi + discount P_pi V)||_inf`.
    pub fn bellman_residual(&self, policy: &[Vec<T>], values: &[T]) -> T {
        let (r_pi, p_pi) = self.policy_model(policy);
        (0..self.n_states)
            .map(|s| {
                let next: T = p_pi[s].iter().zip(values).map(|(&p, &v)| p * v).sum();
                (values[s] - (r_pi[s] + self.discount * next)).abs()
            })
            .fold(T::zero(), T::max)
    }
}

/// Solves the dense system `a x = b` by Gaussian elimination with partial
/// pivoting.
fn solve_dense<T: Scalar>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Result<Vec<T>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        if a[pivot][col] == T::zero() {
            return Err(Error::numeric(
                crate::error::Component::Estimator,
                "singular policy-evaluation system",
            ));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == T::zero() {
                continue;
            }
            for k in col..n {
                let v = a[col][k];
                a[row][k] -= f * v;
            }
            let bv = b[col];
            b[row] -= f * bv;
        }
    }
    let mut x = vec![T::zero(); n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Ok(x)
}

/// Exact infinite-horizon value of `policy`: solves `V = R_pi + discount P_pi V`
/// directly, then refines until the Bellman residual is at most `1e-10`
/// (or stops improving).
pub fn tabular_policy_value<T: Scalar>(mdp: &TabularMdp<T>, policy: &[Vec<T>]) -> Result<Vec<T>> {
    mdp.check_policy(policy)?;
    let n = mdp.n_states;
    let (r_pi, p_pi) = mdp.policy_model(policy);
    let g = mdp.discount;
    let system: Vec<Vec<T>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let id = if i == j { T::one() } else { T::zero() };
                    id - g * p_pi[i][j]
                })
                .collect()
        })
        .collect();
    let mut v = solve_dense(system.clone(), r_pi.clone())?;
    let mut residual = mdp.bellman_residual(policy, &v);
    for _ in 0..4 {
        if residual.as_f64() <= 1e-10 {
            break;
        }
        let r: Vec<T> = (0..n)
            .map(|i| {
                let av: T = system[i].iter().zip(&v).map(|(&a, &x)| a * x).sum();
                r_pi[i] - av
            })
            .collect();
        let dx = solve_dense(system.clone(), r)?;
        let candidate: Vec<T> = v.iter().zip(&dx).map(|(&a, &b)| a + b).collect();
        let next_residual = mdp.bellman_residual(policy, &candidate);
        if next_residual >= residual {
            break;
        }
        v = candidate;
        residual = next_residual;
    }
    Ok(v)
}

/// Expected discounted return over exactly `horizon` steps from each state.
pub fn finite_horizon_policy_value<T: Scalar>(
    mdp: &TabularMdp<T>,
    policy: &[Vec<T>],
    horizon: usize,
) -> Result<Vec<T>> {
    mdp.check_policy(policy)?;
    let (r_pi, p_pi) = mdp.policy_model(policy);
    let mut v = vec![T::zero(); mdp.n_states];
    for _ in 0..horizon {
        v = (0..mdp.n_states)
            .map(|s| {
                let next: T = p_pi[s].iter().zip(&v).map(|(&p, &x)| p * x).sum();
                r_pi[s] + mdp.discount * next
            })
            .collect();
    }
    Ok(v)
}

/// A tabular MDP exposed through the continuous-control interface.
///
/// Observations are one-hot state encodings. The single action coordinate in
/// `[-1, 1]` is split into `n_actions` equal bins; bin `k` selects action `k`.
/// Stochastic transitions draw from a stream seeded at reset.
#[derive(Debug, Clone)]
pub struct TabularEnv {
    mdp: TabularMdp<f64>,
    state: usize,
    max_steps: usize,
    rng: StreamRng,
    clock: EpisodeClock,
}

impl TabularEnv {
    pub fn new(mdp: TabularMdp<f64>, max_steps: usize) -> Result<Self> {
        if max_steps == 0 {
            return Err(Error::Config("max_episode_steps must be at least 1".into()));
        }
        Ok(Self {
            mdp,
            state: 0,
            max_steps,
            rng: StreamRng::seed_from_u64(0),
            clock: EpisodeClock::default(),
        })
    }

    pub fn mdp(&self) -> &TabularMdp<f64> {
        &self.mdp
    }

    pub fn state(&self) -> usize {
        self.state
    }

    pub fn action_index(&self, a: f64) -> usize {
        let n = self.mdp.n_actions;
        let x = ((a.clamp(-1.0, 1.0) + 1.0) / 2.0 * n as f64).floor() as usize;
        x.min(n - 1)
    }

    fn observe(&self) -> Vec<f64> {
        let mut obs = vec![0.0; self.mdp.n_states];
        obs[self.state] = 1.0;
        obs
    }

    fn draw(rng: &mut StreamRng, p: &[f64]) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, &pi) in p.iter().enumerate() {
            acc += pi;
            if u < acc {
                return i;
            }
        }
        p.iter().rposition(|&x| x > 0.0).unwrap_or(0)
    }
}

impl Environment for TabularEnv {
    fn spec(&self) -> EnvSpec {
        EnvSpec {
            obs_dim: self.mdp.n_states,
            action_dim: 1,
            action_bound: 1.0,
            max_episode_steps: self.max_steps,
        }
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        self.rng = StreamRng::seed_from_u64(seed);
        self.state = Self::draw(&mut self.rng, &self.mdp.initial);
        self.clock.reset();
        self.observe()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        let spec = self.spec();
        self.clock.begin_step(&spec, action)?;
        let a = self.action_index(action[0]);
        let reward = self.mdp.reward[self.state][a];
        self.state = Self::draw(&mut self.rng, &self.mdp.transition[self.state][a]);
        let truncated = self.clock.finish_step(&spec, false);
        Ok(StepResult {
            next_obs: self.observe(),
            reward,
            done: false,
            truncated,
        })
    }

    fn boxed_clone(&self) -> Box<dyn Environment> {
        Box::new(self.clone())
    }
}
