//! Continuous-control environments, integrated with explicit Euler at
//! `dt = 0.05`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};

use super::{EnvSpec, Environment, EpisodeClock, StepResult};
use crate::error::Result;
use crate::rng::StreamRng;

pub const DT: f64 = 0.05;

fn normalize_angle(theta: f64) -> f64 {
    let mut t = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if t < -PI {
        t += 2.0 * PI;
    }
    t
}

/// Torque-limited pendulum swing-up. `angle = 0` is upright.
///
/// Observation `[cos angle, sin angle, angular velocity]`; action is torque in
/// `[-2, 2]`; reward `-(angle^2 + 0.1 vel^2 + 0.001 torque^2)` evaluated on the
/// state the action is applied in, with the angle wrapped to `[-pi, pi]`.
/// The per-step maximum is 0, so an episode of 200 steps scores in
/// roughly `[-16.3 * 200, 0]`.
#[derive(Debug, Clone)]
pub struct Pendulum {
    pub gravity: f64,
    pub mass: f64,
    pub length: f64,
    pub max_speed: f64,
    angle: f64,
    velocity: f64,
    clock: EpisodeClock,
}

impl Default for Pendulum {
    fn default() -> Self {
        Self {
            gravity: 10.0,
            mass: 1.0,
            length: 1.0,
            max_speed: 8.0,
            angle: 0.0,
            velocity: 0.0,
            clock: EpisodeClock::default(),
        }
    }
}

impl Pendulum {
    pub const MAX_TORQUE: f64 = 2.0;

    pub fn angle(&self) -> f64 {
        self.angle
    }

    pub fn velocity(&self) -> f64 {
        self.velocity
    }

    /// Puts the pendulum in an arbitrary state and starts a fresh episode.
    pub fn set_state(&mut self, angle: f64, velocity: f64) -> Vec<f64> {
        self.angle = normalize_angle(angle);
        self.velocity = velocity;
        self.clock.reset();
        self.observe()
    }

    fn observe(&self) -> Vec<f64> {
        vec![self.angle.cos(), self.angle.sin(), self.velocity]
    }
}

impl Environment for Pendulum {
    fn spec(&self) -> EnvSpec {
        EnvSpec {
            obs_dim: 3,
            action_dim: 1,
            action_bound: Self::MAX_TORQUE,
            max_episode_steps: 200,
        }
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = StreamRng::seed_from_u64(seed);
        let angle = rng.random_range(-PI..PI);
        let velocity = rng.random_range(-1.0..1.0);
        self.set_state(angle, velocity)
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        let spec = self.spec();
        self.clock.begin_step(&spec, action)?;
        let u = spec.clip_action(action)[0];
        let th = self.angle;
        let reward = -(th * th + 0.1 * self.velocity * self.velocity + 0.001 * u * u);
        let accel = 3.0 * self.gravity / (2.0 * self.length) * th.sin()
            + 3.0 / (self.mass * self.length * self.length) * u;
        let next_angle = th + self.velocity * DT;
        let next_velocity = (self.velocity + accel * DT).clamp(-self.max_speed, self.max_speed);
        self.angle = normalize_angle(next_angle);
        self.velocity = next_velocity;
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

/// 2-D point mass whose action is its velocity; the goal is the origin.
///
/// Reward `-||position - goal||^2` on the position reached after the move.
#[derive(Debug, Clone)]
pub struct PointMass {
    pub goal: [f64; 2],
    position: [f64; 2],
    clock: EpisodeClock,
}

impl Default for PointMass {
    fn default() -> Self {
        Self {
            goal: [0.0, 0.0],
            position: [0.0, 0.0],
            clock: EpisodeClock::default(),
        }
    }
}

impl PointMass {
    pub fn set_position(&mut self, position: [f64; 2]) -> Vec<f64> {
        self.position = position;
        self.clock.reset();
        position.to_vec()
    }

    pub fn position(&self) -> [f64; 2] {
        self.position
    }
}

impl Environment for PointMass {
    fn spec(&self) -> EnvSpec {
        EnvSpec {
            obs_dim: 2,
            action_dim: 2,
            action_bound: 1.0,
            max_episode_steps: 100,
        }
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = StreamRng::seed_from_u64(seed);
        let p = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        self.set_position(p)
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        let spec = self.spec();
        self.clock.begin_step(&spec, action)?;
        let a = spec.clip_action(action);
        for (p, v) in self.position.iter_mut().zip(&a) {
            *p += v * DT;
        }
        let dx = self.position[0] - self.goal[0];
        let dy = self.position[1] - self.goal[1];
        let reward = -(dx * dx + dy * dy);
        let truncated = self.clock.finish_step(&spec, false);
        Ok(StepResult {
            next_obs: self.position.to_vec(),
            reward,
            done: false,
            truncated,
        })
    }

    fn boxed_clone(&self) -> Box<dyn Environment> {
        Box::new(self.clone())
    }
}

/// Mass on a damped spring driven by a bounded force.
///
/// Observation `[x, v]`; reward `-(x^2 + 0.1 v^2 + 0.001 u^2)` on the state
/// the force is applied in.
#[derive(Debug, Clone)]
pub struct MassSpring {
    pub stiffness: f64,
    pub mass: f64,
    pub damping: f64,
    x: f64,
    v: f64,
    clock: EpisodeClock,
}

impl Default for MassSpring {
    fn default() -> Self {
        Self {
            stiffness: 1.0,
            mass: 1.0,
            damping: 0.1,
            x: 0.0,
            v: 0.0,
            clock: EpisodeClock::default(),
        }
    }
}

impl MassSpring {
    pub fn set_state(&mut self, x: f64, v: f64) -> Vec<f64> {
        self.x = x;
        self.v = v;
        self.clock.reset();
        vec![x, v]
    }
}

impl Environment for MassSpring {
    fn spec(&self) -> EnvSpec {
        EnvSpec {
            obs_dim: 2,
            action_dim: 1,
            action_bound: 1.0,
            max_episode_steps: 200,
        }
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = StreamRng::seed_from_u64(seed);
        let x = rng.random_range(-1.0..1.0);
        let v = rng.random_range(-0.5..0.5);
        self.set_state(x, v)
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        let spec = self.spec();
        self.clock.begin_step(&spec, action)?;
        let u = spec.clip_action(action)[0];
        let reward = -(self.x * self.x + 0.1 * self.v * self.v + 0.001 * u * u);
        let accel = (-self.stiffness * self.x - self.damping * self.v + u) / self.mass;
        let x = self.x + self.v * DT;
        let v = self.v + accel * DT;
        self.x = x;
        self.v = v;
        let truncated = self.clock.finish_step(&spec, false);
        Ok(StepResult {
            next_obs: vec![x, v],
            reward,
            done: false,
            truncated,
        })
    }

    fn boxed_clone(&self) -> Box<dyn Environment> {
        Box::new(self.clone())
    }
}

/// Emits a fixed reward regardless of state or action; observations are
/// i.i.d. uniform on `[-1, 1]^2` from a stream seeded at reset.
#[derive(Debug, Clone)]
pub struct ConstantReward {
    pub reward: f64,
    rng: StreamRng,
    clock: EpisodeClock,
}

impl ConstantReward {
    pub fn new(reward: f64) -> Self {
        Self {
            reward,
            rng: StreamRng::seed_from_u64(0),
            clock: EpisodeClock::default(),
        }
    }

    fn draw(&mut self) -> Vec<f64> {
        vec![self.rng.random_range(-1.0..1.0), self.rng.random_range(-1.0..1.0)]
    }
}

impl Environment for ConstantReward {
    fn spec(&self) -> EnvSpec {
        EnvSpec {
            obs_dim: 2,
            action_dim: 1,
            action_bound: 1.0,
            max_episode_steps: 100,
        }
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        self.rng = StreamRng::seed_from_u64(seed);
        self.clock.reset();
        self.draw()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        let spec = self.spec();
        self.clock.begin_step(&spec, action)?;
        let truncated = self.clock.finish_step(&spec, false);
        Ok(StepResult {
            next_obs: self.draw(),
            reward: self.reward,
            done: false,
            truncated,
        })
    }

    fn boxed_clone(&self) -> Box<dyn Environment> {
        Box::new(self.clone())
    }
}
