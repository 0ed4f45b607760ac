//! Flat `key = value` run configuration.
//!
//! Lines are `key = value`; `#` starts a comment. Command-line overrides are
//! applied after the file, so flags win. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use crate::agents::{AgentConfig, Algorithm, RunSchedule};
use crate::dr_critic::CriticMode;
use crate::envs::{make_env, NoiseConfig};
use crate::error::{Error, Result};

/// A fully resolved training run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub env: String,
    pub agent: AgentConfig,
    pub noise: NoiseConfig,
    pub total_steps: usize,
    pub eval_interval: usize,
    pub eval_episodes: usize,
    pub seed: u64,
    pub record_wall_time: bool,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            env: "pendulum".into(),
            agent: AgentConfig::default(),
            noise: NoiseConfig::clean(),
            total_steps: 30_000,
            eval_interval: 1000,
            eval_episodes: 5,
            seed: 0,
            record_wall_time: false,
            output_dir: PathBuf::from("runs"),
        }
    }
}

/// Every key `set` understands.
pub const KEYS: &[&str] = &[
    "env",
    "agent",
    "critic",
    "sigma",
    "mu",
    "steps",
    "eval_interval",
    "eval_episodes",
    "seed",
    "out",
    "record_wall_time",
    "gamma",
    "tau",
    "tau_model",
    "exploration_noise",
    "td3_policy_delay",
    "td3_target_noise",
    "td3_noise_clip",
    "sac_alpha",
    "update_interval",
    "warmup",
    "batch_model",
    "batch_ac",
    "shared_samples",
    "lr_reward",
    "lr_qv",
    "lr_critic",
    "lr_actor",
    "hidden",
    "buffer_capacity",
    "freeze_model",
    "target_clip",
];

fn type_err(key: &str, value: &str, want: &str) -> Error {
    Error::Config(format!("{key}: expected {want}, got `{value}`"))
}

fn float(key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| type_err(key, v, "a finite number"))
}

fn uint(key: &str, v: &str) -> Result<usize> {
    v.parse::<usize>().map_err(|_| type_err(key, v, "a non-negative integer"))
}

fn boolean(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(type_err(key, v, "true or false")),
    }
}

pub fn parse_critic(v: &str) -> Result<CriticMode> {
    match v {
        "dr" => Ok(CriticMode::Dr),
        "td" | "baseline" | "baseline_td" => Ok(CriticMode::BaselineTd),
        _ => Err(type_err("critic", v, "dr or td")),
    }
}

impl RunConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let a = &mut self.agent;
        match key {
            "env" => {
                make_env(v).map_err(|_| Error::Config(format!("env: unknown environment `{v}`")))?;
                self.env = v.to_string();
            }
            "agent" => a.algorithm = Algorithm::parse(v).ok_or_else(|| type_err(key, v, "ddpg, td3 or sac"))?,
            "critic" => a.critic_mode = parse_critic(v)?,
            "sigma" => self.noise.sigma = float(key, v)?,
            "mu" => self.noise.mu = float(key, v)?,
            "steps" => self.total_steps = uint(key, v)?,
            "eval_interval" => self.eval_interval = uint(key, v)?,
            "eval_episodes" => self.eval_episodes = uint(key, v)?,
            "seed" => self.seed = v.parse::<u64>().map_err(|_| type_err(key, v, "an unsigned integer"))?,
            "out" => self.output_dir = PathBuf::from(v),
            "record_wall_time" => self.record_wall_time = boolean(key, v)?,
            "gamma" => a.gamma = float(key, v)?,
            "tau" => a.tau = float(key, v)?,
            "tau_model" => a.tau_model = float(key, v)?,
            "exploration_noise" => a.exploration_noise_std = float(key, v)?,
            "td3_policy_delay" => a.td3_policy_delay = uint(key, v)?,
            "td3_target_noise" => a.td3_target_noise_std = float(key, v)?,
            "td3_noise_clip" => a.td3_target_noise_clip = float(key, v)?,
            "sac_alpha" => a.sac_entropy_coeff = float(key, v)?,
            "update_interval" => a.update_interval = uint(key, v)?,
            "warmup" => a.warmup_steps = uint(key, v)?,
            "batch_model" => a.batch_model = uint(key, v)?,
            "batch_ac" => a.batch_ac = uint(key, v)?,
            "shared_samples" => a.shared_samples = boolean(key, v)?,
            "lr_reward" => a.lr_reward = float(key, v)?,
            "lr_qv" => a.lr_qv = float(key, v)?,
            "lr_critic" => a.lr_critic = float(key, v)?,
            "lr_actor" => a.lr_actor = float(key, v)?,
            "hidden" => {
                a.hidden = v
                    .split('x')
                    .map(|w| w.trim().parse::<usize>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| type_err(key, v, "layer widths like 64x64"))?
            }
            "buffer_capacity" => a.buffer_capacity = uint(key, v)?,
            "freeze_model" => a.freeze_model = boolean(key, v)?,
            "target_clip" => {
                a.target_clip = match v {
                    "none" => None,
                    _ => Some(float(key, v)?),
                }
            }
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Defaults, then `pairs` in order, then validation.
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let mut c = Self::default();
        for (k, v) in pairs {
            c.set(k, v)?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.agent.validate()?;
        self.noise.validate()?;
        self.schedule().validate(self.agent.warmup_steps)
    }

    pub fn schedule(&self) -> RunSchedule {
        RunSchedule {
            total_steps: self.total_steps,
            eval_interval: self.eval_interval,
            eval_episodes: self.eval_episodes,
            seed: self.seed,
            record_wall_time: self.record_wall_time,
        }
    }

    /// `{env}_{agent}_{critic}_{sigma}_{seed}.csv`.
    pub fn file_name(&self) -> String {
        format!(
            "{}_{}_{}_{}_{}.csv",
            self.env,
            self.agent.algorithm.name(),
            self.agent.critic_mode.name(),
            self.noise.sigma,
            self.seed
        )
    }

    pub fn output_path(&self) -> PathBuf {
        self.output_dir.join(self.file_name())
    }
}

/// Parses `key = value` lines, keeping their order. Duplicate keys are an
/// error.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(Error::Config(format!("line {}: unknown key `{k}`", i + 1)));
        }
        if out.iter().any(|(seen, _)| seen == k) {
            return Err(Error::Config(format!("line {}: duplicate key `{k}`", i + 1)));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

pub fn read_config_file(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_text(&text)
}
