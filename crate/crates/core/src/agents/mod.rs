//! Policies, actor updates, and the off-policy training loop.

pub mod actor;
pub mod policy;
pub mod trainer;

pub use actor::{actor_update, ActorObjective, SacNoise};
pub use policy::{squashed_log_prob, GaussianHead, Policy, PolicyKind, SquashedSample};
pub use trainer::{
    mean_and_pop_std, train_run, AgentConfig, Algorithm, Phase, RoundReport, RunSchedule, Trainer,
};
