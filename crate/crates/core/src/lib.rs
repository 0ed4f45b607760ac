//! Doubly robust critic estimation for off-policy actor-critic agents.
//!
//! The learning stack (DDPG, TD3 and SAC style agents with either a plain TD
//! critic or a doubly robust one backed by a learned reward model) runs in
//! `f64`. The approximators and the tabular evaluation code are generic over
//! [`Scalar`]; aliases for both precisions are exported here.

pub mod agents;
pub mod approx;
pub mod dr_critic;
pub mod envs;
pub mod error;
pub mod harness;
pub mod ope;
pub mod replay;
pub mod reward_model;
pub mod rng;
pub mod scalar;

pub use error::{Component, Error, Result};
pub use scalar::Scalar;

pub type Mlp64 = approx::Mlp<f64>;
pub type Mlp32 = approx::Mlp<f32>;
pub type ParameterVector64 = approx::ParameterVector<f64>;
pub type ParameterVector32 = approx::ParameterVector<f32>;
pub type AdamState64 = approx::AdamState<f64>;
pub type AdamState32 = approx::AdamState<f32>;
pub type TabularMdp64 = envs::TabularMdp<f64>;
pub type TabularMdp32 = envs::TabularMdp<f32>;
pub type MdpModel64 = ope::MdpModel<f64>;
pub type MdpModel32 = ope::MdpModel<f32>;
pub type LoggedTrajectory64 = ope::LoggedTrajectory<f64>;
