//! Multilayer-perceptron function approximators with analytic
//! backpropagation, first-order optimizers and Polyak target tracking.
//!
//! Everything here is generic over [`Scalar`](crate::Scalar); the learning
//! stack uses the `f64` instantiation.

mod mlp;
mod optim;
mod params;

pub use mlp::{Activation, LossTarget, Mlp, OutputActivation, Sample, Trace};
pub use optim::{polyak_update, polyak_update_in_place, AdamState, Sgd};
pub use params::ParameterVector;
