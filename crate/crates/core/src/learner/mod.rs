//! From-scratch soft actor-critic learner.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod mlp;
pub mod real;
pub mod replay;
pub mod sac;

pub use real::Real;
pub use replay::{ReplayBuffer, Transition};
pub use sac::{from_workspace, to_workspace, Batch, SacAgent, SacConfig, UpdateStats};
