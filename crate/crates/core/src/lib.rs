//! Budgeted, progress-aware oracle querying for human-in-the-loop
//! reinforcement learning.
//!
//! The crate is split along the training pipeline:
//!
//! - [`env`]: a kinematic planar reach-and-grasp task with potential-based shaping.
//! - [`oracle`]: the scripted expert, the human bridge client and the JSON wire protocol.
//! - [`gate`]: query policies (no-oracle, random, always, progress-aware) and their bookkeeping.
//! - [`learner`]: a soft actor-critic written against hand-derived gradients.
//! - [`harness`]: configuration, the training loop, evaluation, metrics, logs and the bridge server.

pub mod env;
pub mod error;
pub mod gate;
pub mod harness;
pub mod learner;
pub mod oracle;

pub use error::{Error, Result};
