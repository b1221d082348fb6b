//! Pre-training and preservative fine-tuning of a reduced-order biped
//! locomotion policy.
//!
//! - [`alip`]: pendulum dynamics, foot-placement expert, assumption weight.
//! - [`env`]: hybrid stepping simulator with terrain, rewards, curricula.
//! - [`nn`]: dense networks, Gaussian policy, Adam, checkpoints.
//! - [`trainer`]: DAgger pre-training and regularized PPO fine-tuning.
//! - [`eval`]: evaluation scenarios and comparison tables.
//! - [`config`]: INI-style run configuration.

pub mod alip;
pub mod config;
pub mod env;
pub mod error;
pub mod nn;
pub mod eval;
pub mod trainer;

pub use error::{Error, Result};
