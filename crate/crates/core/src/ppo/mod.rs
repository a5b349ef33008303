//! Clipped-surrogate actor-critic learner.
//!
//! Checkpoint layout (all integers `u32`, all parameters `f32`, little
//! endian): the 8-byte magic `MVAPPO\0\0`, a version, the actor's layer
//! count and sizes, the critic's layer count and sizes, the action
//! dimension, then the actor parameters, the log standard deviations and
//! the critic parameters. Each network stores per layer its `out x in`
//! weight matrix row-major followed by its bias.

mod agent;
mod nn;
mod train;

pub use agent::{Adam, Agent, AgentConfig, LossStats, PolicyOutput, Sample};
pub use nn::{Mlp, Trace};
pub use train::{episode_seed, gae, EpisodeStats, Trainer};
