//! Simulation and optimization toolkit for budget-constrained resource
//! allocation across multiple Metaverse service providers.
//!
//! The crate covers the immersion model, resource scaling and pricing, the
//! episode engine with its optional shared credit pool, baseline policies,
//! a PPO learner, metrics, and the experiment harness behind the `mvalloc`
//! binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod decision;
pub mod env;
pub mod error;
pub mod harness;
pub mod immersion;
pub mod metrics;
pub mod params;
pub mod policy;
pub mod ppo;
pub mod scaling;

pub use decision::AllocationDecision;
pub use env::{Action, Env, EnvConfig, Mode, StepOutcome};
pub use error::{Error, Result};
pub use params::{GlobalParams, RoomKind, VRoomProfile};
