//! Compute-optimal scaling toolkit for GPT-style decoder models.
//!
//! Everything in this crate is a pure function of its inputs and builds
//! without `std` (only `alloc` is required):
//!
//! - [`accounting`]: exact parameter counts and algorithmic FLOPs.
//! - [`scaling`]: power-law loss frontiers, tokens-per-parameter degradation
//!   and vocabulary cross-entropy correction.
//! - [`planner`]: compute-optimal training plans and train+inference cost
//!   frontiers.
//! - [`parameterization`]: SP and μP layer-wise hyperparameters, μTransfer,
//!   learning-rate schedules and an activation-scale probe.
//! - [`stability`]: half-precision underflow checks, dynamic loss scaling and
//!   the Adam epsilon rule.
//! - [`reference`]: the published Cerebras-GPT model configurations.
#![no_std]
#![warn(missing_docs)]

extern crate alloc;

pub mod accounting;
pub mod parameterization;
pub mod planner;
pub mod reference;
pub mod scaling;
pub mod stability;

pub use accounting::{FlopCount, FlopMode, ModelShape, ShapeError, TokenBudget};
pub use parameterization::{LayerClass, LayerPlan, MuPBase, Parameterization};
pub use planner::{CostQuery, EvalRecord, TrainingPlan};
pub use scaling::{LossPoint, PowerLawFit};
