//! Diffusion-based footstep planning with learned viability filters.
//!
//! A conditional DDPM proposes short footstep plans; one or more Q-function
//! "viability filters" score every proposal and the best one is executed for a
//! single step before replanning. The crate also carries the surrogate
//! stochastic footstep environment, the procedural data generator, offline and
//! online filter training, the classifier-guidance baseline and the evaluation
//! harness behind the `viaplan` CLI.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ddpm;
pub mod error;
pub mod footworld;
pub mod harness;
pub mod nn;
pub mod planner;
pub mod procgen;
pub mod rng;
pub mod toy;
pub mod vf;

pub use error::{Error, Result};
pub use footworld::Plan;
