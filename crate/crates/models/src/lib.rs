//! Stochastic models that generate heavy-tailed statistics, each paired
//! with analytic predictions to check the simulations against.

// Range checks are written `!(x > 0.0)` so that NaN fails them too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod graphgen;
pub mod intermittency;
pub mod langevin;
pub mod queueing;
pub mod sandpile;
