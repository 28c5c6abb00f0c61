//! Single-server queues with deadlines, heavy-traffic lead-time profiles,
//! random-order-of-service tails and the aging-population model.

pub mod aging;
pub mod boxma;
pub mod des;
pub mod ltp;

use tailsim_core::quad::QuadError;
use tailsim_core::tail::TailError;
use tailsim_core::DistError;
use thiserror::Error;

pub use aging::{aging_evolve, aging_stationary, AgeRate, AgingConfig, AgingProfile, AgingTrajectory, Regime};
pub use boxma::{boxma_h, boxma_tail, ros_mm1_tail, BoxmaParams};
pub use des::{run_des, simulate, DesRun, JobSpec, LeadTimeProfile, Policy, QueueConfig, QueueMetrics, RunOptions, TaskRecord};
pub use ltp::{analytic_ltp_edf, analytic_ltp_fcfs, frontier, snapshot_compare, EdfLtp, FcfsLtp, Frontier, LeadTimeCdf};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QueueError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no frontier: {0}")]
    NoFrontier(String),
    #[error("need {needed} pooled lead times, have {got}")]
    InsufficientData { got: usize, needed: usize },
    #[error("no stationary population: mu/p = k a^(q-1) with k = {k}, q = {q}")]
    Explosive { k: f64, q: f64 },
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Tail(#[from] TailError),
}
