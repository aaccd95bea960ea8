//! Viability filters: Q-functions over (task state, plan) estimating the
//! discounted "alive" return, trained offline by regression on labeled
//! windows or online with Bellman targets over proposed candidate sets.

mod compose;
mod offline;
mod online;
mod replay;
pub mod tiny;
mod value;

pub use compose::{compose, compose_many, product_scores};
pub use offline::{offline_loss, regression_arrays, train_offline, train_regression, OfflineConfig};
pub use online::{
    argmax, choose_plan, td_update, train_online, train_online_with, DiffusionProposer, EnvStep, EpisodeLog, ExhaustiveProposer,
    OnlineConfig, OnlineEnv, Proposer, UniformProposer,
};
pub use replay::{
    bellman_target, plan_set, sample_balanced_batch, soft_update, PlanSet, ReplayBuffers, Successor, Transition,
    REPLAY_CAPACITY, SOFT_UPDATE_RATE,
};
pub use value::{load, save, vf_eval, ValueNet, DEFAULT_HIDDEN};
