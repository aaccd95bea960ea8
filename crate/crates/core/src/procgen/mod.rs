//! Procedural footstep trajectories and labeled plan datasets.
//!
//! Each trajectory is executed in the footstep world; every sliding window of
//! four footsteps becomes one record labeled with its discounted return.

mod collect;
mod dataset;
mod generator;

pub use collect::{
    collect_dataset, collect_records, collect_trajectory, plan_return, window_labels, CollectConfig, GAMMA,
    WAYPOINT_EVERY, WINDOW,
};
pub use dataset::{Dataset, DatasetStats, LabeledPlanRecord, MAGIC as DATASET_MAGIC};
pub use generator::{footstep_from, gen_trajectory, next_footstep, Footstep, ProcGenParams, Trajectory};
