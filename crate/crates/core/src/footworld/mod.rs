//! Surrogate stochastic footstep world: terrain with platforms, invisible
//! hurdles and obstacle discs; a noisy step executor with declared failure
//! rules; and the observations consumed by the planner and value functions.

mod capability;
mod observe;
mod plan;
mod scenario;
mod scene;
mod world;

pub use capability::Capability;
pub use observe::{
    character_features, conditioning, grid_orientation, sample_heightfield, state_dim, vf_state, Heightfield,
    CHAR_DIM, COND_DIM, GRID, GRID_CELLS, GRID_FORWARD, GRID_LATERAL, HEIGHT_SCALE, WAYPOINT_SCALE,
};
pub use plan::Plan;
pub use scenario::{parse_key_values, Scenario, ScenarioKind, ScenarioSpec};
pub use scene::{
    Scene, TaskKind, TaskSpec, HURDLE_HEIGHTS, HURDLE_LENGTH, OBSTACLE_RADII, OBSTACLE_TOLERANCE, PLATFORM_HEIGHTS,
    PLATFORM_SIZE,
};
pub use world::{
    detect_failure, episode_status, execute_step, failure_probability, step_geometry, wrap_angle, EpisodeStatus,
    FailureCause, Leg, StepGeometry, StepOutcome, WorldState, WAYPOINT_RADIUS,
};
