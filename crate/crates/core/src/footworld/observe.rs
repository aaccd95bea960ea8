//! Observations: the waypoint-oriented heightfield, planner conditioning and
//! per-task value-function states.

use crate::error::{Error, Result};

use super::scene::{Scene, TaskKind, TaskSpec};
use super::world::{wrap_angle, WorldState};

pub const GRID: usize = 16;
pub const GRID_CELLS: usize = GRID * GRID;
/// Forward extent of the heightfield relative to the stance foot.
pub const GRID_FORWARD: (f64, f64) = (-0.5, 4.5);
pub const GRID_LATERAL: (f64, f64) = (-3.0, 3.0);
/// Height scale used to normalize terrain features (tallest platform).
pub const HEIGHT_SCALE: f64 = 0.65;
/// Waypoint offsets are multiplied by this before entering a network.
pub const WAYPOINT_SCALE: f64 = 0.25;

pub const CHAR_DIM: usize = 8;
pub const COND_DIM: usize = CHAR_DIM + 2 + 3 + GRID_CELLS;

/// Terrain heights (meters) on a 16x16 grid, row-major. Rows step forward
/// along `orientation`; columns step from right (`GRID_LATERAL.0`) to left.
#[derive(Debug, Clone, PartialEq)]
pub struct Heightfield {
    pub values: Vec<f64>,
    /// World yaw of the grid's forward axis.
    pub orientation: f64,
}

/// Yaw from the stance foot to the next waypoint, or the heading when there
/// is none (or it is underfoot).
pub fn grid_orientation(world: &WorldState) -> f64 {
    match world.next_waypoint() {
        Some(w) if world.planar_distance(w) > 1e-6 => (w[1] - world.stance[1]).atan2(w[0] - world.stance[0]),
        _ => world.heading,
    }
}

pub fn sample_heightfield(world: &WorldState, scene: &Scene) -> Heightfield {
    let theta = grid_orientation(world);
    let (c, s) = (theta.cos(), theta.sin());
    let df = (GRID_FORWARD.1 - GRID_FORWARD.0) / GRID as f64;
    let dl = (GRID_LATERAL.1 - GRID_LATERAL.0) / GRID as f64;
    let mut values = Vec::with_capacity(GRID_CELLS);
    for r in 0..GRID {
        let f = GRID_FORWARD.0 + (r as f64 + 0.5) * df;
        for col in 0..GRID {
            let l = GRID_LATERAL.0 + (col as f64 + 0.5) * dl;
            let x = world.stance[0] + f * c - l * s;
            let y = world.stance[1] + f * s + l * c;
            values.push(scene.height_at(x, y));
        }
    }
    Heightfield { values, orientation: theta }
}

/// stance height, leg sign, trailing foot and previous displacement in the
/// character frame.
pub fn character_features(world: &WorldState) -> [f64; CHAR_DIM] {
    let t = world.to_local(world.trailing);
    let d = world.rotate_to_local(world.prev_disp);
    [world.stance[2], world.leg.sign(), t[0], t[1], t[2], d[0], d[1], d[2]]
}

fn orientation_features(world: &WorldState, hf: &Heightfield) -> [f64; 2] {
    let rel = wrap_angle(hf.orientation - world.heading);
    [rel.cos(), rel.sin()]
}

fn normalized_heights<'a>(world: &WorldState, hf: &'a Heightfield) -> impl Iterator<Item = f64> + 'a {
    let z = world.stance[2];
    hf.values.iter().map(move |h| (h - z) / HEIGHT_SCALE)
}

fn waypoint_features(world: &WorldState) -> [f64; 3] {
    match world.next_waypoint() {
        Some(w) => world.to_local(w).map(|v| v * WAYPOINT_SCALE),
        None => [0.0; 3],
    }
}

/// Planner conditioning: character features, grid orientation, scaled
/// waypoint offset and normalized heightfield (`COND_DIM` values).
pub fn conditioning(world: &WorldState, scene: &Scene) -> Vec<f64> {
    let hf = sample_heightfield(world, scene);
    let mut v = Vec::with_capacity(COND_DIM);
    v.extend(character_features(world));
    v.extend(orientation_features(world, &hf));
    v.extend(waypoint_features(world));
    v.extend(normalized_heights(world, &hf));
    v
}

pub fn state_dim(kind: TaskKind) -> Result<usize> {
    Ok(match kind {
        TaskKind::Platform => CHAR_DIM + 2 + GRID_CELLS,
        TaskKind::Hurdle => CHAR_DIM + 4,
        TaskKind::Obstacle => CHAR_DIM + 7,
        TaskKind::Flat => return Err(Error::usage("flat terrain has no value-function state")),
    })
}

/// Task-specific value-function state; relative quantities are in the
/// character frame. The nearest element of the task kind is used.
pub fn vf_state(world: &WorldState, scene: &Scene, kind: TaskKind) -> Result<Vec<f64>> {
    let mut v = Vec::with_capacity(state_dim(kind)?);
    v.extend(character_features(world));
    let p = [world.stance[0], world.stance[1]];
    let missing = || Error::usage(format!("scene has no {kind} element"));
    match kind {
        TaskKind::Flat => unreachable!("rejected by state_dim"),
        TaskKind::Platform => {
            let hf = sample_heightfield(world, scene);
            v.extend(orientation_features(world, &hf));
            v.extend(normalized_heights(world, &hf));
        }
        TaskKind::Hurdle => match *scene.nearest(kind, p).ok_or_else(missing)? {
            TaskSpec::Hurdle { position, angle, .. } => {
                v.extend(world.to_local([position[0], position[1], scene.height_at(position[0], position[1])]));
                // a bar looks the same from either side
                let mut rel = wrap_angle(angle - world.heading);
                if rel > std::f64::consts::FRAC_PI_2 {
                    rel -= std::f64::consts::PI;
                } else if rel <= -std::f64::consts::FRAC_PI_2 {
                    rel += std::f64::consts::PI;
                }
                v.push(rel);
            }
            _ => unreachable!(),
        },
        TaskKind::Obstacle => match *scene.nearest(kind, p).ok_or_else(missing)? {
            TaskSpec::Obstacle { center, radius, .. } => {
                v.extend(world.to_local([center[0], center[1], scene.height_at(center[0], center[1])]));
                v.push(radius);
                v.extend(waypoint_features(world));
            }
            _ => unreachable!(),
        },
    }
    Ok(v)
}
