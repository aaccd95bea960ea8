use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::footworld::{
    conditioning, execute_step, state_dim, vf_state, Capability, Plan, Scene, TaskKind, TaskSpec, WorldState,
    HURDLE_HEIGHTS,
};
use crate::rng::{self, Rng};

use super::dataset::{Dataset, LabeledPlanRecord};
use super::generator::{gen_trajectory, ProcGenParams, Trajectory};

pub const GAMMA: f64 = 0.75;
pub const WINDOW: usize = Plan::FOOTSTEPS;
/// A waypoint every this many footsteps (plus one on each platform).
pub const WAYPOINT_EVERY: usize = 6;

/// Discounted return of a reward window, `sum_k gamma^k r_k`.
pub fn plan_return(rewards: &[f64], gamma: f64) -> Result<f64> {
    if rewards.is_empty() {
        return Err(Error::usage("empty reward window"));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::usage(format!("discount {gamma} outside [0, 1)")));
    }
    Ok(rewards.iter().rev().fold(0.0, |acc, r| r + gamma * acc))
}

/// Labels for the full windows of an episode of `executed` steps that failed
/// at step `failure` (if any): `(start, success, return)` per window.
pub fn window_labels(len: usize, failure: Option<usize>, gamma: f64) -> Result<Vec<(usize, bool, f64)>> {
    if len < WINDOW {
        return Ok(Vec::new());
    }
    let last = match failure {
        Some(f) => f.min(len - WINDOW),
        None => len - WINDOW,
    };
    (0..=last)
        .map(|t| {
            let rewards: Vec<f64> =
                (t..t + WINDOW).map(|k| if failure.is_some_and(|f| k >= f) { 0.0 } else { 1.0 }).collect();
            let failed = failure.is_some_and(|f| (t..t + WINDOW).contains(&f));
            Ok((t, !failed, plan_return(&rewards, gamma)?))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollectConfig {
    pub kind: TaskKind,
    /// Platform heights are drawn from `U(lo, hi)`.
    pub platform_range: (f64, f64),
    pub gamma: f64,
    pub capability: Capability,
    pub params: ProcGenParams,
}

impl CollectConfig {
    pub fn new(kind: TaskKind) -> Self {
        Self {
            kind,
            platform_range: (0.10, 0.65),
            gamma: GAMMA,
            capability: Capability::default(),
            params: ProcGenParams::default(),
        }
    }

    pub fn state_dim(&self) -> usize {
        state_dim(self.kind).unwrap_or(0)
    }
}

fn place_elements(cfg: &CollectConfig, traj: &Trajectory, rng: &mut Rng) -> (Scene, Vec<usize>) {
    let n = traj.steps.len();
    let pos = |k: usize| traj.steps[k].position;
    let mut elements = Vec::new();
    let mut anchors = Vec::new();
    match cfg.kind {
        TaskKind::Flat => {}
        TaskKind::Platform => {
            let mut k = 4 + rng::index(rng, 6);
            while k + 2 < n {
                let h = rng::uniform(rng, cfg.platform_range.0, cfg.platform_range.1);
                elements.push(TaskSpec::Platform { center: pos(k), height: h });
                anchors.push(k);
                k += 10 + rng::index(rng, 6);
            }
        }
        TaskKind::Hurdle => {
            let mut k = 4 + rng::index(rng, 4);
            while k < n {
                let (a, b) = (pos(k - 1), pos(k));
                let v = rng::uniform(rng, 0.2, 0.8);
                let p = [a[0] + v * (b[0] - a[0]), a[1] + v * (b[1] - a[1])];
                let angle = (b[1] - a[1]).atan2(b[0] - a[0]);
                let levels = [HURDLE_HEIGHTS.0, 0.5 * (HURDLE_HEIGHTS.0 + HURDLE_HEIGHTS.1), HURDLE_HEIGHTS.1];
                let height = levels[rng::index(rng, levels.len())];
                elements.push(TaskSpec::Hurdle { position: p, angle, height });
                k += 6 + rng::index(rng, 4);
            }
        }
        TaskKind::Obstacle => {
            let mut k = 4 + rng::index(rng, 6);
            while k < n {
                let r = rng::uniform(rng, 0.5, 1.5);
                let (a, b) = (pos(k - 1), pos(k));
                let dir = (b[1] - a[1]).atan2(b[0] - a[0]);
                let off = rng::uniform(rng, -1.0, 1.0) * (r + 0.5);
                let c = [b[0] - dir.sin() * off, b[1] + dir.cos() * off];
                elements.push(TaskSpec::Obstacle { center: c, radius: r, tolerance: crate::footworld::OBSTACLE_TOLERANCE });
                k += 10 + rng::index(rng, 6);
            }
        }
    }
    (Scene::new(elements), anchors)
}

/// Executes one procedural trajectory and labels every full window.
pub fn collect_trajectory(cfg: &CollectConfig, rng: &mut Rng) -> Result<Vec<LabeledPlanRecord>> {
    let traj = gen_trajectory(&cfg.params, rng)?;
    let (scene, anchors) = place_elements(cfg, &traj, rng);
    let n = traj.steps.len();
    let mut wp_idx: Vec<usize> = (WAYPOINT_EVERY - 1..n).step_by(WAYPOINT_EVERY).chain(anchors).chain([n - 1]).collect();
    wp_idx.sort_unstable();
    wp_idx.dedup();
    let target = |k: usize| {
        let p = traj.steps[k].position;
        [p[0], p[1], scene.height_at(p[0], p[1])]
    };

    let mut world = WorldState::standing(traj.start, Trajectory::world_yaw(traj.start_heading), traj.first_leg, &scene);
    let mut snapshots = Vec::with_capacity(n);
    let mut failure = None;
    for t in 0..n {
        world.waypoints = wp_idx.iter().filter(|&&w| w >= t).map(|&w| target(w)).collect();
        if t + WINDOW <= n {
            let state = if cfg.kind == TaskKind::Flat { Vec::new() } else { vf_state(&world, &scene, cfg.kind)? };
            snapshots.push((world.clone(), conditioning(&world, &scene), state));
        }
        let local = world.to_local(target(t));
        let (next, out) = execute_step(&world, &scene, &cfg.capability, local, rng)?;
        if out.terminated {
            failure = Some(t);
            break;
        }
        world = next;
    }

    window_labels(n, failure, cfg.gamma)?
        .into_iter()
        .map(|(t, success, ret)| {
            let (w, cond, state) = &snapshots[t];
            let mut plan = [[0.0; 3]; 4];
            for (k, s) in plan.iter_mut().enumerate() {
                *s = w.to_local(target(t + k));
            }
            Ok(LabeledPlanRecord::new(&Plan::new(plan)?, cond, state, success, ret))
        })
        .collect()
}

/// Collects `n_trajectories` trajectories; trajectory `i` uses stream
/// `(seed, i)`, so the result is independent of thread count.
pub fn collect_dataset(cfg: &CollectConfig, n_trajectories: usize, seed: u64) -> Result<Dataset> {
    if n_trajectories == 0 {
        return Err(Error::usage("need at least one trajectory"));
    }
    collect_range(cfg, 0..n_trajectories as u64, seed)
}

fn collect_range(cfg: &CollectConfig, range: std::ops::Range<u64>, seed: u64) -> Result<Dataset> {
    let chunks: Vec<Vec<LabeledPlanRecord>> = range
        .into_par_iter()
        .map(|i| collect_trajectory(cfg, &mut rng::stream(seed, i)))
        .collect::<Result<_>>()?;
    Ok(Dataset { schema: cfg.kind, state_dim: cfg.state_dim(), records: chunks.into_iter().flatten().collect() })
}

/// Collects trajectories until at least `target` records exist, then
/// truncates to exactly `target`.
pub fn collect_records(cfg: &CollectConfig, target: usize, seed: u64) -> Result<Dataset> {
    let mut out = Dataset { schema: cfg.kind, state_dim: cfg.state_dim(), records: Vec::with_capacity(target) };
    let mut next = 0u64;
    while out.records.len() < target {
        let missing = target - out.records.len();
        let batch = (missing / 15 + 8) as u64;
        let part = collect_range(cfg, next..next + batch, seed)?;
        out.records.extend(part.records);
        next += batch;
        if next > 1_000_000 {
            return Err(Error::Dataset("collection produced too few records".into()));
        }
    }
    out.records.truncate(target);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn returns() {
        assert_eq!(plan_return(&[1.0, 1.0, 1.0, 1.0], 0.75).unwrap(), 2.734375);
        assert_eq!(plan_return(&[0.0; 4], 0.75).unwrap(), 0.0);
        assert_eq!(plan_return(&[1.0, 0.0, 0.0, 0.0], 0.75).unwrap(), 1.0);
        assert!(plan_return(&[], 0.75).is_err());
        assert!(plan_return(&[1.0], 1.0).is_err());
    }

    #[test]
    fn window_counting() {
        let ok = window_labels(50, None, GAMMA).unwrap();
        assert_eq!(ok.len(), 47);
        assert!(ok.iter().all(|&(_, s, r)| s && r == 2.734375));
        for f in [0usize, 1, 2, 3, 10, 30] {
            let w = window_labels(50, Some(f), GAMMA).unwrap();
            let failed = w.iter().filter(|x| !x.1).count();
            assert_eq!(failed, (f + 1).min(4));
            let at_f = w.iter().find(|x| x.0 == f).unwrap();
            assert_eq!(at_f.2, 0.0);
        }
    }

    #[test]
    fn flat_collection_is_deterministic_and_labeled() {
        let cfg = CollectConfig::new(TaskKind::Flat);
        let a = collect_dataset(&cfg, 3, 5).unwrap();
        let b = collect_dataset(&cfg, 3, 5).unwrap();
        assert_eq!(a, b);
        assert!(!a.records.is_empty());
        for r in &a.records {
            assert_eq!(r.cond.len(), crate::footworld::COND_DIM);
            assert!(r.state.is_empty());
            assert!(r.ret >= 0.0 && r.ret <= 4.0);
            assert_eq!(r.success, r.ret == 2.734375);
        }
    }

    #[test]
    fn platform_collection_has_states_and_failures() {
        let cfg = CollectConfig::new(TaskKind::Platform);
        let d = collect_dataset(&cfg, 40, 1).unwrap();
        assert!(d.records.iter().all(|r| r.state.len() == 266));
        let fails = d.records.iter().filter(|r| !r.success).count();
        assert!(fails > 0 && fails < d.records.len());
    }
}
