use std::collections::VecDeque;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Rng};

use super::capability::Capability;
use super::scene::{Scene, TaskSpec};

/// Waypoints closer than this to the stance foot count as reached.
pub const WAYPOINT_RADIUS: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Leg {
    Left,
    Right,
}

impl Leg {
    pub fn other(self) -> Self {
        match self {
            Leg::Left => Leg::Right,
            Leg::Right => Leg::Left,
        }
    }

    /// +1 for the left leg, -1 for the right.
    pub fn sign(self) -> f64 {
        match self {
            Leg::Left => 1.0,
            Leg::Right => -1.0,
        }
    }
}

pub fn wrap_angle(a: f64) -> f64 {
    let mut w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w += 2.0 * PI;
    }
    w
}

/// Surrogate character state. `leg` is the leg that swings next; `trailing`
/// is that leg's current (world) position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub stance: [f64; 3],
    pub heading: f64,
    pub leg: Leg,
    pub prev_disp: [f64; 3],
    pub trailing: [f64; 3],
    pub waypoints: VecDeque<[f64; 3]>,
    pub steps: usize,
    pub alive: bool,
}

/// Nominal stride and half stance width used for synthetic starting poses.
const START_STRIDE: f64 = 0.6;
const START_HALF_WIDTH: f64 = 0.15;

impl WorldState {
    /// Standing at `xy` facing `heading`, with the swinging foot half a
    /// stride behind on its own side.
    pub fn standing(xy: [f64; 2], heading: f64, leg: Leg, scene: &Scene) -> Self {
        let heading = wrap_angle(heading);
        let stance = [xy[0], xy[1], scene.height_at(xy[0], xy[1])];
        let (c, s) = (heading.cos(), heading.sin());
        let lat = 2.0 * START_HALF_WIDTH * leg.sign();
        let tx = xy[0] - START_STRIDE * c - lat * s;
        let ty = xy[1] - START_STRIDE * s + lat * c;
        let trailing = [tx, ty, scene.height_at(tx, ty)];
        let prev_disp = [stance[0] - trailing[0], stance[1] - trailing[1], stance[2] - trailing[2]];
        Self { stance, heading, leg, prev_disp, trailing, waypoints: VecDeque::new(), steps: 0, alive: true }
    }

    pub fn with_waypoints(mut self, wps: impl IntoIterator<Item = [f64; 3]>) -> Self {
        self.waypoints = wps.into_iter().collect();
        self
    }

    /// Character-frame offset of a world point (x forward, y left, z up).
    pub fn to_local(&self, p: [f64; 3]) -> [f64; 3] {
        let (dx, dy) = (p[0] - self.stance[0], p[1] - self.stance[1]);
        let (c, s) = (self.heading.cos(), self.heading.sin());
        [c * dx + s * dy, -s * dx + c * dy, p[2] - self.stance[2]]
    }

    /// Rotates a world displacement into the character frame.
    pub fn rotate_to_local(&self, d: [f64; 3]) -> [f64; 3] {
        let (c, s) = (self.heading.cos(), self.heading.sin());
        [c * d[0] + s * d[1], -s * d[0] + c * d[1], d[2]]
    }

    pub fn to_world(&self, local: [f64; 3]) -> [f64; 3] {
        let (c, s) = (self.heading.cos(), self.heading.sin());
        [
            self.stance[0] + c * local[0] - s * local[1],
            self.stance[1] + s * local[0] + c * local[1],
            self.stance[2] + local[2],
        ]
    }

    pub fn planar_distance(&self, p: [f64; 3]) -> f64 {
        (p[0] - self.stance[0]).hypot(p[1] - self.stance[1])
    }

    pub fn next_waypoint(&self) -> Option<[f64; 3]> {
        self.waypoints.front().copied()
    }

    fn advance_waypoints(&mut self) {
        while self.waypoints.len() > 1 && self.planar_distance(self.waypoints[0]) < WAYPOINT_RADIUS {
            self.waypoints.pop_front();
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FailureCause {
    StepLength,
    Vertical,
    Hurdle,
    Obstacle,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub terminated: bool,
    pub achieved: [f64; 3],
    pub cause: Option<FailureCause>,
}

/// Fraction along the swing segment `a -> b` at which it crosses the bar
/// `c -> d`, if it does.
fn crossing_fraction(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> Option<f64> {
    let r = [b[0] - a[0], b[1] - a[1]];
    let s = [d[0] - c[0], d[1] - c[1]];
    let denom = r[0] * s[1] - r[1] * s[0];
    if denom.abs() < 1e-12 {
        return None;
    }
    let q = [c[0] - a[0], c[1] - a[1]];
    let t = (q[0] * s[1] - q[1] * s[0]) / denom;
    let u = (q[0] * r[1] - q[1] * r[0]) / denom;
    ((0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u)).then_some(t)
}

/// Geometry of a candidate step that the failure rules look at.
#[derive(Debug, Clone, PartialEq)]
pub struct StepGeometry {
    pub length: f64,
    pub dz: f64,
    /// `(height, swing fraction)` for every hurdle the swing crosses.
    pub hurdles: Vec<(f64, f64)>,
    pub inside_obstacle: bool,
}

pub fn step_geometry(prev: &WorldState, achieved: [f64; 3], scene: &Scene) -> StepGeometry {
    let length = prev.planar_distance(achieved);
    let dz = achieved[2] - prev.stance[2];
    let a = [prev.trailing[0], prev.trailing[1]];
    let b = [achieved[0], achieved[1]];
    let mut hurdles = Vec::new();
    let mut inside_obstacle = false;
    for e in &scene.elements {
        match *e {
            TaskSpec::Hurdle { height, .. } => {
                let (c, d) = e.hurdle_segment().expect("hurdle");
                if let Some(u) = crossing_fraction(a, b, c, d) {
                    hurdles.push((height, u));
                }
            }
            TaskSpec::Obstacle { center, radius, .. } => {
                inside_obstacle |= (b[0] - center[0]).hypot(b[1] - center[1]) < radius;
            }
            _ => {}
        }
    }
    StepGeometry { length, dz, hurdles, inside_obstacle }
}

/// Analytic probability that landing at `achieved` fails (0 or 1 in
/// deterministic mode).
pub fn failure_probability(prev: &WorldState, achieved: [f64; 3], scene: &Scene, cap: &Capability) -> f64 {
    let g = step_geometry(prev, achieved, scene);
    if !cap.length_ok(g.length) || g.inside_obstacle {
        return 1.0;
    }
    let binarize = |p: f64| if cap.deterministic { f64::from(u8::from(p > 0.5)) } else { p };
    let mut survive = 1.0 - binarize(cap.p_fall(g.dz, g.length));
    for &(h, u) in &g.hurdles {
        let p = if cap.deterministic { f64::from(u8::from(cap.clearance_mean(u) < h)) } else { cap.p_hurdle_fail(h, u) };
        survive *= 1.0 - p;
    }
    1.0 - survive
}

/// Evaluates the failure rules for a step from `prev` to `achieved`.
/// Always consumes exactly two draws (one uniform, one normal) so that
/// paired runs stay aligned.
pub fn detect_failure(
    prev: &WorldState,
    achieved: [f64; 3],
    scene: &Scene,
    cap: &Capability,
    rng: &mut Rng,
) -> Option<FailureCause> {
    let u_fall = rng::unit(rng);
    let n_clear = rng::normal(rng);
    let g = step_geometry(prev, achieved, scene);
    if !cap.length_ok(g.length) {
        return Some(FailureCause::StepLength);
    }
    if g.inside_obstacle {
        return Some(FailureCause::Obstacle);
    }
    let p = cap.p_fall(g.dz, g.length);
    if (cap.deterministic && p > 0.5) || (!cap.deterministic && u_fall < p) {
        return Some(FailureCause::Vertical);
    }
    for &(h, u) in &g.hurdles {
        let mu = cap.clearance_mean(u);
        let clearance = if cap.deterministic { mu } else { mu + cap.clearance_std * n_clear };
        if clearance < h {
            return Some(FailureCause::Hurdle);
        }
    }
    None
}

/// Executes the first footstep of a plan: `target` is in the character frame.
/// Consumes exactly four draws from `rng`.
pub fn execute_step(
    world: &WorldState,
    scene: &Scene,
    cap: &Capability,
    target: [f64; 3],
    rng: &mut Rng,
) -> Result<(WorldState, StepOutcome)> {
    if !world.alive {
        return Err(Error::usage("execute_step on a terminated world"));
    }
    if target.iter().any(|v| !v.is_finite()) {
        return Err(Error::usage("non-finite footstep target"));
    }
    let w = world.to_world(target);
    let sigma = cap.exec_noise();
    let (nx, ny) = (rng::normal(rng), rng::normal(rng));
    let (x, y) = (w[0] + sigma * nx, w[1] + sigma * ny);
    let achieved = [x, y, scene.height_at(x, y)];
    let cause = detect_failure(world, achieved, scene, cap, rng);

    let mut next = world.clone();
    next.steps += 1;
    if cause.is_some() {
        next.alive = false;
        return Ok((next, StepOutcome { reward: 0.0, terminated: true, achieved, cause }));
    }
    let (sx, sy) = (achieved[0] - world.trailing[0], achieved[1] - world.trailing[1]);
    if sx.hypot(sy) > 1e-9 {
        next.heading = wrap_angle(sy.atan2(sx));
    }
    next.prev_disp = [achieved[0] - world.stance[0], achieved[1] - world.stance[1], achieved[2] - world.stance[2]];
    next.trailing = world.stance;
    next.stance = achieved;
    next.leg = world.leg.other();
    next.advance_waypoints();
    Ok((next, StepOutcome { reward: 1.0, terminated: false, achieved, cause: None }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EpisodeStatus {
    Running,
    Success,
    Failure,
}

pub fn episode_status(world: &WorldState, budget: usize) -> EpisodeStatus {
    if !world.alive {
        return EpisodeStatus::Failure;
    }
    if world.waypoints.len() <= 1 {
        if let Some(goal) = world.waypoints.back() {
            if world.planar_distance(*goal) < WAYPOINT_RADIUS {
                return EpisodeStatus::Success;
            }
        }
    }
    if world.steps >= budget {
        return EpisodeStatus::Failure;
    }
    EpisodeStatus::Running
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn flat_world() -> WorldState {
        WorldState::standing([0.0, 0.0], 0.0, Leg::Left, &Scene::flat())
    }

    #[test]
    fn noise_free_nominal_step() {
        let cap = Capability::deterministic();
        let w = flat_world();
        let (n, out) = execute_step(&w, &Scene::flat(), &cap, [0.6, 0.0, 0.0], &mut seeded(0)).unwrap();
        assert_eq!(out.reward, 1.0);
        assert!(!out.terminated);
        assert!((n.stance[0] - 0.6).abs() < 1e-12 && n.stance[1].abs() < 1e-12);
        assert_eq!(n.leg, Leg::Right);
        assert_eq!(n.trailing, w.stance);
        assert_eq!(n.steps, 1);
    }

    #[test]
    fn landing_in_obstacle_fails() {
        let scene = Scene::single(TaskSpec::obstacle([1.0, 0.0], 0.5).unwrap());
        let (n, out) =
            execute_step(&flat_world(), &scene, &Capability::deterministic(), [0.9, 0.0, 0.0], &mut seeded(0)).unwrap();
        assert_eq!(out.reward, 0.0);
        assert!(out.terminated && !n.alive);
        assert_eq!(out.cause, Some(FailureCause::Obstacle));
    }

    #[test]
    fn dead_world_rejected() {
        let mut w = flat_world();
        w.alive = false;
        assert!(matches!(
            execute_step(&w, &Scene::flat(), &Capability::default(), [0.5, 0.0, 0.0], &mut seeded(0)),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn long_step_always_fails() {
        let w = flat_world();
        for seed in 0..20 {
            let f = detect_failure(&w, [2.0, 0.0, 0.0], &Scene::flat(), &Capability::default(), &mut seeded(seed));
            assert_eq!(f, Some(FailureCause::StepLength));
        }
    }

    #[test]
    fn level_step_never_fails() {
        let w = flat_world();
        for seed in 0..200 {
            assert_eq!(detect_failure(&w, [0.7, 0.1, 0.0], &Scene::flat(), &Capability::default(), &mut seeded(seed)), None);
        }
    }

    #[test]
    fn hurdle_at_mean_clearance_has_even_odds() {
        let w = flat_world();
        let cap = Capability::default();
        // early-swing fraction where the tent mean equals the 0.30 m bar
        let u = (0.30 - cap.clearance_edge) / cap.clearance_peak_gain / 2.0;
        // swing runs from the trailing foot to x = 0.6
        let len = 0.6 - w.trailing[0];
        let x_bar = w.trailing[0] + u * len;
        let scene = Scene::single(TaskSpec::hurdle([x_bar, w.trailing[1]], 0.0, 0.30).unwrap());
        let achieved = [0.6, w.trailing[1], 0.0];
        let p = failure_probability(&w, achieved, &scene, &cap);
        assert!((p - 0.5).abs() < 1e-9, "p = {p}");
    }

    #[test]
    fn status_rules() {
        let mut w = flat_world().with_waypoints([[0.2, 0.0, 0.0]]);
        assert_eq!(episode_status(&w, 10), EpisodeStatus::Success);
        w.alive = false;
        assert_eq!(episode_status(&w, 10), EpisodeStatus::Failure);
        let far = flat_world().with_waypoints([[5.0, 0.0, 0.0]]);
        assert_eq!(episode_status(&far, 0), EpisodeStatus::Failure);
        assert_eq!(episode_status(&far, 3), EpisodeStatus::Running);
    }

    #[test]
    fn frames_round_trip() {
        let mut w = flat_world();
        w.heading = 0.7;
        w.stance = [1.0, -2.0, 0.3];
        let p = [2.5, 0.4, 0.1];
        let back = w.to_world(w.to_local(p));
        for k in 0..3 {
            assert!((back[k] - p[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
    }
}
