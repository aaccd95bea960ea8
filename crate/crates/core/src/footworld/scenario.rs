//! Evaluation scenarios and their plain-text `key = value` description.
//!
//! ```text
//! # hardest platform setting
//! task = platform
//! platform_height = 0.65
//! budget = 25
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Rng};

use super::scene::{Scene, TaskKind, TaskSpec, OBSTACLE_TOLERANCE};
use super::world::{Leg, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScenarioKind {
    Single(TaskKind),
    /// Platform, then hurdle, then obstacle in one episode.
    Mixed,
}

impl std::str::FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("mixed") {
            Ok(ScenarioKind::Mixed)
        } else {
            s.parse().map(ScenarioKind::Single)
        }
    }
}

impl std::fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScenarioKind::Single(k) => write!(f, "{k}"),
            ScenarioKind::Mixed => f.write_str("mixed"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub platform_height: f64,
    pub hurdle_height: f64,
    pub obstacle_radius: f64,
    pub obstacle_tolerance: f64,
    /// Step budget; 0 picks a default from the scenario kind.
    pub budget: usize,
}

impl ScenarioSpec {
    pub fn new(kind: ScenarioKind) -> Self {
        Self {
            kind,
            platform_height: 0.65,
            hurdle_height: 0.35,
            obstacle_radius: 1.5,
            obstacle_tolerance: OBSTACLE_TOLERANCE,
            budget: 0,
        }
    }

    /// The single-task scenario at difficulty `level` (platform/hurdle height
    /// or obstacle radius).
    pub fn single(kind: TaskKind, level: f64) -> Self {
        let mut s = Self::new(ScenarioKind::Single(kind));
        match kind {
            TaskKind::Platform => s.platform_height = level,
            TaskKind::Hurdle => s.hurdle_height = level,
            TaskKind::Obstacle => s.obstacle_radius = level,
            TaskKind::Flat => {}
        }
        s
    }

    pub fn level(&self) -> f64 {
        match self.kind {
            ScenarioKind::Single(TaskKind::Platform) => self.platform_height,
            ScenarioKind::Single(TaskKind::Hurdle) => self.hurdle_height,
            ScenarioKind::Single(TaskKind::Obstacle) => self.obstacle_radius,
            _ => 0.0,
        }
    }

    pub fn effective_budget(&self) -> usize {
        match (self.budget, self.kind) {
            (0, ScenarioKind::Mixed) => 60,
            (0, _) => 25,
            (b, _) => b,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let kv = parse_key_values(text)?;
        let kind: ScenarioKind =
            kv.get("task").ok_or_else(|| Error::usage("scenario needs a 'task' key"))?.parse()?;
        let mut s = Self::new(kind);
        for (k, v) in &kv {
            let num = || v.parse::<f64>().map_err(|_| Error::usage(format!("scenario key '{k}': bad number '{v}'")));
            match k.as_str() {
                "task" => {}
                "platform_height" => s.platform_height = num()?,
                "hurdle_height" => s.hurdle_height = num()?,
                "obstacle_radius" => s.obstacle_radius = num()?,
                "obstacle_tolerance" => s.obstacle_tolerance = num()?,
                "level" => match kind {
                    ScenarioKind::Single(t) => s = Self { budget: s.budget, ..Self::single(t, num()?) },
                    ScenarioKind::Mixed => return Err(Error::usage("'level' is ambiguous for mixed scenarios")),
                },
                "budget" => s.budget = v.parse().map_err(|_| Error::usage(format!("bad budget '{v}'")))?,
                other => return Err(Error::usage(format!("unknown scenario key '{other}'"))),
            }
        }
        s.validate()?;
        Ok(s)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "task = {}", self.kind);
        let _ = writeln!(out, "platform_height = {}", self.platform_height);
        let _ = writeln!(out, "hurdle_height = {}", self.hurdle_height);
        let _ = writeln!(out, "obstacle_radius = {}", self.obstacle_radius);
        let _ = writeln!(out, "obstacle_tolerance = {}", self.obstacle_tolerance);
        let _ = writeln!(out, "budget = {}", self.budget);
        out
    }

    pub fn validate(&self) -> Result<()> {
        TaskSpec::platform([0.0, 0.0], self.platform_height)?;
        TaskSpec::hurdle([0.0, 0.0], 0.0, self.hurdle_height)?;
        TaskSpec::obstacle([0.0, 0.0], self.obstacle_radius)?;
        if !(self.obstacle_tolerance >= 0.0) {
            return Err(Error::usage("obstacle tolerance must be >= 0"));
        }
        Ok(())
    }

    /// Lays out one randomized episode: the character starts at the origin
    /// facing roughly +x and meets each element 2.5-3.5 m further on.
    pub fn build(&self, rng: &mut Rng) -> Result<Scenario> {
        self.validate()?;
        let heading = rng::uniform(rng, -0.15, 0.15);
        let leg = if rng::unit(rng) < 0.5 { Leg::Left } else { Leg::Right };
        let mut elements = Vec::new();
        let mut waypoints = Vec::new();
        let mut x = 0.0;
        let kinds: Vec<TaskKind> = match self.kind {
            ScenarioKind::Single(k) => vec![k],
            ScenarioKind::Mixed => vec![TaskKind::Platform, TaskKind::Hurdle, TaskKind::Obstacle],
        };
        for kind in kinds {
            let gap = rng::uniform(rng, 2.5, 3.5);
            let y = rng::uniform(rng, -0.3, 0.3);
            match kind {
                TaskKind::Flat => {
                    x += gap;
                    waypoints.push([x + 3.0, y, 0.0]);
                    x += 3.0;
                }
                TaskKind::Platform => {
                    let c = [x + gap + 1.0, y];
                    elements.push(TaskSpec::platform(c, self.platform_height)?);
                    waypoints.push([c[0], c[1], self.platform_height]);
                    waypoints.push([c[0] + 3.0, c[1], 0.0]);
                    x = c[0] + 3.0;
                }
                TaskKind::Hurdle => {
                    let p = [x + gap, y];
                    let angle = rng::uniform(rng, -0.3, 0.3);
                    elements.push(TaskSpec::hurdle(p, angle, self.hurdle_height)?);
                    waypoints.push([p[0], p[1], 0.0]);
                    waypoints.push([p[0] + 2.5, p[1], 0.0]);
                    x = p[0] + 2.5;
                }
                TaskKind::Obstacle => {
                    let r = self.obstacle_radius;
                    let c = [x + gap + r, y * 0.5];
                    elements.push(TaskSpec::Obstacle { center: c, radius: r, tolerance: self.obstacle_tolerance });
                    waypoints.push([c[0] + r + 2.5, c[1], 0.0]);
                    x = c[0] + r + 2.5;
                }
            }
        }
        let scene = Scene::new(elements);
        let start = WorldState::standing([0.0, 0.0], heading, leg, &scene).with_waypoints(waypoints);
        Ok(Scenario { spec: self.clone(), scene, start, budget: self.effective_budget() })
    }
}

/// One laid-out episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub scene: Scene,
    pub start: WorldState,
    pub budget: usize,
}

/// Parses `key = value` lines; `#` starts a comment. Later keys win.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::usage(format!("line {}: expected 'key = value'", n + 1)))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::usage(format!("line {}: empty key", n + 1)));
        }
        out.insert(k.to_string(), v.trim().to_string());
    }
    Ok(out)
}
