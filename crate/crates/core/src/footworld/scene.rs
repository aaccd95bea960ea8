use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Planar side length of a platform footprint.
pub const PLATFORM_SIZE: f64 = 2.0;
/// Length of a hurdle bar.
pub const HURDLE_LENGTH: f64 = 2.5;
/// Default obstacle tolerance added to the radius for guidance.
pub const OBSTACLE_TOLERANCE: f64 = 0.3;

pub const PLATFORM_HEIGHTS: (f64, f64) = (0.10, 0.65);
pub const HURDLE_HEIGHTS: (f64, f64) = (0.25, 0.35);
pub const OBSTACLE_RADII: (f64, f64) = (0.5, 1.5);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TaskKind {
    Flat,
    Platform,
    Hurdle,
    Obstacle,
}

impl TaskKind {
    /// Identifier stored in dataset and value-network files.
    pub fn schema_id(self) -> u32 {
        match self {
            TaskKind::Flat => 0,
            TaskKind::Platform => 1,
            TaskKind::Hurdle => 2,
            TaskKind::Obstacle => 3,
        }
    }

    pub fn from_schema_id(id: u32) -> Result<Self> {
        Ok(match id {
            0 => TaskKind::Flat,
            1 => TaskKind::Platform,
            2 => TaskKind::Hurdle,
            3 => TaskKind::Obstacle,
            _ => return Err(Error::format(format!("unknown task schema id {id}"))),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Flat => "flat",
            TaskKind::Platform => "platform",
            TaskKind::Hurdle => "hurdle",
            TaskKind::Obstacle => "obstacle",
        }
    }
}

impl std::str::FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "flat" => TaskKind::Flat,
            "platform" => TaskKind::Platform,
            "hurdle" => TaskKind::Hurdle,
            "obstacle" => TaskKind::Obstacle,
            other => return Err(Error::usage(format!("unknown task '{other}'"))),
        })
    }
}

impl std::fmt::Display for TaskKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One scenario element. Platforms are axis-aligned boxes of height
/// `height` on flat ground; hurdles are zero-width bars whose crossing
/// direction is `angle`; obstacles are impassable discs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TaskSpec {
    Flat,
    Platform { center: [f64; 2], height: f64 },
    Hurdle { position: [f64; 2], angle: f64, height: f64 },
    Obstacle { center: [f64; 2], radius: f64, tolerance: f64 },
}

impl TaskSpec {
    pub fn platform(center: [f64; 2], height: f64) -> Result<Self> {
        check_range("platform height", height, PLATFORM_HEIGHTS)?;
        Ok(TaskSpec::Platform { center, height })
    }

    pub fn hurdle(position: [f64; 2], angle: f64, height: f64) -> Result<Self> {
        check_range("hurdle height", height, HURDLE_HEIGHTS)?;
        Ok(TaskSpec::Hurdle { position, angle, height })
    }

    pub fn obstacle(center: [f64; 2], radius: f64) -> Result<Self> {
        check_range("obstacle radius", radius, OBSTACLE_RADII)?;
        Ok(TaskSpec::Obstacle { center, radius, tolerance: OBSTACLE_TOLERANCE })
    }

    pub fn kind(&self) -> TaskKind {
        match self {
            TaskSpec::Flat => TaskKind::Flat,
            TaskSpec::Platform { .. } => TaskKind::Platform,
            TaskSpec::Hurdle { .. } => TaskKind::Hurdle,
            TaskSpec::Obstacle { .. } => TaskKind::Obstacle,
        }
    }

    /// Planar anchor point used for "nearest entity" queries.
    pub fn anchor(&self) -> Option<[f64; 2]> {
        match *self {
            TaskSpec::Flat => None,
            TaskSpec::Platform { center, .. } | TaskSpec::Obstacle { center, .. } => Some(center),
            TaskSpec::Hurdle { position, .. } => Some(position),
        }
    }

    /// Endpoints of a hurdle bar.
    pub fn hurdle_segment(&self) -> Option<([f64; 2], [f64; 2])> {
        match *self {
            TaskSpec::Hurdle { position, angle, .. } => {
                // the bar runs perpendicular to the crossing direction
                let (dx, dy) = (-angle.sin() * HURDLE_LENGTH / 2.0, angle.cos() * HURDLE_LENGTH / 2.0);
                Some(([position[0] - dx, position[1] - dy], [position[0] + dx, position[1] + dy]))
            }
            _ => None,
        }
    }
}

fn check_range(what: &str, v: f64, (lo, hi): (f64, f64)) -> Result<()> {
    if !(v >= lo - 1e-9 && v <= hi + 1e-9) {
        return Err(Error::usage(format!("{what} {v} outside [{lo}, {hi}]")));
    }
    Ok(())
}

/// A set of task elements sharing one world.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub elements: Vec<TaskSpec>,
}

impl Scene {
    pub fn new(elements: Vec<TaskSpec>) -> Self {
        Self { elements: elements.into_iter().filter(|e| !matches!(e, TaskSpec::Flat)).collect() }
    }

    pub fn flat() -> Self {
        Self::default()
    }

    pub fn single(task: TaskSpec) -> Self {
        Self::new(vec![task])
    }

    /// Terrain height: the tallest platform covering `(x, y)`, else 0.
    /// Hurdles and obstacles are not part of the terrain.
    pub fn height_at(&self, x: f64, y: f64) -> f64 {
        let half = PLATFORM_SIZE / 2.0;
        self.elements
            .iter()
            .filter_map(|e| match *e {
                TaskSpec::Platform { center, height }
                    if (x - center[0]).abs() <= half && (y - center[1]).abs() <= half =>
                {
                    Some(height)
                }
                _ => None,
            })
            .fold(0.0, f64::max)
    }

    pub fn kinds(&self) -> Vec<TaskKind> {
        let mut k: Vec<TaskKind> = self.elements.iter().map(TaskSpec::kind).collect();
        k.sort_by_key(|k| k.schema_id());
        k.dedup();
        k
    }

    pub fn contains(&self, kind: TaskKind) -> bool {
        self.elements.iter().any(|e| e.kind() == kind)
    }

    /// Nearest element of `kind` to the planar point `p`.
    pub fn nearest(&self, kind: TaskKind, p: [f64; 2]) -> Option<&TaskSpec> {
        self.elements
            .iter()
            .filter(|e| e.kind() == kind)
            .filter_map(|e| e.anchor().map(|a| (e, (a[0] - p[0]).hypot(a[1] - p[1]))))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(e, _)| e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_enforced() {
        assert!(TaskSpec::platform([0.0, 0.0], 0.7).is_err());
        assert!(TaskSpec::hurdle([0.0, 0.0], 0.0, 0.2).is_err());
        assert!(TaskSpec::obstacle([0.0, 0.0], 1.6).is_err());
        assert!(TaskSpec::obstacle([0.0, 0.0], 1.5).is_ok());
    }

    #[test]
    fn platform_height_lookup() {
        let s = Scene::single(TaskSpec::platform([3.0, 0.0], 0.4).unwrap());
        assert_eq!(s.height_at(3.5, 0.5), 0.4);
        assert_eq!(s.height_at(4.2, 0.0), 0.0);
        assert_eq!(Scene::flat().height_at(1.0, 1.0), 0.0);
    }

    #[test]
    fn hurdle_bar_is_perpendicular_to_crossing_direction() {
        let h = TaskSpec::hurdle([2.0, 0.0], 0.0, 0.3).unwrap();
        let (a, b) = h.hurdle_segment().unwrap();
        assert!((a[0] - 2.0).abs() < 1e-12 && (b[0] - 2.0).abs() < 1e-12);
        assert!(((b[1] - a[1]).abs() - HURDLE_LENGTH).abs() < 1e-12);
    }

    #[test]
    fn schema_ids_round_trip() {
        for k in [TaskKind::Flat, TaskKind::Platform, TaskKind::Hurdle, TaskKind::Obstacle] {
            assert_eq!(TaskKind::from_schema_id(k.schema_id()).unwrap(), k);
            assert_eq!(k.name().parse::<TaskKind>().unwrap(), k);
        }
    }
}
