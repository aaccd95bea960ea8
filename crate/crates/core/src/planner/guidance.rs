use crate::ddpm::GuidanceObjective;
use crate::error::{Error, Result};
use crate::footworld::{Plan, TaskKind, TaskSpec, WorldState, Scene};

/// Clipped-distance obstacle objective `S(p) = sum_t min(|f_t - o|, r_hat)`
/// over the planar footstep positions, with its gradient (12 values; zero
/// for saturated footsteps, for the vertical coordinate, and for a footstep
/// exactly at the center).
pub fn sdf_guidance_value(plan: &[f64], center: [f64; 2], r_hat: f64) -> Result<(f64, Vec<f64>)> {
    if plan.len() != Plan::DIM {
        return Err(Error::usage("guidance objective expects a 12-value plan"));
    }
    if !(r_hat > 0.0) {
        return Err(Error::usage("obstacle radius plus tolerance must be positive"));
    }
    let mut s = 0.0;
    let mut grad = vec![0.0; Plan::DIM];
    for t in 0..Plan::FOOTSTEPS {
        let (dx, dy) = (plan[3 * t] - center[0], plan[3 * t + 1] - center[1]);
        let d = dx.hypot(dy);
        if d < r_hat {
            s += d;
            if d > 0.0 {
                grad[3 * t] = dx / d;
                grad[3 * t + 1] = dy / d;
            }
        } else {
            s += r_hat;
        }
    }
    Ok((s, grad))
}

/// Obstacle avoidance objective in the character frame of one decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstacleGuidance {
    pub center: [f64; 2],
    pub r_hat: f64,
}

impl ObstacleGuidance {
    /// Objective for the nearest obstacle of `scene`, seen from `world`.
    pub fn for_world(world: &WorldState, scene: &Scene) -> Result<Self> {
        let p = [world.stance[0], world.stance[1]];
        match scene.nearest(TaskKind::Obstacle, p) {
            Some(&TaskSpec::Obstacle { center, radius, tolerance }) => {
                let local = world.to_local([center[0], center[1], 0.0]);
                Ok(Self { center: [local[0], local[1]], r_hat: radius + tolerance })
            }
            _ => Err(Error::usage("obstacle guidance needs an obstacle in the scene")),
        }
    }
}

impl GuidanceObjective for ObstacleGuidance {
    fn value(&self, x: &[f64]) -> f64 {
        sdf_guidance_value(x, self.center, self.r_hat).map(|v| v.0).unwrap_or(f64::NAN)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        sdf_guidance_value(x, self.center, self.r_hat).map(|v| v.1).unwrap_or_else(|_| vec![f64::NAN; x.len()])
    }
}
