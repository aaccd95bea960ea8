use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::footworld::Leg;
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcGenParams {
    pub dr_min: f64,
    pub dr_max: f64,
    /// Maximum heading change per step (radians).
    pub dphi_max: f64,
    /// Leg-offset rotation magnitude (radians); left steps turn by
    /// `+leg_rotation`, right steps by `-leg_rotation`.
    pub leg_rotation: f64,
    pub length: usize,
}

impl Default for ProcGenParams {
    fn default() -> Self {
        Self { dr_min: 0.5, dr_max: 1.15, dphi_max: 20f64.to_radians(), leg_rotation: 9f64.to_radians(), length: 50 }
    }
}

impl ProcGenParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.dr_min > 0.0 && self.dr_min < self.dr_max) {
            return Err(Error::usage("procedural step radii need 0 < min < max"));
        }
        if !(self.dphi_max > 0.0 && self.dphi_max < FRAC_PI_2) {
            return Err(Error::usage("procedural heading change must lie in (0, 90) degrees"));
        }
        if self.length == 0 {
            return Err(Error::usage("trajectory length must be positive"));
        }
        Ok(())
    }
}

/// Applies one generator step with explicit `dr`, `dphi`:
/// `dx = dr sin(dphi - phi)`, `dy = dr cos(dphi + phi)`, rotated by the leg
/// offset and added to `position`. Returns the footstep and the new heading
/// `phi + dphi`.
pub fn footstep_from(phi: f64, position: [f64; 2], leg: Leg, dr: f64, dphi: f64, leg_rotation: f64) -> ([f64; 2], f64) {
    let dx = dr * (dphi - phi).sin();
    let dy = dr * (dphi + phi).cos();
    let a = leg.sign() * leg_rotation;
    let (c, s) = (a.cos(), a.sin());
    let step = [c * dx - s * dy, s * dx + c * dy];
    ([position[0] + step[0], position[1] + step[1]], phi + dphi)
}

/// Samples `dr ~ U(dr_min, dr_max)` and `dphi ~ U(-dphi_max, dphi_max)` and
/// applies [`footstep_from`]. Returns the footstep, new heading, the drawn
/// `dr` and the next leg.
pub fn next_footstep(phi: f64, position: [f64; 2], leg: Leg, params: &ProcGenParams, rng: &mut Rng) -> Footstep {
    let dr = rng::uniform(rng, params.dr_min, params.dr_max);
    let dphi = rng::uniform(rng, -params.dphi_max, params.dphi_max);
    let (position, heading) = footstep_from(phi, position, leg, dr, dphi, params.leg_rotation);
    Footstep { position, heading, dr, dphi, leg }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Footstep {
    pub position: [f64; 2],
    /// Generator heading after this step.
    pub heading: f64,
    pub dr: f64,
    pub dphi: f64,
    /// Leg that made this step.
    pub leg: Leg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub start: [f64; 2],
    pub start_heading: f64,
    pub first_leg: Leg,
    pub steps: Vec<Footstep>,
}

impl Trajectory {
    /// World yaw matching a generator heading (the generator walks along +y
    /// at heading 0).
    pub fn world_yaw(phi: f64) -> f64 {
        phi + FRAC_PI_2
    }
}

/// A fixed-length footstep sequence from the origin, generator heading 0,
/// legs strictly alternating.
pub fn gen_trajectory(params: &ProcGenParams, rng: &mut Rng) -> Result<Trajectory> {
    params.validate()?;
    let first_leg = if rng::unit(rng) < 0.5 { Leg::Left } else { Leg::Right };
    let (mut pos, mut phi, mut leg) = ([0.0, 0.0], 0.0, first_leg);
    let mut steps = Vec::with_capacity(params.length);
    for _ in 0..params.length {
        let f = next_footstep(phi, pos, leg, params, rng);
        pos = f.position;
        phi = f.heading;
        leg = leg.other();
        steps.push(f);
    }
    Ok(Trajectory { start: [0.0, 0.0], start_heading: 0.0, first_leg, steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn zero_heading_advances_along_y() {
        let (p, h) = footstep_from(0.0, [0.0, 0.0], Leg::Left, 0.8, 0.0, 0.0);
        assert!(p[0].abs() < 1e-15);
        assert!((p[1] - 0.8).abs() < 1e-15);
        assert_eq!(h, 0.0);
    }

    #[test]
    fn thirty_degree_example() {
        let (p, h) = footstep_from(30f64.to_radians(), [0.0, 0.0], Leg::Right, 1.0, 10f64.to_radians(), 0.0);
        assert!((p[0] - (-20f64).to_radians().sin()).abs() < 1e-12);
        assert!((p[1] - 40f64.to_radians().cos()).abs() < 1e-12);
        assert!((p[0] + 0.342).abs() < 5e-4 && (p[1] - 0.766).abs() < 5e-4);
        assert_eq!(h, 30f64.to_radians() + 10f64.to_radians());
    }

    #[test]
    fn trajectory_shape() {
        let p = ProcGenParams::default();
        let t = gen_trajectory(&p, &mut seeded(3)).unwrap();
        assert_eq!(t.steps.len(), 50);
        assert_eq!(t, gen_trajectory(&p, &mut seeded(3)).unwrap());
        let mut prev = 0.0;
        for (k, s) in t.steps.iter().enumerate() {
            assert!(s.dphi.abs() <= 20f64.to_radians());
            assert!((s.heading - prev - s.dphi).abs() < 1e-12);
            assert!(s.dr >= 0.5 && s.dr <= 1.15);
            if k > 0 {
                assert_ne!(s.leg, t.steps[k - 1].leg);
            }
            prev = s.heading;
        }
    }

    #[test]
    fn invalid_params_rejected() {
        let p = ProcGenParams { dr_min: 1.2, ..Default::default() };
        assert!(gen_trajectory(&p, &mut seeded(0)).is_err());
    }
}
