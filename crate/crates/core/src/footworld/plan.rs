use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Four consecutive target footsteps `(x, y, z)` in the character frame
/// (x forward, y left, z up; meters, relative to the stance foot).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub steps: [[f64; 3]; 4],
}

impl Plan {
    pub const FOOTSTEPS: usize = 4;
    pub const DIM: usize = 12;
    pub const MAX_PLANAR: f64 = 3.0;
    pub const MAX_VERTICAL: f64 = 1.0;

    pub fn new(steps: [[f64; 3]; 4]) -> Result<Self> {
        if steps.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::usage("plan coordinates must be finite"));
        }
        Ok(Self { steps })
    }

    /// Builds a plan from a flat 12-vector, clamping to the admissible box.
    pub fn from_slice(v: &[f64]) -> Result<Self> {
        check_dim("plan", Self::DIM, v.len())?;
        let mut steps = [[0.0; 3]; 4];
        for (k, s) in steps.iter_mut().enumerate() {
            s.copy_from_slice(&v[3 * k..3 * k + 3]);
        }
        Ok(Self::new(steps)?.clamped())
    }

    pub fn clamped(mut self) -> Self {
        for s in &mut self.steps {
            s[0] = s[0].clamp(-Self::MAX_PLANAR, Self::MAX_PLANAR);
            s[1] = s[1].clamp(-Self::MAX_PLANAR, Self::MAX_PLANAR);
            s[2] = s[2].clamp(-Self::MAX_VERTICAL, Self::MAX_VERTICAL);
        }
        self
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.steps.iter().flatten().copied().collect()
    }

    /// The only footstep that is ever executed.
    pub fn first(&self) -> [f64; 3] {
        self.steps[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_round_trip_and_clamp() {
        let v: Vec<f64> = (0..12).map(|i| i as f64 * 0.05).collect();
        let p = Plan::from_slice(&v).unwrap();
        assert_eq!(p.to_vec(), v);
        let big = Plan::from_slice(&[9.0, -9.0, 5.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(big.first(), [3.0, -3.0, 1.0]);
        assert!(Plan::from_slice(&[f64::NAN; 12]).is_err());
        assert!(Plan::from_slice(&[0.0; 11]).is_err());
    }
}
