//! Declared capability constants of the surrogate step executor.
//!
//! All failure rules live here so their difficulty can be tuned in one place.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Capability {
    /// Planar execution noise (std, meters).
    pub sigma_exec: f64,
    pub step_min: f64,
    pub step_max: f64,
    /// Step-up risk ramps from `up_start` to certain failure at
    /// `up_start + ramp`.
    pub up_start: f64,
    pub down_start: f64,
    pub ramp: f64,
    /// Step-length attenuation of vertical risk: short steps are safer.
    /// `g(L) = max(floor, clamp((L - len_start) / len_span, 0, 1)^2)`.
    pub len_start: f64,
    pub len_span: f64,
    pub len_floor: f64,
    /// Hurdle clearance `~ N(mu(u), clearance_std^2)`, with a tent-shaped
    /// mean over the crossing fraction `u` of the swing: `edge` at lift-off
    /// and touch-down, `edge + peak_gain` at mid-swing.
    pub clearance_edge: f64,
    pub clearance_peak_gain: f64,
    pub clearance_std: f64,
    /// Replace every probabilistic rule by its `p > 0.5` threshold and drop
    /// execution noise.
    pub deterministic: bool,
}

impl Default for Capability {
    fn default() -> Self {
        Self {
            sigma_exec: 0.03,
            step_min: 0.15,
            step_max: 1.3,
            up_start: 0.25,
            down_start: 0.35,
            ramp: 0.40,
            len_start: 0.2,
            len_span: 0.9,
            len_floor: 0.02,
            clearance_edge: 0.22,
            clearance_peak_gain: 0.30,
            clearance_std: 0.04,
            deterministic: false,
        }
    }
}

impl Capability {
    pub fn deterministic() -> Self {
        Self { sigma_exec: 0.0, deterministic: true, ..Self::default() }
    }

    pub fn exec_noise(&self) -> f64 {
        if self.deterministic {
            0.0
        } else {
            self.sigma_exec
        }
    }

    pub fn length_ok(&self, len: f64) -> bool {
        (self.step_min..=self.step_max).contains(&len)
    }

    /// Vertical ramp alone: `clamp((|dz| - start) / ramp, 0, 1)^2`.
    pub fn ramp_risk(&self, dz: f64) -> f64 {
        let start = if dz >= 0.0 { self.up_start } else { self.down_start };
        ((dz.abs() - start) / self.ramp).clamp(0.0, 1.0).powi(2)
    }

    pub fn length_factor(&self, len: f64) -> f64 {
        ((len - self.len_start) / self.len_span).clamp(0.0, 1.0).powi(2).max(self.len_floor)
    }

    /// Probability that a step with height change `dz` and planar length
    /// `len` falls.
    pub fn p_fall(&self, dz: f64, len: f64) -> f64 {
        self.ramp_risk(dz) * self.length_factor(len)
    }

    pub fn clearance_mean(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        self.clearance_edge + self.clearance_peak_gain * (1.0 - (2.0 * u - 1.0).abs())
    }

    /// `P(clearance < height)` when crossing at swing fraction `u`.
    pub fn p_hurdle_fail(&self, height: f64, u: f64) -> f64 {
        Normal::new(self.clearance_mean(u), self.clearance_std).expect("positive std").cdf(height)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_endpoints() {
        let c = Capability::default();
        assert_eq!(c.ramp_risk(0.0), 0.0);
        assert_eq!(c.ramp_risk(0.25), 0.0);
        assert!((c.ramp_risk(0.45) - 0.25).abs() < 1e-12);
        assert_eq!(c.ramp_risk(0.65), 1.0);
        assert_eq!(c.ramp_risk(-0.35), 0.0);
        assert!((c.ramp_risk(-0.55) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn clearance_mean_at_quarter_swing_gives_even_odds_at_its_mean() {
        let c = Capability::default();
        // 0.22 + 0.30 * (1 - |2 * 0.25 - 1|)
        assert!((c.clearance_mean(0.25) - 0.37).abs() < 1e-12);
        assert!((c.p_hurdle_fail(0.37, 0.25) - 0.5).abs() < 1e-12);
        assert!(c.p_hurdle_fail(0.35, 0.5) < c.p_hurdle_fail(0.35, 0.1));
    }

    #[test]
    fn long_steps_carry_the_full_ramp() {
        let c = Capability::default();
        assert_eq!(c.length_factor(1.1), 1.0);
        assert_eq!(c.length_factor(0.2), c.len_floor);
    }
}
