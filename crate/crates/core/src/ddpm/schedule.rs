use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const COSINE_OFFSET: f64 = 0.008;
pub const BETA_CLIP: f64 = 0.999;

/// Variance schedule for `N` diffusion steps. Index 0 is clean data
/// (`alpha_bar[0] = 1`, `beta[0] = 0`); indices `1..=N` are noise levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    pub steps: usize,
    pub offset: f64,
    pub clip: f64,
    pub betas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub alpha_bars: Vec<f64>,
    /// Posterior standard deviation, `sigma^2 = (1 - abar[i-1]) / (1 - abar[i]) * beta[i]`.
    pub sigmas: Vec<f64>,
}

impl NoiseSchedule {
    pub fn cosine(steps: usize) -> Result<Self> {
        Self::cosine_with(steps, COSINE_OFFSET, BETA_CLIP)
    }

    pub fn cosine_with(steps: usize, offset: f64, clip: f64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::usage("diffusion schedule needs at least one step"));
        }
        if !(offset >= 0.0) || !(clip > 0.0 && clip < 1.0) {
            return Err(Error::usage("invalid cosine schedule offset/clip"));
        }
        let f = |i: usize| {
            let t = i as f64 / steps as f64;
            (((t + offset) / (1.0 + offset)) * FRAC_PI_2).cos().powi(2)
        };
        let f0 = f(0);
        let mut betas = vec![0.0];
        let mut alphas = vec![1.0];
        let mut alpha_bars = vec![1.0];
        let mut sigmas = vec![0.0];
        for i in 1..=steps {
            let beta = (1.0 - (f(i) / f0) / (f(i - 1) / f0)).clamp(0.0, clip);
            let alpha = 1.0 - beta;
            let abar = alpha_bars[i - 1] * alpha;
            let var = (1.0 - alpha_bars[i - 1]) / (1.0 - abar) * beta;
            betas.push(beta);
            alphas.push(alpha);
            alpha_bars.push(abar);
            sigmas.push(var.sqrt());
        }
        if betas[1..].iter().any(|&b| !(b > 0.0 && b < 1.0)) {
            return Err(Error::usage("cosine schedule produced a degenerate beta"));
        }
        Ok(Self { steps, offset, clip, betas, alphas, alpha_bars, sigmas })
    }

    pub fn check_step(&self, i: usize) -> Result<()> {
        if i == 0 || i > self.steps {
            return Err(Error::usage(format!("diffusion step {i} outside 1..={}", self.steps)));
        }
        Ok(())
    }

    /// Closed-form corruption `sqrt(abar) x0 + sqrt(1 - abar) eps`.
    pub fn corrupt(&self, x0: &[f64], i: usize, eps: &[f64]) -> Result<Vec<f64>> {
        self.check_step(i)?;
        crate::error::check_dim("noise", x0.len(), eps.len())?;
        let (a, b) = (self.alpha_bars[i].sqrt(), (1.0 - self.alpha_bars[i]).sqrt());
        Ok(x0.iter().zip(eps).map(|(x, e)| a * x + b * e).collect())
    }
}
