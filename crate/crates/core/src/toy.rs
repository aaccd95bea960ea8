//! One-dimensional constraint-leakage experiment: a DDPM trained only on
//! proposals whose noisy outcome landed inside `C = [-1, 1]` still generates
//! samples outside `C`, and more so as the outcome noise grows.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::ddpm::{Denoiser, DenoiserSpec, DiffusionTrainer, Normalizer, SampleOptions};
use crate::error::{Error, Result};
use crate::nn::AdamConfig;
use crate::rng::{self, Rng};

pub const CONSTRAINT: (f64, f64) = (-1.0, 1.0);
pub const PROPOSAL: (f64, f64) = (-2.0, 2.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyConfig {
    /// Standard deviation of the outcome noise `x_hat = x + N(0, sigma^2)`.
    pub sigma: f64,
    /// Number of proposals drawn from `U(-2, 2)`.
    pub proposals: usize,
    /// Number of samples generated from the trained model.
    pub generate: usize,
    pub hidden: Vec<usize>,
    pub steps: usize,
    pub iterations: usize,
    pub batch: usize,
    pub lr: f64,
    pub bins: usize,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            sigma: 0.0,
            proposals: 40_000,
            generate: 4_000,
            hidden: vec![64, 64],
            steps: 50,
            iterations: 6_000,
            batch: 256,
            lr: 2e-3,
            bins: 60,
        }
    }
}

impl ToyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::usage(format!("toy sigma must be >= 0, got {}", self.sigma)));
        }
        if self.proposals == 0 || self.generate == 0 || self.batch == 0 || self.bins == 0 {
            return Err(Error::usage("toy sample counts must be >= 1"));
        }
        Ok(())
    }
}

pub fn in_constraint(x: f64) -> bool {
    (CONSTRAINT.0..=CONSTRAINT.1).contains(&x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyDataset {
    pub accepted: Vec<f64>,
    pub proposed: usize,
}

impl ToyDataset {
    pub fn acceptance_rate(&self) -> f64 {
        self.accepted.len() as f64 / self.proposed as f64
    }

    /// Fraction of accepted samples that violate the constraint.
    pub fn outside_fraction(&self) -> f64 {
        outside_fraction(&self.accepted)
    }
}

pub fn outside_fraction(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().filter(|&&x| !in_constraint(x)).count() as f64 / xs.len() as f64
}

/// Draws `x ~ U(-2, 2)` and keeps it iff its noisy outcome lies in `C`.
/// Two draws per proposal (uniform then normal) regardless of `sigma`.
pub fn make_toy_dataset(cfg: &ToyConfig, rng: &mut Rng) -> Result<ToyDataset> {
    cfg.validate()?;
    let mut accepted = Vec::with_capacity(cfg.proposals / 2 + 1);
    for _ in 0..cfg.proposals {
        let x = rng::uniform(rng, PROPOSAL.0, PROPOSAL.1);
        let outcome = x + cfg.sigma * rng::normal(rng);
        if in_constraint(outcome) {
            accepted.push(x);
        }
    }
    Ok(ToyDataset { accepted, proposed: cfg.proposals })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn new(xs: &[f64], lo: f64, hi: f64, bins: usize) -> Self {
        let mut counts = vec![0; bins];
        let w = (hi - lo) / bins as f64;
        for &x in xs {
            if x >= lo && x < hi {
                counts[(((x - lo) / w) as usize).min(bins - 1)] += 1;
            }
        }
        Self { lo, hi, counts }
    }

    pub fn bin_center(&self, k: usize) -> f64 {
        let w = (self.hi - self.lo) / self.counts.len() as f64;
        self.lo + (k as f64 + 0.5) * w
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyReport {
    pub sigma: f64,
    pub accepted: usize,
    pub acceptance_rate: f64,
    /// Out-of-constraint fraction of the training set.
    pub data_outside: f64,
    /// Out-of-constraint fraction of generated samples.
    pub leakage: f64,
    pub sample_mean: f64,
    pub final_loss: f64,
    pub samples: Vec<f64>,
    pub histogram: Histogram,
}

/// Cosine decay from `lr` to `lr / 20` over `total` iterations.
pub fn cosine_lr(lr: f64, it: usize, total: usize) -> f64 {
    let f = it as f64 / total.max(1) as f64;
    let floor = lr / 20.0;
    floor + 0.5 * (lr - floor) * (1.0 + (std::f64::consts::PI * f).cos())
}

pub fn train_toy_model(data: &[f64], cfg: &ToyConfig, rng: &mut Rng) -> Result<(Denoiser, f64)> {
    if data.is_empty() {
        return Err(Error::Experiment("no accepted samples to train on".into()));
    }
    let rows: Vec<Vec<f64>> = data.iter().map(|&x| vec![x]).collect();
    let norm = Normalizer::fit(&rows)?;
    let model = Denoiser::new(DenoiserSpec::unconditional(1, cfg.hidden.clone(), cfg.steps), norm, rng)?;
    let mut trainer = DiffusionTrainer::new(model, AdamConfig::with_lr(cfg.lr), false)?;
    let (m, s) = (trainer.model.normalizer.mean[0], trainer.model.normalizer.std[0]);
    let mut batch = Array2::zeros((cfg.batch, 1));
    let mut recent = 0.0;
    for it in 0..cfg.iterations {
        trainer.set_learning_rate(cosine_lr(cfg.lr, it, cfg.iterations))?;
        for v in batch.iter_mut() {
            *v = (data[rng::index(rng, data.len())] - m) / s;
        }
        let loss = trainer.step(batch.view(), None, rng).map_err(|e| Error::Experiment(e.to_string()))?;
        if it + 100 >= cfg.iterations {
            recent += loss / 100.0_f64.min(cfg.iterations as f64);
        }
    }
    Ok((trainer.into_model(), recent))
}

/// Builds the accepted set, trains the 1-D model on it and measures how many
/// generated samples fall outside `C`.
pub fn toy_experiment(cfg: &ToyConfig, seed: u64) -> Result<ToyReport> {
    cfg.validate()?;
    let data = make_toy_dataset(cfg, &mut rng::stream(seed, 0))?;
    let (model, final_loss) = train_toy_model(&data.accepted, cfg, &mut rng::stream(seed, 1))?;
    let emb = model.embed(None)?;
    let samples: Vec<f64> = model
        .sample_batch(&emb, cfg.generate, rng::fork_seed(&mut rng::stream(seed, 2)), &SampleOptions::clipped())?
        .into_iter()
        .map(|v| v[0])
        .collect();
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::Experiment("toy model generated non-finite samples".into()));
    }
    let sample_mean = samples.iter().sum::<f64>() / samples.len() as f64;
    Ok(ToyReport {
        sigma: cfg.sigma,
        accepted: data.accepted.len(),
        acceptance_rate: data.acceptance_rate(),
        data_outside: data.outside_fraction(),
        leakage: outside_fraction(&samples),
        sample_mean,
        final_loss,
        histogram: Histogram::new(&samples, -2.5, 2.5, cfg.bins),
        samples,
    })
}
