use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::footworld::Plan;
use crate::nn::{AdamConfig, AdamState, Gradients};
use crate::procgen::Dataset;
use crate::rng::Rng;

use super::value::ValueNet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OfflineConfig {
    pub batch: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Discount the dataset returns were computed with.
    pub dataset_gamma: f64,
}

impl Default for OfflineConfig {
    fn default() -> Self {
        Self { batch: 512, learning_rate: 1e-4, epochs: 10, dataset_gamma: crate::procgen::GAMMA }
    }
}

/// `1/2 mean (R - VF(s, p))^2` over a batch, with its parameter gradient.
pub fn offline_loss(net: &ValueNet, inputs: ArrayView2<f64>, targets: ArrayView1<f64>) -> Result<(f64, Gradients)> {
    let trace = net.net.forward_trace(inputs)?;
    let out = trace.output().column(0).to_owned();
    let resid = &out - &targets;
    let n = targets.len().max(1) as f64;
    let loss = 0.5 * resid.iter().map(|r| r * r).sum::<f64>() / n;
    if !loss.is_finite() {
        return Err(Error::Training { layer: None, msg: format!("non-finite regression loss {loss}") });
    }
    let upstream = (resid / n).insert_axis(Axis(1));
    let (grads, _) = net.net.backward_batch(&trace, upstream.view())?;
    Ok((loss, grads))
}

/// Mini-batch Adam regression of raw outputs onto `targets`. Returns the
/// mean batch loss of each epoch.
pub fn train_regression(
    net: &mut ValueNet,
    inputs: ArrayView2<f64>,
    targets: ArrayView1<f64>,
    cfg: &OfflineConfig,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    if inputs.nrows() == 0 || inputs.nrows() != targets.len() {
        return Err(Error::usage("regression needs a nonempty, aligned dataset"));
    }
    if cfg.batch == 0 {
        return Err(Error::usage("batch size must be positive"));
    }
    let mut opt = AdamState::new(&net.net, AdamConfig::with_lr(cfg.learning_rate))?;
    let mut order: Vec<usize> = (0..inputs.nrows()).collect();
    let mut losses = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        let (mut sum, mut batches) = (0.0, 0);
        for chunk in order.chunks(cfg.batch) {
            let x = inputs.select(Axis(0), chunk);
            let y = targets.select(Axis(0), chunk);
            let (loss, grads) = offline_loss(net, x.view(), y.view())?;
            opt.step(&mut net.net, &grads)?;
            sum += loss;
            batches += 1;
        }
        losses.push(sum / batches as f64);
    }
    Ok(losses)
}

/// Inputs `[state | plan]` and return targets of a labeled dataset.
pub fn regression_arrays(data: &Dataset) -> (Array2<f64>, Array1<f64>) {
    let dim = data.state_dim + Plan::DIM;
    let mut x = Array2::zeros((data.records.len(), dim));
    for (mut row, r) in x.axis_iter_mut(Axis(0)).zip(&data.records) {
        for (d, s) in row.iter_mut().zip(r.state.iter().chain(&r.plan)) {
            *d = f64::from(*s);
        }
    }
    let y = data.records.iter().map(|r| f64::from(r.ret)).collect();
    (x, y)
}

/// Fits `net` to the returns of `data` (offline viability filter).
pub fn train_offline(net: &mut ValueNet, data: &Dataset, cfg: &OfflineConfig, rng: &mut Rng) -> Result<Vec<f64>> {
    if data.records.is_empty() {
        return Err(Error::usage("offline training needs a nonempty dataset"));
    }
    if data.schema.schema_id() != net.schema || data.state_dim != net.state_dim {
        return Err(Error::usage(format!(
            "dataset schema {} (state dim {}) does not match value net schema {} (state dim {})",
            data.schema.schema_id(),
            data.state_dim,
            net.schema,
            net.state_dim
        )));
    }
    if (cfg.dataset_gamma - net.gamma).abs() > 1e-12 {
        return Err(Error::usage("dataset discount differs from value-net discount"));
    }
    let (x, y) = regression_arrays(data);
    train_regression(net, x.view(), y.view(), cfg, rng)
}
