use ndarray::{s, Array2, ArrayView2, Axis};

use crate::error::{check_dim, Error, Result};
use crate::nn::{AdamConfig, AdamState};
use crate::rng::{self, Rng};

use super::model::Denoiser;

/// Probability of replacing the conditioning embedding with the null
/// embedding when training a classifier-free pair.
pub const CFG_DROPOUT: f64 = 0.1;

/// Step indices `i ~ U{1..N}` and noise `eps ~ N(0, I)` for a batch, drawn
/// row by row (step first, then the row's noise).
pub fn draw_training_noise(rng: &mut Rng, batch: usize, dim: usize, steps: usize) -> (Vec<usize>, Array2<f64>) {
    let mut idx = Vec::with_capacity(batch);
    let mut eps = Array2::zeros((batch, dim));
    for mut row in eps.axis_iter_mut(Axis(0)) {
        idx.push(1 + rng::index(rng, steps));
        row.iter_mut().for_each(|v| *v = rng::normal(rng));
    }
    (idx, eps)
}

/// Batch mean of `||eps - eps_hat||^2`.
pub fn epsilon_loss(eps: ArrayView2<f64>, pred: ArrayView2<f64>) -> f64 {
    let n = eps.nrows().max(1) as f64;
    (&eps - &pred).iter().map(|d| d * d).sum::<f64>() / n
}

/// Denoiser plus optimizer state.
#[derive(Debug, Clone)]
pub struct DiffusionTrainer {
    pub model: Denoiser,
    /// Train with conditioning dropout so the same net doubles as the
    /// unconditional model.
    pub cfg: bool,
    eps_opt: AdamState,
    cond_opt: Option<AdamState>,
}

impl DiffusionTrainer {
    pub fn new(model: Denoiser, config: AdamConfig, cfg: bool) -> Result<Self> {
        if cfg && model.cond_net.is_none() {
            return Err(Error::usage("classifier-free training needs a conditional model"));
        }
        let eps_opt = AdamState::new(&model.eps_net, config)?;
        let cond_opt = model.cond_net.as_ref().map(|c| AdamState::new(c, config)).transpose()?;
        Ok(Self { model, cfg, eps_opt, cond_opt })
    }

    /// Changes the step size of both optimizers (learning-rate schedules).
    pub fn set_learning_rate(&mut self, lr: f64) -> Result<()> {
        if !(lr > 0.0) {
            return Err(Error::usage("learning rate must be positive"));
        }
        self.eps_opt.config.learning_rate = lr;
        if let Some(o) = &mut self.cond_opt {
            o.config.learning_rate = lr;
        }
        Ok(())
    }

    pub fn into_model(self) -> Denoiser {
        self.model
    }

    /// One Adam step on a batch of normalized clean samples (`x0`, rows) and
    /// their raw conditioning vectors (`cond`, rows; ignored for
    /// unconditional models). Returns the pre-update loss.
    pub fn step(&mut self, x0: ArrayView2<f64>, cond: Option<ArrayView2<f64>>, rng: &mut Rng) -> Result<f64> {
        let m = &self.model;
        let (batch, d) = (x0.nrows(), m.spec.data_dim);
        if batch == 0 {
            return Err(Error::usage("empty training batch"));
        }
        check_dim("training sample", d, x0.ncols())?;
        let (steps, eps) = draw_training_noise(rng, batch, d, m.schedule.steps);

        let mut noisy = Array2::zeros((batch, d));
        for b in 0..batch {
            let abar = m.schedule.alpha_bars[steps[b]];
            let (a, k) = (abar.sqrt(), (1.0 - abar).sqrt());
            for j in 0..d {
                noisy[[b, j]] = a * x0[[b, j]] + k * eps[[b, j]];
            }
        }

        let (cond_trace, embs) = match (&m.cond_net, cond) {
            (None, _) => (None, Array2::zeros((batch, 0))),
            (Some(_), None) => return Err(Error::usage("conditional model needs a conditioning batch")),
            (Some(net), Some(c)) => {
                if c.nrows() != batch {
                    return Err(Error::usage("conditioning batch size differs from sample batch"));
                }
                check_dim("conditioning", m.spec.cond_dim, c.ncols())?;
                let trace = net.forward_trace(c)?;
                let mut embs = trace.output().clone();
                if self.cfg {
                    for mut row in embs.axis_iter_mut(Axis(0)) {
                        if rng::unit(rng) < CFG_DROPOUT {
                            row.fill(0.0);
                        }
                    }
                }
                (Some(trace), embs)
            }
        };

        let input = m.eps_inputs(noisy.view(), &steps, embs.view())?;
        let trace = m.eps_net.forward_trace(input.view())?;
        let loss = epsilon_loss(eps.view(), trace.output().view());
        if !loss.is_finite() {
            return Err(Error::Training { layer: None, msg: format!("non-finite diffusion loss {loss}") });
        }
        let upstream = (trace.output() - &eps) * (2.0 / batch as f64);
        let (g_eps, g_in) = m.eps_net.backward_batch(&trace, upstream.view())?;

        let g_cond = match (&m.cond_net, cond_trace) {
            (Some(net), Some(ct)) => {
                let off = d + m.spec.time_dim;
                let mut g_emb = g_in.slice(s![.., off..]).to_owned();
                // dropped rows carry no gradient into the encoder
                for (mut g, e) in g_emb.axis_iter_mut(Axis(0)).zip(embs.axis_iter(Axis(0))) {
                    if self.cfg && e.iter().all(|&v| v == 0.0) {
                        g.fill(0.0);
                    }
                }
                Some(net.backward_batch(&ct, g_emb.view())?.0)
            }
            _ => None,
        };

        self.eps_opt.step(&mut self.model.eps_net, &g_eps)?;
        if let (Some(opt), Some(net), Some(g)) = (&mut self.cond_opt, &mut self.model.cond_net, g_cond) {
            opt.step(net, &g)?;
        }
        Ok(loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ddpm::{DenoiserSpec, Normalizer};
    use crate::nn::NetworkParams;
    use crate::rng::seeded;

    #[test]
    fn perfect_prediction_has_zero_loss() {
        let (_, eps) = draw_training_noise(&mut seeded(1), 16, 4, 20);
        assert_eq!(epsilon_loss(eps.view(), eps.view()), 0.0);
    }

    #[test]
    fn zero_network_loss_is_mean_noise_energy() {
        let spec = DenoiserSpec::unconditional(3, vec![8], 20);
        let mut model = Denoiser::new(spec, Normalizer::identity(3), &mut seeded(0)).unwrap();
        model.eps_net = NetworkParams::zeros(&model.eps_net.layer_dims()).unwrap();
        let mut t = DiffusionTrainer::new(model, AdamConfig::with_lr(1e-3), false).unwrap();
        let x0 = Array2::from_elem((10, 3), 0.4);
        let loss = t.step(x0.view(), None, &mut seeded(77)).unwrap();
        let (_, eps) = draw_training_noise(&mut seeded(77), 10, 3, 20);
        let expected = eps.iter().map(|e| e * e).sum::<f64>() / 10.0;
        assert!((loss - expected).abs() < 1e-12);
    }

    #[test]
    fn conditional_model_requires_conditioning() {
        let spec = DenoiserSpec { cond_dim: 5, cond_embed_dim: 4, cond_hidden: vec![4], ..DenoiserSpec::unconditional(2, vec![8], 10) };
        let model = Denoiser::new(spec, Normalizer::identity(2), &mut seeded(0)).unwrap();
        let mut t = DiffusionTrainer::new(model, AdamConfig::with_lr(1e-3), true).unwrap();
        let x0 = Array2::zeros((4, 2));
        assert!(t.step(x0.view(), None, &mut seeded(1)).is_err());
        let c = Array2::from_elem((4, 5), 0.1);
        assert!(t.step(x0.view(), Some(c.view()), &mut seeded(1)).unwrap().is_finite());
    }
}
