use ndarray::{s, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::nn::{time_embed, NetworkParams, SharedSide};
use crate::rng::Rng;

use super::schedule::NoiseSchedule;

/// Per-coordinate affine normalization of the diffused data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    pub fn identity(dim: usize) -> Self {
        Self { mean: vec![0.0; dim], std: vec![1.0; dim] }
    }

    /// Zero-mean / unit-variance statistics of `rows`; a floor keeps constant
    /// coordinates from dividing by zero.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows.first().ok_or_else(|| Error::usage("cannot fit normalizer on no data"))?;
        let dim = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            check_dim("normalizer row", dim, r.len())?;
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m).powi(2) / n;
            }
        }
        let std = var.into_iter().map(|v| v.sqrt().max(1e-3)).collect();
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| (v - m) / s).collect()
    }

    pub fn denormalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| v * s + m).collect()
    }
}

/// Architecture of a [`Denoiser`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenoiserSpec {
    pub data_dim: usize,
    /// Raw conditioning length; 0 for an unconditional model.
    pub cond_dim: usize,
    pub cond_embed_dim: usize,
    pub cond_hidden: Vec<usize>,
    pub time_dim: usize,
    pub hidden: Vec<usize>,
    pub steps: usize,
}

impl DenoiserSpec {
    /// Footstep-plan denoiser: 12-dim plans, 32-dim step embedding, 64-dim
    /// learned conditioning embedding.
    pub fn planner(cond_dim: usize) -> Self {
        Self {
            data_dim: 12,
            cond_dim,
            cond_embed_dim: 64,
            cond_hidden: vec![64],
            time_dim: 32,
            hidden: vec![128, 128, 128],
            steps: 20,
        }
    }

    pub fn unconditional(data_dim: usize, hidden: Vec<usize>, steps: usize) -> Self {
        Self { data_dim, cond_dim: 0, cond_embed_dim: 0, cond_hidden: vec![], time_dim: 16, hidden, steps }
    }

    pub fn embed_dim(&self) -> usize {
        if self.cond_dim == 0 {
            0
        } else {
            self.cond_embed_dim
        }
    }

    pub fn eps_input_dim(&self) -> usize {
        self.data_dim + self.time_dim + self.embed_dim()
    }

    fn eps_dims(&self) -> Vec<usize> {
        let mut d = vec![self.eps_input_dim()];
        d.extend(&self.hidden);
        d.push(self.data_dim);
        d
    }

    fn cond_dims(&self) -> Option<Vec<usize>> {
        (self.cond_dim > 0).then(|| {
            let mut d = vec![self.cond_dim];
            d.extend(&self.cond_hidden);
            d.push(self.cond_embed_dim);
            d
        })
    }
}

/// Output of the conditioning sub-network, computed once per decision and
/// shared by every chain. An empty embedding means "unconditional".
#[derive(Debug, Clone, PartialEq)]
pub struct CondEmbedding(pub Vec<f64>);

/// A (normalized) sample at diffusion step `step`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisySample {
    pub values: Vec<f64>,
    pub step: usize,
}

/// ε-prediction network plus its conditioning encoder, schedule and data
/// normalization.
#[derive(Debug, Clone)]
pub struct Denoiser {
    pub spec: DenoiserSpec,
    pub schedule: NoiseSchedule,
    pub normalizer: Normalizer,
    pub(crate) cond_net: Option<NetworkParams>,
    pub(crate) eps_net: NetworkParams,
}

impl Denoiser {
    pub fn new(spec: DenoiserSpec, normalizer: Normalizer, rng: &mut Rng) -> Result<Self> {
        check_dim("normalizer", spec.data_dim, normalizer.dim())?;
        let schedule = NoiseSchedule::cosine(spec.steps)?;
        let cond_net = spec.cond_dims().map(|d| NetworkParams::new(&d, rng)).transpose()?;
        let eps_net = NetworkParams::new(&spec.eps_dims(), rng)?;
        Ok(Self { spec, schedule, normalizer, cond_net, eps_net })
    }

    pub fn from_parts(
        spec: DenoiserSpec,
        schedule: NoiseSchedule,
        normalizer: Normalizer,
        cond_net: Option<NetworkParams>,
        eps_net: NetworkParams,
    ) -> Result<Self> {
        check_dim("normalizer", spec.data_dim, normalizer.dim())?;
        if eps_net.layer_dims() != spec.eps_dims() {
            return Err(Error::usage("eps network does not match denoiser spec"));
        }
        if cond_net.as_ref().map(|n| n.layer_dims()) != spec.cond_dims() {
            return Err(Error::usage("conditioning network does not match denoiser spec"));
        }
        if schedule.steps != spec.steps {
            return Err(Error::usage("schedule length does not match denoiser spec"));
        }
        Ok(Self { spec, schedule, normalizer, cond_net, eps_net })
    }

    pub fn eps_net(&self) -> &NetworkParams {
        &self.eps_net
    }

    pub fn eps_net_mut(&mut self) -> &mut NetworkParams {
        &mut self.eps_net
    }

    pub fn cond_net(&self) -> Option<&NetworkParams> {
        self.cond_net.as_ref()
    }

    pub fn data_dim(&self) -> usize {
        self.spec.data_dim
    }

    pub fn quantize_f32(&mut self) {
        self.eps_net.quantize_f32();
        if let Some(c) = &mut self.cond_net {
            c.quantize_f32();
        }
    }

    /// Conditioning embedding. `None` yields the null embedding used by the
    /// unconditional branch of classifier-free guidance.
    pub fn embed(&self, cond: Option<&[f64]>) -> Result<CondEmbedding> {
        match (&self.cond_net, cond) {
            (None, None) => Ok(CondEmbedding(Vec::new())),
            (None, Some(_)) => Err(Error::usage("unconditional denoiser given a conditioning vector")),
            (Some(_), None) => Ok(CondEmbedding(vec![0.0; self.spec.cond_embed_dim])),
            (Some(net), Some(c)) => {
                check_dim("conditioning", self.spec.cond_dim, c.len())?;
                Ok(CondEmbedding(net.forward(c)?))
            }
        }
    }

    /// ε-estimate for a batch of normalized samples that share one step and
    /// one conditioning embedding.
    pub fn predict_eps(&self, x: ArrayView2<f64>, step: usize, emb: &CondEmbedding) -> Result<Array2<f64>> {
        check_dim("noisy sample", self.spec.data_dim, x.ncols())?;
        check_dim("conditioning embedding", self.spec.embed_dim(), emb.0.len())?;
        let mut shared = time_embed(step, self.spec.time_dim)?;
        shared.extend_from_slice(&emb.0);
        self.eps_net.forward_shared(&shared, x, SharedSide::Back)
    }

    /// Assembles full per-row eps-net inputs `[x, temb(step_b), emb_b]`.
    pub(crate) fn eps_inputs(&self, x: ArrayView2<f64>, steps: &[usize], embs: ArrayView2<f64>) -> Result<Array2<f64>> {
        let (d, t) = (self.spec.data_dim, self.spec.time_dim);
        let mut input = Array2::zeros((x.nrows(), self.spec.eps_input_dim()));
        input.slice_mut(s![.., ..d]).assign(&x);
        for (b, &i) in steps.iter().enumerate() {
            let te = time_embed(i, t)?;
            input.slice_mut(s![b, d..d + t]).assign(&ndarray::aview1(&te));
        }
        if embs.ncols() > 0 {
            input.slice_mut(s![.., d + t..]).assign(&embs);
        }
        Ok(input)
    }
}
