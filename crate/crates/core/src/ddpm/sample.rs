use std::sync::Arc;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{check_dim, Error, Result};
use crate::footworld::Plan;
use crate::rng::{self, Rng};

use super::model::{CondEmbedding, Denoiser, NoisySample};
use super::schedule::NoiseSchedule;

/// A differentiable objective over denormalized samples (e.g. plans in
/// meters). Guidance ascends `J`.
pub trait GuidanceObjective: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;

    /// Gradient of [`value`](Self::value). The default is a central finite
    /// difference.
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        const H: f64 = 1e-5;
        let mut probe = x.to_vec();
        (0..x.len())
            .map(|k| {
                probe[k] = x[k] + H;
                let hi = self.value(&probe);
                probe[k] = x[k] - H;
                let lo = self.value(&probe);
                probe[k] = x[k];
                (hi - lo) / (2.0 * H)
            })
            .collect()
    }
}

/// `J(x) = g . x`.
#[derive(Debug, Clone)]
pub struct LinearObjective(pub Vec<f64>);

impl GuidanceObjective for LinearObjective {
    fn value(&self, x: &[f64]) -> f64 {
        self.0.iter().zip(x).map(|(g, v)| g * v).sum()
    }

    fn gradient(&self, _x: &[f64]) -> Vec<f64> {
        self.0.clone()
    }
}

/// Objective plus gradient scale for classifier-style guidance.
#[derive(Clone)]
pub struct GuidanceSpec {
    pub objective: Arc<dyn GuidanceObjective>,
    pub weight: f64,
}

impl GuidanceSpec {
    pub fn new(objective: Arc<dyn GuidanceObjective>, weight: f64) -> Result<Self> {
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(Error::usage(format!("guidance weight must be finite and >= 0, got {weight}")));
        }
        Ok(Self { objective, weight })
    }
}

impl std::fmt::Debug for GuidanceSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GuidanceSpec").field("weight", &self.weight).finish_non_exhaustive()
    }
}

/// Classifier-free combination `eps_u + w (eps_c - eps_u)`.
pub fn cfg_combine(eps_cond: &[f64], eps_uncond: &[f64], w: f64) -> Result<Vec<f64>> {
    check_dim("cfg epsilon", eps_cond.len(), eps_uncond.len())?;
    Ok(eps_cond.iter().zip(eps_uncond).map(|(c, u)| u + w * (c - u)).collect())
}

/// Posterior mean from a clamped clean-sample estimate,
/// `c1 clamp(x0_hat) + c2 x` with the usual `q(x_{i-1} | x_i, x_0)` weights.
fn clipped_posterior_mean(sched: &NoiseSchedule, i: usize, x: ArrayView1<f64>, eps: ArrayView1<f64>, c: f64) -> Vec<f64> {
    let (ab, ab_prev) = (sched.alpha_bars[i], sched.alpha_bars[i - 1]);
    let c1 = ab_prev.sqrt() * sched.betas[i] / (1.0 - ab);
    let c2 = sched.alphas[i].sqrt() * (1.0 - ab_prev) / (1.0 - ab);
    x.iter()
        .zip(eps)
        .map(|(x, e)| {
            let x0 = ((x - (1.0 - ab).sqrt() * e) / ab.sqrt()).clamp(-c, c);
            c1 * x0 + c2 * x
        })
        .collect()
}

/// Posterior mean `(1/sqrt(a_i)) (x - beta_i / sqrt(1 - abar_i) eps)`.
fn posterior_mean(sched: &NoiseSchedule, i: usize, x: ArrayView1<f64>, eps: ArrayView1<f64>) -> Vec<f64> {
    let inv = 1.0 / sched.alphas[i].sqrt();
    let k = sched.betas[i] / (1.0 - sched.alpha_bars[i]).sqrt();
    x.iter().zip(eps).map(|(x, e)| inv * (x - k * e)).collect()
}

/// How many candidate ε estimates feed one reverse step.
#[derive(Debug, Clone, Default)]
pub struct SampleOptions {
    /// Classifier-free guidance weight; `None` uses the conditional model only.
    pub cfg_weight: Option<f64>,
    pub guidance: Option<GuidanceSpec>,
    /// Clamp the implied clean sample to `[-c, c]` (normalized units) before
    /// forming the posterior mean. The last reverse step divides by
    /// `sqrt(abar_N)`, so without a clamp small ε errors there are amplified
    /// into a shared bias. `None` applies the ε-form mean exactly.
    pub clip_x0: Option<f64>,
}

/// Default clean-sample clamp used by the planner and the toy experiment.
pub const DEFAULT_X0_CLIP: f64 = 4.0;

impl SampleOptions {
    pub fn clipped() -> Self {
        Self { clip_x0: Some(DEFAULT_X0_CLIP), ..Default::default() }
    }
}

impl Denoiser {
    fn check_noisy(&self, noisy: &NoisySample, z: &[f64]) -> Result<()> {
        self.schedule.check_step(noisy.step)?;
        check_dim("noisy sample", self.spec.data_dim, noisy.values.len())?;
        check_dim("step noise", self.spec.data_dim, z.len())?;
        if noisy.step == 1 && z.iter().any(|&v| v != 0.0) {
            return Err(Error::usage("final reverse step must use z = 0"));
        }
        Ok(())
    }

    fn eps_for(&self, x: ArrayView2<f64>, step: usize, emb: &CondEmbedding, opts: &SampleOptions) -> Result<Array2<f64>> {
        let eps_c = self.predict_eps(x, step, emb)?;
        match opts.cfg_weight {
            None => Ok(eps_c),
            Some(w) => {
                let eps_u = self.predict_eps(x, step, &self.embed(None)?)?;
                Ok(&eps_u + &((&eps_c - &eps_u) * w))
            }
        }
    }

    /// One reverse step from `noisy.step` to `noisy.step - 1`.
    pub fn denoise_step(&self, noisy: &NoisySample, emb: &CondEmbedding, z: &[f64]) -> Result<NoisySample> {
        self.guided_denoise_step(noisy, emb, z, &SampleOptions::default())
    }

    /// Reverse step with optional classifier-free mixing and an additive
    /// `w sigma^2 grad J` mean shift. The gradient is taken w.r.t. the noisy
    /// sample in normalized coordinates.
    pub fn guided_denoise_step(
        &self,
        noisy: &NoisySample,
        emb: &CondEmbedding,
        z: &[f64],
        opts: &SampleOptions,
    ) -> Result<NoisySample> {
        self.check_noisy(noisy, z)?;
        let x = ndarray::aview1(&noisy.values).insert_axis(Axis(0));
        let eps = self.eps_for(x, noisy.step, emb, opts)?;
        let mut zs = Array2::zeros((1, z.len()));
        zs.row_mut(0).assign(&ndarray::aview1(z));
        let out = self.reverse_rows(x, noisy.step, eps.view(), zs.view(), opts)?;
        Ok(NoisySample { values: out.row(0).to_vec(), step: noisy.step - 1 })
    }

    fn reverse_rows(
        &self,
        x: ArrayView2<f64>,
        i: usize,
        eps: ArrayView2<f64>,
        z: ArrayView2<f64>,
        opts: &SampleOptions,
    ) -> Result<Array2<f64>> {
        if let Some(c) = opts.clip_x0 {
            if !(c > 0.0) {
                return Err(Error::usage(format!("clean-sample clamp must be positive, got {c}")));
            }
        }
        let sched = &self.schedule;
        let sigma = sched.sigmas[i];
        let mut out = Array2::zeros(x.raw_dim());
        for (b, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
            let mut mean = match opts.clip_x0 {
                Some(c) => clipped_posterior_mean(sched, i, x.row(b), eps.row(b), c),
                None => posterior_mean(sched, i, x.row(b), eps.row(b)),
            };
            if let Some(g) = opts.guidance.as_ref().filter(|g| g.weight != 0.0) {
                let xm = self.normalizer.denormalize(&x.row(b).to_vec());
                let grad = g.objective.gradient(&xm);
                check_dim("guidance gradient", mean.len(), grad.len())?;
                if grad.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Guidance("non-finite guidance gradient".into()));
                }
                let scale = g.weight * sigma * sigma;
                for ((m, d), s) in mean.iter_mut().zip(&grad).zip(&self.normalizer.std) {
                    *m += scale * d * s;
                }
            }
            for ((o, m), zz) in row.iter_mut().zip(mean).zip(z.row(b)) {
                *o = m + sigma * zz;
            }
        }
        Ok(out)
    }

    /// Runs `count` independent reverse chains and returns denormalized
    /// samples. Chain `c` draws its initial noise and per-step `z` from
    /// `stream(seed, c)`, so a chain's result does not depend on `count`.
    pub fn sample_batch(
        &self,
        emb: &CondEmbedding,
        count: usize,
        seed: u64,
        opts: &SampleOptions,
    ) -> Result<Vec<Vec<f64>>> {
        if count == 0 {
            return Err(Error::usage("sample count must be >= 1"));
        }
        let d = self.spec.data_dim;
        let mut rngs: Vec<Rng> = (0..count as u64).map(|c| rng::stream(seed, c)).collect();
        let mut x = Array2::zeros((count, d));
        for (mut row, r) in x.axis_iter_mut(Axis(0)).zip(&mut rngs) {
            row.iter_mut().for_each(|v| *v = rng::normal(r));
        }
        for i in (1..=self.schedule.steps).rev() {
            let eps = self.eps_for(x.view(), i, emb, opts)?;
            let mut z = Array2::zeros((count, d));
            if i > 1 {
                for (mut row, r) in z.axis_iter_mut(Axis(0)).zip(&mut rngs) {
                    row.iter_mut().for_each(|v| *v = rng::normal(r));
                }
            }
            x = self.reverse_rows(x.view(), i, eps.view(), z.view(), opts)?;
        }
        Ok(x.outer_iter().map(|r| self.normalizer.denormalize(&r.to_vec())).collect())
    }

    /// Footstep plans for one decision; see [`sample_batch`](Self::sample_batch).
    pub fn sample_plans(&self, cond: &[f64], count: usize, seed: u64, opts: &SampleOptions) -> Result<Vec<Plan>> {
        check_dim("plan denoiser", Plan::DIM, self.spec.data_dim)?;
        let emb = self.embed(Some(cond))?;
        self.sample_batch(&emb, count, seed, opts)?.into_iter().map(|v| Plan::from_slice(&v)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ddpm::{DenoiserSpec, Normalizer};
    use crate::nn::NetworkParams;
    use crate::rng::seeded;

    fn zero_denoiser(dim: usize) -> Denoiser {
        let spec = DenoiserSpec::unconditional(dim, vec![4], 20);
        let mut d = Denoiser::new(spec, Normalizer::identity(dim), &mut seeded(0)).unwrap();
        d.eps_net = NetworkParams::zeros(&d.eps_net.layer_dims()).unwrap();
        d
    }

    #[test]
    fn zero_eps_no_noise_divides_by_sqrt_alpha() {
        let d = zero_denoiser(3);
        let emb = d.embed(None).unwrap();
        let x = NoisySample { values: vec![1.0, -2.0, 0.5], step: 7 };
        let y = d.denoise_step(&x, &emb, &[0.0; 3]).unwrap();
        let a = d.schedule.alphas[7].sqrt();
        assert_eq!(y.step, 6);
        for (o, i) in y.values.iter().zip(&x.values) {
            assert!((o - i / a).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_input_gives_sigma_z() {
        let d = zero_denoiser(2);
        let emb = d.embed(None).unwrap();
        let x = NoisySample { values: vec![0.0, 0.0], step: 5 };
        let y = d.denoise_step(&x, &emb, &[0.3, -1.2]).unwrap();
        let s = d.schedule.sigmas[5];
        assert_eq!(y.values, vec![s * 0.3, s * -1.2]);
    }

    #[test]
    fn step_zero_and_noisy_final_step_rejected() {
        let d = zero_denoiser(2);
        let emb = d.embed(None).unwrap();
        let x0 = NoisySample { values: vec![0.0, 0.0], step: 0 };
        assert!(matches!(d.denoise_step(&x0, &emb, &[0.0; 2]), Err(Error::Usage(_))));
        let x1 = NoisySample { values: vec![0.0, 0.0], step: 1 };
        assert!(matches!(d.denoise_step(&x1, &emb, &[1.0, 0.0]), Err(Error::Usage(_))));
    }

    #[test]
    fn linear_guidance_shifts_mean_by_w_sigma_sq_g() {
        let d = zero_denoiser(3);
        let emb = d.embed(None).unwrap();
        let g = vec![1.0, -0.5, 2.0];
        let spec = GuidanceSpec::new(Arc::new(LinearObjective(g.clone())), 0.7).unwrap();
        let opts = SampleOptions { guidance: Some(spec), ..Default::default() };
        let x = NoisySample { values: vec![0.2, 0.1, -0.3], step: 9 };
        let plain = d.denoise_step(&x, &emb, &[0.0; 3]).unwrap();
        let guided = d.guided_denoise_step(&x, &emb, &[0.0; 3], &opts).unwrap();
        let s2 = d.schedule.sigmas[9].powi(2);
        for ((gv, pv), gk) in guided.values.iter().zip(&plain.values).zip(&g) {
            assert!((gv - pv - 0.7 * s2 * gk).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_weight_guidance_bit_matches() {
        let spec = DenoiserSpec::unconditional(2, vec![8], 20);
        let d = Denoiser::new(spec, Normalizer::identity(2), &mut seeded(3)).unwrap();
        let emb = d.embed(None).unwrap();
        let g = GuidanceSpec::new(Arc::new(LinearObjective(vec![5.0, 5.0])), 0.0).unwrap();
        let opts = SampleOptions { guidance: Some(g), ..Default::default() };
        let a = d.sample_batch(&emb, 5, 11, &SampleOptions::default()).unwrap();
        let b = d.sample_batch(&emb, 5, 11, &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn negative_weight_rejected() {
        assert!(GuidanceSpec::new(Arc::new(LinearObjective(vec![1.0])), -0.1).is_err());
    }

    #[test]
    fn nan_gradient_is_guidance_error() {
        struct Bad;
        impl GuidanceObjective for Bad {
            fn value(&self, _: &[f64]) -> f64 {
                f64::NAN
            }
        }
        let d = zero_denoiser(2);
        let emb = d.embed(None).unwrap();
        let opts = SampleOptions { guidance: Some(GuidanceSpec::new(Arc::new(Bad), 1.0).unwrap()), ..Default::default() };
        let x = NoisySample { values: vec![0.0, 0.0], step: 4 };
        assert!(matches!(d.guided_denoise_step(&x, &emb, &[0.0; 2], &opts), Err(Error::Guidance(_))));
    }

    #[test]
    fn loose_clamp_matches_exact_mean() {
        let m = Denoiser::new(DenoiserSpec::unconditional(3, vec![8], 20), Normalizer::identity(3), &mut seeded(2)).unwrap();
        let emb = m.embed(None).unwrap();
        let noisy = NoisySample { values: vec![0.3, -1.2, 0.8], step: 7 };
        let z = [0.0; 3];
        let exact = m.denoise_step(&noisy, &emb, &z).unwrap();
        let loose = SampleOptions { clip_x0: Some(1e9), ..Default::default() };
        let clamped = m.guided_denoise_step(&noisy, &emb, &z, &loose).unwrap();
        for (a, b) in exact.values.iter().zip(&clamped.values) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        let tight = SampleOptions { clip_x0: Some(1e-6), ..Default::default() };
        let t = m.guided_denoise_step(&NoisySample { values: vec![0.0; 3], step: 1 }, &emb, &z, &tight).unwrap();
        assert!(t.values.iter().all(|v| v.abs() <= 1e-6 + 1e-12));
    }

    #[test]
    fn cfg_combine_cases() {
        let c = [1.0, 0.0, 0.0];
        let u = [0.0, 0.0, 0.0];
        assert_eq!(cfg_combine(&c, &u, 2.0).unwrap(), vec![2.0, 0.0, 0.0]);
        assert_eq!(cfg_combine(&c, &u, 1.0).unwrap(), c.to_vec());
        assert_eq!(cfg_combine(&c, &[0.5, 0.5, 0.5], 0.0).unwrap(), vec![0.5; 3]);
        assert!(cfg_combine(&c, &u[..2], 1.0).is_err());
    }

    #[test]
    fn single_chain_equals_manual_reverse_pass() {
        let spec = DenoiserSpec::unconditional(3, vec![8], 20);
        let d = Denoiser::new(spec, Normalizer::identity(3), &mut seeded(5)).unwrap();
        let emb = d.embed(None).unwrap();
        let batch = d.sample_batch(&emb, 1, 42, &SampleOptions::default()).unwrap();
        let mut r = rng::stream(42, 0);
        let mut x = NoisySample { values: rng::normals(&mut r, 3), step: 20 };
        while x.step > 0 {
            let z = if x.step > 1 { rng::normals(&mut r, 3) } else { vec![0.0; 3] };
            x = d.denoise_step(&x, &emb, &z).unwrap();
        }
        assert_eq!(batch[0], x.values);
    }

    #[test]
    fn chains_do_not_depend_on_count() {
        let spec = DenoiserSpec::unconditional(2, vec![8], 20);
        let d = Denoiser::new(spec, Normalizer::identity(2), &mut seeded(6)).unwrap();
        let emb = d.embed(None).unwrap();
        let a = d.sample_batch(&emb, 3, 9, &SampleOptions::default()).unwrap();
        let b = d.sample_batch(&emb, 7, 9, &SampleOptions::default()).unwrap();
        for k in 0..3 {
            for (x, y) in a[k].iter().zip(&b[k]) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
