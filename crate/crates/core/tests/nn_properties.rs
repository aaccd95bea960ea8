//! Property tests for the network substrate, the noise schedule and the
//! sampler.

use ndarray::Array2;
use proptest::prelude::*;
use viaplan::ddpm::{Denoiser, DenoiserSpec, NoiseSchedule, NoisySample, Normalizer, SampleOptions};
use viaplan::nn::{checkpoint, AdamConfig, AdamState, NetworkParams};
use viaplan::rng::{self, seeded};

fn dims_strategy() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..7, 2..5)
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn gradients_match_central_differences(dims in dims_strategy(), seed in any::<u64>()) {
        let mut r = seeded(seed);
        let net = NetworkParams::new(&dims, &mut r).unwrap();
        let x: Vec<f64> = (0..dims[0]).map(|_| rng::uniform(&mut r, -1.5, 1.5)).collect();
        let up: Vec<f64> = (0..*dims.last().unwrap()).map(|_| rng::normal(&mut r)).collect();
        let objective = |n: &NetworkParams, x: &[f64]| -> f64 {
            n.forward(x).unwrap().iter().zip(&up).map(|(o, u)| o * u).sum()
        };
        let (g, gx) = net.backward(&x, &up).unwrap();
        let h = 1e-4;
        let tol = |fd: f64, an: f64| rel_err(fd, an) < 1e-4 || (fd - an).abs() < 1e-8;
        for li in 0..net.layers().len() {
            for k in net.layers()[li].weights.indexed_iter().map(|(k, _)| k) {
                let mut p = net.clone();
                let mut m = net.clone();
                p.layers_mut()[li].weights[k] += h;
                m.layers_mut()[li].weights[k] -= h;
                let fd = (objective(&p, &x) - objective(&m, &x)) / (2.0 * h);
                let an = g.layers()[li].weights[k];
                prop_assert!(tol(fd, an), "layer {li} weight {k:?}: fd {fd} vs {an}");
            }
            for k in 0..net.layers()[li].bias.len() {
                let mut p = net.clone();
                let mut m = net.clone();
                p.layers_mut()[li].bias[k] += h;
                m.layers_mut()[li].bias[k] -= h;
                let fd = (objective(&p, &x) - objective(&m, &x)) / (2.0 * h);
                prop_assert!(tol(fd, g.layers()[li].bias[k]), "layer {li} bias {k}");
            }
        }
        for k in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            let fd = (objective(&net, &xp) - objective(&net, &xm)) / (2.0 * h);
            prop_assert!(tol(fd, gx[k]), "input {k}");
        }
    }

    #[test]
    fn checkpoint_round_trip_preserves_outputs(dims in dims_strategy(), seed in any::<u64>()) {
        let mut r = seeded(seed);
        let mut net = NetworkParams::new(&dims, &mut r).unwrap();
        net.quantize_f32();
        let back = checkpoint::decode(&checkpoint::encode(&net)).unwrap();
        let x: Vec<f64> = (0..dims[0]).map(|_| rng::normal(&mut r)).collect();
        let a = net.forward(&x).unwrap();
        let b = back.forward(&x).unwrap();
        prop_assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn identical_seeds_give_identical_training_traces(seed in any::<u64>()) {
        let run = || {
            let mut r = seeded(seed);
            let mut net = NetworkParams::new(&[3, 5, 2], &mut r).unwrap();
            let mut opt = AdamState::new(&net, AdamConfig::with_lr(1e-2)).unwrap();
            for _ in 0..5 {
                let x = Array2::from_shape_fn((4, 3), |_| rng::normal(&mut r));
                let t = net.forward_trace(x.view()).unwrap();
                let up = t.output().clone();
                let (g, _) = net.backward_batch(&t, up.view()).unwrap();
                opt.step(&mut net, &g).unwrap();
            }
            net
        };
        prop_assert_eq!(run(), run());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn schedule_telescopes(steps in 1usize..200) {
        let s = NoiseSchedule::cosine(steps).unwrap();
        for i in 1..=steps {
            prop_assert_eq!(s.alpha_bars[i], s.alpha_bars[i - 1] * s.alphas[i]);
        }
    }

    #[test]
    fn zero_weight_guidance_matches_plain_step(seed in any::<u64>(), step in 2usize..=20) {
        let mut r = seeded(seed);
        let spec = DenoiserSpec::unconditional(3, vec![6], 20);
        let d = Denoiser::new(spec, Normalizer::identity(3), &mut r).unwrap();
        let emb = d.embed(None).unwrap();
        let noisy = NoisySample { values: rng::normals(&mut r, 3), step };
        let z = rng::normals(&mut r, 3);
        let plain = d.denoise_step(&noisy, &emb, &z).unwrap();
        let objective = std::sync::Arc::new(viaplan::ddpm::LinearObjective(vec![1.0, -2.0, 0.5]));
        let opts = SampleOptions {
            guidance: Some(viaplan::ddpm::GuidanceSpec::new(objective, 0.0).unwrap()),
            ..Default::default()
        };
        let guided = d.guided_denoise_step(&noisy, &emb, &z, &opts).unwrap();
        prop_assert_eq!(plain, guided);
    }

    #[test]
    fn sampler_is_deterministic_per_seed(seed in any::<u64>()) {
        let spec = DenoiserSpec::unconditional(2, vec![5], 10);
        let d = Denoiser::new(spec, Normalizer::identity(2), &mut seeded(3)).unwrap();
        let emb = d.embed(None).unwrap();
        let a = d.sample_batch(&emb, 4, seed, &SampleOptions::default()).unwrap();
        let b = d.sample_batch(&emb, 4, seed, &SampleOptions::default()).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn full_noise_level_decorrelates_data() {
    let s = NoiseSchedule::cosine(20).unwrap();
    let mut r = seeded(11);
    let n = 20_000;
    let x0: Vec<f64> = (0..n).map(|_| rng::normal(&mut r)).collect();
    let xn: Vec<f64> = x0.iter().map(|&x| s.corrupt(&[x], 20, &[rng::normal(&mut r)]).unwrap()[0]).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (m0, mn) = (mean(&x0), mean(&xn));
    let cov: f64 = x0.iter().zip(&xn).map(|(a, b)| (a - m0) * (b - mn)).sum::<f64>();
    let v0: f64 = x0.iter().map(|a| (a - m0).powi(2)).sum();
    let vn: f64 = xn.iter().map(|b| (b - mn).powi(2)).sum();
    assert!((cov / (v0 * vn).sqrt()).abs() < 0.1);
}

#[test]
fn stepwise_corruption_matches_closed_form_moments() {
    // x0 fixed; iterate x_i = sqrt(alpha_i) x_{i-1} + sqrt(beta_i) z and
    // compare the Monte Carlo mean/variance against sqrt(abar) x0, 1 - abar.
    let s = NoiseSchedule::cosine(20).unwrap();
    let (x0, i, n) = (0.8, 7usize, 40_000);
    let mut r = seeded(5);
    let samples: Vec<f64> = (0..n)
        .map(|_| (1..=i).fold(x0, |x, k| s.alphas[k].sqrt() * x + s.betas[k].sqrt() * rng::normal(&mut r)))
        .collect();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let (m_ref, v_ref) = (s.alpha_bars[i].sqrt() * x0, 1.0 - s.alpha_bars[i]);
    let se_mean = (v_ref / n as f64).sqrt();
    let se_var = v_ref * (2.0 / (n - 1) as f64).sqrt();
    assert!((mean - m_ref).abs() < 3.0 * se_mean, "mean {mean} vs {m_ref}");
    assert!((var - v_ref).abs() < 3.0 * se_var, "var {var} vs {v_ref}");
}
