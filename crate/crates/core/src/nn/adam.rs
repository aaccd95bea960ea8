use crate::error::{Error, Result};

use super::mlp::{Gradients, NetworkParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(learning_rate: f64) -> Self {
        Self { learning_rate, ..Self::default() }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First/second moment accumulators for one network.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    m: NetworkParams,
    v: NetworkParams,
    t: u64,
}

impl AdamState {
    pub fn new(params: &NetworkParams, config: AdamConfig) -> Result<Self> {
        if !(config.learning_rate > 0.0) {
            return Err(Error::usage("learning rate must be positive"));
        }
        Ok(Self { config, m: params.zeros_like(), v: params.zeros_like(), t: 0 })
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Bias-corrected Adam update. Rejects non-finite gradients before touching
    /// any state.
    pub fn step(&mut self, params: &mut NetworkParams, grads: &Gradients) -> Result<()> {
        if !params.same_shape(grads) || !params.same_shape(&self.m) {
            return Err(Error::usage("gradient/optimizer shapes do not match parameters"));
        }
        for (i, g) in grads.layers().iter().enumerate() {
            if !g.weights.iter().chain(g.bias.iter()).all(|v| v.is_finite()) {
                return Err(Error::Training { layer: Some(i), msg: "non-finite gradient".into() });
            }
        }
        self.t += 1;
        let AdamConfig { learning_rate: lr, beta1: b1, beta2: b2, eps } = self.config;
        let c1 = 1.0 - b1.powi(self.t as i32);
        let c2 = 1.0 - b2.powi(self.t as i32);
        let layers = params.layers_mut().iter_mut().zip(grads.layers());
        let moments = self.m.layers_mut().iter_mut().zip(self.v.layers_mut().iter_mut());
        for ((p, g), (m, v)) in layers.zip(moments) {
            let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            };
            ndarray::Zip::from(&mut p.weights)
                .and(&g.weights)
                .and(&mut m.weights)
                .and(&mut v.weights)
                .for_each(|p, &g, m, v| update(p, g, m, v));
            ndarray::Zip::from(&mut p.bias)
                .and(&g.bias)
                .and(&mut m.bias)
                .and(&mut v.bias)
                .for_each(|p, &g, m, v| update(p, g, m, v));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Layer;
    use ndarray::{array, Array1};

    fn scalar_net(w: f64) -> NetworkParams {
        NetworkParams::from_layers(vec![Layer { weights: array![[w]], bias: Array1::zeros(1) }]).unwrap()
    }

    fn scalar_grad(g: f64) -> NetworkParams {
        scalar_net(g)
    }

    #[test]
    fn zero_gradient_leaves_params_and_counts_step() {
        let mut p = scalar_net(0.7);
        let mut adam = AdamState::new(&p, AdamConfig::with_lr(0.1)).unwrap();
        adam.step(&mut p, &scalar_grad(0.0)).unwrap();
        assert_eq!(p.layers()[0].weights[[0, 0]], 0.7);
        assert_eq!(adam.steps(), 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = scalar_net(1.0);
        let mut adam = AdamState::new(&p, AdamConfig::with_lr(0.01)).unwrap();
        adam.step(&mut p, &scalar_grad(-3.0)).unwrap();
        // m_hat / sqrt(v_hat) = sign(g) on the first step
        let moved = p.layers()[0].weights[[0, 0]] - 1.0;
        assert!((moved - 0.01).abs() < 1e-9, "{moved}");
    }

    #[test]
    fn two_steps_match_scalar_reference() {
        // independent scalar recurrence
        let (lr, b1, b2, eps, g) = (0.05, 0.9, 0.999, 1e-8, 0.4);
        let (mut w, mut m, mut v) = (2.0f64, 0.0f64, 0.0f64);
        for t in 1..=2 {
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t));
            let vh = v / (1.0 - b2.powi(t));
            w -= lr * mh / (vh.sqrt() + eps);
        }
        let mut p = scalar_net(2.0);
        let mut adam = AdamState::new(&p, AdamConfig::with_lr(lr)).unwrap();
        adam.step(&mut p, &scalar_grad(g)).unwrap();
        adam.step(&mut p, &scalar_grad(g)).unwrap();
        assert!((p.layers()[0].weights[[0, 0]] - w).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradient_names_layer() {
        let mut p = NetworkParams::zeros(&[2, 2, 1]).unwrap();
        let mut g = p.zeros_like();
        g.layers_mut()[1].bias[0] = f64::NAN;
        let mut adam = AdamState::new(&p, AdamConfig::default()).unwrap();
        match adam.step(&mut p, &g) {
            Err(Error::Training { layer: Some(1), .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(adam.steps(), 0);
    }

    #[test]
    fn rejects_non_positive_learning_rate() {
        let p = scalar_net(0.0);
        assert!(AdamState::new(&p, AdamConfig::with_lr(0.0)).is_err());
    }
}
