use crate::error::{Error, Result};

/// Base of the geometric frequency ladder used by [`time_embed`].
pub const TIME_EMBED_BASE: f64 = 10_000.0;

/// Sinusoidal embedding of a diffusion step index.
///
/// With `half = dim / 2`, component `k < half` is `sin(i * f_k)` and component
/// `half + k` is `cos(i * f_k)`, where `f_k = BASE^(-k / half)`.
pub fn time_embed(step: usize, dim: usize) -> Result<Vec<f64>> {
    if dim == 0 || !dim.is_multiple_of(2) {
        return Err(Error::usage(format!("time embedding dim must be even and positive, got {dim}")));
    }
    let half = dim / 2;
    let t = step as f64;
    let freqs = (0..half).map(|k| TIME_EMBED_BASE.powf(-(k as f64) / half as f64));
    let (sin, cos): (Vec<f64>, Vec<f64>) = freqs.map(|f| ((t * f).sin(), (t * f).cos())).unzip();
    Ok(sin.into_iter().chain(cos).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_zero_is_sin_zero_cos_one() {
        let e = time_embed(0, 8).unwrap();
        assert_eq!(&e[..4], &[0.0; 4]);
        assert_eq!(&e[4..], &[1.0; 4]);
    }

    #[test]
    fn neighbouring_steps_differ() {
        let a = time_embed(3, 8).unwrap();
        let b = time_embed(4, 8).unwrap();
        let d: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum();
        assert!(d > 0.0);
    }

    #[test]
    fn step_five_dim_eight_direct_evaluation() {
        let e = time_embed(5, 8).unwrap();
        let freqs = [1.0_f64, 0.1, 0.01, 0.001];
        for (k, f) in freqs.iter().enumerate() {
            assert!((e[k] - (5.0 * f).sin()).abs() < 1e-12);
            assert!((e[4 + k] - (5.0 * f).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn odd_dim_rejected() {
        assert!(matches!(time_embed(1, 7), Err(Error::Usage(_))));
    }

    #[test]
    fn injective_and_bounded_over_steps() {
        let embs: Vec<Vec<f64>> = (0..=50).map(|i| time_embed(i, 4).unwrap()).collect();
        for (i, a) in embs.iter().enumerate() {
            assert!(a.iter().all(|v| v.abs() <= 1.0));
            for b in &embs[i + 1..] {
                assert!(a.iter().zip(b).any(|(x, y)| x != y));
            }
        }
    }
}
