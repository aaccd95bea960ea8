//! Denoiser checkpoints: `<stem>.vpnn` (ε-network), `<stem>.cond.vpnn`
//! (conditioning encoder, conditional models only) and a `<stem>.json`
//! sidecar holding the architecture, schedule parameters and normalization.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::checkpoint as vpnn;

use super::model::{Denoiser, DenoiserSpec, Normalizer};
use super::schedule::NoiseSchedule;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Sidecar {
    spec: DenoiserSpec,
    steps: usize,
    offset: f64,
    clip: f64,
    normalizer: Normalizer,
}

fn with_suffix(stem: &Path, suffix: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Writes the three checkpoint files next to `stem`. Weights are stored as
/// `f32`; call [`Denoiser::quantize_f32`] first if the in-memory model must
/// equal the reloaded one.
pub fn save(model: &Denoiser, stem: impl AsRef<Path>) -> Result<()> {
    let stem = stem.as_ref();
    let side = Sidecar {
        spec: model.spec.clone(),
        steps: model.schedule.steps,
        offset: model.schedule.offset,
        clip: model.schedule.clip,
        normalizer: model.normalizer.clone(),
    };
    let json = serde_json::to_string_pretty(&side).map_err(|e| Error::format(e.to_string()))?;
    fs::write(with_suffix(stem, ".json"), json)?;
    vpnn::save(&model.eps_net, with_suffix(stem, ".vpnn"))?;
    if let Some(c) = &model.cond_net {
        vpnn::save(c, with_suffix(stem, ".cond.vpnn"))?;
    }
    Ok(())
}

pub fn load(stem: impl AsRef<Path>) -> Result<Denoiser> {
    let stem = stem.as_ref();
    let text = fs::read_to_string(with_suffix(stem, ".json"))?;
    let side: Sidecar = serde_json::from_str(&text).map_err(|e| Error::format(format!("denoiser sidecar: {e}")))?;
    let schedule = NoiseSchedule::cosine_with(side.steps, side.offset, side.clip)?;
    let eps_net = vpnn::load(with_suffix(stem, ".vpnn"))?;
    let cond_net = if side.spec.cond_dim > 0 { Some(vpnn::load(with_suffix(stem, ".cond.vpnn"))?) } else { None };
    Denoiser::from_parts(side.spec, schedule, side.normalizer, cond_net, eps_net)
        .map_err(|e| Error::format(format!("denoiser checkpoint inconsistent: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn conditional_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let spec = DenoiserSpec { cond_dim: 6, cond_embed_dim: 4, cond_hidden: vec![5], ..DenoiserSpec::unconditional(3, vec![8], 12) };
        let norm = Normalizer { mean: vec![0.1, 0.2, 0.3], std: vec![1.5, 0.5, 2.0] };
        let mut m = Denoiser::new(spec, norm, &mut seeded(2)).unwrap();
        m.quantize_f32();
        let stem = dir.path().join("den");
        save(&m, &stem).unwrap();
        let back = load(&stem).unwrap();
        assert_eq!(back.spec, m.spec);
        assert_eq!(back.schedule, m.schedule);
        assert_eq!(back.normalizer, m.normalizer);
        assert_eq!(back.eps_net, m.eps_net);
        assert_eq!(back.cond_net, m.cond_net);
    }

    #[test]
    fn garbled_sidecar_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("x");
        fs::write(with_suffix(&stem, ".json"), "{not json").unwrap();
        assert!(matches!(load(&stem), Err(Error::Format(_))));
    }
}
