use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::ddpm::{GuidanceSpec, SampleOptions, DEFAULT_X0_CLIP};
use crate::error::Result;
use crate::footworld::{conditioning, vf_state, ScenarioSpec, TaskKind};
use crate::planner::ObstacleGuidance;
use crate::rng;

use super::artifacts::Artifacts;
use super::eval::mean_std;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: String,
    pub samples: usize,
    pub iterations: usize,
    pub mean_seconds: f64,
    pub std_seconds: f64,
}

pub const BENCH_SAMPLES: [usize; 3] = [100, 200, 400];

/// Wall-clock cost of one planning decision on an obstacle scenario: one
/// guided sample versus sampling and scoring 100/200/400 candidates.
pub fn benchmark_inference(artifacts: &Artifacts, iterations: usize, guidance_weight: f64, seed: u64) -> Result<Vec<BenchRow>> {
    let spec = ScenarioSpec::single(TaskKind::Obstacle, 1.5);
    let sc = spec.build(&mut rng::seeded(seed))?;
    let (world, scene) = (&sc.start, &sc.scene);
    let model = &artifacts.diffusion;
    let vf = artifacts.online(TaskKind::Obstacle)?;
    let iterations = iterations.max(1);
    let mut rows = Vec::new();

    let time = |f: &mut dyn FnMut(u64) -> Result<()>| -> Result<(f64, f64)> {
        f(u64::MAX)?; // warm-up
        let mut ts = Vec::with_capacity(iterations);
        for it in 0..iterations as u64 {
            let t0 = Instant::now();
            f(it)?;
            ts.push(t0.elapsed().as_secs_f64());
        }
        Ok(mean_std(&ts))
    };

    let (m, s) = time(&mut |it| {
        let g = GuidanceSpec::new(Arc::new(ObstacleGuidance::for_world(world, scene)?), guidance_weight)?;
        let opts = SampleOptions { guidance: Some(g), clip_x0: Some(DEFAULT_X0_CLIP), ..Default::default() };
        model.sample_plans(&conditioning(world, scene), 1, seed ^ it, &opts)?;
        Ok(())
    })?;
    rows.push(BenchRow { method: "guidance".into(), samples: 1, iterations, mean_seconds: m, std_seconds: s });

    for n in BENCH_SAMPLES {
        let (m, s) = time(&mut |it| {
            let plans = model.sample_plans(&conditioning(world, scene), n, seed ^ it, &SampleOptions::clipped())?;
            let state = vf_state(world, scene, TaskKind::Obstacle)?;
            vf.eval_many(&state, &plans)?;
            Ok(())
        })?;
        rows.push(BenchRow { method: "vf".into(), samples: n, iterations, mean_seconds: m, std_seconds: s });
    }
    Ok(rows)
}
