//! Experiment orchestration behind the `viaplan` CLI: configuration,
//! artifact pipeline with on-disk caching, paired evaluations, sample-count
//! sweeps, the inference-cost benchmark and CSV metrics.

mod artifacts;
mod bench;
mod config;
mod eval;
mod report;

pub use artifacts::{
    build_dataset, collect_config, ensure_artifacts, hardest_level, online_scenarios, task_levels, train_diffusion,
    train_vf_offline, train_vf_online, ArtifactPaths, Artifacts, Profile, TASKS,
};
pub use bench::{benchmark_inference, BenchRow, BENCH_SAMPLES};
pub use config::RunConfig;
pub use eval::{
    arm_setup, compose_eval, evaluate_arm, evaluate_with, mean_std, run_episode, run_eval, sample_sweep,
    scenario_tasks, Arm, EpisodeRow, EvalConfig, ProceduralWalker, SettingRow, SWEEP_SAMPLES,
};
pub use report::{emit_csv, write_csv, write_csv_to};

use crate::error::{Error, Result};

/// Progress sink for long-running stages.
pub type Progress<'a> = &'a (dyn Fn(&str) + Sync);

/// Discards progress messages.
pub fn quiet(_: &str) {}

pub const THREADS_ENV: &str = "VIAPLAN_THREADS";

/// Runs `f` inside a thread pool capped by `VIAPLAN_THREADS` (all cores when
/// unset). With one thread every result is bit-reproducible; results are
/// independent of the thread count anyway because each work item owns its
/// random stream.
pub fn with_thread_cap<R: Send>(f: impl FnOnce() -> R + Send) -> Result<R> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::usage(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?,
        Err(_) => 0,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Experiment(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}
