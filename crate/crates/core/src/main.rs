//! `viaplan` command-line interface.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use viaplan::footworld::{ScenarioSpec, TaskKind};
use viaplan::harness::{
    self, benchmark_inference, compose_eval, emit_csv, ensure_artifacts, hardest_level, run_eval, sample_sweep,
    task_levels, with_thread_cap, write_csv, ArtifactPaths, Arm, Artifacts, EvalConfig, Profile, RunConfig, TASKS,
};
use viaplan::procgen::Dataset;
use viaplan::toy::{toy_experiment, ToyConfig};
use viaplan::vf;
use viaplan::{ddpm, Error, Result};

// Online training interleaves long-lived replay entries with large sampling
// temporaries; glibc malloc fragments badly under that pattern.
#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

#[derive(Parser)]
#[command(name = "viaplan", version, about = "Diffusion footstep planning with learned viability filters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Plain-text `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `key=value` override; repeatable, applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct ArtifactArgs {
    /// Directory holding datasets and checkpoints.
    #[arg(long, default_value = "artifacts")]
    artifacts: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Collect a labeled procedural dataset for one task.
    Procgen {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        task: TaskKind,
        #[arg(long)]
        records: Option<usize>,
    },
    /// Train the conditional plan denoiser on the successful windows of datasets.
    TrainDiffusion {
        #[command(flatten)]
        common: Common,
        #[arg(long, num_args = 1.., required = true)]
        data: Vec<PathBuf>,
    },
    /// Fit a task's viability filter to dataset returns.
    TrainVfOffline {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        task: TaskKind,
        #[arg(long)]
        data: PathBuf,
    },
    /// Train a task's viability filter online with diffusion-proposed plan sets.
    TrainVfOnline {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        task: TaskKind,
        /// Denoiser checkpoint stem.
        #[arg(long)]
        diffusion: PathBuf,
        /// Offline filter checkpoint stem to start from.
        #[arg(long)]
        init: Option<PathBuf>,
    },
    /// Build every missing artifact of a profile.
    Pipeline {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        dirs: ArtifactArgs,
    },
    /// Success table per setting and arm.
    Eval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        dirs: ArtifactArgs,
        /// Per-episode rows.
        #[arg(long)]
        episodes_out: Option<PathBuf>,
    },
    /// Success versus candidate count.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        dirs: ArtifactArgs,
    },
    /// Inference cost of guidance versus sample-and-filter.
    Bench {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        dirs: ArtifactArgs,
    },
    /// One-dimensional constraint-leakage experiment.
    Toy {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        sigma: Option<f64>,
        /// Number of generated samples.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Mixed-scenario filter composition and ablations.
    ComposeEval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        dirs: ArtifactArgs,
    },
}

fn load_config(c: &Common) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::new(),
    };
    for pair in &c.set {
        cfg.set_pair(pair)?;
    }
    Ok(cfg)
}

fn progress(msg: &str) {
    eprintln!("[viaplan] {msg}");
}

fn out_path(c: &Common, what: &str) -> Result<PathBuf> {
    c.out.clone().ok_or_else(|| Error::Usage(format!("--out is required for {what}")))
}

fn eval_config(cfg: &RunConfig) -> Result<EvalConfig> {
    let d = EvalConfig::default();
    let e = EvalConfig {
        seed: cfg.get("eval_seed", d.seed)?,
        trials: cfg.get("trials", d.trials)?,
        episodes: cfg.get("episodes", d.episodes)?,
        samples: cfg.get("samples", d.samples)?,
        guidance_weight: cfg.get("guidance_weight", d.guidance_weight)?,
        ..d
    };
    e.validate()?;
    Ok(e)
}

/// Scenario settings selected by the `task` and `levels` keys; all levels of
/// all tasks by default.
fn scenario_specs(cfg: &RunConfig, hardest_only: bool) -> Result<Vec<ScenarioSpec>> {
    let tasks: Vec<TaskKind> = match cfg.raw("task") {
        Some(t) => vec![t.parse()?],
        None => TASKS.to_vec(),
    };
    let mut specs = Vec::new();
    for kind in tasks {
        let levels = if hardest_only { vec![hardest_level(kind)] } else { task_levels(kind) };
        for level in cfg.list("levels", &levels)? {
            let s = ScenarioSpec::single(kind, level);
            s.validate()?;
            specs.push(s);
        }
    }
    Ok(specs)
}

fn load_artifacts(dirs: &ArtifactArgs) -> Result<Artifacts> {
    Artifacts::load(&ArtifactPaths::new(&dirs.artifacts))
}

const EVAL_KEYS: [&str; 8] = ["eval_seed", "trials", "episodes", "samples", "guidance_weight", "task", "levels", "arms"];

fn check_keys(cfg: &RunConfig, extra: &[&str]) -> Result<()> {
    let mut known: Vec<&str> = Profile::KEYS.to_vec();
    known.extend(EVAL_KEYS);
    known.extend(extra);
    cfg.check_known(&known)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Procgen { common, task, records } => {
            let mut cfg = load_config(&common)?;
            if let Some(n) = records {
                cfg.set("records_per_task", n);
            }
            check_keys(&cfg, &[])?;
            let profile = Profile::from_config(&cfg)?;
            let data = harness::build_dataset(task, &profile)?;
            let s = data.stats();
            progress(&format!("{} records: {} successes, {} failures", s.records, s.successes, s.failures));
            data.save(out_path(&common, "procgen")?)?;
        }
        Command::TrainDiffusion { common, data } => {
            let cfg = load_config(&common)?;
            check_keys(&cfg, &[])?;
            let profile = Profile::from_config(&cfg)?;
            let sets: Vec<Dataset> = data.iter().map(Dataset::load).collect::<Result<_>>()?;
            let (model, _) = harness::train_diffusion(&sets, &profile, &progress)?;
            ddpm::checkpoint::save(&model, out_path(&common, "train-diffusion")?)?;
        }
        Command::TrainVfOffline { common, task, data } => {
            let cfg = load_config(&common)?;
            check_keys(&cfg, &[])?;
            let profile = Profile::from_config(&cfg)?;
            let d = Dataset::load(&data)?;
            let (net, losses) = harness::train_vf_offline(task, &d, &profile)?;
            progress(&format!("epoch losses {losses:.4?}"));
            vf::save(&net, out_path(&common, "train-vf-offline")?)?;
        }
        Command::TrainVfOnline { common, task, diffusion, init } => {
            let cfg = load_config(&common)?;
            check_keys(&cfg, &[])?;
            let profile = Profile::from_config(&cfg)?;
            let model = ddpm::checkpoint::load(&diffusion)?;
            let start = match init {
                Some(p) => vf::load(p, task.schema_id())?,
                None => vf::ValueNet::for_task(task, &profile.vf_hidden, viaplan::procgen::GAMMA, &mut viaplan::rng::seeded(profile.seed))?,
            };
            let (net, logs) = with_thread_cap(|| harness::train_vf_online(task, start, &model, &profile, &progress))??;
            let surv = logs.iter().filter(|l| l.survived).count();
            progress(&format!("{} episodes, {} survived", logs.len(), surv));
            vf::save(&net, out_path(&common, "train-vf-online")?)?;
        }
        Command::Pipeline { common, dirs } => {
            let cfg = load_config(&common)?;
            check_keys(&cfg, &[])?;
            let profile = Profile::from_config(&cfg)?;
            with_thread_cap(|| ensure_artifacts(&ArtifactPaths::new(&dirs.artifacts), &profile, &progress))??;
        }
        Command::Eval { common, dirs, episodes_out } => {
            let cfg = load_config(&common)?;
            check_keys(&cfg, &[])?;
            let ec = eval_config(&cfg)?;
            let arms: Vec<Arm> = cfg.list("arms", &Arm::ALL)?;
            let specs = scenario_specs(&cfg, false)?;
            let art = load_artifacts(&dirs)?;
            let (summary, episodes) = with_thread_cap(|| run_eval(&specs, &arms, &art, &ec, &cfg.hash()))??;
            if let Some(p) = episodes_out {
                write_csv(&p, episodes)?;
            }
            emit_csv(common.out.as_deref(), summary)?;
        }
        Command::Sweep { common, dirs } => {
            let cfg = load_config(&common)?;
            check_keys(&cfg, &["counts"])?;
            let ec = eval_config(&cfg)?;
            let counts: Vec<usize> = cfg.list("counts", &harness::SWEEP_SAMPLES)?;
            let art = load_artifacts(&dirs)?;
            let mut rows = Vec::new();
            for spec in scenario_specs(&cfg, true)? {
                rows.extend(with_thread_cap(|| sample_sweep(&spec, &counts, &art, &ec, &cfg.hash()))??);
            }
            emit_csv(common.out.as_deref(), rows)?;
        }
        Command::Bench { common, dirs } => {
            let cfg = load_config(&common)?;
            check_keys(&cfg, &["iterations"])?;
            let ec = eval_config(&cfg)?;
            let art = load_artifacts(&dirs)?;
            let rows = benchmark_inference(&art, cfg.get("iterations", 20usize)?, ec.guidance_weight, ec.seed)?;
            emit_csv(common.out.as_deref(), rows)?;
        }
        Command::Toy { common, sigma, n } => {
            let mut cfg = load_config(&common)?;
            if let Some(s) = sigma {
                cfg.set("sigma", s);
            }
            if let Some(n) = n {
                cfg.set("generate", n);
            }
            cfg.check_known(&["sigma", "generate", "proposals", "iterations", "seed"])?;
            let d = ToyConfig::default();
            let tc = ToyConfig {
                sigma: cfg.get("sigma", d.sigma)?,
                generate: cfg.get("generate", d.generate)?,
                proposals: cfg.get("proposals", d.proposals)?,
                iterations: cfg.get("iterations", d.iterations)?,
                ..d
            };
            let seed = cfg.get("seed", 0u64)?;
            let report = toy_experiment(&tc, seed)?;
            write_toy_csv(common.out.as_deref(), &report, seed, &cfg.hash())?;
        }
        Command::ComposeEval { common, dirs } => {
            let cfg = load_config(&common)?;
            check_keys(&cfg, &[])?;
            let ec = eval_config(&cfg)?;
            let art = load_artifacts(&dirs)?;
            let spec = ScenarioSpec::new(viaplan::footworld::ScenarioKind::Mixed);
            let rows = with_thread_cap(|| compose_eval(&spec, &art, &ec, &cfg.hash()))??;
            #[derive(serde::Serialize)]
            struct Row {
                variant: String,
                config_hash: String,
                master_seed: u64,
                samples: usize,
                trials: usize,
                episodes: usize,
                mean_success: f64,
                std_success: f64,
            }
            emit_csv(
                common.out.as_deref(),
                rows.into_iter().map(|(variant, r)| Row {
                    variant,
                    config_hash: r.config_hash,
                    master_seed: r.master_seed,
                    samples: r.samples,
                    trials: r.trials,
                    episodes: r.episodes,
                    mean_success: r.mean_success,
                    std_success: r.std_success,
                }),
            )?;
        }
    }
    Ok(())
}

fn write_toy_csv(path: Option<&Path>, r: &viaplan::toy::ToyReport, seed: u64, hash: &str) -> Result<()> {
    #[derive(serde::Serialize)]
    struct Row<'a> {
        kind: &'a str,
        config_hash: &'a str,
        seed: u64,
        sigma: f64,
        value: f64,
        leakage: Option<f64>,
        accepted: Option<usize>,
        sample_mean: Option<f64>,
    }
    let base = |kind, value| Row { kind, config_hash: hash, seed, sigma: r.sigma, value, leakage: None, accepted: None, sample_mean: None };
    let rows = r
        .samples
        .iter()
        .map(|&x| base("sample", x))
        .chain(std::iter::once(Row {
            leakage: Some(r.leakage),
            accepted: Some(r.accepted),
            sample_mean: Some(r.sample_mean),
            ..base("summary", r.data_outside)
        }));
    emit_csv(path, rows)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
