use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::ddpm::{self, Denoiser, DenoiserSpec, DiffusionTrainer, Normalizer, SampleOptions, DEFAULT_X0_CLIP};
use crate::error::{Error, Result};
use crate::footworld::{Capability, ScenarioSpec, TaskKind, COND_DIM};
use crate::nn::AdamConfig;
use crate::planner::ScenarioEnv;
use crate::procgen::{collect_records, CollectConfig, Dataset, GAMMA};
use crate::rng;
use crate::toy::cosine_lr;
use crate::vf::{self, train_offline, train_online_with, DiffusionProposer, EpisodeLog, OnlineConfig, OfflineConfig, ValueNet};

use super::config::RunConfig;
use super::Progress;

pub const TASKS: [TaskKind; 3] = [TaskKind::Platform, TaskKind::Hurdle, TaskKind::Obstacle];

/// Evaluation levels per task: platform 0.10-0.65 m in 0.05 steps, hurdles
/// 0.25/0.30/0.35 m, obstacle radii 0.5/1.0/1.5 m.
pub fn task_levels(kind: TaskKind) -> Vec<f64> {
    match kind {
        TaskKind::Platform => (0..12).map(|i| (10 + 5 * i) as f64 / 100.0).collect(),
        TaskKind::Hurdle => vec![0.25, 0.30, 0.35],
        TaskKind::Obstacle => vec![0.5, 1.0, 1.5],
        TaskKind::Flat => vec![0.0],
    }
}

/// The hardest evaluation level of a task.
pub fn hardest_level(kind: TaskKind) -> f64 {
    *task_levels(kind).last().expect("nonempty levels")
}

/// Knobs of the data → diffusion → offline VF → online VF pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub seed: u64,
    pub records_per_task: usize,
    pub diffusion_hidden: Vec<usize>,
    pub diffusion_iterations: usize,
    pub diffusion_batch: usize,
    pub diffusion_lr: f64,
    pub vf_hidden: Vec<usize>,
    pub offline_epochs: usize,
    pub offline_batch: usize,
    pub offline_lr: f64,
    pub online_episodes: usize,
    pub online_samples: usize,
    pub online_lr: f64,
    pub online_batch: usize,
    pub online_epsilon: f64,
    pub online_grad_steps: usize,
}

impl Default for Profile {
    fn default() -> Self {
        Self::desk()
    }
}

impl Profile {
    /// Desk-scale defaults (minutes per stage on one core).
    pub fn desk() -> Self {
        Self {
            seed: 7,
            records_per_task: 50_000,
            diffusion_hidden: vec![128, 128, 128],
            diffusion_iterations: 20_000,
            diffusion_batch: 256,
            diffusion_lr: 1e-3,
            vf_hidden: vf::DEFAULT_HIDDEN.to_vec(),
            offline_epochs: 10,
            offline_batch: 512,
            offline_lr: 1e-4,
            online_episodes: 5_000,
            online_samples: 64,
            online_lr: 3e-4,
            online_batch: 256,
            online_epsilon: 0.1,
            online_grad_steps: 4,
        }
    }

    /// A seconds-scale profile for smoke tests.
    pub fn tiny() -> Self {
        Self {
            records_per_task: 600,
            diffusion_hidden: vec![32],
            diffusion_iterations: 60,
            diffusion_batch: 32,
            vf_hidden: vec![16],
            offline_epochs: 2,
            offline_batch: 64,
            online_episodes: 6,
            online_samples: 4,
            online_batch: 16,
            ..Self::desk()
        }
    }

    pub const KEYS: [&'static str; 16] = [
        "seed",
        "records_per_task",
        "diffusion_hidden",
        "diffusion_iterations",
        "diffusion_batch",
        "diffusion_lr",
        "vf_hidden",
        "offline_epochs",
        "offline_batch",
        "offline_lr",
        "online_episodes",
        "online_samples",
        "online_lr",
        "online_batch",
        "online_epsilon",
        "online_grad_steps",
    ];

    /// Desk defaults overridden by any profile keys present in `cfg`.
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        let d = Self::desk();
        let p = Self {
            seed: cfg.get("seed", d.seed)?,
            records_per_task: cfg.get("records_per_task", d.records_per_task)?,
            diffusion_hidden: cfg.list("diffusion_hidden", &d.diffusion_hidden)?,
            diffusion_iterations: cfg.get("diffusion_iterations", d.diffusion_iterations)?,
            diffusion_batch: cfg.get("diffusion_batch", d.diffusion_batch)?,
            diffusion_lr: cfg.get("diffusion_lr", d.diffusion_lr)?,
            vf_hidden: cfg.list("vf_hidden", &d.vf_hidden)?,
            offline_epochs: cfg.get("offline_epochs", d.offline_epochs)?,
            offline_batch: cfg.get("offline_batch", d.offline_batch)?,
            offline_lr: cfg.get("offline_lr", d.offline_lr)?,
            online_episodes: cfg.get("online_episodes", d.online_episodes)?,
            online_samples: cfg.get("online_samples", d.online_samples)?,
            online_lr: cfg.get("online_lr", d.online_lr)?,
            online_batch: cfg.get("online_batch", d.online_batch)?,
            online_epsilon: cfg.get("online_epsilon", d.online_epsilon)?,
            online_grad_steps: cfg.get("online_grad_steps", d.online_grad_steps)?,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn to_config(&self) -> RunConfig {
        let list = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        RunConfig::new()
            .with("seed", self.seed)
            .with("records_per_task", self.records_per_task)
            .with("diffusion_hidden", list(&self.diffusion_hidden))
            .with("diffusion_iterations", self.diffusion_iterations)
            .with("diffusion_batch", self.diffusion_batch)
            .with("diffusion_lr", self.diffusion_lr)
            .with("vf_hidden", list(&self.vf_hidden))
            .with("offline_epochs", self.offline_epochs)
            .with("offline_batch", self.offline_batch)
            .with("offline_lr", self.offline_lr)
            .with("online_episodes", self.online_episodes)
            .with("online_samples", self.online_samples)
            .with("online_lr", self.online_lr)
            .with("online_batch", self.online_batch)
            .with("online_epsilon", self.online_epsilon)
            .with("online_grad_steps", self.online_grad_steps)
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            self.records_per_task,
            self.diffusion_iterations,
            self.diffusion_batch,
            self.offline_batch,
            self.online_samples,
            self.online_batch,
        ];
        if counts.contains(&0) {
            return Err(Error::usage("profile sizes must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.online_epsilon) {
            return Err(Error::usage("online epsilon must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Stable identifier of the profile (cache key).
    pub fn hash(&self) -> String {
        self.to_config().hash()
    }

    pub fn online_config(&self) -> OnlineConfig {
        OnlineConfig {
            episodes: self.online_episodes,
            samples: self.online_samples,
            learning_rate: self.online_lr,
            epsilon: self.online_epsilon,
            batch: self.online_batch,
            grad_steps_per_episode: self.online_grad_steps,
            ..OnlineConfig::default()
        }
    }

    pub fn offline_config(&self) -> OfflineConfig {
        OfflineConfig { batch: self.offline_batch, learning_rate: self.offline_lr, epochs: self.offline_epochs, dataset_gamma: GAMMA }
    }
}

/// File layout of an artifact directory.
#[derive(Debug, Clone)]
pub struct ArtifactPaths {
    pub dir: PathBuf,
}

impl ArtifactPaths {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dataset(&self, kind: TaskKind) -> PathBuf {
        self.dir.join(format!("dataset_{kind}.vpds"))
    }

    pub fn diffusion(&self) -> PathBuf {
        self.dir.join("diffusion")
    }

    pub fn vf_offline(&self, kind: TaskKind) -> PathBuf {
        self.dir.join(format!("vf_offline_{kind}"))
    }

    pub fn vf_online(&self, kind: TaskKind) -> PathBuf {
        self.dir.join(format!("vf_online_{kind}"))
    }

    pub fn online_log(&self, kind: TaskKind) -> PathBuf {
        self.dir.join(format!("vf_online_{kind}.log.csv"))
    }

    pub fn profile(&self) -> PathBuf {
        self.dir.join("profile.cfg")
    }
}

fn exists_stem(stem: &Path) -> bool {
    let mut s = stem.as_os_str().to_owned();
    s.push(".json");
    Path::new(&s).exists()
}

fn require(stem: &Path) -> Result<()> {
    if exists_stem(stem) {
        Ok(())
    } else {
        Err(Error::usage(format!("missing artifact: {}", stem.display())))
    }
}

/// Trained models needed by the evaluation commands.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub diffusion: Denoiser,
    pub offline: BTreeMap<TaskKind, ValueNet>,
    pub online: BTreeMap<TaskKind, ValueNet>,
}

impl Artifacts {
    /// Loads every model; a missing file is a usage error naming the path.
    pub fn load(paths: &ArtifactPaths) -> Result<Self> {
        require(&paths.diffusion())?;
        let diffusion = ddpm::checkpoint::load(paths.diffusion())?;
        let mut offline = BTreeMap::new();
        let mut online = BTreeMap::new();
        for kind in TASKS {
            require(&paths.vf_offline(kind))?;
            require(&paths.vf_online(kind))?;
            offline.insert(kind, vf::load(paths.vf_offline(kind), kind.schema_id())?);
            online.insert(kind, vf::load(paths.vf_online(kind), kind.schema_id())?);
        }
        Ok(Self { diffusion, offline, online })
    }

    pub fn offline(&self, kind: TaskKind) -> Result<&ValueNet> {
        self.offline.get(&kind).ok_or_else(|| Error::usage(format!("no offline filter for {kind}")))
    }

    pub fn online(&self, kind: TaskKind) -> Result<&ValueNet> {
        self.online.get(&kind).ok_or_else(|| Error::usage(format!("no online filter for {kind}")))
    }
}

pub fn collect_config(kind: TaskKind) -> CollectConfig {
    CollectConfig::new(kind)
}

/// Procedural dataset of one task.
pub fn build_dataset(kind: TaskKind, profile: &Profile) -> Result<Dataset> {
    collect_records(&collect_config(kind), profile.records_per_task, rng::fork_seed(&mut rng::stream(profile.seed, 10 + kind.schema_id() as u64)))
}

/// Trains the conditional plan denoiser on the successful windows of all
/// datasets.
pub fn train_diffusion(datasets: &[Dataset], profile: &Profile, progress: Progress) -> Result<(Denoiser, Vec<f64>)> {
    let ok: Vec<_> = datasets.iter().flat_map(|d| d.records.iter()).filter(|r| r.success).collect();
    if ok.is_empty() {
        return Err(Error::Dataset("no successful windows to train the planner on".into()));
    }
    let plans: Vec<Vec<f64>> = ok.iter().map(|r| r.plan_f64()).collect();
    let conds: Vec<Vec<f64>> = ok.iter().map(|r| r.cond_f64()).collect();
    let norm = Normalizer::fit(&plans)?;
    let plans: Vec<Vec<f64>> = plans.iter().map(|p| norm.normalize(p)).collect();
    let spec = DenoiserSpec { hidden: profile.diffusion_hidden.clone(), ..DenoiserSpec::planner(COND_DIM) };
    let mut rng = rng::stream(profile.seed, 20);
    let model = Denoiser::new(spec, norm, &mut rng)?;
    let mut trainer = DiffusionTrainer::new(model, AdamConfig::with_lr(profile.diffusion_lr), false)?;
    let b = profile.diffusion_batch;
    let mut x = Array2::zeros((b, 12));
    let mut c = Array2::zeros((b, COND_DIM));
    let mut losses = Vec::new();
    let mut window = 0.0;
    for it in 0..profile.diffusion_iterations {
        trainer.set_learning_rate(cosine_lr(profile.diffusion_lr, it, profile.diffusion_iterations))?;
        for r in 0..b {
            let k = rng::index(&mut rng, plans.len());
            x.row_mut(r).assign(&ndarray::aview1(&plans[k]));
            c.row_mut(r).assign(&ndarray::aview1(&conds[k]));
        }
        window += trainer.step(x.view(), Some(c.view()), &mut rng)?;
        if (it + 1) % 500 == 0 || it + 1 == profile.diffusion_iterations {
            let n = (it % 500 + 1) as f64;
            losses.push(window / n);
            progress(&format!("diffusion iter {} loss {:.4}", it + 1, window / n));
            window = 0.0;
        }
    }
    Ok((trainer.into_model(), losses))
}

pub fn train_vf_offline(kind: TaskKind, data: &Dataset, profile: &Profile) -> Result<(ValueNet, Vec<f64>)> {
    let mut rng = rng::stream(profile.seed, 30 + kind.schema_id() as u64);
    let mut net = ValueNet::for_task(kind, &profile.vf_hidden, GAMMA, &mut rng)?;
    let losses = train_offline(&mut net, data, &profile.offline_config(), &mut rng)?;
    Ok((net, losses))
}

/// Training scenarios of a task's online filter: every evaluation level.
pub fn online_scenarios(kind: TaskKind) -> Vec<ScenarioSpec> {
    task_levels(kind).into_iter().map(|l| ScenarioSpec::single(kind, l)).collect()
}

/// Online filter training bootstrapped from the offline filter.
pub fn train_vf_online(
    kind: TaskKind,
    init: ValueNet,
    diffusion: &Denoiser,
    profile: &Profile,
    progress: Progress,
) -> Result<(ValueNet, Vec<EpisodeLog>)> {
    let mut env = ScenarioEnv::new(online_scenarios(kind), kind, Capability::default())?;
    let proposer = DiffusionProposer {
        model: diffusion,
        options: SampleOptions { clip_x0: Some(DEFAULT_X0_CLIP), ..Default::default() },
    };
    let seed = rng::fork_seed(&mut rng::stream(profile.seed, 40 + kind.schema_id() as u64));
    let mut recent = std::collections::VecDeque::new();
    let mut report = |l: &EpisodeLog| {
        recent.push_back(l.survived);
        if recent.len() > 250 {
            recent.pop_front();
        }
        if (l.episode + 1).is_multiple_of(250) {
            let surv = recent.iter().filter(|&&s| s).count() as f64 / recent.len() as f64;
            progress(&format!("online {kind} episode {} survival(250) {surv:.3} td {:?}", l.episode + 1, l.td_loss));
        }
    };
    train_online_with(init, &mut env, &proposer, &profile.online_config(), seed, &mut report)
}

#[derive(Debug, Serialize)]
struct OnlineLogRow {
    episode: usize,
    steps: usize,
    survived: bool,
    td_loss: Option<f64>,
    success_buffer: usize,
    failure_buffer: usize,
}

fn write_online_log(path: &Path, logs: &[EpisodeLog]) -> Result<()> {
    let rows = logs.iter().map(|l| OnlineLogRow {
        episode: l.episode,
        steps: l.steps,
        survived: l.survived,
        td_loss: l.td_loss,
        success_buffer: l.success_buffer,
        failure_buffer: l.failure_buffer,
    });
    super::report::write_csv(path, rows)
}

/// Builds (or reuses) every artifact in `paths.dir`. Existing files are
/// reused only if the directory was produced by the same profile.
pub fn ensure_artifacts(paths: &ArtifactPaths, profile: &Profile, progress: Progress) -> Result<Artifacts> {
    profile.validate()?;
    std::fs::create_dir_all(&paths.dir)?;
    let stamp = profile.to_config().to_text();
    match std::fs::read_to_string(paths.profile()) {
        Ok(s) if s == stamp => {}
        Ok(_) => {
            return Err(Error::usage(format!(
                "artifact directory {} was built with a different profile",
                paths.dir.display()
            )))
        }
        Err(_) => std::fs::write(paths.profile(), &stamp)?,
    }

    let mut datasets = Vec::new();
    for kind in TASKS {
        let p = paths.dataset(kind);
        let d = if p.exists() {
            Dataset::load(&p)?
        } else {
            progress(&format!("collecting {kind} dataset"));
            let d = build_dataset(kind, profile)?;
            d.save(&p)?;
            d
        };
        let s = d.stats();
        progress(&format!("{kind} dataset: {} records, {} successes, {} failures", d.records.len(), s.successes, s.failures));
        datasets.push(d);
    }

    let diffusion = if exists_stem(&paths.diffusion()) {
        ddpm::checkpoint::load(paths.diffusion())?
    } else {
        progress("training diffusion planner");
        let (m, _) = train_diffusion(&datasets, profile, progress)?;
        ddpm::checkpoint::save(&m, paths.diffusion())?;
        m
    };

    let mut offline = BTreeMap::new();
    let mut online = BTreeMap::new();
    for (kind, data) in TASKS.into_iter().zip(&datasets) {
        let off = if exists_stem(&paths.vf_offline(kind)) {
            vf::load(paths.vf_offline(kind), kind.schema_id())?
        } else {
            progress(&format!("training offline {kind} filter"));
            let (net, losses) = train_vf_offline(kind, data, profile)?;
            progress(&format!("offline {kind} filter losses {losses:.4?}"));
            vf::save(&net, paths.vf_offline(kind))?;
            net
        };
        let on = if exists_stem(&paths.vf_online(kind)) {
            vf::load(paths.vf_online(kind), kind.schema_id())?
        } else {
            progress(&format!("training online {kind} filter"));
            let (net, logs) = train_vf_online(kind, off.clone(), &diffusion, profile, progress)?;
            let tail = &logs[logs.len().saturating_sub(500)..];
            let surv = tail.iter().filter(|l| l.survived).count() as f64 / tail.len().max(1) as f64;
            progress(&format!("online {kind} filter: last-500 survival {surv:.3}"));
            write_online_log(&paths.online_log(kind), &logs)?;
            vf::save(&net, paths.vf_online(kind))?;
            net
        };
        offline.insert(kind, off);
        online.insert(kind, on);
    }
    Ok(Artifacts { diffusion, offline, online })
}
