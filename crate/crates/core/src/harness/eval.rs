use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ddpm::Denoiser;
use crate::error::{Error, Result};
use crate::footworld::{Capability, Plan, ScenarioKind, ScenarioSpec, Scene, TaskKind, WorldState};
use crate::planner::{rollout_episode, EpisodeRecord, Filter, ObstacleGuidanceConfig, PlanSource, PlannerConfig};
use crate::rng;

use super::artifacts::Artifacts;

/// Controller variants compared in an evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Arm {
    /// Hand-written walker stepping straight at the next waypoint.
    Procedural,
    /// First diffusion sample, no filtering.
    Diffusion,
    VfOffline,
    VfOnline,
    /// One obstacle-guided diffusion sample.
    Guidance,
}

impl Arm {
    pub const ALL: [Arm; 5] = [Arm::Procedural, Arm::Diffusion, Arm::VfOffline, Arm::VfOnline, Arm::Guidance];

    pub fn name(self) -> &'static str {
        match self {
            Arm::Procedural => "procedural",
            Arm::Diffusion => "diffusion",
            Arm::VfOffline => "vf-offline",
            Arm::VfOnline => "vf-online",
            Arm::Guidance => "guidance",
        }
    }

    /// Guidance only has an objective on obstacle scenarios.
    pub fn applies_to(self, kind: ScenarioKind) -> bool {
        self != Arm::Guidance || kind == ScenarioKind::Single(TaskKind::Obstacle)
    }
}

impl std::str::FromStr for Arm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Arm::ALL
            .into_iter()
            .find(|a| a.name() == s.trim())
            .ok_or_else(|| Error::usage(format!("unknown arm '{s}'")))
    }
}

impl std::fmt::Display for Arm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Protocol of one evaluation: `trials` x `episodes` paired episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub seed: u64,
    pub trials: usize,
    pub episodes: usize,
    pub samples: usize,
    pub guidance_weight: f64,
    pub capability: Capability,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { seed: 1, trials: 5, episodes: 20, samples: 100, guidance_weight: 2.0, capability: Capability::default() }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 || self.episodes == 0 || self.samples == 0 {
            return Err(Error::usage("trials, episodes and samples must be >= 1"));
        }
        Ok(())
    }

    /// Seed of episode `e` of trial `t`; shared by every arm (paired runs).
    pub fn episode_seed(&self, trial: usize, episode: usize) -> u64 {
        rng::fork_seed(&mut rng::stream(self.seed, (trial * self.episodes + episode) as u64))
    }
}

/// Walks straight at the next waypoint with a fixed stride.
#[derive(Debug, Clone, Copy)]
pub struct ProceduralWalker {
    pub stride: f64,
    pub width: f64,
}

impl Default for ProceduralWalker {
    fn default() -> Self {
        Self { stride: 0.65, width: 0.15 }
    }
}

impl PlanSource for ProceduralWalker {
    fn candidates(&self, world: &WorldState, _scene: &Scene, _cfg: &PlannerConfig, _seed: u64) -> Result<Vec<Plan>> {
        let goal = world.to_local(world.next_waypoint().unwrap_or(world.stance));
        let (dx, dy) = (goal[0], goal[1]);
        let dist = dx.hypot(dy);
        let (ux, uy) = if dist > 1e-9 { (dx / dist, dy / dist) } else { (1.0, 0.0) };
        let stride = self.stride.min(dist.max(0.3));
        // first swing foot is the one opposite the stance leg
        let side = -world.leg.sign();
        let mut steps = [[0.0; 3]; 4];
        for (k, s) in steps.iter_mut().enumerate() {
            let along = stride * (k + 1) as f64;
            let lat = if k % 2 == 0 { side * self.width } else { 0.0 };
            *s = [ux * along - uy * lat, uy * along + ux * lat, 0.0];
        }
        Ok(vec![Plan::new(steps)?])
    }
}

/// Candidate source of one arm.
enum Source<'a> {
    Walker(ProceduralWalker),
    Model(&'a Denoiser),
}

impl PlanSource for Source<'_> {
    fn candidates(&self, world: &WorldState, scene: &Scene, cfg: &PlannerConfig, seed: u64) -> Result<Vec<Plan>> {
        match self {
            Source::Walker(w) => w.candidates(world, scene, cfg, seed),
            Source::Model(m) => m.candidates(world, scene, cfg, seed),
        }
    }
}

/// Kinds of the elements a scenario contains.
pub fn scenario_tasks(kind: ScenarioKind) -> Vec<TaskKind> {
    match kind {
        ScenarioKind::Single(TaskKind::Flat) => vec![],
        ScenarioKind::Single(k) => vec![k],
        ScenarioKind::Mixed => vec![TaskKind::Platform, TaskKind::Hurdle, TaskKind::Obstacle],
    }
}

/// Filters and planner settings of an arm on a scenario.
pub fn arm_setup(
    arm: Arm,
    spec: &ScenarioSpec,
    artifacts: &Artifacts,
    cfg: &EvalConfig,
) -> Result<(Vec<Filter>, PlannerConfig)> {
    let base = PlannerConfig { capability: cfg.capability, ..PlannerConfig::default() };
    let learned = |online: bool| -> Result<Vec<Filter>> {
        scenario_tasks(spec.kind)
            .into_iter()
            .map(|k| {
                let net = if online { artifacts.online(k)? } else { artifacts.offline(k)? };
                Ok(Filter::Learned { net: Arc::new(net.clone()), kind: k })
            })
            .collect()
    };
    Ok(match arm {
        Arm::Procedural | Arm::Diffusion => (vec![], PlannerConfig { samples: 1, ..base }),
        Arm::VfOffline => (learned(false)?, PlannerConfig { samples: cfg.samples, ..base }),
        Arm::VfOnline => (learned(true)?, PlannerConfig { samples: cfg.samples, ..base }),
        Arm::Guidance => {
            if !arm.applies_to(spec.kind) {
                return Err(Error::usage("guidance arm needs an obstacle scenario"));
            }
            let g = ObstacleGuidanceConfig { weight: cfg.guidance_weight };
            (vec![], PlannerConfig { samples: 1, guidance: Some(g), ..base })
        }
    })
}

/// One episode row of an evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub config_hash: String,
    pub master_seed: u64,
    pub trial: usize,
    pub episode: usize,
    pub episode_seed: u64,
    pub task: String,
    pub level: f64,
    pub arm: String,
    pub samples: usize,
    pub steps: usize,
    pub success: bool,
    pub mean_score: Option<f64>,
    pub decision_seconds: f64,
}

/// Mean and spread of per-trial success rates for one setting and arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingRow {
    pub config_hash: String,
    pub master_seed: u64,
    pub task: String,
    pub level: f64,
    pub arm: String,
    pub samples: usize,
    pub trials: usize,
    pub episodes: usize,
    pub mean_success: f64,
    pub std_success: f64,
}

/// Runs one episode of `arm`; the scenario layout, environment noise and
/// planner streams derive from `seed` alone.
pub fn run_episode(
    arm: Arm,
    spec: &ScenarioSpec,
    artifacts: &Artifacts,
    filters: &[Filter],
    planner: &PlannerConfig,
    seed: u64,
) -> Result<EpisodeRecord> {
    let scenario = spec.build(&mut rng::stream(seed, 2))?;
    let source = match arm {
        Arm::Procedural => Source::Walker(ProceduralWalker::default()),
        _ => Source::Model(&artifacts.diffusion),
    };
    rollout_episode(&scenario, &source, filters, planner, seed)
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (m, var.sqrt())
}

/// Evaluates `arm` on `spec` with an explicit planner configuration.
pub fn evaluate_with(
    arm: Arm,
    spec: &ScenarioSpec,
    artifacts: &Artifacts,
    filters: &[Filter],
    planner: &PlannerConfig,
    cfg: &EvalConfig,
    config_hash: &str,
) -> Result<(SettingRow, Vec<EpisodeRow>)> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize)> = (0..cfg.trials).flat_map(|t| (0..cfg.episodes).map(move |e| (t, e))).collect();
    let records: Vec<(usize, usize, u64, EpisodeRecord)> = jobs
        .par_iter()
        .map(|&(t, e)| {
            let seed = cfg.episode_seed(t, e);
            run_episode(arm, spec, artifacts, filters, planner, seed).map(|r| (t, e, seed, r))
        })
        .collect::<Result<_>>()?;
    let task = spec.kind.to_string();
    let rows: Vec<EpisodeRow> = records
        .iter()
        .map(|(t, e, seed, r)| EpisodeRow {
            config_hash: config_hash.to_string(),
            master_seed: cfg.seed,
            trial: *t,
            episode: *e,
            episode_seed: *seed,
            task: task.clone(),
            level: spec.level(),
            arm: arm.name().to_string(),
            samples: planner.samples,
            steps: r.steps,
            success: r.success,
            mean_score: r.mean_score(),
            decision_seconds: r.mean_decision_seconds(),
        })
        .collect();
    let rates: Vec<f64> = (0..cfg.trials)
        .map(|t| rows.iter().filter(|r| r.trial == t && r.success).count() as f64 / cfg.episodes as f64)
        .collect();
    let (mean, std) = mean_std(&rates);
    let summary = SettingRow {
        config_hash: config_hash.to_string(),
        master_seed: cfg.seed,
        task,
        level: spec.level(),
        arm: arm.name().to_string(),
        samples: planner.samples,
        trials: cfg.trials,
        episodes: cfg.episodes,
        mean_success: mean,
        std_success: std,
    };
    Ok((summary, rows))
}

pub fn evaluate_arm(
    arm: Arm,
    spec: &ScenarioSpec,
    artifacts: &Artifacts,
    cfg: &EvalConfig,
    config_hash: &str,
) -> Result<(SettingRow, Vec<EpisodeRow>)> {
    let (filters, planner) = arm_setup(arm, spec, artifacts, cfg)?;
    evaluate_with(arm, spec, artifacts, &filters, &planner, cfg, config_hash)
}

/// Success table over `specs` x `arms` (arms that do not apply are skipped).
pub fn run_eval(
    specs: &[ScenarioSpec],
    arms: &[Arm],
    artifacts: &Artifacts,
    cfg: &EvalConfig,
    config_hash: &str,
) -> Result<(Vec<SettingRow>, Vec<EpisodeRow>)> {
    let mut summary = Vec::new();
    let mut episodes = Vec::new();
    for spec in specs {
        for &arm in arms.iter().filter(|a| a.applies_to(spec.kind)) {
            let (s, mut e) = evaluate_arm(arm, spec, artifacts, cfg, config_hash)?;
            summary.push(s);
            episodes.append(&mut e);
        }
    }
    Ok((summary, episodes))
}

pub const SWEEP_SAMPLES: [usize; 7] = [1, 5, 10, 25, 50, 100, 200];

/// Success of the online-filter planner as a function of the candidate count.
pub fn sample_sweep(
    spec: &ScenarioSpec,
    counts: &[usize],
    artifacts: &Artifacts,
    cfg: &EvalConfig,
    config_hash: &str,
) -> Result<Vec<SettingRow>> {
    counts
        .iter()
        .map(|&n| {
            let c = EvalConfig { samples: n, ..cfg.clone() };
            evaluate_arm(Arm::VfOnline, spec, artifacts, &c, config_hash).map(|(s, _)| s)
        })
        .collect()
}

/// Mixed-scenario composition study: all online filters, then each
/// single-filter ablation.
pub fn compose_eval(
    spec: &ScenarioSpec,
    artifacts: &Artifacts,
    cfg: &EvalConfig,
    config_hash: &str,
) -> Result<Vec<(String, SettingRow)>> {
    let mut out = Vec::new();
    let planner = PlannerConfig { samples: cfg.samples, capability: cfg.capability, ..PlannerConfig::default() };
    let all = scenario_tasks(spec.kind);
    let mut variants: Vec<(String, Vec<TaskKind>)> = vec![("all".into(), all.clone())];
    for &drop in &all {
        variants.push((format!("without-{drop}"), all.iter().copied().filter(|&k| k != drop).collect()));
    }
    for (name, kinds) in variants {
        let filters: Vec<Filter> = kinds
            .iter()
            .map(|&k| Ok(Filter::Learned { net: Arc::new(artifacts.online(k)?.clone()), kind: k }))
            .collect::<Result<_>>()?;
        let (row, _) = evaluate_with(Arm::VfOnline, spec, artifacts, &filters, &planner, cfg, config_hash)?;
        out.push((name, row));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::footworld::Leg;

    #[test]
    fn arm_names_round_trip() {
        for a in Arm::ALL {
            assert_eq!(a.name().parse::<Arm>().unwrap(), a);
        }
        assert!("nope".parse::<Arm>().is_err());
        assert!(!Arm::Guidance.applies_to(ScenarioKind::Single(TaskKind::Platform)));
    }

    #[test]
    fn walker_heads_for_waypoint() {
        let w = WorldState::standing([0.0, 0.0], 0.0, Leg::Left, &Scene::flat()).with_waypoints([[0.0, 5.0, 0.0]]);
        let p = ProceduralWalker::default().candidates(&w, &Scene::flat(), &PlannerConfig::default(), 0).unwrap();
        let f = p[0].steps[3];
        assert!(f[1] > 2.5 && f[0].abs() < 0.2, "{f:?}");
    }

    #[test]
    fn sample_std_of_constant_is_zero() {
        assert_eq!(mean_std(&[0.5, 0.5, 0.5]), (0.5, 0.0));
        let (m, s) = mean_std(&[0.0, 1.0]);
        assert!((m - 0.5).abs() < 1e-15 && (s - 0.5_f64.sqrt()).abs() < 1e-15);
    }
}
