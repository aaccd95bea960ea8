//! Receding-horizon planning: sample candidate plans from the diffusion
//! model, score them with (composed) viability filters, execute the first
//! footstep of the chosen plan and replan.

mod env;
mod guidance;
mod select;

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::ddpm::{Denoiser, GuidanceSpec, SampleOptions, DEFAULT_X0_CLIP};
use crate::error::{Error, Result};
use crate::footworld::{
    conditioning, episode_status, execute_step, vf_state, Capability, EpisodeStatus, FailureCause, Plan, Scenario,
    Scene, TaskKind, WorldState,
};
use crate::rng::{self};
use crate::vf::ValueNet;

pub use env::ScenarioEnv;
pub use guidance::{sdf_guidance_value, ObstacleGuidance};
pub use select::{select, threshold_select, Selection};

pub const DEFAULT_SAMPLES: usize = 100;

/// Scores candidate plans; learned filters read their task's state.
pub type ScoreFn = dyn Fn(&WorldState, &Scene, &[Plan]) -> Result<Vec<f64>> + Send + Sync;

#[derive(Clone)]
pub enum Filter {
    Learned { net: Arc<ValueNet>, kind: TaskKind },
    /// Injected scorer with its own ceiling.
    Oracle { score: Arc<ScoreFn>, q_max: f64 },
}

impl std::fmt::Debug for Filter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Filter::Learned { kind, .. } => write!(f, "Filter::Learned({kind})"),
            Filter::Oracle { q_max, .. } => write!(f, "Filter::Oracle(q_max = {q_max})"),
        }
    }
}

impl Filter {
    pub fn learned(net: ValueNet, kind: TaskKind) -> Result<Self> {
        if net.schema != kind.schema_id() {
            return Err(Error::SchemaMismatch { checkpoint: net.schema, task: kind.schema_id() });
        }
        Ok(Filter::Learned { net: Arc::new(net), kind })
    }

    pub fn q_max(&self) -> f64 {
        match self {
            Filter::Learned { net, .. } => net.q_max(),
            Filter::Oracle { q_max, .. } => *q_max,
        }
    }

    pub fn scores(&self, world: &WorldState, scene: &Scene, plans: &[Plan]) -> Result<Vec<f64>> {
        match self {
            Filter::Learned { net, kind } => net.eval_many(&vf_state(world, scene, *kind)?, plans),
            Filter::Oracle { score, .. } => score(world, scene, plans),
        }
    }
}

/// Guidance weight applied to the nearest obstacle during sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObstacleGuidanceConfig {
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct PlannerConfig {
    pub samples: usize,
    pub selection: Selection,
    pub guidance: Option<ObstacleGuidanceConfig>,
    pub cfg_weight: Option<f64>,
    pub clip_x0: Option<f64>,
    pub capability: Capability,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            samples: DEFAULT_SAMPLES,
            selection: Selection::Argmax,
            guidance: None,
            cfg_weight: None,
            clip_x0: Some(DEFAULT_X0_CLIP),
            capability: Capability::default(),
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::usage("planner needs at least one sample"));
        }
        self.selection.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub plan: Plan,
    pub index: usize,
    /// Composite score of the chosen plan (`None` without filters).
    pub score: Option<f64>,
    pub scores: Vec<f64>,
    pub threshold_met: Option<bool>,
    pub candidates: Vec<Plan>,
}

/// Scores `candidates` with every filter (product) and selects one. Without
/// filters the first candidate is returned.
pub fn choose(
    world: &WorldState,
    scene: &Scene,
    candidates: Vec<Plan>,
    filters: &[Filter],
    selection: Selection,
) -> Result<Decision> {
    if candidates.is_empty() {
        return Err(Error::usage("no candidate plans"));
    }
    if filters.is_empty() {
        return Ok(Decision { plan: candidates[0], index: 0, score: None, scores: Vec::new(), threshold_met: None, candidates });
    }
    let per_filter: Vec<Vec<f64>> =
        filters.iter().map(|f| f.scores(world, scene, &candidates)).collect::<Result<_>>()?;
    let scores = crate::vf::product_scores(&per_filter)?;
    let q_max: f64 = filters.iter().map(Filter::q_max).product();
    let (index, met) = select(&scores, selection, q_max)?;
    Ok(Decision { plan: candidates[index], index, score: Some(scores[index]), scores, threshold_met: met, candidates })
}

/// One planning decision: sample, score, select.
pub fn plan_step(
    world: &WorldState,
    scene: &Scene,
    model: &Denoiser,
    filters: &[Filter],
    cfg: &PlannerConfig,
    seed: u64,
) -> Result<Decision> {
    if !world.alive {
        return Err(Error::usage("plan_step on a terminated world"));
    }
    cfg.validate()?;
    let candidates = model.candidates(world, scene, cfg, seed)?;
    choose(world, scene, candidates, filters, cfg.selection)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub success: bool,
    pub steps: usize,
    pub scores: Vec<Option<f64>>,
    pub decision_seconds: Vec<f64>,
    pub cause: Option<FailureCause>,
}

impl EpisodeRecord {
    pub fn mean_score(&self) -> Option<f64> {
        let s: Vec<f64> = self.scores.iter().flatten().copied().collect();
        (!s.is_empty()).then(|| s.iter().sum::<f64>() / s.len() as f64)
    }

    pub fn mean_decision_seconds(&self) -> f64 {
        if self.decision_seconds.is_empty() {
            0.0
        } else {
            self.decision_seconds.iter().sum::<f64>() / self.decision_seconds.len() as f64
        }
    }
}

/// Any source of candidate plans for a decision.
pub trait PlanSource: Sync {
    fn candidates(&self, world: &WorldState, scene: &Scene, cfg: &PlannerConfig, seed: u64) -> Result<Vec<Plan>>;
}

impl PlanSource for Denoiser {
    fn candidates(&self, world: &WorldState, scene: &Scene, cfg: &PlannerConfig, seed: u64) -> Result<Vec<Plan>> {
        let guidance = match cfg.guidance {
            Some(g) => Some(GuidanceSpec::new(Arc::new(ObstacleGuidance::for_world(world, scene)?), g.weight)?),
            None => None,
        };
        let opts = SampleOptions { cfg_weight: cfg.cfg_weight, guidance, clip_x0: cfg.clip_x0 };
        self.sample_plans(&conditioning(world, scene), cfg.samples, seed, &opts)
    }
}

/// Runs one episode with replanning after every footstep. The environment
/// draws from stream `(seed, 0)` and the planner from stream `(seed, 1)`, so
/// arms sharing a seed see the same environment noise.
pub fn rollout_episode<S: PlanSource + ?Sized>(
    scenario: &Scenario,
    source: &S,
    filters: &[Filter],
    cfg: &PlannerConfig,
    seed: u64,
) -> Result<EpisodeRecord> {
    cfg.validate()?;
    let mut env_rng = rng::stream(seed, 0);
    let mut plan_rng = rng::stream(seed, 1);
    let mut world = scenario.start.clone();
    let mut rec = EpisodeRecord { success: false, steps: 0, scores: Vec::new(), decision_seconds: Vec::new(), cause: None };
    loop {
        match episode_status(&world, scenario.budget) {
            EpisodeStatus::Running => {}
            EpisodeStatus::Success => {
                rec.success = true;
                break;
            }
            EpisodeStatus::Failure => break,
        }
        let t0 = Instant::now();
        let candidates = source.candidates(&world, &scenario.scene, cfg, rng::fork_seed(&mut plan_rng))?;
        let d = choose(&world, &scenario.scene, candidates, filters, cfg.selection)?;
        rec.decision_seconds.push(t0.elapsed().as_secs_f64());
        rec.scores.push(d.score);
        let (next, out) = execute_step(&world, &scenario.scene, &cfg.capability, d.plan.first(), &mut env_rng)?;
        rec.cause = out.cause;
        world = next;
        rec.steps += 1;
    }
    Ok(rec)
}
