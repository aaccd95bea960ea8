use std::sync::Arc;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::ddpm::{Denoiser, SampleOptions};
use crate::error::{Error, Result};
use crate::footworld::Plan;
use crate::nn::{AdamConfig, AdamState};
use crate::rng::{self, Rng};

use super::offline::offline_loss;
use super::replay::{
    bellman_target, plan_set, sample_balanced_batch, soft_update, ReplayBuffers, Successor, Transition,
    REPLAY_CAPACITY, SOFT_UPDATE_RATE,
};
use super::value::ValueNet;

/// Result of executing one plan's first footstep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvStep {
    pub reward: f64,
    /// The step failed; no successor state exists.
    pub terminal: bool,
    /// The episode ended without failure (goal reached or budget spent).
    pub truncated: bool,
}

/// An episodic environment the viability filter is trained in.
pub trait OnlineEnv {
    fn reset(&mut self, rng: &mut Rng) -> Result<()>;
    /// Value-function state of the current situation.
    fn vf_state(&self) -> Result<Vec<f64>>;
    /// Input handed to the plan proposer (e.g. planner conditioning).
    fn context(&self) -> Result<Vec<f64>>;
    fn step(&mut self, plan: &Plan, rng: &mut Rng) -> Result<EnvStep>;
}

/// Source of candidate plans.
pub trait Proposer: Sync {
    fn propose(&self, context: &[f64], count: usize, seed: u64) -> Result<Vec<Plan>>;
}

/// Draws candidates from the diffusion planner.
pub struct DiffusionProposer<'a> {
    pub model: &'a Denoiser,
    pub options: SampleOptions,
}

impl Proposer for DiffusionProposer<'_> {
    fn propose(&self, context: &[f64], count: usize, seed: u64) -> Result<Vec<Plan>> {
        self.model.sample_plans(context, count, seed, &self.options)
    }
}

/// Returns every plan of a fixed enumerable set, ignoring `count`.
#[derive(Debug, Clone)]
pub struct ExhaustiveProposer(pub Vec<Plan>);

impl Proposer for ExhaustiveProposer {
    fn propose(&self, _context: &[f64], _count: usize, _seed: u64) -> Result<Vec<Plan>> {
        Ok(self.0.clone())
    }
}

/// Draws `count` plans uniformly (with replacement) from a fixed set.
#[derive(Debug, Clone)]
pub struct UniformProposer(pub Vec<Plan>);

impl Proposer for UniformProposer {
    fn propose(&self, _context: &[f64], count: usize, seed: u64) -> Result<Vec<Plan>> {
        if self.0.is_empty() {
            return Err(Error::usage("uniform proposer has no plans"));
        }
        let mut r = rng::seeded(seed);
        Ok((0..count).map(|_| self.0[rng::index(&mut r, self.0.len())]).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnlineConfig {
    pub episodes: usize,
    /// Candidate plans per decision.
    pub samples: usize,
    pub learning_rate: f64,
    pub epsilon: f64,
    pub batch: usize,
    pub tau: f64,
    pub grad_steps_per_episode: usize,
    pub capacity: usize,
}

impl Default for OnlineConfig {
    fn default() -> Self {
        Self {
            episodes: 5_000,
            samples: 200,
            learning_rate: 1e-4,
            epsilon: 0.1,
            batch: 256,
            tau: SOFT_UPDATE_RATE,
            grad_steps_per_episode: 1,
            capacity: REPLAY_CAPACITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: usize,
    pub steps: usize,
    /// Ended without a failing step.
    pub survived: bool,
    /// Mean TD loss of this episode's updates (none while buffers fill).
    pub td_loss: Option<f64>,
    pub success_buffer: usize,
    pub failure_buffer: usize,
}

/// Epsilon-greedy choice: with probability `epsilon` a uniformly random
/// index, else the highest-scoring one (lowest index on ties).
pub fn choose_plan(scores: &[f64], epsilon: f64, rng: &mut Rng) -> Result<usize> {
    if scores.is_empty() {
        return Err(Error::usage("no candidate plans"));
    }
    if rng::unit(rng) < epsilon {
        return Ok(rng::index(rng, scores.len()));
    }
    Ok(argmax(scores))
}

/// Index of the maximum, first on ties.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// One TD update of `online` on a balanced batch. Returns the loss.
pub fn td_update(
    online: &mut ValueNet,
    target: &ValueNet,
    opt: &mut AdamState,
    buffers: &ReplayBuffers,
    batch: usize,
    rng: &mut Rng,
) -> Result<f64> {
    let sample = sample_balanced_batch(buffers, batch, rng)?;
    let dim = online.state_dim + Plan::DIM;
    let mut x = Array2::zeros((sample.len(), dim));
    let mut y = Array1::zeros(sample.len());
    for (i, t) in sample.iter().enumerate() {
        online.check_state(&t.state)?;
        let mut row = x.row_mut(i);
        for (d, s) in row.iter_mut().zip(t.state.iter().chain(&t.plan.to_vec())) {
            *d = *s;
        }
        y[i] = bellman_target(t, target)?;
    }
    let (loss, grads) = offline_loss(online, x.view(), y.view())?;
    opt.step(&mut online.net, &grads)?;
    Ok(loss)
}

/// Online viability-filter training: epsilon-greedy rollouts over proposed
/// candidate sets, success/failure replay, TD updates after every episode and
/// a soft-updated target network.
pub fn train_online<E: OnlineEnv, P: Proposer + ?Sized>(
    init: ValueNet,
    env: &mut E,
    proposer: &P,
    cfg: &OnlineConfig,
    seed: u64,
) -> Result<(ValueNet, Vec<EpisodeLog>)> {
    train_online_with(init, env, proposer, cfg, seed, &mut |_| {})
}

/// [`train_online`] with a callback after every episode.
pub fn train_online_with<E: OnlineEnv, P: Proposer + ?Sized>(
    init: ValueNet,
    env: &mut E,
    proposer: &P,
    cfg: &OnlineConfig,
    seed: u64,
    on_episode: &mut dyn FnMut(&EpisodeLog),
) -> Result<(ValueNet, Vec<EpisodeLog>)> {
    if cfg.samples == 0 {
        return Err(Error::usage("online training needs at least one candidate per decision"));
    }
    let mut env_rng = rng::stream(seed, 0);
    let mut prop_rng = rng::stream(seed, 1);
    let mut train_rng = rng::stream(seed, 2);
    let mut pick_rng = rng::stream(seed, 3);

    let mut online = init;
    let mut target = online.clone();
    let mut opt = AdamState::new(&online.net, AdamConfig::with_lr(cfg.learning_rate))?;
    let mut buffers = ReplayBuffers::new(cfg.capacity);
    let mut logs = Vec::with_capacity(cfg.episodes);

    for episode in 0..cfg.episodes {
        env.reset(&mut env_rng)?;
        let mut state = Arc::new(env.vf_state()?);
        let mut plans = proposer.propose(&env.context()?, cfg.samples, rng::fork_seed(&mut prop_rng))?;
        let (mut steps, mut survived) = (0, false);
        loop {
            let scores = online.eval_many(&state, &plans)?;
            let choice = choose_plan(&scores, cfg.epsilon, &mut pick_rng)?;
            let plan = plans[choice];
            let out = env.step(&plan, &mut env_rng)?;
            steps += 1;
            if out.terminal {
                buffers.push(Transition { state, plan, reward: out.reward, next: None });
                break;
            }
            let next_state = Arc::new(env.vf_state()?);
            let next_plans = proposer.propose(&env.context()?, cfg.samples, rng::fork_seed(&mut prop_rng))?;
            let candidates = plan_set(&next_plans);
            buffers.push(Transition {
                state,
                plan,
                reward: out.reward,
                next: Some(Successor { state: next_state.clone(), candidates }),
            });
            state = next_state;
            plans = next_plans;
            if out.truncated {
                survived = true;
                break;
            }
        }

        let mut losses = Vec::new();
        for _ in 0..cfg.grad_steps_per_episode {
            match td_update(&mut online, &target, &mut opt, &buffers, cfg.batch, &mut train_rng) {
                Ok(l) => {
                    losses.push(l);
                    soft_update(&mut target, &online, cfg.tau)?;
                }
                Err(Error::Retryable(_)) => break,
                Err(e) => return Err(e),
            }
        }
        let (s, f) = buffers.sizes();
        let log = EpisodeLog {
            episode,
            steps,
            survived,
            td_loss: (!losses.is_empty()).then(|| losses.iter().sum::<f64>() / losses.len() as f64),
            success_buffer: s,
            failure_buffer: f,
        };
        on_episode(&log);
        logs.push(log);
    }
    Ok((online, logs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn full_exploration_is_uniform() {
        let scores = [0.0, 5.0, 1.0, 2.0];
        let mut r = seeded(8);
        let mut counts = [0usize; 4];
        for _ in 0..40_000 {
            counts[choose_plan(&scores, 1.0, &mut r).unwrap()] += 1;
        }
        for c in counts {
            // binomial(40000, 1/4): sd ~ 87
            assert!((c as f64 - 10_000.0).abs() < 450.0, "{counts:?}");
        }
    }

    #[test]
    fn greedy_picks_first_best() {
        assert_eq!(choose_plan(&[1.0, 3.0, 3.0], 0.0, &mut seeded(0)).unwrap(), 1);
        assert!(choose_plan(&[], 0.0, &mut seeded(0)).is_err());
    }

    #[test]
    fn uniform_proposer_is_seeded() {
        let plans: Vec<Plan> = (0..5).map(|i| Plan::from_slice(&[i as f64 * 0.1; 12]).unwrap()).collect();
        let p = UniformProposer(plans);
        assert_eq!(p.propose(&[], 7, 3).unwrap(), p.propose(&[], 7, 3).unwrap());
        assert_eq!(p.propose(&[], 7, 3).unwrap().len(), 7);
    }

}
