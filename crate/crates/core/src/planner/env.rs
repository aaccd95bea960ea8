use crate::error::{Error, Result};
use crate::footworld::{
    conditioning, episode_status, execute_step, vf_state, Capability, EpisodeStatus, Plan, Scenario, ScenarioSpec,
    TaskKind, WorldState,
};
use crate::rng::{self, Rng};
use crate::vf::{EnvStep, OnlineEnv};

/// Footstep scenarios as an online-training environment for one task's
/// viability filter. Each reset draws one of `specs` uniformly and builds a
/// fresh randomized scenario; the reward is 1 for every survived step.
#[derive(Debug, Clone)]
pub struct ScenarioEnv {
    pub specs: Vec<ScenarioSpec>,
    pub kind: TaskKind,
    pub capability: Capability,
    current: Option<(Scenario, WorldState)>,
}

impl ScenarioEnv {
    pub fn new(specs: Vec<ScenarioSpec>, kind: TaskKind, capability: Capability) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::usage("scenario environment needs at least one scenario"));
        }
        if kind == TaskKind::Flat {
            return Err(Error::usage("flat ground has no viability filter"));
        }
        for s in &specs {
            s.validate()?;
        }
        Ok(Self { specs, kind, capability, current: None })
    }

    fn current(&self) -> Result<&(Scenario, WorldState)> {
        self.current.as_ref().ok_or_else(|| Error::usage("environment used before reset"))
    }

    pub fn world(&self) -> Option<&WorldState> {
        self.current.as_ref().map(|c| &c.1)
    }
}

impl OnlineEnv for ScenarioEnv {
    fn reset(&mut self, rng: &mut Rng) -> Result<()> {
        let spec = &self.specs[rng::index(rng, self.specs.len())];
        let sc = spec.build(rng)?;
        let world = sc.start.clone();
        self.current = Some((sc, world));
        Ok(())
    }

    fn vf_state(&self) -> Result<Vec<f64>> {
        let (sc, w) = self.current()?;
        vf_state(w, &sc.scene, self.kind)
    }

    fn context(&self) -> Result<Vec<f64>> {
        let (sc, w) = self.current()?;
        Ok(conditioning(w, &sc.scene))
    }

    fn step(&mut self, plan: &Plan, rng: &mut Rng) -> Result<EnvStep> {
        let cap = self.capability;
        let (sc, w) = self.current.as_mut().ok_or_else(|| Error::usage("environment used before reset"))?;
        let (next, out) = execute_step(w, &sc.scene, &cap, plan.first(), rng)?;
        *w = next;
        if out.terminated {
            return Ok(EnvStep { reward: 0.0, terminal: true, truncated: false });
        }
        let truncated = episode_status(w, sc.budget) != EpisodeStatus::Running;
        Ok(EnvStep { reward: out.reward, terminal: false, truncated })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alive_reward_and_termination() {
        let spec = ScenarioSpec::single(TaskKind::Obstacle, 1.0);
        let mut env = ScenarioEnv::new(vec![spec], TaskKind::Obstacle, Capability::deterministic()).unwrap();
        assert!(env.vf_state().is_err());
        let mut r = rng::seeded(0);
        env.reset(&mut r).unwrap();
        assert_eq!(env.vf_state().unwrap().len(), 15);
        let ok = Plan::from_slice(&[0.5, 0.0, 0.0, 1.0, 0.0, 0.0, 1.5, 0.0, 0.0, 2.0, 0.0, 0.0]).unwrap();
        let s = env.step(&ok, &mut r).unwrap();
        assert_eq!((s.reward, s.terminal), (1.0, false));
        let bad = Plan::from_slice(&[2.9, 0.0, 0.0, 1.0, 0.0, 0.0, 1.5, 0.0, 0.0, 2.0, 0.0, 0.0]).unwrap();
        let s = env.step(&bad, &mut r).unwrap();
        assert_eq!((s.reward, s.terminal), (0.0, true));
    }
}
