//! A small enumerable stepping MDP for checking online training against
//! exact value iteration.
//!
//! The character stands on one of 12 cells of a ring; some cells are holes.
//! An action is a step of 1, 2 or 3 cells. Landing on a hole ends the episode
//! with reward 0; otherwise the reward is 1 and, with probability `slip`, the
//! character overshoots by one cell when that cell is safe.

use crate::error::{Error, Result};
use crate::footworld::Plan;
use crate::rng::{self, Rng};

use super::online::{EnvStep, OnlineEnv};

pub const ACTIONS: [usize; 3] = [1, 2, 3];

#[derive(Debug, Clone, PartialEq)]
pub struct TinyMdp {
    pub cells: usize,
    pub holes: Vec<usize>,
    pub slip: f64,
    pub budget: usize,
    pub cell: usize,
    pub steps: usize,
}

impl Default for TinyMdp {
    fn default() -> Self {
        Self { cells: 12, holes: vec![4, 5, 6], slip: 0.25, budget: 20, cell: 0, steps: 0 }
    }
}

impl TinyMdp {
    pub fn is_hole(&self, c: usize) -> bool {
        self.holes.contains(&(c % self.cells))
    }

    pub fn safe_cells(&self) -> Vec<usize> {
        (0..self.cells).filter(|&c| !self.is_hole(c)).collect()
    }

    /// One-hot encoding of a cell.
    pub fn encode_state(&self, cell: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.cells];
        v[cell % self.cells] = 1.0;
        v
    }

    /// Plan whose first three coordinates one-hot encode action `a`.
    pub fn plan_for(a: usize) -> Plan {
        let mut v = [0.0; Plan::DIM];
        v[a] = 1.0;
        Plan::from_slice(&v).expect("finite")
    }

    pub fn plans() -> Vec<Plan> {
        (0..ACTIONS.len()).map(Self::plan_for).collect()
    }

    pub fn decode_action(plan: &Plan) -> usize {
        let v = plan.to_vec();
        (0..ACTIONS.len()).max_by(|&a, &b| v[a].total_cmp(&v[b]).then(b.cmp(&a))).expect("three actions")
    }
}

impl OnlineEnv for TinyMdp {
    fn reset(&mut self, rng: &mut Rng) -> Result<()> {
        let safe = self.safe_cells();
        if safe.is_empty() {
            return Err(Error::usage("tiny MDP has no safe cell"));
        }
        self.cell = safe[rng::index(rng, safe.len())];
        self.steps = 0;
        Ok(())
    }

    fn vf_state(&self) -> Result<Vec<f64>> {
        Ok(self.encode_state(self.cell))
    }

    fn context(&self) -> Result<Vec<f64>> {
        Ok(Vec::new())
    }

    fn step(&mut self, plan: &Plan, rng: &mut Rng) -> Result<EnvStep> {
        let slip_draw = rng::unit(rng);
        let land = (self.cell + ACTIONS[Self::decode_action(plan)]) % self.cells;
        self.steps += 1;
        if self.is_hole(land) {
            return Ok(EnvStep { reward: 0.0, terminal: true, truncated: false });
        }
        let over = (land + 1) % self.cells;
        self.cell = if slip_draw < self.slip && !self.is_hole(over) { over } else { land };
        Ok(EnvStep { reward: 1.0, terminal: false, truncated: self.steps >= self.budget })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn hole_landing_terminates() {
        let mut m = TinyMdp { cell: 3, ..Default::default() };
        for a in 0..3 {
            m.cell = 3;
            let s = m.step(&TinyMdp::plan_for(a), &mut seeded(a as u64)).unwrap();
            assert!(s.terminal && s.reward == 0.0);
        }
    }

    #[test]
    fn plans_decode() {
        for a in 0..3 {
            assert_eq!(TinyMdp::decode_action(&TinyMdp::plan_for(a)), a);
        }
    }
}
