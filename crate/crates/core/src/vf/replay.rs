use std::collections::VecDeque;
use std::sync::Arc;

use ndarray::{Array2, Axis};

use crate::error::{Error, Result};
use crate::footworld::Plan;
use crate::rng::{self, Rng};

use super::value::ValueNet;

pub const REPLAY_CAPACITY: usize = 100_000;
pub const SOFT_UPDATE_RATE: f64 = 0.01;

/// Candidate next plans, one per row.
pub type PlanSet = Arc<Array2<f64>>;

pub fn plan_set(plans: &[Plan]) -> PlanSet {
    let mut m = Array2::zeros((plans.len(), Plan::DIM));
    for (mut row, p) in m.axis_iter_mut(Axis(0)).zip(plans) {
        row.assign(&ndarray::aview1(&p.to_vec()));
    }
    Arc::new(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Successor {
    pub state: Arc<Vec<f64>>,
    pub candidates: PlanSet,
}

/// `(s, p, r, s', P')`; `next` is absent exactly for terminal transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Arc<Vec<f64>>,
    pub plan: Plan,
    pub reward: f64,
    pub next: Option<Successor>,
}

impl Transition {
    pub fn is_terminal(&self) -> bool {
        self.next.is_none()
    }
}

/// `y = r` for terminal transitions, else `r + gamma max_{p'} Q_target(s', p')`,
/// clipped to `[0, Q_max]`.
pub fn bellman_target(t: &Transition, target: &ValueNet) -> Result<f64> {
    let y = match &t.next {
        None => t.reward,
        Some(next) => {
            if next.candidates.nrows() == 0 {
                return Err(Error::usage("non-terminal transition with an empty candidate set"));
            }
            let q = target.eval_rows(&next.state, next.candidates.view())?;
            t.reward + target.gamma * q.into_iter().fold(f64::NEG_INFINITY, f64::max)
        }
    };
    Ok(y.clamp(0.0, target.q_max()))
}

/// Success (`r = 1`) and failure (`r = 0`) FIFO replay memories.
#[derive(Debug, Clone)]
pub struct ReplayBuffers {
    pub success: VecDeque<Transition>,
    pub failure: VecDeque<Transition>,
    pub capacity: usize,
}

impl Default for ReplayBuffers {
    fn default() -> Self {
        Self::new(REPLAY_CAPACITY)
    }
}

impl ReplayBuffers {
    pub fn new(capacity: usize) -> Self {
        Self { success: VecDeque::new(), failure: VecDeque::new(), capacity: capacity.max(1) }
    }

    pub fn push(&mut self, t: Transition) {
        let buf = if t.reward > 0.0 { &mut self.success } else { &mut self.failure };
        if buf.len() == self.capacity {
            buf.pop_front();
        }
        buf.push_back(t);
    }

    pub fn sizes(&self) -> (usize, usize) {
        (self.success.len(), self.failure.len())
    }
}

/// `batch / 2` transitions from each buffer, uniformly with replacement.
pub fn sample_balanced_batch(buffers: &ReplayBuffers, batch: usize, rng: &mut Rng) -> Result<Vec<Transition>> {
    if batch == 0 || !batch.is_multiple_of(2) {
        return Err(Error::usage(format!("balanced batch size must be even and positive, got {batch}")));
    }
    if buffers.success.is_empty() || buffers.failure.is_empty() {
        return Err(Error::Retryable(format!(
            "replay buffers not ready (success {}, failure {})",
            buffers.success.len(),
            buffers.failure.len()
        )));
    }
    let half = batch / 2;
    let mut out = Vec::with_capacity(batch);
    for buf in [&buffers.success, &buffers.failure] {
        for _ in 0..half {
            out.push(buf[rng::index(rng, buf.len())].clone());
        }
    }
    Ok(out)
}

/// `target <- (1 - tau) target + tau online`.
pub fn soft_update(target: &mut ValueNet, online: &ValueNet, tau: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::usage(format!("soft-update rate {tau} outside [0, 1]")));
    }
    target.net.blend_toward(&online.net, tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::NetworkParams;
    use crate::rng::seeded;

    fn constant_net(v: f64) -> ValueNet {
        let mut n = ValueNet::new(0, 1, &[2], 0.75, &mut seeded(0)).unwrap();
        n.net = NetworkParams::zeros(&n.net.layer_dims()).unwrap();
        n.net.layers_mut().last_mut().unwrap().bias[0] = v;
        n
    }

    fn tr(reward: f64, next: Option<Successor>) -> Transition {
        Transition { state: Arc::new(vec![0.0]), plan: Plan::from_slice(&[0.0; 12]).unwrap(), reward, next }
    }

    #[test]
    fn terminal_target_is_reward() {
        assert_eq!(bellman_target(&tr(0.0, None), &constant_net(3.0)).unwrap(), 0.0);
    }

    #[test]
    fn max_over_candidates() {
        // linear net reading the first plan coordinate
        let mut n = ValueNet::new(0, 1, &[], 0.75, &mut seeded(0)).unwrap();
        n.net = NetworkParams::zeros(&n.net.layer_dims()).unwrap();
        n.net.layers_mut()[0].weights[[0, 1]] = 1.0;
        let plans: Vec<Plan> = [2.0, 3.0, 1.5]
            .iter()
            .map(|&q| {
                let mut v = [0.0; 12];
                v[0] = q;
                Plan::from_slice(&v).unwrap()
            })
            .collect();
        let t = tr(1.0, Some(Successor { state: Arc::new(vec![0.0]), candidates: plan_set(&plans) }));
        assert_eq!(bellman_target(&t, &n).unwrap(), 3.25);
    }

    #[test]
    fn q_max_is_a_fixed_point() {
        let t = tr(1.0, Some(Successor { state: Arc::new(vec![0.0]), candidates: plan_set(&[Plan::from_slice(&[0.0; 12]).unwrap()]) }));
        assert_eq!(bellman_target(&t, &constant_net(4.0)).unwrap(), 4.0);
    }

    #[test]
    fn empty_candidates_rejected() {
        let t = tr(1.0, Some(Successor { state: Arc::new(vec![0.0]), candidates: plan_set(&[]) }));
        assert!(matches!(bellman_target(&t, &constant_net(1.0)), Err(Error::Usage(_))));
    }

    #[test]
    fn balanced_batches() {
        let mut b = ReplayBuffers::new(10);
        assert!(matches!(sample_balanced_batch(&b, 4, &mut seeded(0)), Err(Error::Retryable(_))));
        for i in 0..25 {
            b.push(tr(f64::from(i % 2 == 0), None));
        }
        assert_eq!(b.sizes(), (10, 10));
        let batch = sample_balanced_batch(&b, 256, &mut seeded(1)).unwrap();
        assert_eq!(batch.iter().filter(|t| t.reward == 1.0).count(), 128);
        assert!(batch[128..].iter().all(|t| t.reward == 0.0));
        assert_eq!(batch, sample_balanced_batch(&b, 256, &mut seeded(1)).unwrap());
        assert!(sample_balanced_batch(&b, 3, &mut seeded(1)).is_err());
    }

    #[test]
    fn soft_update_cases() {
        let mut t = constant_net(0.0);
        let o = constant_net(1.0);
        soft_update(&mut t, &o, 0.01).unwrap();
        assert!((t.net.layers().last().unwrap().bias[0] - 0.01).abs() < 1e-15);
        let mut t1 = constant_net(0.0);
        soft_update(&mut t1, &o, 1.0).unwrap();
        assert_eq!(t1, o);
        let mut t0 = constant_net(0.5);
        soft_update(&mut t0, &o, 0.0).unwrap();
        assert_eq!(t0, constant_net(0.5));
        let other = ValueNet::new(0, 1, &[3], 0.75, &mut seeded(0)).unwrap();
        assert!(soft_update(&mut t0, &other, 0.5).is_err());
    }
}
