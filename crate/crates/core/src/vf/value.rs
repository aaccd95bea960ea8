use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::footworld::{state_dim, Plan, TaskKind};
use crate::nn::{checkpoint as vpnn, NetworkParams, SharedSide};
use crate::rng::Rng;

/// Default hidden layer widths.
pub const DEFAULT_HIDDEN: [usize; 2] = [128, 64];

/// Q-function over `[task state | flattened plan]`, clamped to
/// `[0, 1 / (1 - gamma)]` at evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueNet {
    pub net: NetworkParams,
    pub schema: u32,
    pub state_dim: usize,
    pub gamma: f64,
}

impl ValueNet {
    pub fn new(schema: u32, state_dim: usize, hidden: &[usize], gamma: f64, rng: &mut Rng) -> Result<Self> {
        let mut dims = vec![state_dim + Plan::DIM];
        dims.extend(hidden);
        dims.push(1);
        Self::from_net(NetworkParams::new(&dims, rng)?, schema, state_dim, gamma)
    }

    pub fn for_task(kind: TaskKind, hidden: &[usize], gamma: f64, rng: &mut Rng) -> Result<Self> {
        Self::new(kind.schema_id(), state_dim(kind)?, hidden, gamma, rng)
    }

    pub fn from_net(net: NetworkParams, schema: u32, state_dim: usize, gamma: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::usage(format!("discount {gamma} outside [0, 1)")));
        }
        check_dim("value network input", state_dim + Plan::DIM, net.input_dim())?;
        check_dim("value network output", 1, net.output_dim())?;
        Ok(Self { net, schema, state_dim, gamma })
    }

    pub fn q_max(&self) -> f64 {
        1.0 / (1.0 - self.gamma)
    }

    pub fn clamp(&self, q: f64) -> f64 {
        q.clamp(0.0, self.q_max())
    }

    /// Rejects a state whose length does not match this net's schema.
    pub fn check_state(&self, state: &[f64]) -> Result<()> {
        if state.len() != self.state_dim {
            return Err(Error::usage(format!(
                "state of length {} does not match value schema {} (state dim {})",
                state.len(),
                self.schema,
                self.state_dim
            )));
        }
        Ok(())
    }

    pub fn input(&self, state: &[f64], plan: &[f64]) -> Vec<f64> {
        state.iter().chain(plan).copied().collect()
    }

    /// Raw (unclamped) network output.
    pub fn raw(&self, state: &[f64], plan: &Plan) -> Result<f64> {
        self.check_state(state)?;
        Ok(self.net.forward(&self.input(state, &plan.to_vec()))?[0])
    }

    pub fn eval(&self, state: &[f64], plan: &Plan) -> Result<f64> {
        Ok(self.clamp(self.raw(state, plan)?))
    }

    /// Clamped values of many plans from one state; the state's first-layer
    /// contribution is computed once.
    pub fn eval_many(&self, state: &[f64], plans: &[Plan]) -> Result<Vec<f64>> {
        let mut m = Array2::zeros((plans.len(), Plan::DIM));
        for (mut row, p) in m.axis_iter_mut(Axis(0)).zip(plans) {
            row.assign(&ndarray::aview1(&p.to_vec()));
        }
        self.eval_rows(state, m.view())
    }

    /// As [`eval_many`](Self::eval_many) with plans given as rows.
    pub fn eval_rows(&self, state: &[f64], plans: ArrayView2<f64>) -> Result<Vec<f64>> {
        self.check_state(state)?;
        check_dim("plan", Plan::DIM, plans.ncols())?;
        if plans.nrows() == 0 {
            return Ok(Vec::new());
        }
        let out = self.net.forward_shared(state, plans, SharedSide::Front)?;
        Ok(out.column(0).iter().map(|&q| self.clamp(q)).collect())
    }

    pub fn quantize_f32(&mut self) {
        self.net.quantize_f32();
    }
}

/// Free-function form of [`ValueNet::eval`].
pub fn vf_eval(net: &ValueNet, state: &[f64], plan: &Plan) -> Result<f64> {
    net.eval(state, plan)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Sidecar {
    schema: u32,
    state_dim: usize,
    gamma: f64,
}

fn with_suffix(stem: &Path, suffix: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Writes `<stem>.vpnn` and the `<stem>.json` sidecar.
pub fn save(net: &ValueNet, stem: impl AsRef<Path>) -> Result<()> {
    let stem = stem.as_ref();
    let side = Sidecar { schema: net.schema, state_dim: net.state_dim, gamma: net.gamma };
    let json = serde_json::to_string_pretty(&side).map_err(|e| Error::format(e.to_string()))?;
    fs::write(with_suffix(stem, ".json"), json)?;
    vpnn::save(&net.net, with_suffix(stem, ".vpnn"))
}

/// Loads a value net and refuses it unless its schema equals `expected`.
pub fn load(stem: impl AsRef<Path>, expected: u32) -> Result<ValueNet> {
    let stem = stem.as_ref();
    let text = fs::read_to_string(with_suffix(stem, ".json"))?;
    let side: Sidecar =
        serde_json::from_str(&text).map_err(|e| Error::format(format!("value-net sidecar: {e}")))?;
    if side.schema != expected {
        return Err(Error::SchemaMismatch { checkpoint: side.schema, task: expected });
    }
    let net = vpnn::load(with_suffix(stem, ".vpnn"))?;
    ValueNet::from_net(net, side.schema, side.state_dim, side.gamma)
        .map_err(|e| Error::format(format!("value-net checkpoint inconsistent: {e}")))
}
