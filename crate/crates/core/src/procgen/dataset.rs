//! `VPDS` dataset files.
//!
//! ```text
//! "VPDS" | version u32 | record count u64 | record dim u32 | schema id u32 |
//! records: f32 x record dim, little-endian
//! ```
//!
//! A record is `[plan 12 | conditioning | task state | success | return]`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::footworld::{Plan, TaskKind, COND_DIM};
use crate::nn::checkpoint::Reader;

pub const MAGIC: &[u8; 4] = b"VPDS";
pub const VERSION: u32 = 1;

/// One labeled 4-footstep window. Stored in `f32`, the on-disk precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPlanRecord {
    pub plan: [f32; Plan::DIM],
    pub cond: Vec<f32>,
    pub state: Vec<f32>,
    pub success: bool,
    pub ret: f32,
}

fn to_f32(v: &[f64]) -> Vec<f32> {
    v.iter().map(|&x| x as f32).collect()
}

impl LabeledPlanRecord {
    pub fn new(plan: &Plan, cond: &[f64], state: &[f64], success: bool, ret: f64) -> Self {
        let mut p = [0f32; Plan::DIM];
        for (d, s) in p.iter_mut().zip(plan.to_vec()) {
            *d = s as f32;
        }
        Self { plan: p, cond: to_f32(cond), state: to_f32(state), success, ret: ret as f32 }
    }

    pub fn plan_f64(&self) -> Vec<f64> {
        self.plan.iter().map(|&v| f64::from(v)).collect()
    }

    pub fn cond_f64(&self) -> Vec<f64> {
        self.cond.iter().map(|&v| f64::from(v)).collect()
    }

    pub fn state_f64(&self) -> Vec<f64> {
        self.state.iter().map(|&v| f64::from(v)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub schema: TaskKind,
    pub state_dim: usize,
    pub records: Vec<LabeledPlanRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetStats {
    pub records: usize,
    pub successes: usize,
    pub failures: usize,
}

impl Dataset {
    pub fn record_dim(&self) -> usize {
        Plan::DIM + COND_DIM + self.state_dim + 2
    }

    pub fn stats(&self) -> DatasetStats {
        let successes = self.records.iter().filter(|r| r.success).count();
        DatasetStats { records: self.records.len(), successes, failures: self.records.len() - successes }
    }

    pub fn merge(mut self, other: Dataset) -> Result<Dataset> {
        if self.schema != other.schema || self.state_dim != other.state_dim {
            return Err(Error::Dataset("cannot merge datasets with different schemas".into()));
        }
        self.records.extend(other.records);
        Ok(self)
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let dim = self.record_dim();
        let mut out = Vec::with_capacity(24 + 4 * dim * self.records.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.records.len() as u64).to_le_bytes());
        out.extend_from_slice(&(dim as u32).to_le_bytes());
        out.extend_from_slice(&self.schema.schema_id().to_le_bytes());
        for (i, r) in self.records.iter().enumerate() {
            if r.cond.len() != COND_DIM || r.state.len() != self.state_dim {
                return Err(Error::Dataset(format!("record {i} has inconsistent dimensions")));
            }
            let flags = [if r.success { 1.0f32 } else { 0.0 }, r.ret];
            for v in r.plan.iter().chain(&r.cond).chain(&r.state).chain(&flags) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        if r.take(4)? != MAGIC {
            return Err(Error::format("bad magic, expected VPDS"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::format(format!("unsupported VPDS version {version}")));
        }
        let count = r.u64()?;
        let dim = r.u32()? as usize;
        let schema = TaskKind::from_schema_id(r.u32()?)?;
        let base = Plan::DIM + COND_DIM + 2;
        let state_dim = dim
            .checked_sub(base)
            .ok_or_else(|| Error::format(format!("record dimension {dim} smaller than {base}")))?;
        let expected = crate::footworld::state_dim(schema).unwrap_or(0);
        if state_dim != expected {
            return Err(Error::format(format!("record dimension {dim} does not match schema {schema}")));
        }
        let payload = (count as u128) * (dim as u128) * 4;
        if payload != (bytes.len() - 24) as u128 {
            return Err(Error::format("record payload size does not match header"));
        }
        let mut records = Vec::with_capacity(count as usize);
        let mut buf = vec![0f32; dim];
        for _ in 0..count {
            for v in buf.iter_mut() {
                *v = r.f32()?;
            }
            let mut plan = [0f32; Plan::DIM];
            plan.copy_from_slice(&buf[..Plan::DIM]);
            let cond = buf[Plan::DIM..Plan::DIM + COND_DIM].to_vec();
            let state = buf[Plan::DIM + COND_DIM..dim - 2].to_vec();
            let success = match buf[dim - 2] {
                0.0 => false,
                1.0 => true,
                other => return Err(Error::format(format!("invalid success flag {other}"))),
            };
            records.push(LabeledPlanRecord { plan, cond, state, success, ret: buf[dim - 1] });
        }
        r.finish()?;
        Ok(Self { schema, state_dim, records })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let bytes = self.encode()?;
        let f = fs::File::create(path.as_ref())
            .map_err(|e| Error::Dataset(format!("{}: {e}", path.as_ref().display())))?;
        let mut w = BufWriter::new(f);
        w.write_all(&bytes).and_then(|_| w.flush()).map_err(|e| Error::Dataset(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bytes =
            fs::read(path.as_ref()).map_err(|e| Error::Dataset(format!("{}: {e}", path.as_ref().display())))?;
        Self::decode(&bytes)
    }
}
