use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vf::argmax;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Selection {
    Argmax,
    /// First candidate whose score reaches `beta * Q_max`, else the argmax.
    Threshold { beta: f64 },
}

impl Selection {
    pub fn validate(&self) -> Result<()> {
        if let Selection::Threshold { beta } = *self {
            if !(beta > 0.0 && beta <= 1.0) {
                return Err(Error::usage(format!("threshold beta {beta} outside (0, 1]")));
            }
        }
        Ok(())
    }
}

/// Returns `(index, threshold met)`.
pub fn threshold_select(scores: &[f64], beta: f64, q_max: f64) -> Result<(usize, bool)> {
    if scores.is_empty() {
        return Err(Error::usage("no candidate plans"));
    }
    let bar = beta * q_max;
    match scores.iter().position(|&s| s >= bar) {
        Some(i) => Ok((i, true)),
        None => Ok((argmax(scores), false)),
    }
}

pub fn select(scores: &[f64], selection: Selection, q_max: f64) -> Result<(usize, Option<bool>)> {
    match selection {
        Selection::Argmax => {
            if scores.is_empty() {
                return Err(Error::usage("no candidate plans"));
            }
            Ok((argmax(scores), None))
        }
        Selection::Threshold { beta } => threshold_select(scores, beta, q_max).map(|(i, m)| (i, Some(m))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_cases() {
        assert_eq!(threshold_select(&[3.9, 2.0], 0.95, 4.0).unwrap(), (0, true));
        assert_eq!(threshold_select(&[1.0, 2.0, 1.5], 0.95, 4.0).unwrap(), (1, false));
        assert_eq!(threshold_select(&[0.0, 2.0], 0.0, 4.0).unwrap(), (0, true));
        assert!(threshold_select(&[], 0.5, 4.0).is_err());
    }
}
