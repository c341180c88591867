//! Histogram estimates of the emission table from labelled confidence
//! scores.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hmt::{bin_index, check_bin_edges, EmissionTable, InferenceError};

/// Correction-node point masses. Not estimated from data.
pub const DEFAULT_CORRECTION_TRUE: f64 = 0.8;
pub const DEFAULT_CORRECTION_FALSE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledScore {
    pub score: f64,
    /// `true` when the statement is factually correct.
    pub label: bool,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimationError {
    #[error("no {0}-labelled scores and no smoothing")]
    InsufficientData(&'static str),
    #[error("score {0} is outside [0, 1]")]
    ScoreOutOfRange(f64),
    #[error("smoothing must be a finite non-negative number, got {0}")]
    InvalidSmoothing(f64),
    #[error(transparent)]
    Table(#[from] InferenceError),
}

/// `p[b] = (count_b + smoothing) / (N + smoothing · B)` for each label.
pub fn estimate_emission(
    data: &[LabeledScore],
    bin_edges: &[f64],
    smoothing: f64,
) -> Result<EmissionTable, EstimationError> {
    check_bin_edges(bin_edges)?;
    if !(smoothing.is_finite() && smoothing >= 0.0) {
        return Err(EstimationError::InvalidSmoothing(smoothing));
    }
    let bins = bin_edges.len() - 1;
    let mut counts_true = vec![0usize; bins];
    let mut counts_false = vec![0usize; bins];
    for item in data {
        if !(0.0..=1.0).contains(&item.score) {
            return Err(EstimationError::ScoreOutOfRange(item.score));
        }
        let bin = bin_index(bin_edges, item.score);
        if item.label {
            counts_true[bin] += 1;
        } else {
            counts_false[bin] += 1;
        }
    }
    let p_true =
        normalize(&counts_true, smoothing).ok_or(EstimationError::InsufficientData("true"))?;
    let p_false =
        normalize(&counts_false, smoothing).ok_or(EstimationError::InsufficientData("false"))?;
    Ok(EmissionTable::new(
        bin_edges.to_vec(),
        p_true,
        p_false,
        DEFAULT_CORRECTION_TRUE,
        DEFAULT_CORRECTION_FALSE,
    )?)
}

fn normalize(counts: &[usize], smoothing: f64) -> Option<Vec<f64>> {
    let total = counts.iter().sum::<usize>() as f64 + smoothing * counts.len() as f64;
    if total == 0.0 {
        return None;
    }
    Some(
        counts
            .iter()
            .map(|c| (*c as f64 + smoothing) / total)
            .collect(),
    )
}
