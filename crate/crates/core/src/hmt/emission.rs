use std::path::Path;

use serde::{Deserialize, Serialize};

use super::InferenceError;
use crate::tree::Strategy;

/// Bin edges of the default confidence histogram.
pub const DEFAULT_BIN_EDGES: [f64; 6] = [0.0, 0.2, 0.4, 0.7, 0.9, 1.0];

const SUM_TOLERANCE: f64 = 1e-12;

pub fn default_bins() -> Vec<f64> {
    DEFAULT_BIN_EDGES.to_vec()
}

/// Binned emission distributions `p(S | Z)` for both truth values, plus the
/// point masses used for correction nodes, whose confidence is pinned to 1.
///
/// Bins are half-open `[lo, hi)` except the last, which is closed at 1.0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmissionTable {
    bin_edges: Vec<f64>,
    p_true: Vec<f64>,
    p_false: Vec<f64>,
    correction_true: f64,
    correction_false: f64,
}

impl Default for EmissionTable {
    /// The histogram estimated for gpt-3.5-turbo on held-out biography data.
    fn default() -> Self {
        Self {
            bin_edges: default_bins(),
            p_true: vec![0.12, 0.05, 0.10, 0.08, 0.65],
            p_false: vec![0.30, 0.10, 0.15, 0.13, 0.32],
            correction_true: 0.8,
            correction_false: 0.2,
        }
    }
}

impl EmissionTable {
    pub fn new(
        bin_edges: Vec<f64>,
        p_true: Vec<f64>,
        p_false: Vec<f64>,
        correction_true: f64,
        correction_false: f64,
    ) -> Result<Self, InferenceError> {
        let table = Self {
            bin_edges,
            p_true,
            p_false,
            correction_true,
            correction_false,
        };
        table.check()?;
        Ok(table)
    }

    pub fn check(&self) -> Result<(), InferenceError> {
        check_bin_edges(&self.bin_edges)?;
        let bins = self.bin_count();
        for (name, row) in [("p_true", &self.p_true), ("p_false", &self.p_false)] {
            if row.len() != bins {
                return Err(InferenceError::InvalidTable(format!(
                    "{name} has {} entries for {bins} bins",
                    row.len()
                )));
            }
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(InferenceError::InvalidTable(format!(
                    "{name} has a negative or non-finite entry"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > SUM_TOLERANCE {
                return Err(InferenceError::InvalidTable(format!(
                    "{name} sums to {sum}, not 1"
                )));
            }
        }
        for (name, p) in [
            ("correction_true", self.correction_true),
            ("correction_false", self.correction_false),
        ] {
            if !(p > 0.0 && p <= 1.0) {
                return Err(InferenceError::InvalidTable(format!(
                    "{name} = {p} is outside (0, 1]"
                )));
            }
        }
        Ok(())
    }

    pub fn bin_edges(&self) -> &[f64] {
        &self.bin_edges
    }

    pub fn p_true(&self) -> &[f64] {
        &self.p_true
    }

    pub fn p_false(&self) -> &[f64] {
        &self.p_false
    }

    pub fn correction_true(&self) -> f64 {
        self.correction_true
    }

    pub fn correction_false(&self) -> f64 {
        self.correction_false
    }

    pub fn bin_count(&self) -> usize {
        self.bin_edges.len() - 1
    }

    /// `(p(S | Z=T), p(S | Z=F))` for a node with the given score and strategy.
    pub fn lookup(&self, confidence: f64, strategy: Strategy) -> (f64, f64) {
        if strategy == Strategy::Correction {
            return (self.correction_true, self.correction_false);
        }
        let bin = bin_index(&self.bin_edges, confidence);
        (self.p_true[bin], self.p_false[bin])
    }

    /// Same table with the truth labels exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            bin_edges: self.bin_edges.clone(),
            p_true: self.p_false.clone(),
            p_false: self.p_true.clone(),
            correction_true: self.correction_false,
            correction_false: self.correction_true,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, InferenceError> {
        let table: Self =
            serde_json::from_str(text).map_err(|e| InferenceError::InvalidTable(e.to_string()))?;
        table.check()?;
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self, InferenceError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| InferenceError::InvalidTable(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let mut text =
            serde_json::to_string_pretty(self).expect("table serialization is infallible");
        text.push('\n');
        text
    }
}

pub fn check_bin_edges(edges: &[f64]) -> Result<(), InferenceError> {
    if edges.len() < 2 {
        return Err(InferenceError::InvalidTable(
            "need at least two bin edges".into(),
        ));
    }
    if edges[0] != 0.0 || edges[edges.len() - 1] != 1.0 {
        return Err(InferenceError::InvalidTable(
            "bin edges must start at 0.0 and end at 1.0".into(),
        ));
    }
    if edges.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less)) {
        return Err(InferenceError::InvalidTable(
            "bin edges must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Index of the bin containing `score`. Scores outside `[0, 1]` land in the
/// nearest end bin.
pub fn bin_index(edges: &[f64], score: f64) -> usize {
    let bins = edges.len() - 1;
    // number of interior edges <= score
    edges[1..bins].partition_point(|edge| *edge <= score)
}
