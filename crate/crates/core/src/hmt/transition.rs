use serde::{Deserialize, Serialize};

use super::InferenceError;
use crate::tree::Relation;

/// `p(Z_child | Z_parent)` as a row-stochastic 2x2 matrix:
/// `rows[parent][child]`, index 0 = true, 1 = false.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionMatrix {
    pub rows: [[f64; 2]; 2],
}

impl TransitionMatrix {
    pub fn new(given_true: [f64; 2], given_false: [f64; 2]) -> Self {
        Self {
            rows: [given_true, given_false],
        }
    }

    /// `p(Z_child = child | Z_parent = parent)`.
    pub fn prob(&self, parent: bool, child: bool) -> f64 {
        self.rows[usize::from(!parent)][usize::from(!child)]
    }

    /// The matrix seen after relabelling true as false and vice versa.
    pub fn mirrored(&self) -> Self {
        let [[tt, tf], [ft, ff]] = self.rows;
        Self {
            rows: [[ff, ft], [tf, tt]],
        }
    }
}

/// Maps an edge relation to its transition matrix. Implemented by
/// [`TransitionParams`]; custom models are useful for testing.
pub trait TransitionModel {
    fn matrix(&self, relation: Relation) -> TransitionMatrix;
}

/// The `(p_t, p_f)` pair used wherever a parent state leaves the child's
/// truth undetermined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionParams {
    p_t: f64,
    p_f: f64,
}

impl Default for TransitionParams {
    fn default() -> Self {
        Self { p_t: 0.5, p_f: 0.5 }
    }
}

impl TransitionParams {
    pub fn new(p_t: f64, p_f: f64) -> Result<Self, InferenceError> {
        if !(p_t >= 0.0 && p_f >= 0.0) || (p_t + p_f - 1.0).abs() > 1e-12 {
            return Err(InferenceError::InvalidTransition { p_t, p_f });
        }
        Ok(Self { p_t, p_f })
    }

    /// `p_f` is taken as `1 - p_t`.
    pub fn from_p_t(p_t: f64) -> Result<Self, InferenceError> {
        Self::new(p_t, 1.0 - p_t)
    }

    pub fn p_t(&self) -> f64 {
        self.p_t
    }

    pub fn p_f(&self) -> f64 {
        self.p_f
    }
}

impl TransitionModel for TransitionParams {
    fn matrix(&self, relation: Relation) -> TransitionMatrix {
        let open = [self.p_t, self.p_f];
        match relation {
            Relation::Equivalence => TransitionMatrix::new([1.0, 0.0], [0.0, 1.0]),
            Relation::Entailment => TransitionMatrix::new([1.0, 0.0], open),
            Relation::ReverseEntailment => TransitionMatrix::new(open, [0.0, 1.0]),
            Relation::Contradiction => TransitionMatrix::new([0.0, 1.0], open),
        }
    }
}
