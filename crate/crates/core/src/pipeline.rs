//! End-to-end detection: optional rewrite, tree construction, inference.

use rayon::prelude::*;
use thiserror::Error;

use crate::construction::{ConstructionError, TreeBuilder};
use crate::evaluation::{decontextualize, DatasetRecord, Prediction};
use crate::hmt::{posterior_root, EmissionTable, InferenceError, TransitionParams};
use crate::tree::{BeliefTree, Statement};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DetectError {
    #[error("record {record_id}: {source}")]
    Construction {
        record_id: String,
        source: ConstructionError,
    },
    #[error("record {record_id}: {source}")]
    Inference {
        record_id: String,
        source: InferenceError,
    },
}

impl DetectError {
    pub fn record_id(&self) -> &str {
        match self {
            DetectError::Construction { record_id, .. }
            | DetectError::Inference { record_id, .. } => record_id,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub prediction: Prediction,
    pub tree: BeliefTree,
}

pub struct Detector<'a> {
    pub builder: &'a TreeBuilder,
    pub table: &'a EmissionTable,
    pub transition: TransitionParams,
    pub prior_true: f64,
    pub decontextualize: bool,
}

impl Detector<'_> {
    pub fn detect_one(&self, record: &DatasetRecord) -> Result<Detection, DetectError> {
        let construction = |source| DetectError::Construction {
            record_id: record.id.clone(),
            source,
        };
        let statement = if self.decontextualize {
            decontextualize(record, self.builder.llm().as_ref(), self.builder.catalog())
                .map_err(|e| construction(e.into()))?
                .statement
        } else {
            record.statement.clone()
        };
        let tree = self
            .builder
            .build(Statement::with_source(statement, &record.id))
            .map_err(construction)?;
        let result = posterior_root(&tree, self.table, &self.transition, self.prior_true).map_err(
            |source| DetectError::Inference {
                record_id: record.id.clone(),
                source,
            },
        )?;
        Ok(Detection {
            prediction: Prediction::from_posterior(&record.id, result.posterior_true),
            tree,
        })
    }

    /// Records fan out over the builder's pool; results keep input order and
    /// the first failure in input order is returned.
    pub fn detect_all(&self, records: &[DatasetRecord]) -> Result<Vec<Detection>, DetectError> {
        let outcomes: Vec<Result<Detection, DetectError>> = self
            .builder
            .install(|| records.par_iter().map(|r| self.detect_one(r)).collect());
        outcomes.into_iter().collect()
    }
}
