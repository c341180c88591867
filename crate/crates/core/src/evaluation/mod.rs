//! Datasets, predictions and the detection metric suite.

mod dataset;
mod metrics;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dataset::{decontextualize, load_dataset, parse_dataset, DatasetRecord, Label};
pub use metrics::{auc_pr, auroc, best_f1, F1Point};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvaluationError {
    #[error("need both classes, got {positives} positive and {negatives} negative")]
    DegenerateClasses { positives: usize, negatives: usize },
    #[error("no positive (hallucinated) items")]
    NoPositives,
    #[error("{scores} scores but {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("score {0} is not a number")]
    InvalidScore(f64),
    #[error("no prediction for record {0:?}")]
    MissingPrediction(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("I/O error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Prediction {
    pub record_id: String,
    pub posterior_true: f64,
    /// Probability the statement is hallucinated.
    pub detection_score: f64,
}

impl Prediction {
    pub fn from_posterior(record_id: impl Into<String>, posterior_true: f64) -> Self {
        Self {
            record_id: record_id.into(),
            posterior_true,
            detection_score: 1.0 - posterior_true,
        }
    }
}

pub fn parse_predictions(text: &str) -> Result<Vec<Prediction>, EvaluationError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| EvaluationError::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// One JSON object per line, newline-terminated.
pub fn predictions_to_jsonl(predictions: &[Prediction]) -> String {
    predictions
        .iter()
        .map(|p| serde_json::to_string(p).expect("prediction serializes") + "\n")
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationReport {
    pub auroc: f64,
    pub auc_pr: f64,
    /// May be infinite; written as `"-inf"` / `"+inf"`.
    #[serde(with = "threshold_repr")]
    pub best_threshold: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub n_positive: usize,
    pub n_negative: usize,
}

impl EvaluationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

mod threshold_repr {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Finite(f64),
        Named(String),
    }

    pub fn serialize<S: Serializer>(value: &f64, s: S) -> Result<S::Ok, S::Error> {
        match *value {
            v if v == f64::INFINITY => Repr::Named("+inf".into()),
            v if v == f64::NEG_INFINITY => Repr::Named("-inf".into()),
            v => Repr::Finite(v),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Finite(v) => Ok(v),
            Repr::Named(name) => match name.as_str() {
                "+inf" | "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(serde::de::Error::custom(format!("bad threshold {other:?}"))),
            },
        }
    }
}

/// Scores every labelled record; unknown-labelled records are ignored.
pub fn evaluate(
    predictions: &[Prediction],
    records: &[DatasetRecord],
) -> Result<EvaluationReport, EvaluationError> {
    let by_id: HashMap<&str, &Prediction> = predictions
        .iter()
        .map(|p| (p.record_id.as_str(), p))
        .collect();
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for record in records.iter().filter(|r| r.label != Label::Unknown) {
        let prediction = by_id
            .get(record.id.as_str())
            .ok_or_else(|| EvaluationError::MissingPrediction(record.id.clone()))?;
        scores.push(prediction.detection_score);
        labels.push(record.label == Label::Hallucinated);
    }
    let n_positive = labels.iter().filter(|l| **l).count();
    let n_negative = labels.len() - n_positive;
    if n_positive == 0 || n_negative == 0 {
        return Err(EvaluationError::DegenerateClasses {
            positives: n_positive,
            negatives: n_negative,
        });
    }
    let best = best_f1(&scores, &labels)?;
    Ok(EvaluationReport {
        auroc: auroc(&scores, &labels)?,
        auc_pr: auc_pr(&scores, &labels)?,
        best_threshold: best.threshold,
        f1: best.f1,
        accuracy: best.accuracy,
        n_positive,
        n_negative,
    })
}
