use std::path::Path;

use btprop_core::construction::ConstructionError;
use btprop_core::estimation::EstimationError;
use btprop_core::evaluation::EvaluationError;
use btprop_core::hmt::InferenceError;
use btprop_core::pipeline::DetectError;
use btprop_core::prompts::PromptError;
use btprop_core::providers::ProviderError;
use btprop_core::tree::ParseError;
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}: {source}")]
    TreeParse { path: String, source: ParseError },
    #[error("{path}: {source}")]
    Inference {
        path: String,
        source: InferenceError,
    },
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error(transparent)]
    Evaluation(#[from] EvaluationError),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Construction(#[from] ConstructionError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("maximum deviation {max_deviation:e} exceeds tolerance {tolerance:e}")]
    OracleDeviation { max_deviation: f64, tolerance: f64 },
}

impl CliError {
    pub fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }

    fn provider_error(&self) -> Option<&ProviderError> {
        let construction = match self {
            CliError::Provider(e) => return Some(e),
            CliError::Construction(e) => e,
            CliError::Detect(DetectError::Construction { source, .. }) => source,
            _ => return None,
        };
        match construction {
            ConstructionError::Provider(e) => Some(e),
            _ => None,
        }
    }

    /// Name of the underlying module error.
    pub fn name(&self) -> &'static str {
        if let Some(e) = self.provider_error() {
            return e.kind();
        }
        match self {
            CliError::Config(_) => "ConfigError",
            CliError::Io { .. } => "IoError",
            CliError::TreeParse { .. } => "ParseError",
            CliError::Inference { source, .. }
            | CliError::Detect(DetectError::Inference { source, .. }) => inference_name(source),
            CliError::Estimation(e) => match e {
                EstimationError::InsufficientData(_) => "InsufficientData",
                EstimationError::ScoreOutOfRange(_) => "ScoreOutOfRange",
                EstimationError::InvalidSmoothing(_) => "InvalidSmoothing",
                EstimationError::Table(e) => inference_name(e),
            },
            CliError::Evaluation(e) => match e {
                EvaluationError::DegenerateClasses { .. } => "DegenerateClasses",
                EvaluationError::NoPositives => "NoPositives",
                EvaluationError::LengthMismatch { .. } => "LengthMismatch",
                EvaluationError::InvalidScore(_) => "InvalidScore",
                EvaluationError::MissingPrediction(_) => "MissingPrediction",
                EvaluationError::Parse { .. } => "ParseError",
                EvaluationError::Io(_) => "IoError",
            },
            CliError::Detect(DetectError::Construction { source, .. })
            | CliError::Construction(source) => source.kind(),
            CliError::Prompt(_) => "PromptError",
            CliError::OracleDeviation { .. } => "OracleDeviation",
            CliError::Provider(e) => e.kind(),
        }
    }

    /// Machine-readable form printed on stderr.
    pub fn to_json(&self) -> serde_json::Value {
        let mut value = json!({"error": self.name(), "message": self.to_string()});
        if let Some(ProviderError::MissingFixture { digest }) = self.provider_error() {
            value["digest"] = json!(digest);
        }
        if let CliError::Detect(e) = self {
            value["record_id"] = json!(e.record_id());
        }
        value
    }
}

fn inference_name(e: &InferenceError) -> &'static str {
    match e {
        InferenceError::InvalidTable(_) => "InvalidTable",
        InferenceError::InvalidTransition { .. } => "InvalidTransition",
        InferenceError::InvalidPrior(_) => "InvalidPrior",
        InferenceError::InvalidTree(_) => "InvalidTree",
        InferenceError::DegenerateEvidence(_) => "DegenerateEvidence",
        InferenceError::EmptyGroup => "EmptyGroup",
        InferenceError::TooLarge { .. } => "TooLarge",
    }
}
