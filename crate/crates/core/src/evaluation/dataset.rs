use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EvaluationError;
use crate::construction::parse_output;
use crate::prompts::PromptCatalog;
use crate::providers::{ChatRequest, LlmProvider, ProviderError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Hallucinated,
    Factual,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<String>,
    pub statement: String,
    pub label: Label,
}

/// Parses line-delimited records. Blank lines are skipped; ids must be
/// unique and statements non-blank.
pub fn parse_dataset(text: &str) -> Result<Vec<DatasetRecord>, EvaluationError> {
    let mut records = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| EvaluationError::Parse {
            line: line_no,
            message,
        };
        let record: DatasetRecord = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        if record.statement.trim().is_empty() {
            return Err(err("empty statement".into()));
        }
        if !ids.insert(record.id.clone()) {
            return Err(err(format!("duplicate record id {:?}", record.id)));
        }
        records.push(record);
    }
    Ok(records)
}

pub fn load_dataset(path: &Path) -> Result<Vec<DatasetRecord>, EvaluationError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| EvaluationError::Io(format!("{}: {e}", path.display())))?;
    parse_dataset(&text)
}

/// Rewrites the statement to stand alone, using the `Output:` line of the
/// rewrite prompt. Records without context, and unusable replies, pass
/// through unchanged.
pub fn decontextualize(
    record: &DatasetRecord,
    llm: &dyn LlmProvider,
    catalog: &PromptCatalog,
) -> Result<DatasetRecord, ProviderError> {
    let Some(context) = record.context.as_deref() else {
        return Ok(record.clone());
    };
    let prompt = catalog
        .render(
            "decontextualize",
            &[("context", context), ("statement", &record.statement)],
        )
        .map_err(|e| ProviderError::InvalidRequest(e.to_string()))?;
    let reply = match llm.chat(&ChatRequest::greedy("decontextualize", prompt, 256)) {
        Ok(response) => response.first_text()?.to_owned(),
        Err(e) if e.is_content_error() => {
            log::warn!("record {}: decontextualization skipped: {e}", record.id);
            return Ok(record.clone());
        }
        Err(e) => return Err(e),
    };
    match parse_output(&reply) {
        Some(statement) => Ok(DatasetRecord {
            statement,
            ..record.clone()
        }),
        None => {
            log::warn!(
                "record {}: rewrite reply has no `Output:` line; statement kept",
                record.id
            );
            Ok(record.clone())
        }
    }
}
