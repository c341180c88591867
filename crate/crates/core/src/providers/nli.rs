use std::sync::Arc;
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{ChatRequest, LlmProvider, NliProvider, NliVerdict, ProviderError};
use crate::prompts::PromptCatalog;

/// Maps a free-text label to a verdict. Accepts the usual spellings
/// (`entailment`, `ENTAIL`, `contradiction.`, ...) and nothing else.
pub fn parse_nli_label(label: &str) -> Result<NliVerdict, ProviderError> {
    let word = label
        .split_whitespace()
        .next()
        .unwrap_or("")
        .trim_matches(|c: char| !c.is_ascii_alphabetic())
        .to_ascii_lowercase();
    if word.starts_with("entail") {
        Ok(NliVerdict::Entail)
    } else if word == "neutral" {
        Ok(NliVerdict::Neutral)
    } else if word.starts_with("contradict") {
        Ok(NliVerdict::Contradict)
    } else {
        Err(ProviderError::UnmappableLabel(
            label.trim().chars().take(80).collect(),
        ))
    }
}

/// NLI by prompting a chat model with the catalog's `nli` template.
pub struct PromptNli {
    llm: Arc<dyn LlmProvider>,
    catalog: Arc<PromptCatalog>,
}

impl PromptNli {
    pub fn new(llm: Arc<dyn LlmProvider>, catalog: Arc<PromptCatalog>) -> Self {
        Self { llm, catalog }
    }
}

impl NliProvider for PromptNli {
    fn nli(&self, premise: &str, hypothesis: &str) -> Result<NliVerdict, ProviderError> {
        let prompt = self
            .catalog
            .render("nli", &[("premise", premise), ("hypothesis", hypothesis)])
            .map_err(|e| ProviderError::InvalidRequest(e.to_string()))?;
        let response = self.llm.chat(&ChatRequest::greedy("nli", prompt, 8))?;
        parse_nli_label(response.first_text()?)
    }
}

/// Posts `{"premise", "hypothesis"}` to an endpoint answering `{"label"}`.
pub struct RemoteNli {
    url: String,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct LabelReply {
    label: String,
}

impl RemoteNli {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Result<Self, ProviderError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        Ok(Self {
            url: url.into(),
            client,
        })
    }
}

impl NliProvider for RemoteNli {
    fn nli(&self, premise: &str, hypothesis: &str) -> Result<NliVerdict, ProviderError> {
        let response = self
            .client
            .post(&self.url)
            .json(&json!({"premise": premise, "hypothesis": hypothesis}))
            .send()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        let body = response
            .text()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        match status {
            200..=299 => {}
            401 | 403 => return Err(ProviderError::AuthFailure(body)),
            429 => return Err(ProviderError::RateLimited(body)),
            _ => return Err(ProviderError::Http { status, body }),
        }
        let reply: LabelReply = serde_json::from_str(&body)
            .map_err(|e| ProviderError::MalformedResponse(e.to_string()))?;
        parse_nli_label(&reply.label)
    }
}
