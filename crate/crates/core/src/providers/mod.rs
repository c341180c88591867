//! Language-model and NLI backends behind two small traits.
//!
//! [`LlmProvider`] covers chat generation and first-token candidate
//! probabilities; [`NliProvider`] returns an entailment verdict for an
//! ordered premise/hypothesis pair. Concrete backends:
//!
//! - [`OpenAiCompatible`]: any server speaking the chat-completions wire format
//! - [`ReplayProvider`]: serves recorded fixtures and never touches the network
//! - [`CachedProvider`]: wraps another provider with a file-per-digest cache
//!   that doubles as a fixture recorder
//! - [`PromptNli`] / [`RemoteNli`]: NLI over an LLM prompt or a remote endpoint
//! - [`FnProvider`]: a closure, for scripted backends in tests and fixture generation

mod nli;
mod openai;
mod scripted;
mod store;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use nli::{parse_nli_label, PromptNli, RemoteNli};
pub use openai::{OpenAiCompatible, OpenAiConfig, DEFAULT_KEY_ENV};
pub use scripted::{ScriptedDecomposition, ScriptedProvider, ScriptedWorld};
pub use store::{CacheKey, CachedProvider, FixtureRecord, FixtureStore, ReplayProvider};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProviderError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("authentication failed: {0}")]
    AuthFailure(String),
    #[error("rate limited: {0}")]
    RateLimited(String),
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("no fixture recorded for request digest {digest}")]
    MissingFixture { digest: String },
    #[error("unmappable NLI label {0:?}")]
    UnmappableLabel(String),
    #[error("neither candidate token has probability mass")]
    MissingTokens,
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl ProviderError {
    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            ProviderError::Transport(_) => "Transport",
            ProviderError::AuthFailure(_) => "AuthFailure",
            ProviderError::RateLimited(_) => "RateLimited",
            ProviderError::Http { .. } => "Http",
            ProviderError::MalformedResponse(_) => "MalformedResponse",
            ProviderError::MissingFixture { .. } => "MissingFixture",
            ProviderError::UnmappableLabel(_) => "UnmappableLabel",
            ProviderError::MissingTokens => "MissingTokens",
            ProviderError::InvalidRequest(_) => "InvalidRequest",
            ProviderError::Io(_) => "Io",
        }
    }

    /// True when the backend answered but the answer was unusable. Such
    /// failures only cost the statement being generated; anything else
    /// (transport, auth, missing fixtures) aborts the run.
    pub fn is_content_error(&self) -> bool {
        matches!(
            self,
            ProviderError::MalformedResponse(_)
                | ProviderError::UnmappableLabel(_)
                | ProviderError::MissingTokens
        )
    }
}

/// Who answers a request; part of every cache key.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProviderIdentity {
    pub backend: String,
    pub model: String,
}

impl ProviderIdentity {
    pub fn new(backend: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            backend: backend.into(),
            model: model.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub template_name: String,
    pub rendered_prompt: String,
    pub temperature: f64,
    pub sample_count: u32,
    pub max_tokens: u32,
    /// Report first-position probabilities of these two tokens.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub want_token_probs: Option<(String, String)>,
}

impl ChatRequest {
    /// One greedy completion.
    pub fn greedy(
        template_name: impl Into<String>,
        rendered_prompt: impl Into<String>,
        max_tokens: u32,
    ) -> Self {
        Self {
            template_name: template_name.into(),
            rendered_prompt: rendered_prompt.into(),
            temperature: 0.0,
            sample_count: 1,
            max_tokens,
            want_token_probs: None,
        }
    }

    /// `sample_count` completions at `temperature`. A zero temperature
    /// collapses to a single greedy sample.
    pub fn sampled(
        template_name: impl Into<String>,
        rendered_prompt: impl Into<String>,
        temperature: f64,
        sample_count: u32,
        max_tokens: u32,
    ) -> Self {
        let sample_count = if temperature == 0.0 {
            1
        } else {
            sample_count.max(1)
        };
        Self {
            temperature,
            sample_count,
            ..Self::greedy(template_name, rendered_prompt, max_tokens)
        }
    }

    pub fn with_token_probs(mut self, first: impl Into<String>, second: impl Into<String>) -> Self {
        self.want_token_probs = Some((first.into(), second.into()));
        self
    }

    pub fn check(&self) -> Result<(), ProviderError> {
        if self.sample_count == 0 {
            return Err(ProviderError::InvalidRequest(
                "sample_count must be at least 1".into(),
            ));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(ProviderError::InvalidRequest(format!(
                "temperature {} is invalid",
                self.temperature
            )));
        }
        if self.temperature == 0.0 && self.sample_count != 1 {
            return Err(ProviderError::InvalidRequest(
                "greedy decoding yields exactly one sample".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub texts: Vec<String>,
    /// Raw probabilities of the two requested tokens at the first position.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate_probs: Option<(f64, f64)>,
    #[serde(default)]
    pub provider_meta: String,
}

impl ChatResponse {
    pub fn text(text: impl Into<String>) -> Self {
        Self {
            texts: vec![text.into()],
            candidate_probs: None,
            provider_meta: String::new(),
        }
    }

    pub fn first_text(&self) -> Result<&str, ProviderError> {
        self.texts
            .first()
            .map(String::as_str)
            .ok_or_else(|| ProviderError::MalformedResponse("response has no completions".into()))
    }
}

pub trait LlmProvider: Send + Sync {
    fn identity(&self) -> ProviderIdentity;

    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NliVerdict {
    Entail,
    Neutral,
    Contradict,
}

pub trait NliProvider: Send + Sync {
    fn nli(&self, premise: &str, hypothesis: &str) -> Result<NliVerdict, ProviderError>;
}

/// Chat backend defined by a closure.
pub struct FnProvider<F> {
    identity: ProviderIdentity,
    respond: F,
}

impl<F> FnProvider<F>
where
    F: Fn(&ChatRequest) -> Result<ChatResponse, ProviderError> + Send + Sync,
{
    pub fn new(identity: ProviderIdentity, respond: F) -> Self {
        Self { identity, respond }
    }
}

impl<F> LlmProvider for FnProvider<F>
where
    F: Fn(&ChatRequest) -> Result<ChatResponse, ProviderError> + Send + Sync,
{
    fn identity(&self) -> ProviderIdentity {
        self.identity.clone()
    }

    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        request.check()?;
        (self.respond)(request)
    }
}

impl<T: LlmProvider + ?Sized> LlmProvider for std::sync::Arc<T> {
    fn identity(&self) -> ProviderIdentity {
        (**self).identity()
    }

    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        (**self).chat(request)
    }
}

impl<T: NliProvider + ?Sized> NliProvider for std::sync::Arc<T> {
    fn nli(&self, premise: &str, hypothesis: &str) -> Result<NliVerdict, ProviderError> {
        (**self).nli(premise, hypothesis)
    }
}
