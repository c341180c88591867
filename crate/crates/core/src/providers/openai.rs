use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{ChatRequest, ChatResponse, LlmProvider, ProviderError, ProviderIdentity};

pub const DEFAULT_KEY_ENV: &str = "BTPROP_API_KEY";

const BACKEND: &str = "openai-compatible";

/// Probability assigned to a candidate token missing from the top-k list,
/// relative to the smallest listed probability.
const ABSENT_TOKEN_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct OpenAiConfig {
    /// e.g. `https://api.openai.com/v1` or `http://localhost:8000/v1`.
    pub base_url: String,
    pub model: String,
    pub key_env: String,
    pub max_attempts: u32,
    pub initial_backoff: Duration,
    pub timeout: Duration,
    pub top_logprobs: u32,
    pub seed: Option<u64>,
}

impl OpenAiConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model: model.into(),
            key_env: DEFAULT_KEY_ENV.to_owned(),
            max_attempts: 3,
            initial_backoff: Duration::from_millis(500),
            timeout: Duration::from_secs(120),
            top_logprobs: 20,
            seed: None,
        }
    }
}

/// Blocking client for `POST {base_url}/chat/completions`.
pub struct OpenAiCompatible {
    config: OpenAiConfig,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl std::fmt::Debug for OpenAiCompatible {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OpenAiCompatible")
            .field("base_url", &self.config.base_url)
            .field("model", &self.config.model)
            .field("has_api_key", &self.api_key.is_some())
            .finish()
    }
}

impl OpenAiCompatible {
    /// Reads the bearer token from the configured environment variable.
    pub fn new(config: OpenAiConfig) -> Result<Self, ProviderError> {
        let api_key = std::env::var(&config.key_env)
            .ok()
            .filter(|k| !k.is_empty());
        Self::with_api_key(config, api_key)
    }

    pub fn with_api_key(
        config: OpenAiConfig,
        api_key: Option<String>,
    ) -> Result<Self, ProviderError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        Ok(Self {
            config,
            api_key,
            client,
        })
    }

    fn endpoint(&self) -> String {
        format!(
            "{}/chat/completions",
            self.config.base_url.trim_end_matches('/')
        )
    }

    fn body(&self, request: &ChatRequest) -> serde_json::Value {
        let mut body = json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": request.rendered_prompt}],
            "temperature": request.temperature,
            "n": request.sample_count,
            "max_tokens": request.max_tokens,
        });
        if request.want_token_probs.is_some() {
            body["logprobs"] = json!(true);
            body["top_logprobs"] = json!(self.config.top_logprobs);
        }
        if let Some(seed) = self.config.seed {
            body["seed"] = json!(seed);
        }
        body
    }

    fn send_once(&self, body: &serde_json::Value) -> Result<String, ProviderError> {
        let mut builder = self.client.post(self.endpoint()).json(body);
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = builder
            .send()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        let status = response.status();
        let text = response
            .text()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        match status.as_u16() {
            200..=299 => Ok(text),
            401 | 403 => Err(ProviderError::AuthFailure(truncate(&text))),
            429 => Err(ProviderError::RateLimited(truncate(&text))),
            code => Err(ProviderError::Http {
                status: code,
                body: truncate(&text),
            }),
        }
    }
}

fn retryable(err: &ProviderError) -> bool {
    match err {
        ProviderError::Transport(_) | ProviderError::RateLimited(_) => true,
        ProviderError::Http { status, .. } => *status >= 500,
        _ => false,
    }
}

fn truncate(text: &str) -> String {
    text.chars().take(500).collect()
}

impl LlmProvider for OpenAiCompatible {
    fn identity(&self) -> ProviderIdentity {
        ProviderIdentity::new(BACKEND, &self.config.model)
    }

    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        request.check()?;
        let body = self.body(request);
        let mut delay = self.config.initial_backoff;
        let attempts = self.config.max_attempts.max(1);
        let mut attempt = 1;
        let raw = loop {
            match self.send_once(&body) {
                Ok(raw) => break raw,
                Err(e) if attempt < attempts && retryable(&e) => {
                    log::warn!(
                        "chat attempt {attempt}/{attempts} failed: {e}; retrying in {delay:?}"
                    );
                    std::thread::sleep(delay);
                    delay *= 2;
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        };
        parse_completion(&raw, request)
    }
}

#[derive(Deserialize)]
struct Completion {
    #[serde(default)]
    model: String,
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    #[serde(default)]
    index: u32,
    message: Message,
    #[serde(default)]
    logprobs: Option<ChoiceLogprobs>,
}

#[derive(Deserialize)]
struct Message {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct ChoiceLogprobs {
    #[serde(default)]
    content: Option<Vec<TokenLogprob>>,
}

#[derive(Deserialize)]
struct TokenLogprob {
    #[serde(default)]
    top_logprobs: Vec<TopLogprob>,
}

#[derive(Deserialize)]
struct TopLogprob {
    token: String,
    logprob: f64,
}

/// Converts a chat-completions response body into a [`ChatResponse`].
pub(crate) fn parse_completion(
    raw: &str,
    request: &ChatRequest,
) -> Result<ChatResponse, ProviderError> {
    let mut completion: Completion =
        serde_json::from_str(raw).map_err(|e| ProviderError::MalformedResponse(e.to_string()))?;
    if completion.choices.is_empty() {
        return Err(ProviderError::MalformedResponse("no choices".into()));
    }
    completion.choices.sort_by_key(|c| c.index);
    let candidate_probs = match &request.want_token_probs {
        Some((a, b)) => completion.choices[0]
            .logprobs
            .as_ref()
            .and_then(|l| l.content.as_ref())
            .and_then(|tokens| tokens.first())
            .and_then(|first| candidate_probabilities(&first.top_logprobs, a, b)),
        None => None,
    };
    let texts = completion
        .choices
        .into_iter()
        .map(|c| c.message.content.unwrap_or_default())
        .collect();
    Ok(ChatResponse {
        texts,
        candidate_probs,
        provider_meta: completion.model,
    })
}

/// Probability mass of each candidate among the top-k alternatives. Tokens
/// match after trimming whitespace, ignoring case. A candidate absent from
/// the list gets a small floor below the least likely listed token.
fn candidate_probabilities(top: &[TopLogprob], first: &str, second: &str) -> Option<(f64, f64)> {
    if top.is_empty() {
        return None;
    }
    let floor = top
        .iter()
        .map(|t| t.logprob.exp())
        .fold(f64::INFINITY, f64::min)
        * ABSENT_TOKEN_FLOOR;
    let mass = |candidate: &str| {
        let matching: Vec<f64> = top
            .iter()
            .filter(|t| t.token.trim().eq_ignore_ascii_case(candidate))
            .map(|t| t.logprob.exp())
            .collect();
        if matching.is_empty() {
            floor
        } else {
            matching.iter().sum()
        }
    };
    Some((mass(first), mass(second)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probe_request() -> ChatRequest {
        ChatRequest::greedy("confidence", "True or False? x", 1).with_token_probs("True", "False")
    }

    #[test]
    fn parses_texts_in_choice_order() {
        let raw = r#"{"model":"m","choices":[
            {"index":1,"message":{"content":"b"}},
            {"index":0,"message":{"content":"a"}}]}"#;
        let response = parse_completion(raw, &ChatRequest::sampled("t", "p", 0.7, 2, 8)).unwrap();
        assert_eq!(response.texts, vec!["a", "b"]);
        assert_eq!(response.provider_meta, "m");
        assert_eq!(response.candidate_probs, None);
    }

    #[test]
    fn candidate_probs_from_top_logprobs() {
        let raw = r#"{"choices":[{"index":0,"message":{"content":"True"},
            "logprobs":{"content":[{"token":"True","logprob":-0.1,"top_logprobs":[
                {"token":"True","logprob":-0.1},{"token":" true","logprob":-3.0},{"token":"False","logprob":-2.4}]}]}}]}"#;
        let (t, f) = parse_completion(raw, &probe_request())
            .unwrap()
            .candidate_probs
            .unwrap();
        assert!((t - ((-0.1f64).exp() + (-3.0f64).exp())).abs() < 1e-15);
        assert!((f - (-2.4f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn absent_candidate_gets_floor() {
        let raw = r#"{"choices":[{"index":0,"message":{"content":"True"},
            "logprobs":{"content":[{"token":"True","top_logprobs":[
                {"token":"True","logprob":-0.01},{"token":"Yes","logprob":-5.0}]}]}}]}"#;
        let (_, f) = parse_completion(raw, &probe_request())
            .unwrap()
            .candidate_probs
            .unwrap();
        assert!((f - (-5.0f64).exp() * 1e-3).abs() < 1e-18);
    }

    #[test]
    fn missing_logprobs_means_unsupported() {
        let raw = r#"{"choices":[{"index":0,"message":{"content":"True"}}]}"#;
        assert_eq!(
            parse_completion(raw, &probe_request())
                .unwrap()
                .candidate_probs,
            None
        );
    }

    #[test]
    fn malformed_bodies() {
        assert!(matches!(
            parse_completion("not json", &probe_request()),
            Err(ProviderError::MalformedResponse(_))
        ));
        assert!(matches!(
            parse_completion(r#"{"choices":[]}"#, &probe_request()),
            Err(ProviderError::MalformedResponse(_))
        ));
    }

    #[test]
    fn request_body_shape() {
        let mut config = OpenAiConfig::new("http://host/v1/", "gpt");
        config.seed = Some(7);
        let provider = OpenAiCompatible::with_api_key(config, None).unwrap();
        assert_eq!(provider.endpoint(), "http://host/v1/chat/completions");
        let body = provider.body(&probe_request());
        assert_eq!(body["model"], "gpt");
        assert_eq!(body["n"], 1);
        assert_eq!(body["max_tokens"], 1);
        assert_eq!(body["logprobs"], true);
        assert_eq!(body["top_logprobs"], 20);
        assert_eq!(body["seed"], 7);
        assert_eq!(body["messages"][0]["content"], "True or False? x");
        let plain = provider.body(&ChatRequest::greedy("t", "p", 8));
        assert!(plain.get("logprobs").is_none());
    }
}
