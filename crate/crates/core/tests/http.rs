//! The HTTP backends against a scripted local server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use btprop_core::providers::{
    ChatRequest, LlmProvider, NliProvider, NliVerdict, OpenAiCompatible, OpenAiConfig,
    ProviderError, RemoteNli,
};
use serde_json::{json, Value};

#[derive(Debug, Clone)]
struct Seen {
    path: String,
    authorization: Option<String>,
    body: Value,
}

/// Serves one canned `(status, body)` per connection, in order.
struct MockServer {
    url: String,
    seen: Arc<Mutex<Vec<Seen>>>,
    handle: Option<JoinHandle<()>>,
}

impl MockServer {
    fn start(replies: Vec<(u16, String)>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let seen = Arc::new(Mutex::new(Vec::new()));
        let log = seen.clone();
        let handle = std::thread::spawn(move || {
            for (status, reply) in replies {
                let (mut stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut request_line = String::new();
                reader.read_line(&mut request_line).unwrap();
                let path = request_line
                    .split_whitespace()
                    .nth(1)
                    .unwrap_or_default()
                    .to_owned();
                let (mut length, mut authorization) = (0, None);
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    let line = line.trim_end();
                    if line.is_empty() {
                        break;
                    }
                    let (name, value) = line.split_once(':').unwrap();
                    match name.to_ascii_lowercase().as_str() {
                        "content-length" => length = value.trim().parse().unwrap(),
                        "authorization" => authorization = Some(value.trim().to_owned()),
                        _ => {}
                    }
                }
                let mut raw = vec![0; length];
                reader.read_exact(&mut raw).unwrap();
                let body = serde_json::from_slice(&raw).unwrap_or(Value::Null);
                log.lock().unwrap().push(Seen {
                    path,
                    authorization,
                    body,
                });
                let response = format!(
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
                    reply.len()
                );
                stream.write_all(response.as_bytes()).unwrap();
            }
        });
        Self {
            url,
            seen,
            handle: Some(handle),
        }
    }

    fn finish(mut self) -> Vec<Seen> {
        self.handle.take().unwrap().join().unwrap();
        self.seen.lock().unwrap().clone()
    }
}

fn client(url: &str, key: Option<&str>) -> OpenAiCompatible {
    let mut config = OpenAiConfig::new(format!("{url}/v1/"), "model-x");
    config.initial_backoff = Duration::from_millis(1);
    config.timeout = Duration::from_secs(5);
    OpenAiCompatible::with_api_key(config, key.map(str::to_owned)).unwrap()
}

fn completion(texts: &[&str]) -> String {
    let choices: Vec<Value> = texts
        .iter()
        .enumerate()
        .rev()
        .map(|(i, t)| json!({"index": i, "message": {"role": "assistant", "content": t}}))
        .collect();
    json!({"choices": choices}).to_string()
}

#[test]
fn retries_server_errors_then_succeeds() {
    let server = MockServer::start(vec![
        (500, "{}".into()),
        (429, "{\"error\": \"slow down\"}".into()),
        (200, completion(&["Claim 1: x"])),
    ]);
    let response = client(&server.url, Some("secret"))
        .chat(&ChatRequest::greedy("decompose_gpt", "p", 16))
        .unwrap();
    assert_eq!(response.texts, ["Claim 1: x"]);
    let seen = server.finish();
    assert_eq!(seen.len(), 3);
    assert_eq!(seen[0].path, "/v1/chat/completions");
    assert_eq!(seen[0].authorization.as_deref(), Some("Bearer secret"));
    let body = &seen[2].body;
    assert_eq!(body["model"], "model-x");
    assert_eq!(body["messages"][0]["content"], "p");
    assert_eq!(body["temperature"], 0.0);
    assert_eq!(body["max_tokens"], 16);
    assert!(body.get("logprobs").is_none());
}

#[test]
fn gives_up_after_max_attempts() {
    let server = MockServer::start(vec![(503, "{}".into()); 3]);
    let err = client(&server.url, None)
        .chat(&ChatRequest::greedy("t", "p", 1))
        .unwrap_err();
    assert!(
        matches!(err, ProviderError::Http { status: 503, .. }),
        "{err:?}"
    );
    assert_eq!(server.finish().len(), 3);
}

#[test]
fn auth_failures_are_not_retried() {
    let server = MockServer::start(vec![(401, "{\"error\": \"bad key\"}".into())]);
    let err = client(&server.url, Some("wrong"))
        .chat(&ChatRequest::greedy("t", "p", 1))
        .unwrap_err();
    assert_eq!(err.kind(), "AuthFailure");
    assert_eq!(server.finish().len(), 1);
}

#[test]
fn token_probabilities_from_logprobs() {
    let body = json!({"choices": [{
        "index": 0,
        "message": {"role": "assistant", "content": "True"},
        "logprobs": {"content": [{"token": "True", "logprob": -0.1, "top_logprobs": [
            {"token": "True", "logprob": -0.1},
            {"token": " false", "logprob": -2.4},
            {"token": "Maybe", "logprob": -4.0}
        ]}]}
    }]});
    let server = MockServer::start(vec![(200, body.to_string())]);
    let request = ChatRequest::greedy("confidence_gpt", "True or False? x", 1)
        .with_token_probs("True", "False");
    let response = client(&server.url, None).chat(&request).unwrap();
    let (t, f) = response.candidate_probs.unwrap();
    assert!((t - (-0.1f64).exp()).abs() < 1e-12);
    assert!((f - (-2.4f64).exp()).abs() < 1e-12);
    let seen = server.finish();
    assert_eq!(seen[0].body["logprobs"], true);
    assert_eq!(seen[0].body["top_logprobs"], 20);
    assert!(seen[0].authorization.is_none());
}

#[test]
fn sampled_requests_keep_choice_order() {
    let server = MockServer::start(vec![(200, completion(&["a", "b", "c"]))]);
    let response = client(&server.url, None)
        .chat(&ChatRequest::sampled("answer", "q", 0.7, 3, 32))
        .unwrap();
    assert_eq!(response.texts, ["a", "b", "c"]);
    let seen = server.finish();
    assert_eq!(seen[0].body["n"], 3);
    assert_eq!(seen[0].body["temperature"], 0.7);
}

#[test]
fn malformed_body_is_reported() {
    let server = MockServer::start(vec![(200, "{\"choices\": 7}".into())]);
    let err = client(&server.url, None)
        .chat(&ChatRequest::greedy("t", "p", 1))
        .unwrap_err();
    assert_eq!(err.kind(), "MalformedResponse");
    server.finish();
}

#[test]
fn remote_nli_labels() {
    let server = MockServer::start(vec![
        (200, "{\"label\": \"CONTRADICTION\"}".into()),
        (200, "{\"label\": \"unsure\"}".into()),
    ]);
    let nli = RemoteNli::new(format!("{}/nli", server.url), Duration::from_secs(5)).unwrap();
    assert_eq!(nli.nli("p", "h").unwrap(), NliVerdict::Contradict);
    assert_eq!(nli.nli("p", "h").unwrap_err().kind(), "UnmappableLabel");
    let seen = server.finish();
    assert_eq!(seen[0].body, json!({"premise": "p", "hypothesis": "h"}));
}
