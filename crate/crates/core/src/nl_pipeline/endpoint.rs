//! Chat-completion-style text endpoints: HTTP, scripted mocks and the
//! offline reference model.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::swarm_sim::load_scenario;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: String,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Message {
            role: "system".into(),
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Message {
            role: "user".into(),
            content: content.into(),
        }
    }
}

/// Request body sent to every endpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub model: String,
    pub messages: Vec<Message>,
    pub max_tokens: u32,
    pub temperature: f64,
}

#[derive(Debug, Deserialize)]
struct CompletionResponse {
    text: String,
}

#[derive(Clone, Debug, Error, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EndpointError {
    #[error("endpoint unreachable after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("endpoint returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed endpoint response: {0}")]
    BadResponse(String),
    #[error("unsupported endpoint url `{0}`")]
    UnsupportedUrl(String),
}

impl EndpointError {
    /// True when the service could not be reached at all.
    pub fn is_unavailable(&self) -> bool {
        matches!(self, EndpointError::Transport { .. } | EndpointError::Status { .. })
    }
}

pub trait TextEndpoint: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String, EndpointError>;

    /// Short label for traces and logs.
    fn describe(&self) -> String;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model: String,
    pub max_tokens: u32,
    pub temperature: f64,
    pub timeout_ms: u64,
    pub retries: u32,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            base_url: REFERENCE_MOCK_URL.into(),
            model: "default".into(),
            max_tokens: 1024,
            temperature: 0.0,
            timeout_ms: 30_000,
            retries: 2,
        }
    }
}

impl EndpointConfig {
    pub fn with_url(base_url: impl Into<String>) -> Self {
        EndpointConfig {
            base_url: base_url.into(),
            ..EndpointConfig::default()
        }
    }

    pub fn request(&self, messages: Vec<Message>) -> CompletionRequest {
        CompletionRequest {
            model: self.model.clone(),
            messages,
            max_tokens: self.max_tokens,
            temperature: self.temperature,
        }
    }

    /// `mock://reference`, `mock://echo` and `mock://safe` resolve to the
    /// built-in offline endpoints; anything else must be http(s).
    pub fn connect(&self) -> Result<Box<dyn TextEndpoint>, EndpointError> {
        match self.base_url.as_str() {
            REFERENCE_MOCK_URL => Ok(Box::new(ReferenceModel)),
            "mock://echo" => Ok(Box::new(EchoEndpoint)),
            "mock://safe" => Ok(Box::new(MockEndpoint::scripted(["safe"]))),
            url if url.starts_with("http://") || url.starts_with("https://") => {
                Ok(Box::new(HttpEndpoint::new(self.clone())))
            }
            other => Err(EndpointError::UnsupportedUrl(other.to_string())),
        }
    }
}

pub const REFERENCE_MOCK_URL: &str = "mock://reference";

/// POSTs the request as JSON to `base_url` and reads `text` from the reply.
/// Transport failures are retried `retries` times; HTTP errors are not.
#[derive(Clone, Debug)]
pub struct HttpEndpoint {
    config: EndpointConfig,
}

impl HttpEndpoint {
    pub fn new(config: EndpointConfig) -> Self {
        HttpEndpoint { config }
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }
}

impl TextEndpoint for HttpEndpoint {
    fn complete(&self, request: &CompletionRequest) -> Result<String, EndpointError> {
        // Built per call: a blocking client must not be dropped inside an
        // async runtime, and endpoints may be owned by one.
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(self.config.timeout_ms))
            .build()
            .map_err(|e| EndpointError::Transport {
                attempts: 0,
                message: e.to_string(),
            })?;
        let attempts = self.config.retries + 1;
        let mut last = String::new();
        for _ in 0..attempts {
            match client.post(&self.config.base_url).json(request).send() {
                Ok(resp) => {
                    let status = resp.status();
                    if !status.is_success() {
                        let body = resp.text().unwrap_or_default();
                        return Err(EndpointError::Status {
                            status: status.as_u16(),
                            body: body.chars().take(500).collect(),
                        });
                    }
                    let parsed: CompletionResponse =
                        resp.json().map_err(|e| EndpointError::BadResponse(e.to_string()))?;
                    return Ok(parsed.text);
                }
                Err(e) => last = e.to_string(),
            }
        }
        Err(EndpointError::Transport {
            attempts,
            message: last,
        })
    }

    fn describe(&self) -> String {
        format!("{} ({})", self.config.base_url, self.config.model)
    }
}

/// Replays canned responses in order, cycling when it runs out.
#[derive(Debug)]
pub struct MockEndpoint {
    responses: Vec<Result<String, EndpointError>>,
    next: AtomicUsize,
    calls: AtomicUsize,
}

impl MockEndpoint {
    pub fn scripted<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::with_results(responses.into_iter().map(|s| Ok(s.into())).collect())
    }

    pub fn with_results(responses: Vec<Result<String, EndpointError>>) -> Self {
        assert!(!responses.is_empty(), "mock needs at least one response");
        MockEndpoint {
            responses,
            next: AtomicUsize::new(0),
            calls: AtomicUsize::new(0),
        }
    }

    /// Every call fails as if the service were down.
    pub fn unreachable() -> Self {
        Self::with_results(vec![Err(EndpointError::Transport {
            attempts: 1,
            message: "connection refused".into(),
        })])
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl TextEndpoint for MockEndpoint {
    fn complete(&self, _: &CompletionRequest) -> Result<String, EndpointError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let i = self.next.fetch_add(1, Ordering::SeqCst) % self.responses.len();
        self.responses[i].clone()
    }

    fn describe(&self) -> String {
        format!("mock://scripted ({} responses)", self.responses.len())
    }
}

/// Returns the last user message unchanged. Useful as a translator stand-in.
#[derive(Clone, Copy, Debug, Default)]
pub struct EchoEndpoint;

impl TextEndpoint for EchoEndpoint {
    fn complete(&self, request: &CompletionRequest) -> Result<String, EndpointError> {
        last_user(request)
            .map(|m| m.trim().to_string())
            .ok_or_else(|| EndpointError::BadResponse("no user message".into()))
    }

    fn describe(&self) -> String {
        "mock://echo".into()
    }
}

fn last_user(request: &CompletionRequest) -> Option<&str> {
    request
        .messages
        .iter()
        .rev()
        .find(|m| m.role == "user")
        .map(|m| m.content.as_str())
}

/// Deterministic offline "model": picks a scenario reference tree by keyword
/// from the prompt's user command and falls back to a lone `Wander`.
#[derive(Clone, Copy, Debug, Default)]
pub struct ReferenceModel;

impl ReferenceModel {
    pub fn answer(command: &str) -> String {
        let c = command.to_lowercase();
        let has = |w: &str| c.contains(w);
        let scenario = if has("freeze") || has("stop moving") {
            Some(5)
        } else if has("line") {
            Some(3)
        } else if has("align") || has("goal") {
            Some(4)
        } else if has("obstacle") || has("avoid") {
            Some(1)
        } else if has("target") || has("approach") {
            Some(2)
        } else {
            None
        };
        match scenario {
            Some(id) => load_scenario(id).expect("built-in scenario").reference_xml.to_string(),
            None => WANDER_XML.to_string(),
        }
    }
}

const WANDER_XML: &str = r#"<root main_tree_to_execute="MainTree">
  <BehaviorTree ID="MainTree">
    <Wander/>
  </BehaviorTree>
  <TreeNodesModel>
    <Action ID="Wander"/>
  </TreeNodesModel>
</root>
"#;

impl TextEndpoint for ReferenceModel {
    fn complete(&self, request: &CompletionRequest) -> Result<String, EndpointError> {
        let prompt = last_user(request).unwrap_or_default();
        // The target command is the last USER COMMAND line; earlier ones
        // belong to prepended examples.
        let command = prompt
            .lines()
            .rev()
            .find_map(|l| l.strip_prefix("USER COMMAND:"))
            .unwrap_or(prompt);
        Ok(Self::answer(command))
    }

    fn describe(&self) -> String {
        REFERENCE_MOCK_URL.into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bt_model::{default_whitelist, parse_document};

    fn req(text: &str) -> CompletionRequest {
        EndpointConfig::default().request(vec![Message::user(text)])
    }

    #[test]
    fn scripted_mock_cycles() {
        let m = MockEndpoint::scripted(["a", "b"]);
        let got: Vec<_> = (0..5).map(|_| m.complete(&req("x")).unwrap()).collect();
        assert_eq!(got, ["a", "b", "a", "b", "a"]);
        assert_eq!(m.calls(), 5);
    }

    #[test]
    fn reference_model_trees_are_valid() {
        let wl = default_whitelist();
        for cmd in ["form a line", "freeze at the target", "align", "avoid the obstacle", "approach", "dance"] {
            let xml = ReferenceModel.complete(&req(&format!("USER COMMAND: {cmd}\nRESPONSE: XML only."))).unwrap();
            assert!(parse_document(&xml, &wl).is_accepted(), "{cmd}");
        }
    }

    #[test]
    fn reference_model_reads_last_command() {
        let prompt = "USER COMMAND: form a line\nRESPONSE:\n...\nUSER COMMAND: avoid the obstacle\nRESPONSE: XML only.";
        let xml = ReferenceModel.complete(&req(prompt)).unwrap();
        assert_eq!(xml, load_scenario(1).unwrap().reference_xml);
    }

    #[test]
    fn unreachable_http_reports_attempts() {
        // Port 9 on localhost: nothing listens there in the sandbox.
        let cfg = EndpointConfig {
            base_url: "http://127.0.0.1:9/complete".into(),
            timeout_ms: 500,
            retries: 2,
            ..EndpointConfig::default()
        };
        let err = HttpEndpoint::new(cfg).complete(&req("x")).unwrap_err();
        assert!(matches!(err, EndpointError::Transport { attempts: 3, .. }), "{err:?}");
        assert!(err.is_unavailable());
    }

    #[test]
    fn url_schemes() {
        assert!(EndpointConfig::with_url("mock://reference").connect().is_ok());
        assert!(EndpointConfig::with_url("http://x").connect().is_ok());
        assert!(matches!(
            EndpointConfig::with_url("ftp://x").connect(),
            Err(EndpointError::UnsupportedUrl(_))
        ));
    }
}
