//! OpenAI-compatible chat-completions client.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, CompletionRequest, Role, Tier};

pub const API_KEY_ENV: &str = "GENWAR_API_KEY";
pub const API_BASE_ENV: &str = "GENWAR_API_BASE";

#[derive(Clone, Debug, PartialEq)]
pub struct RemoteConfig {
    /// Scheme and host, e.g. `https://api.openai.com`; `/v1/chat/completions` is appended.
    pub base_url: String,
    pub api_key: Option<String>,
    pub strategic_model: String,
    pub tactical_model: String,
    pub timeout: Duration,
    pub max_attempts: u32,
    /// First retry delay; doubles on every further attempt.
    pub backoff: Duration,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com".into(),
            api_key: None,
            strategic_model: "gpt-4".into(),
            tactical_model: "gpt-3.5-turbo".into(),
            timeout: Duration::from_secs(60),
            max_attempts: 4,
            backoff: Duration::from_millis(500),
        }
    }
}

impl RemoteConfig {
    /// Defaults overridden by `GENWAR_API_BASE` / `GENWAR_API_KEY`.
    pub fn from_env() -> Self {
        let mut cfg = Self::default();
        if let Ok(base) = std::env::var(API_BASE_ENV) {
            if !base.trim().is_empty() {
                cfg.base_url = base.trim().to_string();
            }
        }
        cfg.api_key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.trim().is_empty());
        cfg
    }

    pub fn endpoint(&self) -> String {
        format!("{}/v1/chat/completions", self.base_url.trim_end_matches('/'))
    }

    pub fn model_for(&self, tier: Tier) -> &str {
        match tier {
            Tier::Strategic => &self.strategic_model,
            Tier::Tactical => &self.tactical_model,
        }
    }
}

#[derive(Serialize)]
struct WireMessage<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: Vec<WireMessage<'a>>,
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireReply,
}

#[derive(Deserialize)]
struct WireReply {
    content: Option<String>,
}

enum Attempt {
    Done(Result<String, BackendError>),
    Retry(BackendError),
}

pub struct RemoteBackend {
    cfg: RemoteConfig,
    client: reqwest::blocking::Client,
}

impl RemoteBackend {
    pub fn new(cfg: RemoteConfig) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(cfg.timeout)
            .build()
            .map_err(|e| BackendError::Transport { message: e.to_string(), attempts: 0 })?;
        Ok(Self { cfg, client })
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.cfg
    }

    fn body<'a>(&'a self, req: &'a CompletionRequest) -> WireRequest<'a> {
        WireRequest {
            model: self.cfg.model_for(req.tier),
            messages: req
                .messages
                .iter()
                .map(|m| WireMessage {
                    role: match m.role {
                        Role::System => "system",
                        Role::User => "user",
                        Role::Assistant => "assistant",
                    },
                    content: &m.content,
                })
                .collect(),
            temperature: req.temperature,
            max_tokens: req.max_reply_tokens,
        }
    }

    fn attempt(&self, req: &CompletionRequest, n: u32) -> Attempt {
        let mut call = self.client.post(self.cfg.endpoint()).json(&self.body(req));
        if let Some(key) = &self.cfg.api_key {
            call = call.bearer_auth(key);
        }
        let resp = match call.send() {
            Ok(r) => r,
            Err(e) if e.is_timeout() => return Attempt::Retry(BackendError::Timeout { attempts: n }),
            Err(e) => return Attempt::Retry(BackendError::Transport { message: e.to_string(), attempts: n }),
        };
        let status = resp.status();
        let text = match resp.text() {
            Ok(t) => t,
            Err(e) if e.is_timeout() => return Attempt::Retry(BackendError::Timeout { attempts: n }),
            Err(e) => return Attempt::Retry(BackendError::Transport { message: e.to_string(), attempts: n }),
        };
        if !status.is_success() {
            let err = BackendError::Status { status: status.as_u16(), body: text, attempts: n };
            return if status.as_u16() == 429 || status.is_server_error() {
                Attempt::Retry(err)
            } else {
                Attempt::Done(Err(err))
            };
        }
        Attempt::Done(parse_reply(&text))
    }
}

fn parse_reply(text: &str) -> Result<String, BackendError> {
    let parsed: WireResponse =
        serde_json::from_str(text).map_err(|e| BackendError::MalformedBody(format!("{e}: {}", clip(text))))?;
    parsed
        .choices
        .into_iter()
        .next()
        .and_then(|c| c.message.content)
        .ok_or_else(|| BackendError::MalformedBody(format!("no message content in {}", clip(text))))
}

fn clip(text: &str) -> String {
    text.chars().take(200).collect()
}

impl Backend for RemoteBackend {
    fn complete(&self, req: &CompletionRequest) -> Result<String, BackendError> {
        req.validate()?;
        let attempts = self.cfg.max_attempts.max(1);
        let mut delay = self.cfg.backoff;
        let mut n = 1;
        loop {
            match self.attempt(req, n) {
                Attempt::Done(result) => return result,
                Attempt::Retry(err) if n >= attempts => return Err(err),
                Attempt::Retry(err) => {
                    log::warn!("{} request failed ({err}); retrying in {delay:?}", req.tier);
                    std::thread::sleep(delay);
                    delay = delay.saturating_mul(2);
                    n += 1;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::mpsc;
    use std::thread;

    /// Serves one canned response per accepted connection and reports every
    /// request body it receives.
    fn serve(responses: Vec<(u16, String, Duration)>) -> (String, mpsc::Receiver<(String, String)>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = format!("http://{}", listener.local_addr().unwrap());
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for (status, body, delay) in responses {
                let Ok((stream, _)) = listener.accept() else { return };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut head = String::new();
                let mut len = 0usize;
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap_or(0);
                    }
                    head.push_str(&line);
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).ok();
                tx.send((head, String::from_utf8_lossy(&buf).into_owned())).ok();
                thread::sleep(delay);
                let mut stream = stream;
                let reply = format!(
                    "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                );
                stream.write_all(reply.as_bytes()).ok();
            }
        });
        (addr, rx)
    }

    fn ok_body(text: &str) -> String {
        serde_json::json!({"choices": [{"message": {"role": "assistant", "content": text}}]}).to_string()
    }

    fn backend(base: String) -> RemoteBackend {
        RemoteBackend::new(RemoteConfig {
            base_url: base,
            api_key: Some("sk-test".into()),
            strategic_model: "big".into(),
            tactical_model: "small".into(),
            timeout: Duration::from_millis(500),
            max_attempts: 3,
            backoff: Duration::from_millis(10),
        })
        .unwrap()
    }

    #[test]
    fn sends_wire_format_and_routes_tiers() {
        let (base, rx) = serve(vec![(200, ok_body("plan"), Duration::ZERO), (200, ok_body("review"), Duration::ZERO)]);
        let b = backend(base);
        let strategic = CompletionRequest::new(Tier::Strategic).system("s").user("u");
        assert_eq!(b.complete(&strategic).unwrap(), "plan");
        let (head, body) = rx.recv().unwrap();
        assert!(head.starts_with("POST /v1/chat/completions"), "{head}");
        assert!(head.to_ascii_lowercase().contains("authorization: bearer sk-test"), "{head}");
        let json: serde_json::Value = serde_json::from_str(&body).unwrap();
        assert_eq!(json["model"], "big");
        assert_eq!(json["messages"][0]["role"], "system");
        assert_eq!(json["messages"][1]["content"], "u");
        assert_eq!(json["temperature"], 0.0);
        assert_eq!(json["max_tokens"], 512);

        let tactical = CompletionRequest::new(Tier::Tactical).user("u");
        assert_eq!(b.complete(&tactical).unwrap(), "review");
        let (_, body) = rx.recv().unwrap();
        assert!(body.contains("\"model\":\"small\""), "{body}");
    }

    #[test]
    fn retries_server_errors_then_succeeds() {
        let (base, _rx) = serve(vec![
            (503, "busy".into(), Duration::ZERO),
            (429, "slow down".into(), Duration::ZERO),
            (200, ok_body("fine"), Duration::ZERO),
        ]);
        assert_eq!(backend(base).complete(&CompletionRequest::new(Tier::Tactical).user("x")).unwrap(), "fine");
    }

    #[test]
    fn client_errors_are_not_retried() {
        let (base, _rx) = serve(vec![(401, "denied".into(), Duration::ZERO)]);
        let err = backend(base).complete(&CompletionRequest::new(Tier::Tactical).user("x")).unwrap_err();
        assert_eq!(err, BackendError::Status { status: 401, body: "denied".into(), attempts: 1 });
    }

    #[test]
    fn malformed_body_is_reported() {
        let (base, _rx) = serve(vec![(200, "{\"choices\": []}".into(), Duration::ZERO)]);
        let err = backend(base).complete(&CompletionRequest::new(Tier::Tactical).user("x")).unwrap_err();
        assert!(matches!(err, BackendError::MalformedBody(_)), "{err}");
    }

    #[test]
    fn timeouts_exhaust_the_attempts() {
        let slow = Duration::from_millis(900);
        let (base, _rx) =
            serve(vec![(200, ok_body("late"), slow), (200, ok_body("late"), slow), (200, ok_body("late"), slow)]);
        let err = backend(base).complete(&CompletionRequest::new(Tier::Tactical).user("x")).unwrap_err();
        assert_eq!(err, BackendError::Timeout { attempts: 3 });
    }

    #[test]
    fn endpoint_joins_cleanly() {
        let cfg = RemoteConfig { base_url: "http://h:1/".into(), ..Default::default() };
        assert_eq!(cfg.endpoint(), "http://h:1/v1/chat/completions");
        assert_eq!(cfg.model_for(Tier::Strategic), "gpt-4");
    }
}
