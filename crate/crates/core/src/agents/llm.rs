//! Chat-completions adapter.
//!
//! Wire contract: the request body is `{"model", "messages": [{"role",
//! "content"}...], "temperature"}` POSTed to `{base_url}/chat/completions`;
//! the reply text is `choices[0].message.content`.

use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plan::{parse_plan, parse_plan_lenient, Plan};
use crate::transcript::render_observation;

use super::{Agent, Mode, Observation};

pub const API_KEY_ENV: &str = "STACKLAB_API_KEY";

pub const SYSTEM_PROMPT: &str = "You stack boxes on a table for a user. Each box line gives its weight, \
its content stability (1 is steady, 0 is rolling contents), its outer size and its footprint. \
Boxes are stacked bottom to top; only the top box can be unstacked. \
Answer with a plan and nothing else: either `wait` or actions such as `stack box2; stack box1` \
or `unstack box1; stack box3`. Every box must end up in one stable stack that follows the user's preference.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model: String,
    pub temperature: f64,
    pub timeout_secs: u64,
    /// Corrective retries after an unparseable reply.
    pub retries: u32,
    pub few_shot: bool,
    /// Fall back to the last grammar-valid line anywhere in the reply.
    pub lenient: bool,
    pub max_in_flight: usize,
    pub api_key_env: String,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            base_url: "http://127.0.0.1:8000/v1".into(),
            model: "local".into(),
            temperature: 0.0,
            timeout_secs: 60,
            retries: 2,
            few_shot: true,
            lenient: false,
            max_in_flight: 4,
            api_key_env: API_KEY_ENV.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        ChatMessage {
            role,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatChoice {
    pub message: ChatMessage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub choices: Vec<ChatChoice>,
}

impl ChatResponse {
    pub fn text(&self) -> Result<&str> {
        self.choices
            .first()
            .map(|c| c.message.content.as_str())
            .ok_or_else(|| Error::Endpoint("response has no choices".into()))
    }
}

pub trait Transport: Send + Sync {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse>;
}

/// Counting semaphore bounding concurrent requests.
struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Slots {
    fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.free.lock().expect("slot lock");
        while *free == 0 {
            free = self.cv.wait(free).expect("slot lock");
        }
        *free -= 1;
        SlotGuard(self)
    }
}

struct SlotGuard<'a>(&'a Slots);

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("slot lock") += 1;
        self.0.cv.notify_one();
    }
}

pub struct HttpTransport {
    url: String,
    api_key: Option<String>,
    agent: ureq::Agent,
    slots: Slots,
}

impl HttpTransport {
    pub fn new(cfg: &EndpointConfig) -> Result<Self> {
        if cfg.base_url.trim().is_empty() {
            return Err(Error::invalid("endpoint", "base_url is empty"));
        }
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(cfg.timeout_secs.max(1))))
            .build();
        Ok(HttpTransport {
            url: format!("{}/chat/completions", cfg.base_url.trim_end_matches('/')),
            api_key: std::env::var(&cfg.api_key_env)
                .ok()
                .filter(|k| !k.is_empty()),
            agent: config.into(),
            slots: Slots {
                free: Mutex::new(cfg.max_in_flight.max(1)),
                cv: Condvar::new(),
            },
        })
    }
}

impl Transport for HttpTransport {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse> {
        let _slot = self.slots.acquire();
        let mut call = self.agent.post(&self.url);
        if let Some(k) = &self.api_key {
            call = call.header("Authorization", &format!("Bearer {k}"));
        }
        let mut resp = call
            .send_json(req)
            .map_err(|e| Error::Endpoint(format!("{}: {e}", self.url)))?;
        resp.body_mut()
            .read_json::<ChatResponse>()
            .map_err(|e| Error::Endpoint(format!("{}: bad response body: {e}", self.url)))
    }
}

/// Example interaction shown before the real scenario; regenerated from the
/// three-box fixture by the dataset builder.
pub fn few_shot_pair(mode: Mode) -> Vec<ChatMessage> {
    let sample = crate::fixtures::example_sample(mode);
    let mut text = String::from("Here is an example interaction in a different scenario.\n");
    for m in &sample.messages {
        let who = match m.role {
            Role::User => "USER",
            Role::Assistant => "ASSISTANT",
            Role::System => "SYSTEM",
        };
        text.push_str(&format!("\n{who}:\n{}\n", m.content));
    }
    text.push_str("\nNow consider a new scenario.");
    vec![
        ChatMessage::new(Role::User, text),
        ChatMessage::new(
            Role::Assistant,
            "Understood. I will answer with a plan only.",
        ),
    ]
}

/// One conversation per episode; online turns accumulate.
pub struct LlmAgent {
    cfg: EndpointConfig,
    transport: Arc<dyn Transport>,
    history: Vec<ChatMessage>,
}

impl LlmAgent {
    pub fn new(cfg: EndpointConfig, transport: Arc<dyn Transport>, mode: Mode) -> Self {
        let mut history = vec![ChatMessage::new(Role::System, SYSTEM_PROMPT)];
        if cfg.few_shot {
            history.extend(few_shot_pair(mode));
        }
        LlmAgent {
            cfg,
            transport,
            history,
        }
    }

    pub fn history(&self) -> &[ChatMessage] {
        &self.history
    }

    fn request(&self) -> ChatRequest {
        ChatRequest {
            model: self.cfg.model.clone(),
            messages: self.history.clone(),
            temperature: self.cfg.temperature,
        }
    }
}

impl Agent for LlmAgent {
    fn plan(&mut self, obs: &Observation) -> Result<Plan> {
        self.history
            .push(ChatMessage::new(Role::User, render_observation(obs)));
        let mut attempt = 0;
        loop {
            let resp = self.transport.complete(&self.request())?;
            let text = resp.text()?.to_string();
            let parsed = if self.cfg.lenient {
                parse_plan_lenient(&text)
            } else {
                parse_plan(&text)
            };
            self.history.push(ChatMessage::new(Role::Assistant, text));
            match parsed {
                Ok(p) => return Ok(p),
                Err(e) if attempt < self.cfg.retries => {
                    attempt += 1;
                    self.history.push(ChatMessage::new(
                        Role::User,
                        format!(
                            "Your reply could not be parsed ({e}). Answer with only `wait` or actions like `stack box2; stack box1`."
                        ),
                    ));
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
}
