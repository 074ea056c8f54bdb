//! Planners behind a single observation → plan contract.

mod greedy;
mod llm;
mod oracle;
mod random;
mod scripted;

pub use greedy::GreedyAgent;
pub use llm::{
    few_shot_pair, ChatChoice, ChatMessage, ChatRequest, ChatResponse, EndpointConfig,
    HttpTransport, LlmAgent, Role, Transport, API_KEY_ENV, SYSTEM_PROMPT,
};
pub use oracle::OracleAgent;
pub use random::RandomAgent;
pub use scripted::ScriptedAgent;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Action, Measurement, Scenario, StackState};
use crate::plan::Plan;
use crate::preference::{PreferenceSet, PropertyTable};
use crate::sim::StackCatalog;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Offline,
    Online,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Offline => "offline",
            Mode::Online => "online",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "offline" => Ok(Mode::Offline),
            "online" => Ok(Mode::Online),
            o => Err(Error::invalid(
                "mode",
                format!("{o:?}, expected offline|online"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedBox {
    pub id: String,
    /// Outer w, d, h in meters; always visible.
    pub dims: (f64, f64, f64),
    /// Present once the box has been lifted and tilted.
    pub measurement: Option<Measurement>,
}

/// What a planner sees at one decision point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub mode: Mode,
    pub preference_text: String,
    /// Structured preferences, for scripted baselines only.
    pub prefs: PreferenceSet,
    /// Boxes in reveal order.
    pub boxes: Vec<ObservedBox>,
    pub stack: StackState,
}

impl Observation {
    pub fn revealed(&self) -> impl Iterator<Item = &ObservedBox> {
        self.boxes.iter().filter(|b| b.measurement.is_some())
    }

    pub fn revealed_ids(&self) -> Vec<String> {
        self.revealed().map(|b| b.id.clone()).collect()
    }

    pub fn all_revealed(&self) -> bool {
        self.boxes.iter().all(|b| b.measurement.is_some())
    }

    /// Sort keys of the revealed boxes as measured.
    pub fn props(&self) -> PropertyTable {
        let ms: Vec<Measurement> = self
            .revealed()
            .filter_map(|b| b.measurement.clone())
            .collect();
        PropertyTable::from_observation(self.boxes.iter().map(|b| (b.id.as_str(), b.dims)), &ms)
    }
}

/// Actions turning `current` into `target`: pop down to the longest common
/// prefix, then stack the rest.
pub fn convert<S: AsRef<str>, T: AsRef<str>>(current: &[S], target: &[T]) -> Vec<Action> {
    let lcp = current
        .iter()
        .zip(target)
        .take_while(|(a, b)| a.as_ref() == b.as_ref())
        .count();
    let pops = current[lcp..]
        .iter()
        .rev()
        .map(|id| Action::Unstack(id.as_ref().to_string()));
    let pushes = target[lcp..]
        .iter()
        .map(|id| Action::Stack(id.as_ref().to_string()));
    pops.chain(pushes).collect()
}

pub trait Agent: Send {
    fn plan(&mut self, obs: &Observation) -> Result<Plan>;
}

/// Ground truth handed to agent factories; only the oracle looks at it.
pub struct EpisodeContext<'a> {
    pub scenario: &'a Scenario,
    pub catalog: &'a StackCatalog,
    pub prefs: &'a PreferenceSet,
    pub mode: Mode,
    pub episode_seed: u64,
}

/// Builds a fresh agent per episode.
pub trait AgentFactory: Send + Sync {
    fn id(&self) -> String;
    fn build(&self, ctx: &EpisodeContext<'_>) -> Result<Box<dyn Agent>>;
}

/// Built-in agents selectable by name.
#[derive(Clone)]
pub enum AgentSpec {
    Oracle,
    Greedy,
    Random,
    Llm(Arc<HttpTransport>, EndpointConfig),
}

impl AgentSpec {
    /// `oracle`, `greedy`, `random` or `llm` (the latter needs an endpoint).
    pub fn parse(name: &str, endpoint: &EndpointConfig) -> Result<Self> {
        match name.trim() {
            "oracle" => Ok(AgentSpec::Oracle),
            "greedy" => Ok(AgentSpec::Greedy),
            "random" => Ok(AgentSpec::Random),
            "llm" => Ok(AgentSpec::Llm(
                Arc::new(HttpTransport::new(endpoint)?),
                endpoint.clone(),
            )),
            o => Err(Error::invalid("agent", format!("unknown agent {o:?}"))),
        }
    }
}

impl AgentFactory for AgentSpec {
    fn id(&self) -> String {
        match self {
            AgentSpec::Oracle => "oracle".into(),
            AgentSpec::Greedy => "greedy".into(),
            AgentSpec::Random => "random".into(),
            AgentSpec::Llm(_, cfg) => format!("llm:{}", cfg.model),
        }
    }

    fn build(&self, ctx: &EpisodeContext<'_>) -> Result<Box<dyn Agent>> {
        Ok(match self {
            AgentSpec::Oracle => Box::new(OracleAgent::new(ctx)?),
            AgentSpec::Greedy => Box::new(GreedyAgent),
            AgentSpec::Random => Box::new(RandomAgent::new(ctx.episode_seed)),
            AgentSpec::Llm(t, cfg) => Box::new(LlmAgent::new(cfg.clone(), t.clone(), ctx.mode)),
        })
    }
}
