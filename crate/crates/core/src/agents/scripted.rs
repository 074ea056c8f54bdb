use std::collections::VecDeque;

use crate::error::Result;
use crate::plan::{parse_plan, Plan};

use super::{Agent, Observation};

/// Replays fixed reply texts, one per turn; waits once they run out.
#[derive(Debug, Clone, Default)]
pub struct ScriptedAgent {
    replies: VecDeque<String>,
}

impl ScriptedAgent {
    pub fn new<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ScriptedAgent {
            replies: replies.into_iter().map(Into::into).collect(),
        }
    }
}

impl Agent for ScriptedAgent {
    fn plan(&mut self, _obs: &Observation) -> Result<Plan> {
        match self.replies.pop_front() {
            Some(r) => Ok(parse_plan(&r)?),
            None => Ok(Plan::wait()),
        }
    }
}
