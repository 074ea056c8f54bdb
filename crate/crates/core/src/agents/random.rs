use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::keys::KeyBuilder;
use crate::plan::Plan;

use super::{convert, Agent, Observation};

/// Waits for every measurement, then stacks a uniformly random order.
pub struct RandomAgent {
    rng: ChaCha8Rng,
}

impl RandomAgent {
    pub fn new(seed: u64) -> Self {
        RandomAgent {
            rng: KeyBuilder::new("random-agent").u64(seed).rng(),
        }
    }
}

impl Agent for RandomAgent {
    fn plan(&mut self, obs: &Observation) -> Result<Plan> {
        if !obs.all_revealed() || obs.stack.is_complete() {
            return Ok(Plan::wait());
        }
        let mut rest: Vec<String> = obs.stack.on_table.iter().cloned().collect();
        rest.shuffle(&mut self.rng);
        let mut target = obs.stack.stacked.clone();
        target.extend(rest);
        Ok(Plan::from_actions(convert(&obs.stack.stacked, &target)))
    }
}
