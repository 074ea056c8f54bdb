use crate::error::Result;
use crate::plan::Plan;
use crate::preference::sort_by_preference;

use super::{convert, Agent, Observation};

/// Sorts the known boxes by mean rank over the preference set, ignoring physics.
#[derive(Debug, Clone, Copy, Default)]
pub struct GreedyAgent;

impl GreedyAgent {
    pub const MIN_KNOWN: usize = 2;

    /// Bottom-to-top order of the revealed boxes; ties keep reveal order.
    pub fn order(obs: &Observation) -> Vec<String> {
        let ids = obs.revealed_ids();
        let props = obs.props();
        let mut mean_rank = vec![0.0; ids.len()];
        let total: f64 = obs.prefs.iter().map(|p| p.weight).sum();
        for p in obs.prefs.iter() {
            let sorted = sort_by_preference(&ids, p, &props);
            for (i, id) in ids.iter().enumerate() {
                let pos = sorted.iter().position(|s| s == id).expect("same ids");
                mean_rank[i] += p.weight * pos as f64 / total;
            }
        }
        let mut idx: Vec<usize> = (0..ids.len()).collect();
        idx.sort_by(|&a, &b| mean_rank[a].total_cmp(&mean_rank[b]));
        idx.into_iter().map(|i| ids[i].clone()).collect()
    }
}

impl Agent for GreedyAgent {
    fn plan(&mut self, obs: &Observation) -> Result<Plan> {
        if obs.revealed().count() < Self::MIN_KNOWN {
            return Ok(Plan::wait());
        }
        Ok(Plan::from_actions(convert(
            &obs.stack.stacked,
            &Self::order(obs),
        )))
    }
}
