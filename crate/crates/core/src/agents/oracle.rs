use crate::dataset::{build_trajectory, Trajectory};
use crate::error::Result;
use crate::plan::Plan;
use crate::preference::best_achievable;

use super::{convert, Agent, EpisodeContext, Mode, Observation};

/// Upper-bound planner with access to the catalog and true properties.
pub struct OracleAgent {
    best: Vec<String>,
    trajectory: Option<Trajectory>,
}

impl OracleAgent {
    pub const MIN_KNOWN: usize = 2;

    pub fn new(ctx: &EpisodeContext<'_>) -> Result<Self> {
        let (best, _) = best_achievable(ctx.catalog, ctx.prefs)?;
        let trajectory = match ctx.mode {
            Mode::Offline => None,
            Mode::Online => Some(build_trajectory(
                ctx.scenario,
                ctx.catalog,
                ctx.prefs,
                Self::MIN_KNOWN,
            )?),
        };
        Ok(OracleAgent { best, trajectory })
    }
}

impl Agent for OracleAgent {
    fn plan(&mut self, obs: &Observation) -> Result<Plan> {
        let target = match (&self.trajectory, obs.mode) {
            (Some(t), Mode::Online) => {
                let known = obs.revealed().count();
                match known.checked_sub(1).and_then(|j| t.steps.get(j)) {
                    Some(step) => &step.stack_after,
                    None => return Ok(Plan::wait()),
                }
            }
            _ => &self.best,
        };
        Ok(Plan::from_actions(convert(&obs.stack.stacked, target)))
    }
}
