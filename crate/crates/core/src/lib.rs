//! Box-stacking scenarios with hidden contents.
//!
//! The crate covers the full pipeline: sampling scenarios ([`scenario`]),
//! simulating every stacking order with a quasi-static stability model
//! ([`sim`]), scoring orders against sorting preferences ([`preference`]),
//! synthesizing chat transcripts for fine-tuning ([`dataset`]), and
//! benchmarking planners ([`agents`], [`eval`]).

pub mod agents;
pub mod cache;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod fixtures;
pub mod keys;
pub mod model;
pub mod plan;
pub mod preference;
pub mod scenario;
pub mod sim;
pub mod transcript;

pub use error::{Error, Result};
pub use model::{Action, BoxSpec, ContentObject, Measurement, Scenario, Shape, StackState};
pub use plan::{parse_plan, Plan};
pub use preference::{Preference, PreferenceKind, PreferenceSet};
pub use sim::{PhysParams, StackCatalog};
