//! Fine-tuning transcripts from simulated catalogs.
//!
//! A trajectory walks the scenario's reveal order. Once enough boxes are
//! known, the current partial stack over the known boxes is compared with
//! every other extendable stable partial stack over the same boxes; a
//! strictly better one triggers unstack/stack actions that convert the
//! physical stack, and its best completion becomes the new target.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{convert, ChatMessage, Mode, Observation, ObservedBox, Role};
use crate::error::{Error, Result};
use crate::keys::{sha256_hex, KeyBuilder};
use crate::model::{measure, Action, Measurement, NoiseConfig, Scenario, StackState};
use crate::plan::{parse_plan, Plan};
use crate::preference::{joint_score, rank, PreferenceSet, Split, TemplateBank, TemplateChoice};
use crate::scenario::{sample_feasible_with, GenConfig, FEASIBILITY_THRESHOLD};
use crate::sim::StackCatalog;
use crate::transcript::render_observation;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub preference_sets: Vec<PreferenceSet>,
    pub trajectories_per_set: usize,
    pub template_seed: u64,
    /// Also emit the single-turn offline form of every trajectory.
    pub include_offline: bool,
    /// Emit one sample per assistant turn (conversation prefixes) instead of one per trajectory.
    pub per_prefix: bool,
    /// Boxes that must be known before anything is stacked.
    pub min_known: usize,
    pub threshold: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            preference_sets: PreferenceSet::table_sets(),
            trajectories_per_set: 200,
            template_seed: 0,
            include_offline: true,
            per_prefix: false,
            min_known: 2,
            threshold: FEASIBILITY_THRESHOLD,
        }
    }
}

/// Compares two stacks by apparent-preference score, then full score, then ids.
fn target_order<'a>(
    catalog: &'a StackCatalog,
    prefs: &'a PreferenceSet,
) -> impl Fn(&[String], &[String]) -> Ordering + 'a {
    let apparent = prefs.apparent();
    move |a, b| {
        let full = |s: &[String]| joint_score(s, prefs, &catalog.props);
        let primary = match &apparent {
            Some(ap) => {
                joint_score(b, ap, &catalog.props).total_cmp(&joint_score(a, ap, &catalog.props))
            }
            None => Ordering::Equal,
        };
        primary.then_with(|| rank(full(a), a, full(b), b))
    }
}

/// Target stack maximizing the apparent-preference score (full score when
/// the set has no apparent member).
pub fn select_target(catalog: &StackCatalog, prefs: &PreferenceSet) -> Result<Vec<String>> {
    let cmp = target_order(catalog, prefs);
    catalog
        .completed
        .iter()
        .min_by(|a, b| cmp(a, b))
        .cloned()
        .ok_or_else(|| Error::NoStableStack(catalog.scenario_id.clone()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub reveal: Measurement,
    pub stack_before: Vec<String>,
    /// Empty means wait.
    pub actions: Vec<Action>,
    pub stack_after: Vec<String>,
    pub target: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub scenario_id: String,
    pub prefs: PreferenceSet,
    pub steps: Vec<Step>,
    pub final_stack: Vec<String>,
    pub target_score: f64,
}

impl Trajectory {
    pub fn actions(&self) -> impl Iterator<Item = &Action> {
        self.steps.iter().flat_map(|s| s.actions.iter())
    }

    /// Applies every action from the empty stack.
    pub fn replay(&self, scenario: &Scenario) -> Result<StackState> {
        let mut s = StackState::new(scenario.ids());
        for a in self.actions() {
            s.apply(a)?;
        }
        Ok(s)
    }
}

fn check_prefix(catalog: &StackCatalog, stack: &[String]) -> Result<()> {
    for j in 1..=stack.len() {
        if !catalog.is_stable_prefix(&stack[..j]) {
            return Err(Error::BrokenCatalog {
                scenario: catalog.scenario_id.clone(),
                prefix: stack[..j].join(","),
            });
        }
    }
    Ok(())
}

pub fn build_trajectory(
    scenario: &Scenario,
    catalog: &StackCatalog,
    prefs: &PreferenceSet,
    min_known: usize,
) -> Result<Trajectory> {
    let props = &catalog.props;
    let order = target_order(catalog, prefs);
    let mut target = select_target(catalog, prefs)?;
    let min_known = min_known.clamp(1, scenario.len());
    let mut current: Vec<String> = Vec::new();
    let mut known: BTreeSet<String> = BTreeSet::new();
    let mut steps = Vec::with_capacity(scenario.len());

    for id in &scenario.reveal_order {
        known.insert(id.clone());
        let j = known.len();
        let b = scenario
            .get(id)
            .ok_or_else(|| Error::invalid("scenario", format!("no box {id}")))?;
        let reveal = measure(b, &NoiseConfig::default(), 0);
        let before = current.clone();

        if j >= min_known {
            let same_boxes = |s: &[String]| s.iter().all(|x| known.contains(x));
            let candidates: BTreeSet<&[String]> = catalog
                .completed
                .iter()
                .map(|c| &c[..j])
                .filter(|p| same_boxes(p))
                .collect();
            if !candidates.is_empty() {
                let score = |s: &[String]| joint_score(s, prefs, props);
                let (best, best_score) = candidates
                    .iter()
                    .map(|c| (*c, score(c)))
                    .min_by(|a, b| rank(a.1, a.0, b.1, b.0))
                    .expect("non-empty");
                let held = &target[..j];
                let keep = same_boxes(held) && best_score <= score(held);
                if !keep {
                    let best = best.to_vec();
                    target = catalog
                        .completions(&best)
                        .min_by(|a, b| order(a, b))
                        .cloned()
                        .ok_or_else(|| Error::BrokenCatalog {
                            scenario: catalog.scenario_id.clone(),
                            prefix: best.join(","),
                        })?;
                }
                let partial = target[..j].to_vec();
                check_prefix(catalog, &partial)?;
                current = partial;
            }
        }
        steps.push(Step {
            reveal,
            actions: convert(&before, &current),
            stack_before: before,
            stack_after: current.clone(),
            target: target.clone(),
        });
    }

    if !catalog.is_completed(&current) {
        return Err(Error::BrokenCatalog {
            scenario: catalog.scenario_id.clone(),
            prefix: current.join(","),
        });
    }
    Ok(Trajectory {
        scenario_id: scenario.id.clone(),
        prefs: prefs.clone(),
        target_score: joint_score(&current, prefs, props),
        final_stack: current,
        steps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub scenario_id: String,
    pub preferences: String,
    pub template_id: u32,
    pub mode: Mode,
    pub target_score: f64,
    pub final_stack: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatSample {
    pub messages: Vec<ChatMessage>,
    pub meta: SampleMeta,
}

impl ChatSample {
    pub fn assistant_turns(&self) -> impl Iterator<Item = &ChatMessage> {
        self.messages.iter().filter(|m| m.role == Role::Assistant)
    }
}

fn observation(
    scenario: &Scenario,
    prefs: &PreferenceSet,
    text: &str,
    mode: Mode,
    revealed: &[Measurement],
    stack: &[String],
) -> Observation {
    let mut state = StackState::new(scenario.ids());
    for id in stack {
        state
            .apply(&Action::Stack(id.clone()))
            .expect("trajectory stacks are legal");
    }
    Observation {
        mode,
        preference_text: text.to_string(),
        prefs: prefs.clone(),
        boxes: scenario
            .reveal_order
            .iter()
            .map(|id| {
                let b = scenario.get(id).expect("reveal ids are box ids");
                ObservedBox {
                    id: id.clone(),
                    dims: (b.w, b.d, b.h),
                    measurement: revealed.iter().find(|m| &m.box_id == id).cloned(),
                }
            })
            .collect(),
        stack: state,
    }
}

/// Online transcript (one USER/ASSISTANT pair per reveal) and, when asked,
/// the single-turn offline form. Only training templates are used.
pub fn emit_samples(
    traj: &Trajectory,
    scenario: &Scenario,
    bank: &TemplateBank,
    template_key: u64,
    cfg: &DatasetConfig,
) -> Result<Vec<ChatSample>> {
    let rendered = bank.render(
        &traj.prefs,
        TemplateChoice::Random {
            split: Split::Train,
            key: template_key,
        },
    )?;
    let meta = |mode| SampleMeta {
        scenario_id: traj.scenario_id.clone(),
        preferences: traj.prefs.label(),
        template_id: rendered.template_id,
        mode,
        target_score: traj.target_score,
        final_stack: traj.final_stack.clone(),
    };

    let mut messages = Vec::with_capacity(2 * traj.steps.len());
    let mut revealed = Vec::new();
    for step in &traj.steps {
        revealed.push(step.reveal.clone());
        let obs = observation(
            scenario,
            &traj.prefs,
            &rendered.text,
            Mode::Online,
            &revealed,
            &step.stack_before,
        );
        messages.push(ChatMessage {
            role: Role::User,
            content: render_observation(&obs),
        });
        messages.push(ChatMessage {
            role: Role::Assistant,
            content: Plan::from_actions(step.actions.clone()).to_string(),
        });
    }

    let mut out = Vec::new();
    if cfg.per_prefix {
        for k in 1..=traj.steps.len() {
            out.push(ChatSample {
                messages: messages[..2 * k].to_vec(),
                meta: meta(Mode::Online),
            });
        }
    } else {
        out.push(ChatSample {
            messages,
            meta: meta(Mode::Online),
        });
    }

    if cfg.include_offline {
        let obs = observation(
            scenario,
            &traj.prefs,
            &rendered.text,
            Mode::Offline,
            &revealed,
            &[],
        );
        out.push(ChatSample {
            messages: vec![
                ChatMessage {
                    role: Role::User,
                    content: render_observation(&obs),
                },
                ChatMessage {
                    role: Role::Assistant,
                    content: Plan::from_actions(convert::<String, String>(&[], &traj.final_stack))
                        .to_string(),
                },
            ],
            meta: meta(Mode::Offline),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplayReport {
    pub final_stack: Vec<String>,
    pub complete: bool,
    pub score: f64,
    pub actions: usize,
}

/// Parses every ASSISTANT turn, applies the actions from the empty stack
/// and scores the final stack with ground-truth properties.
pub fn replay_sample(
    sample: &ChatSample,
    scenario: &Scenario,
    catalog: &StackCatalog,
) -> Result<ReplayReport> {
    let prefs: PreferenceSet = sample.meta.preferences.parse()?;
    if sample.messages.first().map(|m| m.role) != Some(Role::User) {
        return Err(Error::invalid("sample", "first message must be USER"));
    }
    for pair in sample.messages.windows(2) {
        if pair[0].role == pair[1].role {
            return Err(Error::invalid("sample", "roles must alternate"));
        }
    }
    let mut state = StackState::new(scenario.ids());
    let mut actions = 0;
    for m in sample.assistant_turns() {
        for a in parse_plan(&m.content)?.moves() {
            state.apply(a)?;
            actions += 1;
        }
    }
    let complete = state.is_complete() && catalog.is_completed(&state.stacked);
    let score = if state.stacked.is_empty() {
        0.0
    } else {
        joint_score(&state.stacked, &prefs, &catalog.props)
    };
    Ok(ReplayReport {
        final_stack: state.stacked,
        complete,
        score,
        actions,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub config_hash: String,
    pub master_seed: u64,
    pub template_seed: u64,
    pub count: usize,
    pub by_preference: Vec<(String, usize)>,
}

pub fn manifest_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".manifest.json");
    PathBuf::from(p)
}

/// JSON Lines plus `<path>.manifest.json`.
pub fn write_dataset(
    samples: &[ChatSample],
    path: &Path,
    config_hash: &str,
    master_seed: u64,
    template_seed: u64,
) -> Result<Manifest> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    let mut by_pref: Vec<(String, usize)> = Vec::new();
    for s in samples {
        let line = serde_json::to_string(s).map_err(|e| Error::json(path, e))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
        match by_pref.iter_mut().find(|(p, _)| *p == s.meta.preferences) {
            Some((_, n)) => *n += 1,
            None => by_pref.push((s.meta.preferences.clone(), 1)),
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    let manifest = Manifest {
        format_version: 1,
        config_hash: config_hash.to_string(),
        master_seed,
        template_seed,
        count: samples.len(),
        by_preference: by_pref,
    };
    let mp = manifest_path(path);
    std::fs::write(
        &mp,
        serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )
    .map_err(|e| Error::io(&mp, e))?;
    Ok(manifest)
}

pub fn read_dataset(path: &Path) -> Result<Vec<ChatSample>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(f).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::json(path, e))?);
    }
    Ok(out)
}

/// One generated trajectory with everything needed to check it.
#[derive(Debug, Clone)]
pub struct GeneratedItem {
    pub scenario: Scenario,
    pub catalog: StackCatalog,
    pub trajectory: Trajectory,
    pub samples: Vec<ChatSample>,
}

/// Feasible scenarios per preference set, trajectories and samples, in a
/// deterministic order independent of the thread count.
pub fn generate<F>(gen: &GenConfig, cfg: &DatasetConfig, simulate: F) -> Result<Vec<GeneratedItem>>
where
    F: Fn(&Scenario) -> Result<StackCatalog> + Sync,
{
    let bank = TemplateBank::builtin();
    let jobs: Vec<(usize, usize)> = (0..cfg.preference_sets.len())
        .flat_map(|s| (0..cfg.trajectories_per_set).map(move |k| (s, k)))
        .collect();
    jobs.par_iter()
        .map(|&(s, k)| {
            let prefs = &cfg.preference_sets[s];
            let slot = KeyBuilder::new("dataset")
                .u64(s as u64)
                .u64(k as u64)
                .seed();
            let f = sample_feasible_with(gen, prefs, cfg.threshold, slot, &simulate)?;
            let trajectory = build_trajectory(&f.scenario, &f.catalog, prefs, cfg.min_known)?;
            let key = KeyBuilder::new("template")
                .u64(cfg.template_seed)
                .str(&f.scenario.id)
                .str(&prefs.label())
                .seed();
            let samples = emit_samples(&trajectory, &f.scenario, &bank, key, cfg)?;
            Ok(GeneratedItem {
                scenario: f.scenario,
                catalog: f.catalog,
                trajectory,
                samples,
            })
        })
        .collect()
}

pub fn config_hash<T: Serialize>(parts: &T) -> String {
    sha256_hex(
        serde_json::to_string(parts)
            .expect("config serializes")
            .as_bytes(),
    )
}
