//! Golden fixtures: pinned inputs and the outputs they must reproduce.
//!
//! Layout under a versioned directory (`fixtures/v1` in this crate):
//!
//! ```text
//! manifest.json            list of fixtures
//! three_box/scenario.json  hand-built three-box scenario
//! three_box/expected.json
//! generated/config.json    generator + suite settings
//! generated/expected.json
//! llm/request.json         exact request body for the example observation
//! llm/response.json        reply the adapter must accept
//! ```
//!
//! Discrete outputs must match exactly; scores within [`SCORE_TOLERANCE`].

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::agents::{
    few_shot_pair, Agent, AgentFactory, AgentSpec, ChatMessage, ChatRequest, ChatResponse,
    EndpointConfig, LlmAgent, Mode, Observation, ObservedBox, Role, ScriptedAgent, Transport,
    SYSTEM_PROMPT,
};
use crate::dataset::{build_trajectory, emit_samples, ChatSample, DatasetConfig};
use crate::error::{Error, Result};
use crate::eval::{run_episode, run_episodes, EpisodeOptions, SuiteConfig, SuiteScenario};
use crate::keys::sha256_hex;
use crate::model::{measure, BoxSpec, ContentObject, NoiseConfig, Scenario, StackState};
use crate::plan::parse_plan;
use crate::preference::{
    best_achievable, PreferenceKind, PreferenceSet, Split, TemplateBank, TemplateChoice,
};
use crate::scenario::{sample_scenario, GenConfig};
use crate::sim::{enumerate_stacks, PhysParams};

pub const SCORE_TOLERANCE: f64 = 1e-9;

/// Seed under which all six orders of the three-box scenario stand.
pub const THREE_BOX_SEED: u64 = 1;

/// Turns of the scripted three-box demonstration.
pub const DEMO_SCRIPT: [&str; 3] = [
    "wait",
    "stack box2, stack box1",
    "unstack box1; unstack box2; stack box3; stack box2; stack box1",
];

/// Three identical cardboard boxes: a steel cube (dense, compact), two
/// aluminium cylinders (medium) and a lead ball (heavy, rolls).
pub fn vb6_scenario() -> Scenario {
    let mk = |id: &str, contents: Vec<ContentObject>| {
        BoxSpec::new(id, (0.25, 0.25, 0.20), 0.005, 690.0, contents).expect("fixture box is valid")
    };
    let steel = ContentObject::cuboid(0.05, 0.05, 0.05, 7800.0).expect("valid");
    let alu = ContentObject::cylinder(0.08, 0.10, 2700.0).expect("valid");
    let lead = ContentObject::sphere(0.10, 11300.0).expect("valid");
    Scenario {
        id: "three-box".into(),
        seed: THREE_BOX_SEED,
        boxes: vec![
            mk("box1", vec![steel]),
            mk("box2", vec![alu.clone(), alu]),
            mk("box3", vec![lead]),
        ],
        reveal_order: vec!["box1".into(), "box2".into(), "box3".into()],
    }
}

fn weight() -> PreferenceSet {
    PreferenceSet::single(PreferenceKind::Weight)
}

/// Dataset sample for the three-box scenario under the weight preference.
pub fn example_sample(mode: Mode) -> ChatSample {
    let s = vb6_scenario();
    let c = enumerate_stacks(&s, &PhysParams::default()).expect("fixture enumerates");
    let t = build_trajectory(&s, &c, &weight(), 2).expect("fixture trajectory");
    let samples = emit_samples(
        &t,
        &s,
        &TemplateBank::builtin(),
        0,
        &DatasetConfig::default(),
    )
    .expect("fixture samples");
    samples
        .into_iter()
        .find(|x| x.meta.mode == mode)
        .expect("both modes emitted")
}

/// First decision point of the three-box scenario (all boxes known offline,
/// one box known online), with an eval-split phrasing.
pub fn example_observation(mode: Mode) -> Observation {
    let s = vb6_scenario();
    let known = match mode {
        Mode::Offline => s.len(),
        Mode::Online => 1,
    };
    let text = TemplateBank::builtin()
        .render(
            &weight(),
            TemplateChoice::Random {
                split: Split::Eval,
                key: 0,
            },
        )
        .expect("eval templates exist")
        .text;
    Observation {
        mode,
        preference_text: text,
        prefs: weight(),
        boxes: s
            .reveal_order
            .iter()
            .enumerate()
            .map(|(i, id)| {
                let b = s.get(id).expect("fixture ids");
                ObservedBox {
                    id: id.clone(),
                    dims: (b.w, b.d, b.h),
                    measurement: (i < known).then(|| measure(b, &NoiseConfig::default(), 0)),
                }
            })
            .collect(),
        stack: StackState::new(s.ids()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FixtureKind {
    /// Catalog, transcript and episodes for one scenario file.
    Pipeline {
        scenario: String,
        preferences: String,
    },
    /// Generator output plus a small suite.
    Generated { config: String },
    /// Adapter wire format.
    LlmWire { request: String, response: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenFixture {
    pub name: String,
    #[serde(flatten)]
    pub kind: FixtureKind,
    /// Expected outputs, relative to the fixture directory.
    pub expected: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureManifest {
    pub version: u32,
    pub fixtures: Vec<GoldenFixture>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub agent: String,
    pub mode: Mode,
    pub success: bool,
    pub final_stack: Vec<String>,
    pub relative_score: f64,
    pub scaled_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineExpected {
    pub scenario_digest: String,
    pub catalog_digest: String,
    pub completed: Vec<Vec<String>>,
    pub best_stack: Vec<String>,
    pub best_score: f64,
    pub transcript: Vec<ChatMessage>,
    pub episodes: Vec<EpisodeRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedInput {
    pub generator: GenConfig,
    pub scenarios: u64,
    pub suite: SuiteConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedScenario {
    pub scenario_id: String,
    pub scenario_digest: String,
    pub catalog_digest: String,
    pub completed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedExpected {
    pub scenarios: Vec<GeneratedScenario>,
    pub episodes: Vec<EpisodeRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixtureOutcome {
    pub name: String,
    pub passed: bool,
    pub diffs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixtureReport {
    pub outcomes: Vec<FixtureOutcome>,
}

impl FixtureReport {
    pub fn passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }

    /// First failure as [`Error::FixtureMismatch`].
    pub fn into_result(self) -> Result<Self> {
        match self.outcomes.iter().find(|o| !o.passed) {
            Some(o) => Err(Error::FixtureMismatch {
                name: o.name.clone(),
                diff: o.diffs.join("; "),
            }),
            None => Ok(self),
        }
    }
}

/// `fixtures/v1` of this crate's source tree.
pub fn default_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join("v1")
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    if let Some(d) = path.parent() {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let text = serde_json::to_string_pretty(v).expect("fixture serializes") + "\n";
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_manifest(dir: &Path) -> Result<FixtureManifest> {
    read_json(&dir.join("manifest.json"))
}

fn row(r: &crate::eval::EpisodeResult) -> EpisodeRow {
    EpisodeRow {
        agent: r.agent.clone(),
        mode: r.mode,
        success: r.success,
        final_stack: r.final_stack.clone(),
        relative_score: r.relative_score,
        scaled_score: r.scaled_score,
    }
}

fn builtin_agents() -> Vec<Arc<dyn AgentFactory>> {
    vec![
        Arc::new(AgentSpec::Oracle),
        Arc::new(AgentSpec::Greedy),
        Arc::new(AgentSpec::Random),
    ]
}

fn compute_pipeline(scenario: &Scenario, prefs: &PreferenceSet) -> Result<PipelineExpected> {
    let params = PhysParams::default();
    let catalog = enumerate_stacks(scenario, &params)?;
    let (best_stack, best_score) = best_achievable(&catalog, prefs)?;
    let traj = build_trajectory(scenario, &catalog, prefs, 2)?;
    let samples = emit_samples(
        &traj,
        scenario,
        &TemplateBank::builtin(),
        0,
        &DatasetConfig::default(),
    )?;
    let suite = SuiteConfig {
        preference_sets: vec![prefs.clone()],
        ..SuiteConfig::default()
    };
    let sc = SuiteScenario {
        set_index: 0,
        prefs: prefs.clone(),
        scenario: scenario.clone(),
        catalog: catalog.clone(),
    };
    let mut episodes: Vec<EpisodeRow> = run_episodes(
        std::slice::from_ref(&sc),
        &builtin_agents(),
        &suite,
        &params,
    )?
    .iter()
    .map(row)
    .collect();
    let mut scripted = ScriptedAgent::new(DEMO_SCRIPT);
    let demo = run_episode(
        scenario,
        &catalog,
        prefs,
        "scripted",
        &mut scripted,
        Mode::Online,
        &params,
        &EpisodeOptions::default(),
    )?;
    episodes.push(row(&demo));
    Ok(PipelineExpected {
        scenario_digest: sha256_hex(scenario.to_json().as_bytes()),
        catalog_digest: catalog.digest(),
        completed: catalog.completed.clone(),
        best_stack,
        best_score,
        transcript: samples.into_iter().next().expect("online sample").messages,
        episodes,
    })
}

fn compute_generated(input: &GeneratedInput) -> Result<GeneratedExpected> {
    let params = PhysParams::default();
    let mut scenarios = Vec::new();
    for i in 0..input.scenarios {
        let s = sample_scenario(&input.generator, i)?;
        let c = enumerate_stacks(&s, &params)?;
        scenarios.push(GeneratedScenario {
            scenario_id: s.id.clone(),
            scenario_digest: sha256_hex(s.to_json().as_bytes()),
            catalog_digest: c.digest(),
            completed: c.completed.len(),
        });
    }
    let out = crate::eval::run_suite(
        &input.generator,
        &input.suite,
        &builtin_agents(),
        &params,
        2,
        |s| enumerate_stacks(s, &params),
    )?;
    Ok(GeneratedExpected {
        scenarios,
        episodes: out.results.iter().map(row).collect(),
    })
}

/// Records every request and answers with a fixed reply.
struct Recorder {
    reply: ChatResponse,
    seen: std::sync::Mutex<Vec<ChatRequest>>,
}

impl Transport for Recorder {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse> {
        self.seen.lock().expect("recorder lock").push(req.clone());
        Ok(self.reply.clone())
    }
}

fn compute_llm_request(reply: ChatResponse) -> Result<(ChatRequest, String)> {
    let rec = Arc::new(Recorder {
        reply,
        seen: Default::default(),
    });
    let mut agent = LlmAgent::new(EndpointConfig::default(), rec.clone(), Mode::Offline);
    let plan = agent.plan(&example_observation(Mode::Offline))?;
    let req = rec.seen.lock().expect("recorder lock").remove(0);
    Ok((req, plan.to_string()))
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= SCORE_TOLERANCE
}

fn diff_rows(expected: &[EpisodeRow], got: &[EpisodeRow], diffs: &mut Vec<String>) {
    if expected.len() != got.len() {
        diffs.push(format!("episode count {} != {}", got.len(), expected.len()));
        return;
    }
    for (e, g) in expected.iter().zip(got) {
        let same = e.agent == g.agent
            && e.mode == g.mode
            && e.success == g.success
            && e.final_stack == g.final_stack
            && close(e.relative_score, g.relative_score)
            && close(e.scaled_score, g.scaled_score);
        if !same {
            diffs.push(format!(
                "episode {} {}: got {g:?}, expected {e:?}",
                e.agent, e.mode
            ));
        }
    }
}

fn check<T: PartialEq + std::fmt::Debug>(
    what: &str,
    got: &T,
    expected: &T,
    diffs: &mut Vec<String>,
) {
    if got != expected {
        diffs.push(format!("{what}: got {got:?}, expected {expected:?}"));
    }
}

fn verify_one(dir: &Path, fx: &GoldenFixture) -> Result<Vec<String>> {
    let mut diffs = Vec::new();
    let expected_path = fx.expected.as_ref().map(|e| dir.join(e));
    match &fx.kind {
        FixtureKind::Pipeline {
            scenario,
            preferences,
        } => {
            let s = Scenario::from_json(
                &std::fs::read_to_string(dir.join(scenario))
                    .map_err(|e| Error::io(dir.join(scenario), e))?,
            )?;
            let got = compute_pipeline(&s, &preferences.parse()?)?;
            let exp: PipelineExpected = read_json(
                expected_path
                    .as_deref()
                    .ok_or_else(|| Error::invalid("fixture", "missing expected"))?,
            )?;
            check(
                "scenario digest",
                &got.scenario_digest,
                &exp.scenario_digest,
                &mut diffs,
            );
            check(
                "catalog digest",
                &got.catalog_digest,
                &exp.catalog_digest,
                &mut diffs,
            );
            check(
                "completed stacks",
                &got.completed,
                &exp.completed,
                &mut diffs,
            );
            check("best stack", &got.best_stack, &exp.best_stack, &mut diffs);
            if !close(got.best_score, exp.best_score) {
                diffs.push(format!(
                    "best score {} != {}",
                    got.best_score, exp.best_score
                ));
            }
            check("transcript", &got.transcript, &exp.transcript, &mut diffs);
            diff_rows(&exp.episodes, &got.episodes, &mut diffs);
        }
        FixtureKind::Generated { config } => {
            let input: GeneratedInput = read_json(&dir.join(config))?;
            let got = compute_generated(&input)?;
            let exp: GeneratedExpected = read_json(
                expected_path
                    .as_deref()
                    .ok_or_else(|| Error::invalid("fixture", "missing expected"))?,
            )?;
            check(
                "generated scenarios",
                &got.scenarios,
                &exp.scenarios,
                &mut diffs,
            );
            diff_rows(&exp.episodes, &got.episodes, &mut diffs);
        }
        FixtureKind::LlmWire { request, response } => {
            let reply: ChatResponse = read_json(&dir.join(response))?;
            let (got, plan) = compute_llm_request(reply.clone())?;
            let exp: ChatRequest = read_json(&dir.join(request))?;
            check("request body", &got, &exp, &mut diffs);
            let roles: Vec<Role> = got.messages.iter().map(|m| m.role).collect();
            check(
                "request roles",
                &roles,
                &vec![Role::System, Role::User, Role::Assistant, Role::User],
                &mut diffs,
            );
            check(
                "system prompt",
                &got.messages[0].content.as_str(),
                &SYSTEM_PROMPT,
                &mut diffs,
            );
            check(
                "few-shot pair",
                &got.messages[1..3].to_vec(),
                &few_shot_pair(Mode::Offline),
                &mut diffs,
            );
            check(
                "parsed reply",
                &plan,
                &parse_plan(reply.text()?)?.to_string(),
                &mut diffs,
            );
        }
    }
    Ok(diffs)
}

/// Runs every fixture in `dir`; errors in a fixture count as failures.
pub fn verify_fixtures(dir: &Path) -> Result<FixtureReport> {
    let manifest = load_manifest(dir)?;
    let outcomes = manifest
        .fixtures
        .iter()
        .map(|fx| {
            let diffs = verify_one(dir, fx).unwrap_or_else(|e| vec![format!("error: {e}")]);
            FixtureOutcome {
                name: fx.name.clone(),
                passed: diffs.is_empty(),
                diffs,
            }
        })
        .collect();
    Ok(FixtureReport { outcomes })
}

/// Rewrites every expected file from the current code.
pub fn regenerate_fixtures(dir: &Path) -> Result<()> {
    let manifest = load_manifest(dir)?;
    for fx in &manifest.fixtures {
        let expected = fx.expected.as_ref().map(|e| dir.join(e));
        match &fx.kind {
            FixtureKind::Pipeline {
                scenario,
                preferences,
            } => {
                let s = Scenario::from_json(
                    &std::fs::read_to_string(dir.join(scenario))
                        .map_err(|e| Error::io(dir.join(scenario), e))?,
                )?;
                let got = compute_pipeline(&s, &preferences.parse()?)?;
                write_json(
                    &expected.ok_or_else(|| Error::invalid("fixture", "missing expected"))?,
                    &got,
                )?;
            }
            FixtureKind::Generated { config } => {
                let input: GeneratedInput = read_json(&dir.join(config))?;
                let got = compute_generated(&input)?;
                write_json(
                    &expected.ok_or_else(|| Error::invalid("fixture", "missing expected"))?,
                    &got,
                )?;
            }
            FixtureKind::LlmWire { request, response } => {
                let reply: ChatResponse = read_json(&dir.join(response))?;
                let (req, _) = compute_llm_request(reply)?;
                write_json(&dir.join(request), &req)?;
            }
        }
    }
    Ok(())
}

/// Writes the inputs of the default fixture set into an empty directory.
pub fn write_inputs(dir: &Path) -> Result<()> {
    write_json(&dir.join("three_box/scenario.json"), &vb6_scenario())?;
    let generator = GenConfig {
        master_seed: 7,
        boxes: [3, 4],
        ..GenConfig::default()
    };
    let suite = SuiteConfig {
        scenarios_per_set: 1,
        ..SuiteConfig::default()
    };
    write_json(
        &dir.join("generated/config.json"),
        &GeneratedInput {
            generator,
            scenarios: 4,
            suite,
        },
    )?;
    let reply = ChatResponse {
        choices: vec![crate::agents::ChatChoice {
            message: ChatMessage::new(Role::Assistant, "stack box3; stack box2; stack box1"),
        }],
    };
    write_json(&dir.join("llm/response.json"), &reply)?;
    let manifest = FixtureManifest {
        version: 1,
        fixtures: vec![
            GoldenFixture {
                name: "three-box".into(),
                kind: FixtureKind::Pipeline {
                    scenario: "three_box/scenario.json".into(),
                    preferences: "weight".into(),
                },
                expected: Some("three_box/expected.json".into()),
            },
            GoldenFixture {
                name: "generated".into(),
                kind: FixtureKind::Generated {
                    config: "generated/config.json".into(),
                },
                expected: Some("generated/expected.json".into()),
            },
            GoldenFixture {
                name: "llm-wire".into(),
                kind: FixtureKind::LlmWire {
                    request: "llm/request.json".into(),
                    response: "llm/response.json".into(),
                },
                expected: None,
            },
        ],
    };
    write_json(&dir.join("manifest.json"), &manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_box_scenario_matches_description() {
        let s = vb6_scenario();
        let c = enumerate_stacks(&s, &PhysParams::default()).unwrap();
        assert_eq!(
            c.completed.len(),
            6,
            "every order must stand under the pinned seed"
        );
        let w: Vec<f64> = s.boxes.iter().map(crate::model::box_weight).collect();
        assert!(w[2] > w[1] && w[1] > w[0]);
        let st: Vec<f64> = s.boxes.iter().map(crate::model::box_stability).collect();
        assert_eq!(st[2], 0.0);
        assert!(st[0] > st[1]);
        let sizes: Vec<f64> = s.boxes.iter().map(BoxSpec::outer_volume).collect();
        assert!(sizes.iter().all(|v| *v == sizes[0]));
    }

    #[test]
    fn shipped_fixtures_pass() {
        let report = verify_fixtures(&default_dir()).unwrap();
        assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn perturbed_seed_is_detected() {
        let src = default_dir();
        let tmp = tempfile::tempdir().unwrap();
        for f in [
            "manifest.json",
            "three_box/scenario.json",
            "three_box/expected.json",
        ] {
            let to = tmp.path().join(f);
            std::fs::create_dir_all(to.parent().unwrap()).unwrap();
            std::fs::copy(src.join(f), to).unwrap();
        }
        let mut m = load_manifest(tmp.path()).unwrap();
        m.fixtures.retain(|f| f.name == "three-box");
        write_json(&tmp.path().join("manifest.json"), &m).unwrap();
        assert!(verify_fixtures(tmp.path()).unwrap().passed());

        let mut s = vb6_scenario();
        s.seed += 1;
        write_json(&tmp.path().join("three_box/scenario.json"), &s).unwrap();
        let report = verify_fixtures(tmp.path()).unwrap();
        assert!(!report.passed());
        assert!(report.outcomes[0]
            .diffs
            .iter()
            .any(|d| d.starts_with("catalog digest")));
        assert!(matches!(
            report.into_result(),
            Err(Error::FixtureMismatch { .. })
        ));
    }
}
