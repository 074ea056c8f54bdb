use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use stacklab::agents::{AgentFactory, AgentSpec, Mode};
use stacklab::cache::CatalogCache;
use stacklab::config::Config;
use stacklab::dataset::{self, config_hash, read_dataset, replay_sample, write_dataset};
use stacklab::eval::{export_results, run_suite, with_workers};
use stacklab::fixtures;
use stacklab::model::{box_stability, box_weight, StackState};
use stacklab::preference::{best_achievable, joint_score};
use stacklab::scenario::{sample_feasible_with, sample_scenario};
use stacklab::{parse_plan, Error, PreferenceSet, Result, Scenario, StackCatalog};

#[derive(Parser)]
#[command(
    name = "stacklab",
    version,
    about = "Box-stacking scenarios, stability catalogs, datasets and planner evaluation"
)]
struct Cli {
    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON config file; missing fields take defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// Recompute catalogs instead of using the on-disk cache.
    #[arg(long, global = true)]
    no_cache: bool,
    /// Reuse catalog disturbances during evaluation.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    frozen_noise: Option<bool>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Configuration helpers.
    #[command(subcommand)]
    Config(ConfigCmd),
    /// Sample scenarios.
    Gen(GenArgs),
    /// Enumerate the stable stacks of scenarios.
    Simulate(SimulateArgs),
    /// Emit a fine-tuning dataset as JSON Lines.
    Dataset(DatasetArgs),
    /// Run an evaluation suite.
    Eval(EvalArgs),
    /// Pretty-print a scenario, catalog or dataset sample.
    Inspect(InspectArgs),
    /// Replay a dataset sample or plan against a scenario.
    Replay(ReplayArgs),
    /// Golden fixture checks.
    #[command(subcommand)]
    Fixtures(FixturesCmd),
}

#[derive(Subcommand)]
enum ConfigCmd {
    /// Print (or write) the default configuration.
    Init {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 1)]
    count: u64,
    /// Only keep scenarios whose best stack reaches the threshold for these preferences.
    #[arg(long)]
    feasible: Option<PreferenceSet>,
    /// Directory for `<id>.json`; stdout (one scenario per line) if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario files; if none, `--count` scenarios are generated.
    files: Vec<PathBuf>,
    #[arg(long, default_value_t = 1)]
    count: u64,
    /// Directory for `<id>.catalog.json`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DatasetArgs {
    #[arg(long)]
    out: PathBuf,
    /// Trajectories per preference set.
    #[arg(long)]
    per_set: Option<usize>,
    #[arg(long)]
    per_prefix: bool,
    #[arg(long)]
    no_offline: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Output directory for results.csv, metrics.md and summary.json.
    #[arg(long)]
    out: PathBuf,
    /// Scenarios per preference set.
    #[arg(long)]
    per_set: Option<usize>,
    /// Comma-separated agents: oracle, greedy, random, llm.
    #[arg(long, value_delimiter = ',')]
    agents: Vec<String>,
    /// Comma-separated modes: offline, online.
    #[arg(long, value_delimiter = ',')]
    modes: Vec<Mode>,
    /// Chat endpoint base URL for the llm agent.
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
}

#[derive(Args)]
struct InspectArgs {
    file: PathBuf,
    /// Line of a JSON Lines file (1-based).
    #[arg(long, default_value_t = 1)]
    line: usize,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Dataset file (JSON Lines).
    #[arg(long, conflicts_with = "plan")]
    sample: Option<PathBuf>,
    /// Line of the dataset file (1-based).
    #[arg(long, default_value_t = 1)]
    line: usize,
    /// Plan text, e.g. "stack box3; stack box2; stack box1".
    #[arg(long)]
    plan: Option<String>,
    /// Preferences used to score a plain plan.
    #[arg(long, default_value = "weight")]
    prefs: PreferenceSet,
}

#[derive(Subcommand)]
enum FixturesCmd {
    /// Run every fixture and report differences.
    Verify {
        #[arg(long)]
        dir: Option<PathBuf>,
    },
    /// Rewrite expected outputs from the current code.
    Regen {
        #[arg(long)]
        dir: Option<PathBuf>,
        /// Also (re)write the default inputs.
        #[arg(long)]
        init: bool,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } | Error::Json { .. } | Error::Csv { .. } => 3,
        Error::Invalid { .. } | Error::UnknownTemplate(_) => 1,
        _ => 2,
    }
}

struct Ctx {
    cfg: Config,
    cache: CatalogCache,
    workers: usize,
}

impl Ctx {
    fn catalog(&self, s: &Scenario) -> Result<StackCatalog> {
        self.cache.catalog(s, &self.cfg.physics)
    }
}

fn read_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    Scenario::from_json(&text)
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(d) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(d).map_err(|e| io_err(d, e))?;
    }
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn nth_sample(path: &Path, line: usize) -> Result<dataset::ChatSample> {
    let all = read_dataset(path)?;
    let n = all.len();
    all.into_iter()
        .nth(line.saturating_sub(1))
        .ok_or_else(|| Error::Invalid {
            what: "line",
            reason: format!("{} has {n} samples", path.display()),
        })
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.generator.master_seed = seed;
    }
    if let Some(f) = cli.frozen_noise {
        cfg.suite.frozen_noise = f;
    }
    let cache = if cli.no_cache {
        CatalogCache::disabled()
    } else {
        CatalogCache::new(
            cfg.cache_dir
                .clone()
                .unwrap_or_else(|| ".stacklab-cache".into()),
        )
    };
    let ctx = Ctx {
        cfg,
        cache,
        workers: cli.workers.max(1),
    };
    let mut out = std::io::stdout().lock();
    let mut say = |s: String| writeln!(out, "{s}").map_err(|e| io_err(Path::new("<stdout>"), e));

    match cli.cmd {
        Cmd::Config(ConfigCmd::Init { out: Some(p) }) => write_file(&p, &ctx.cfg.to_json()),
        Cmd::Config(ConfigCmd::Init { out: None }) => say(ctx.cfg.to_json().trim_end().to_string()),

        Cmd::Gen(a) => {
            let g = &ctx.cfg.generator;
            let scenarios: Vec<Scenario> = with_workers(ctx.workers, || {
                use rayon::prelude::*;
                (0..a.count)
                    .into_par_iter()
                    .map(|i| match &a.feasible {
                        Some(p) => sample_feasible_with(g, p, ctx.cfg.dataset.threshold, i, |s| {
                            ctx.catalog(s)
                        })
                        .map(|f| f.scenario),
                        None => sample_scenario(g, i),
                    })
                    .collect::<Result<Vec<_>>>()
            })??;
            for s in &scenarios {
                match &a.out {
                    Some(dir) => write_file(&dir.join(format!("{}.json", s.id)), &s.to_json())?,
                    None => say(s.to_json())?,
                }
            }
            Ok(())
        }

        Cmd::Simulate(a) => {
            let scenarios = if a.files.is_empty() {
                (0..a.count)
                    .map(|i| sample_scenario(&ctx.cfg.generator, i))
                    .collect::<Result<Vec<_>>>()?
            } else {
                a.files
                    .iter()
                    .map(|f| read_scenario(f))
                    .collect::<Result<Vec<_>>>()?
            };
            for s in &scenarios {
                let c = with_workers(ctx.workers, || ctx.catalog(s))??;
                let total: usize = (1..=s.len()).product();
                say(format!(
                    "{}: {} boxes, {} of {} orders stable, {} stable prefixes, catalog {}",
                    s.id,
                    s.len(),
                    c.completed.len(),
                    total,
                    c.prefixes.len(),
                    &c.digest()[..16]
                ))?;
                if let Some(dir) = &a.out {
                    write_file(&dir.join(format!("{}.catalog.json", s.id)), &c.to_json())?;
                }
            }
            Ok(())
        }

        Cmd::Dataset(a) => {
            let mut dc = ctx.cfg.dataset.clone();
            if let Some(n) = a.per_set {
                dc.trajectories_per_set = n;
            }
            dc.per_prefix |= a.per_prefix;
            dc.include_offline &= !a.no_offline;
            let items = with_workers(ctx.workers, || {
                dataset::generate(&ctx.cfg.generator, &dc, |s| ctx.catalog(s))
            })??;
            let samples: Vec<_> = items.into_iter().flat_map(|i| i.samples).collect();
            let hash = config_hash(&(&ctx.cfg.generator, &ctx.cfg.physics, &dc));
            let m = write_dataset(
                &samples,
                &a.out,
                &hash,
                ctx.cfg.generator.master_seed,
                dc.template_seed,
            )?;
            say(format!("wrote {} samples to {}", m.count, a.out.display()))
        }

        Cmd::Eval(a) => {
            let mut sc = ctx.cfg.suite.clone();
            if let Some(n) = a.per_set {
                sc.scenarios_per_set = n;
            }
            if !a.agents.is_empty() {
                sc.agents = a.agents.clone();
            }
            if !a.modes.is_empty() {
                sc.modes = a.modes.clone();
            }
            let mut endpoint = ctx.cfg.endpoint.clone();
            if let Some(u) = a.endpoint {
                endpoint.base_url = u;
            }
            if let Some(m) = a.model {
                endpoint.model = m;
            }
            let agents = sc
                .agents
                .iter()
                .map(|n| {
                    AgentSpec::parse(n, &endpoint).map(|s| Arc::new(s) as Arc<dyn AgentFactory>)
                })
                .collect::<Result<Vec<_>>>()?;
            let res = run_suite(
                &ctx.cfg.generator,
                &sc,
                &agents,
                &ctx.cfg.physics,
                ctx.workers,
                |s| ctx.catalog(s),
            )?;
            export_results(&res.results, &res.table, &a.out)?;
            say(res.table.to_markdown().trim_end().to_string())
        }

        Cmd::Inspect(a) => {
            let text = std::fs::read_to_string(&a.file).map_err(|e| io_err(&a.file, e))?;
            if let Ok(s) = Scenario::from_json(&text) {
                say(format!(
                    "scenario {} (seed {}), reveal order {}",
                    s.id,
                    s.seed,
                    s.reveal_order.join(",")
                ))?;
                for b in &s.boxes {
                    say(format!(
                        "  {}: {:.3}x{:.3}x{:.3} m, weight {:.3} kg, stability {:.3}, {} objects",
                        b.id,
                        b.w,
                        b.d,
                        b.h,
                        box_weight(b),
                        box_stability(b),
                        b.contents.len()
                    ))?;
                }
                return Ok(());
            }
            if let Ok(c) = serde_json::from_str::<StackCatalog>(&text) {
                say(format!(
                    "catalog {}: {} stable prefixes, {} completed stacks",
                    c.scenario_id,
                    c.prefixes.len(),
                    c.completed.len()
                ))?;
                for st in &c.completed {
                    say(format!("  {}", st.join(",")))?;
                }
                return Ok(());
            }
            let s = nth_sample(&a.file, a.line)?;
            say(format!(
                "sample {} [{}] {} template {}",
                s.meta.scenario_id, s.meta.preferences, s.meta.mode, s.meta.template_id
            ))?;
            for m in &s.messages {
                let role = serde_json::to_value(m.role).expect("role serializes");
                say(format!(
                    "--- {}\n{}",
                    role.as_str().unwrap_or("?"),
                    m.content
                ))?;
            }
            Ok(())
        }

        Cmd::Replay(a) => {
            let s = read_scenario(&a.scenario)?;
            let c = ctx.catalog(&s)?;
            let report = match (&a.sample, &a.plan) {
                (Some(p), _) => replay_sample(&nth_sample(p, a.line)?, &s, &c)?,
                (None, Some(text)) => {
                    let plan = parse_plan(text)?;
                    let mut st = StackState::new(s.ids());
                    for act in plan.moves() {
                        st.apply(act)?;
                    }
                    let best = best_achievable(&c, &a.prefs)?.1;
                    let score = if st.stacked.is_empty() {
                        0.0
                    } else {
                        joint_score(&st.stacked, &a.prefs, &c.props)
                    };
                    say(format!("best achievable {best:.4}"))?;
                    dataset::ReplayReport {
                        complete: st.is_complete() && c.is_completed(&st.stacked),
                        actions: plan.moves().count(),
                        final_stack: st.stacked,
                        score,
                    }
                }
                (None, None) => {
                    return Err(Error::Invalid {
                        what: "replay",
                        reason: "pass --sample or --plan".into(),
                    })
                }
            };
            say(format!(
                "final stack {} ({}), score {:.4}, {} actions",
                if report.final_stack.is_empty() {
                    "empty".into()
                } else {
                    report.final_stack.join(",")
                },
                if report.complete {
                    "complete and stable"
                } else {
                    "incomplete or unstable"
                },
                report.score,
                report.actions
            ))
        }

        Cmd::Fixtures(FixturesCmd::Verify { dir }) => {
            let dir = dir.unwrap_or_else(fixtures::default_dir);
            let report = fixtures::verify_fixtures(&dir)?;
            for o in &report.outcomes {
                say(format!(
                    "{} {}",
                    if o.passed { "PASS" } else { "FAIL" },
                    o.name
                ))?;
                for d in &o.diffs {
                    say(format!("    {d}"))?;
                }
            }
            report.into_result().map(|_| ())
        }
        Cmd::Fixtures(FixturesCmd::Regen { dir, init }) => {
            let dir = dir.unwrap_or_else(fixtures::default_dir);
            if init {
                fixtures::write_inputs(&dir)?;
            }
            fixtures::regenerate_fixtures(&dir)?;
            say(format!("regenerated fixtures in {}", dir.display()))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
