//! The `rar` command line.
//!
//! Every subcommand reads JSONL/JSON inputs, talks to one judge backend
//! through a [`Gateway`], writes its artifacts, and prints a one-line JSON
//! summary on stdout. Failures print `{"error": {...}}` on stderr and map to
//! exit codes: 0 success, 1 user error, 2 judge failure, 3 internal error.

use std::collections::{BTreeMap, HashMap};
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::eval::{
    alignment_accuracy, generate_pairs, mcq_accuracy, EvalError, IdealItem, McqInstance, McqRun,
    PreferencePair, TiePolicy,
};
use crate::gateway::cache::{dir_clear, dir_keys, dir_stats};
use crate::gateway::{
    BackendKind, FailurePolicy, Gateway, JudgeBackend, JudgeCall, MockKeyword, MockScripted,
    RemoteChat, ResponseCache, Transport,
};
use crate::grpo::{run_training, toy_dataset, SimConfig, SimError, ToyPrompt};
use crate::io::{read_json, read_jsonl, write_json, write_jsonl, IoError};
use crate::reward::{score_dataset, MethodConfig, ScoreError, ScoringItem};
use crate::rubric::{LikertNorm, RewardMethod, Rubric};
use crate::synthesis::{synthesize_all, SynthesisTask, DEFAULT_ATTEMPTS};
use crate::templates::{RubricRendering, TemplateId};

/// A failed invocation.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Usage(String),
    Config(Vec<String>),
    Input(String),
    Judge(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::Input(_) => 1,
            CliError::Judge(_) => 2,
            CliError::Internal(_) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::Input(_) => "input",
            CliError::Judge(_) => "judge",
            CliError::Internal(_) => "internal",
        }
    }

    pub fn to_json(&self) -> Value {
        let (message, details) = match self {
            CliError::Config(problems) => (
                format!("{} configuration problem(s)", problems.len()),
                problems.clone(),
            ),
            CliError::Usage(m)
            | CliError::Input(m)
            | CliError::Judge(m)
            | CliError::Internal(m) => (m.clone(), Vec::new()),
        };
        let mut err = json!({"kind": self.kind(), "message": message});
        if !details.is_empty() {
            err["details"] = json!(details);
        }
        json!({ "error": err })
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<ScoreError> for CliError {
    fn from(e: ScoreError) -> Self {
        match e {
            ScoreError::MissingField { .. } => CliError::Input(e.to_string()),
            ScoreError::Judge { .. } => CliError::Judge(e.to_string()),
            ScoreError::Rubric(_) => CliError::Internal(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Score(s) => s.into(),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Score(s) => s.into(),
            EvalError::Judge(_) | EvalError::Malformed { .. } => CliError::Judge(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

/// A backend entry in the config file. `script` feeds scripted mocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendSpec {
    #[serde(flatten)]
    pub backend: JudgeBackend,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script: Option<Vec<String>>,
}

fn default_in_flight() -> usize {
    8
}
fn default_failure() -> FailurePolicy {
    FailurePolicy::Abort
}
fn default_timeout() -> u64 {
    60
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub backends: Vec<BackendSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_failure")]
    pub failure_policy: FailurePolicy,
    #[serde(default)]
    pub rubric_rendering: RubricRendering,
    #[serde(default)]
    pub likert_norm: LikertNorm,
    #[serde(default)]
    pub tie_policy: TiePolicy,
    /// Overrides `sim.seed` when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default)]
    pub sim: SimConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

/// The environment variables the CLI honours.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Env {
    pub api_key: Option<String>,
    pub base_url: Option<String>,
    pub cache_dir: Option<PathBuf>,
}

impl Env {
    pub fn from_process() -> Self {
        let var = |k| std::env::var(k).ok().filter(|v: &String| !v.is_empty());
        Env {
            api_key: var("JUDGE_API_KEY"),
            base_url: var("JUDGE_BASE_URL"),
            cache_dir: var("RAR_CACHE_DIR").map(PathBuf::from),
        }
    }
}

fn pointer(path: &serde_path_to_error::Path) -> String {
    let mut out = String::new();
    for seg in path.iter() {
        use serde_path_to_error::Segment;
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => out.push_str(&format!("/{key}")),
            Segment::Enum { variant } => out.push_str(&format!("/{variant}")),
            Segment::Unknown => out.push_str("/?"),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

/// Parses config text, applies env overrides, and validates. Every
/// semantic problem is reported, each prefixed by its JSON pointer.
pub fn parse_config(text: &str, env: &Env) -> Result<RunConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let mut config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let at = pointer(e.path());
        CliError::Config(vec![format!("{at}: {}", e.into_inner())])
    })?;
    apply_env(&mut config, env);
    let problems = config_problems(&config);
    if problems.is_empty() {
        Ok(config)
    } else {
        Err(CliError::Config(problems))
    }
}

pub fn load_config(path: &Path, env: &Env) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    parse_config(&text, env).map_err(|e| match e {
        CliError::Config(p) => CliError::Config(
            p.into_iter()
                .map(|m| format!("{}#{m}", path.display()))
                .collect(),
        ),
        other => other,
    })
}

fn apply_env(config: &mut RunConfig, env: &Env) {
    if let Some(url) = &env.base_url {
        for spec in &mut config.backends {
            if spec.backend.kind == BackendKind::Remote {
                spec.backend.endpoint = Some(url.clone());
            }
        }
    }
    if let Some(dir) = &env.cache_dir {
        config.cache_dir = Some(dir.clone());
    }
}

fn config_problems(config: &RunConfig) -> Vec<String> {
    let mut out = Vec::new();
    if config.max_in_flight == 0 {
        out.push("/max_in_flight: must be >= 1".to_string());
    }
    let mut seen = HashMap::new();
    for (i, spec) in config.backends.iter().enumerate() {
        for p in spec.backend.problems() {
            out.push(format!("/backends/{i}: {p}"));
        }
        if let Some(first) = seen.insert(spec.backend.name.clone(), i) {
            out.push(format!(
                "/backends/{i}/name: duplicates /backends/{first}/name"
            ));
        }
        if spec.script.is_some() && spec.backend.kind != BackendKind::MockScripted {
            out.push(format!(
                "/backends/{i}/script: only valid for mock_scripted backends"
            ));
        }
    }
    if config.sim.k < 2 {
        out.push("/sim/k: must be >= 2".to_string());
    }
    if !(config.sim.learning_rate > 0.0 && config.sim.learning_rate.is_finite()) {
        out.push("/sim/learning_rate: must be positive".to_string());
    }
    if config.sim.max_in_flight == 0 {
        out.push("/sim/max_in_flight: must be >= 1".to_string());
    }
    out
}

/// Canned replies for the built-in scripted judge, one per template kind.
pub fn default_script_reply(template: TemplateId) -> String {
    match template {
        t if t.is_likert() => "{\"rating\": 7}".to_string(),
        TemplateId::CriterionBinary => "{\"satisfied\": true}".to_string(),
        TemplateId::GpqaVerifier => "Yes".to_string(),
        TemplateId::RubricSynthesis => {
            let items = [
                ("Core diagnosis", "Essential Criteria: Identifies the most likely cause.", 5),
                ("Correct action", "Essential Criteria: States the recommended next step.", 5),
                ("Explains reasoning", "Important Criteria: Explains why the step is appropriate.", 4),
                ("Names risks", "Important Criteria: Mentions the main risk to watch for.", 3),
                ("Gives timing", "Optional Criteria: Says when to seek further help.", 2),
                ("Clear wording", "Optional Criteria: Uses plain language.", 1),
                ("Avoids overclaiming", "Pitfall Criteria: Does not mention uncertainty where it exists.", -1),
            ];
            let arr: Vec<Value> = items
                .iter()
                .map(|(t, d, w)| json!({"title": t, "description": d, "weight": w}))
                .collect();
            serde_json::to_string(&arr).expect("serializable")
        }
        _ => "[reasoning]: Remove the actionable step.\n[perturbed_completion]: It depends; ask someone.\n[chunks_added]:\n- It depends; ask someone.\n[chunks_removed]:\n- the recommended step\n".to_string(),
    }
}

/// Resolves a judge name to a ready gateway. `mock:keyword` and
/// `mock:scripted` always exist; `remote:<model>` builds an ad-hoc remote
/// backend from `JUDGE_BASE_URL`; anything else must be a configured
/// backend.
pub fn build_gateway(
    config: &RunConfig,
    env: &Env,
    judge: &str,
    script: Option<Vec<String>>,
) -> Result<Gateway, CliError> {
    let spec = match judge {
        "mock:keyword" => BackendSpec {
            backend: JudgeBackend::mock(judge, BackendKind::MockKeyword),
            script: None,
        },
        "mock:scripted" => BackendSpec {
            backend: JudgeBackend::mock(judge, BackendKind::MockScripted),
            script: None,
        },
        name => match (
            config.backends.iter().find(|s| s.backend.name == name),
            name.strip_prefix("remote:"),
        ) {
            (Some(spec), _) => spec.clone(),
            (None, Some(model)) if !model.is_empty() => {
                let endpoint = env.base_url.clone().ok_or_else(|| {
                    CliError::Config(vec![format!("judge {name}: JUDGE_BASE_URL is not set")])
                })?;
                BackendSpec {
                    backend: JudgeBackend::remote(name, endpoint, model),
                    script: None,
                }
            }
            _ => {
                let known: Vec<&str> = config
                    .backends
                    .iter()
                    .map(|s| s.backend.name.as_str())
                    .collect();
                return Err(CliError::Config(vec![format!(
                    "judge {name:?} is not defined (configured: {known:?}; built in: mock:keyword, mock:scripted, remote:<model>)"
                )]));
            }
        },
    };
    let backend = spec.backend;
    let transport: Arc<dyn Transport> = match backend.kind {
        BackendKind::MockKeyword => Arc::new(MockKeyword::new()),
        BackendKind::MockScripted => match script.or(spec.script) {
            Some(replies) => Arc::new(MockScripted::new(replies)),
            None => Arc::new(MockScripted::with_rule(|call: &JudgeCall<'_>| {
                default_script_reply(call.template_id)
            })),
        },
        BackendKind::Remote => {
            let key = env.api_key.clone().ok_or_else(|| {
                CliError::Config(vec![format!(
                    "judge {}: JUDGE_API_KEY is not set",
                    backend.name
                )])
            })?;
            Arc::new(RemoteChat::new(
                backend.endpoint.as_deref().unwrap_or_default(),
                backend.model_id.as_deref().unwrap_or_default(),
                backend.temperature,
                key,
                Duration::from_secs(config.timeout_secs),
            ))
        }
    };
    let cache = match &config.cache_dir {
        Some(dir) => ResponseCache::on_disk(dir)
            .map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?,
        None => ResponseCache::in_memory(),
    };
    Ok(Gateway::new(backend, transport)
        .with_cache(cache)
        .with_max_in_flight(config.max_in_flight)
        .with_rubric_rendering(config.rubric_rendering))
}

#[derive(Debug, Parser)]
#[command(
    name = "rar",
    version,
    about = "Rubric-based rewards: synthesis, scoring, toy training, and evaluation"
)]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Response cache directory (overrides config and RAR_CACHE_DIR).
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
    /// Maximum concurrent judge calls.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_in_flight: Option<u64>,
    /// Skip failed items instead of stopping.
    #[arg(long, global = true, value_enum)]
    pub on_failure: Option<FailureArg>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FailureArg {
    Abort,
    Drop,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TieArg {
    Incorrect,
    Half,
}

#[derive(Debug, Args)]
pub struct JudgeArgs {
    /// Judge backend name.
    #[arg(long, default_value = "mock:keyword")]
    pub judge: String,
    /// JSON array of replies for a scripted mock judge.
    #[arg(long)]
    pub script: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate rubrics for question tasks.
    Synthesize {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_ATTEMPTS)]
        attempts: u32,
        #[command(flatten)]
        judge: JudgeArgs,
    },
    /// Score responses under one reward method.
    Score {
        #[arg(long, value_parser = parse_method)]
        method: RewardMethod,
        #[arg(long)]
        input: PathBuf,
        /// Rubrics joined to items by prompt_id.
        #[arg(long)]
        rubrics: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        judge: JudgeArgs,
    },
    /// Train the toy policy with group-relative updates.
    SimGrpo {
        /// Prompt pools (defaults to the bundled toy set).
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, value_parser = parse_method)]
        method: Option<RewardMethod>,
        #[arg(long)]
        out: PathBuf,
        /// Final policy snapshot.
        #[arg(long)]
        policy_out: Option<PathBuf>,
        #[command(flatten)]
        judge: JudgeArgs,
    },
    /// Grade multiple-choice responses by boxed-answer extraction.
    EvalExtract {
        #[arg(long)]
        mcq: PathBuf,
        #[arg(long)]
        responses: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Skip the verifier fallback for unboxed responses.
        #[arg(long)]
        no_verifier: bool,
        #[command(flatten)]
        judge: JudgeArgs,
    },
    /// Build preference pairs by perturbing ideal completions.
    GenPairs {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        judge: JudgeArgs,
    },
    /// Measure how often a judge ranks the chosen response higher.
    BenchAlignment {
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long, value_parser = parse_method, default_value = "rar-implicit")]
        method: RewardMethod,
        #[arg(long)]
        rubrics: Option<PathBuf>,
        #[arg(long, value_enum)]
        ties: Option<TieArg>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        judge: JudgeArgs,
    },
    /// Inspect or clear the response cache.
    Cache {
        #[command(subcommand)]
        action: CacheAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum CacheAction {
    Stats,
    List,
    Clear,
    Get { key: String },
}

fn parse_method(s: &str) -> Result<RewardMethod, String> {
    RewardMethod::from_cli_name(s).ok_or_else(|| {
        let names: Vec<&str> = RewardMethod::ALL.iter().map(|m| m.cli_name()).collect();
        format!("unknown method {s:?}; expected one of {}", names.join(", "))
    })
}

fn read_script(path: &Option<PathBuf>) -> Result<Option<Vec<String>>, CliError> {
    path.as_deref()
        .map(read_json::<Vec<String>>)
        .transpose()
        .map_err(Into::into)
}

fn attach_rubrics<'a>(
    rubrics: &'a Option<PathBuf>,
) -> Result<impl Fn(&str) -> Option<Rubric> + 'a, CliError> {
    let table: BTreeMap<String, Rubric> = match rubrics {
        Some(p) => read_jsonl::<Rubric>(p)?
            .into_iter()
            .map(|r| (r.prompt_id.clone(), r))
            .collect(),
        None => BTreeMap::new(),
    };
    Ok(move |id: &str| table.get(id).cloned())
}

#[derive(Deserialize)]
struct ResponseLine {
    id: String,
    run: usize,
    #[serde(default)]
    seed: u64,
    response: String,
}

/// Runs a parsed command line and returns its stdout summary.
pub fn execute(cli: Cli, env: &Env) -> Result<Value, CliError> {
    let mut config = match &cli.config {
        Some(p) => load_config(p, env)?,
        None => {
            let mut c = RunConfig::default();
            apply_env(&mut c, env);
            c
        }
    };
    if let Some(dir) = cli.cache_dir {
        config.cache_dir = Some(dir);
    }
    if let Some(n) = cli.max_in_flight {
        config.max_in_flight = n as usize;
    }
    if let Some(f) = cli.on_failure {
        config.failure_policy = match f {
            FailureArg::Abort => FailurePolicy::Abort,
            FailureArg::Drop => FailurePolicy::Drop,
        };
    }
    let n = config.max_in_flight;

    match cli.command {
        Command::Synthesize {
            input,
            out,
            report,
            attempts,
            judge,
        } => {
            let tasks: Vec<SynthesisTask> = read_jsonl(&input)?;
            let gateway = build_gateway(&config, env, &judge.judge, read_script(&judge.script)?)?;
            let (rubrics, rep) = synthesize_all(&tasks, &gateway, attempts, n);
            write_jsonl(&out, &rubrics)?;
            if let Some(p) = report {
                write_json(&p, &rep)?;
            }
            if rep.failed > 0 && config.failure_policy == FailurePolicy::Abort {
                let first = rep
                    .tasks
                    .iter()
                    .find(|t| !t.ok)
                    .and_then(|t| t.error.clone());
                return Err(CliError::Judge(format!(
                    "{} of {} task(s) failed; first: {}",
                    rep.failed,
                    rep.total,
                    first.unwrap_or_default()
                )));
            }
            Ok(json!({
                "command": "synthesize",
                "total": rep.total,
                "succeeded": rep.succeeded,
                "failed": rep.failed,
                "backend_calls": gateway.backend_calls(),
            }))
        }
        Command::Score {
            method,
            input,
            rubrics,
            out,
            judge,
        } => {
            let lookup = attach_rubrics(&rubrics)?;
            let mut items: Vec<ScoringItem> = read_jsonl(&input)?;
            for item in &mut items {
                if item.rubric.is_none() {
                    item.rubric = lookup(&item.prompt_id);
                }
            }
            let gateway = build_gateway(&config, env, &judge.judge, read_script(&judge.script)?)?;
            let mc = MethodConfig {
                method,
                likert_norm: config.likert_norm,
            };
            let (records, summary) =
                score_dataset(&items, &mc, &gateway, n, config.failure_policy)?;
            write_jsonl(&out, &records)?;
            let mut v =
                serde_json::to_value(&summary).map_err(|e| CliError::Internal(e.to_string()))?;
            v["command"] = json!("score");
            Ok(v)
        }
        Command::SimGrpo {
            data,
            seed,
            steps,
            method,
            out,
            policy_out,
            judge,
        } => {
            let prompts: Vec<ToyPrompt> = match data {
                Some(p) => read_jsonl(&p)?,
                None => toy_dataset(),
            };
            let mut sim = config.sim.clone();
            sim.seed = seed.or(config.seed).unwrap_or(sim.seed);
            sim.failure_policy = config.failure_policy;
            sim.likert_norm = config.likert_norm;
            if let Some(s) = steps {
                sim.steps = s;
            }
            if let Some(m) = method {
                sim.method = m;
            }
            let gateway = build_gateway(&config, env, &judge.judge, read_script(&judge.script)?)?;
            let run = run_training(&sim, &prompts, &gateway)?;
            write_jsonl(&out, &run.log)?;
            if let Some(p) = policy_out {
                write_json(&p, &run.policy)?;
            }
            let means = run.step_means();
            Ok(json!({
                "command": "sim-grpo",
                "method": sim.method,
                "steps": sim.steps,
                "seed": sim.seed,
                "log_entries": run.log.len(),
                "first_mean_reward": means.first(),
                "last_mean_reward": means.last(),
                "dropped_groups": run.dropped_groups,
                "backend_calls": gateway.backend_calls(),
            }))
        }
        Command::EvalExtract {
            mcq,
            responses,
            out,
            no_verifier,
            judge,
        } => {
            let instances: Vec<McqInstance> = read_jsonl(&mcq)?;
            let lines: Vec<ResponseLine> = read_jsonl(&responses)?;
            let index: HashMap<&str, usize> = instances
                .iter()
                .enumerate()
                .map(|(i, x)| (x.id.as_str(), i))
                .collect();
            let mut runs: BTreeMap<usize, (u64, Vec<Option<String>>)> = BTreeMap::new();
            for l in lines {
                let &i = index.get(l.id.as_str()).ok_or_else(|| {
                    CliError::Input(format!("response for unknown instance {}", l.id))
                })?;
                let run = runs
                    .entry(l.run)
                    .or_insert_with(|| (l.seed, vec![None; instances.len()]));
                if run.0 != l.seed {
                    return Err(CliError::Input(format!(
                        "run {} mixes seeds {} and {}",
                        l.run, run.0, l.seed
                    )));
                }
                run.1[i] = Some(l.response);
            }
            let runs: Vec<McqRun> = runs
                .into_iter()
                .map(|(r, (seed, resp))| {
                    let responses = resp
                        .into_iter()
                        .enumerate()
                        .map(|(i, x)| {
                            x.ok_or_else(|| {
                                CliError::from(EvalError::MissingResponse {
                                    id: instances[i].id.clone(),
                                    run: r,
                                })
                            })
                        })
                        .collect::<Result<_, _>>()?;
                    Ok(McqRun { seed, responses })
                })
                .collect::<Result<_, CliError>>()?;
            let gateway = if no_verifier {
                None
            } else {
                Some(build_gateway(
                    &config,
                    env,
                    &judge.judge,
                    read_script(&judge.script)?,
                )?)
            };
            let report = mcq_accuracy(&instances, &runs, gateway.as_ref(), n)?;
            write_json(&out, &report)?;
            Ok(json!({
                "command": "eval-extract",
                "runs": report.per_run.len(),
                "mean": report.mean,
                "std": report.std,
                "verified": report.verified,
                "backend_calls": gateway.as_ref().map_or(0, Gateway::backend_calls),
            }))
        }
        Command::GenPairs { input, out, judge } => {
            let items: Vec<IdealItem> = read_jsonl(&input)?;
            let gateway = build_gateway(&config, env, &judge.judge, read_script(&judge.script)?)?;
            let (pairs, dropped) = generate_pairs(&gateway, &items, n, config.failure_policy)?;
            write_jsonl(&out, &pairs)?;
            Ok(json!({
                "command": "gen-pairs",
                "pairs": pairs.len(),
                "dropped": dropped.len(),
                "backend_calls": gateway.backend_calls(),
            }))
        }
        Command::BenchAlignment {
            pairs,
            method,
            rubrics,
            ties,
            out,
            judge,
        } => {
            let lookup = attach_rubrics(&rubrics)?;
            let mut pairs: Vec<PreferencePair> = read_jsonl(&pairs)?;
            for p in &mut pairs {
                if p.rubric.is_none() {
                    p.rubric = p.prompt_id.as_deref().and_then(&lookup);
                }
            }
            let tie_policy = match ties {
                Some(TieArg::Half) => TiePolicy::Half,
                Some(TieArg::Incorrect) => TiePolicy::Incorrect,
                None => config.tie_policy,
            };
            let gateway = build_gateway(&config, env, &judge.judge, read_script(&judge.script)?)?;
            let report = alignment_accuracy(&pairs, &gateway, method, tie_policy, n)?;
            write_json(&out, &report)?;
            Ok(json!({
                "command": "bench-alignment",
                "method": report.method,
                "accuracy": report.accuracy,
                "n_pairs": report.n_pairs,
                "n_dropped": report.n_dropped,
                "backend_calls": gateway.backend_calls(),
            }))
        }
        Command::Cache { action } => {
            let dir = config.cache_dir.clone().ok_or_else(|| {
                CliError::Usage("no cache directory: pass --cache-dir or set RAR_CACHE_DIR".into())
            })?;
            let io = |e: std::io::Error| CliError::Input(format!("{}: {e}", dir.display()));
            match action {
                CacheAction::Stats => {
                    let s = if dir.exists() {
                        dir_stats(&dir).map_err(io)?
                    } else {
                        Default::default()
                    };
                    Ok(json!({"command": "cache stats", "entries": s.entries, "bytes": s.bytes}))
                }
                CacheAction::List => {
                    let keys = if dir.exists() {
                        dir_keys(&dir).map_err(io)?
                    } else {
                        Vec::new()
                    };
                    Ok(json!({"command": "cache list", "keys": keys}))
                }
                CacheAction::Clear => {
                    let removed = if dir.exists() {
                        dir_clear(&dir).map_err(io)?
                    } else {
                        0
                    };
                    Ok(json!({"command": "cache clear", "removed": removed}))
                }
                CacheAction::Get { key } => {
                    let cache = ResponseCache::on_disk(&dir).map_err(io)?;
                    let entry = cache
                        .get(&key)
                        .ok_or_else(|| CliError::Input(format!("no cache entry {key}")))?;
                    serde_json::to_value(entry).map_err(|e| CliError::Internal(e.to_string()))
                }
            }
        }
    }
}

/// Parses `args`, runs the command, prints the summary or error, and
/// returns the process exit code.
pub fn run<I, T>(args: I, env: &Env) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let err = CliError::Usage(e.render().to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return err.exit_code();
        }
    };
    match execute(cli, env) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(err) => {
            eprintln!("{}", err.to_json());
            err.exit_code()
        }
    }
}
