//! Command implementations behind the `coevo` binary.
//!
//! Each command parses its inputs, calls the library operation that does
//! the work and writes the result to the given writer.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use coevo_core::config::{BackendConfig, RunConfig};
use coevo_core::curriculum::{filter_mid_band, AnchorPool};
use coevo_core::diversity::{difficulty, BatchTextStats, DEFAULT_SIM_THRESHOLD};
use coevo_core::rewards::{
    challenger_reward_abszero, challenger_reward_rfew, challenger_reward_rzero,
    challenger_reward_spice, challenger_reward_sqlm, ChallengerRewardInput, RewardWeights,
};
use coevo_core::rng::{self, tag};

use crate::backend::{HttpBackend, Recorder, ScriptedBackend, SimulatedBackend, TextGen};
use crate::error::{Error, Result};
use crate::io::{load_anchor_pool, load_questions, load_success_stats, read_jsonl};
use crate::orchestrator::{
    Agents, Checkpoint, LogWriter, Orchestrator, SolverScoring, StepRecord, TextAgents,
};

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const RUN_LOG_FILE: &str = "run.jsonl";

/// The on-disk run configuration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfigFile {
    pub run: RunConfig,
    /// JSONL anchor pool; the simulated world builds its own when unset.
    pub anchors: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

impl CliConfigFile {
    /// Read a TOML file, or JSON when the extension is `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        }
    }

    /// Apply `key=value` overrides. Keys are dotted paths such as
    /// `run.tau_low`; values are read as JSON and fall back to a string.
    pub fn with_overrides(self, overrides: &[String]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self);
        }
        let mut tree = serde_json::to_value(&self).map_err(|e| Error::Config(e.to_string()))?;
        for o in overrides {
            let (key, raw) = o.split_once('=').ok_or_else(|| {
                Error::Config(format!("override `{o}` is not of the form key=value"))
            })?;
            let value = serde_json::from_str(raw)
                .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
            set_path(&mut tree, key.trim(), value)?;
        }
        serde_json::from_value(tree).map_err(|e| Error::Config(format!("after overrides: {e}")))
    }
}

fn set_path(tree: &mut serde_json::Value, key: &str, value: serde_json::Value) -> Result<()> {
    let mut node = tree;
    let mut parts = key.split('.').peekable();
    while let Some(part) = parts.next() {
        let map = node.as_object_mut().ok_or_else(|| {
            Error::Config(format!("override `{key}`: `{part}` is not inside a table"))
        })?;
        if parts.peek().is_none() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map
            .entry(part.to_string())
            .or_insert_with(|| serde_json::Value::Object(Default::default()));
        if node.is_null() {
            *node = serde_json::Value::Object(Default::default());
        }
    }
    Err(Error::Config("empty override key".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    Sim,
    Scripted,
    Http,
}

/// Options of `coevo run` beyond the config file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub backend: Option<BackendKind>,
    pub replay: Option<PathBuf>,
    /// Record every backend exchange to this file (text backends).
    pub record: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub anchors: Option<PathBuf>,
    pub overrides: Vec<String>,
    pub resume: bool,
    /// Stop after this many steps have been executed in this invocation.
    pub max_steps: Option<u64>,
}

/// Final config, anchor path and output directory for a run.
pub fn resolve_run_config(opts: &RunOptions) -> Result<(RunConfig, Option<PathBuf>, PathBuf)> {
    let file = match &opts.config {
        Some(p) => CliConfigFile::load(p)?,
        None => CliConfigFile {
            run: RunConfig::desk_scale(),
            ..CliConfigFile::default()
        },
    };
    let mut file = file.with_overrides(&opts.overrides)?;
    if let Some(seed) = opts.seed {
        file.run.seed = seed;
    }
    if let Some(kind) = opts.backend {
        file.run.backend =
            match (kind, &file.run.backend) {
                (BackendKind::Sim, _) => BackendConfig::Sim,
                (BackendKind::Scripted, _) if opts.replay.is_some() => BackendConfig::Scripted {
                    replay_path: path_string(opts.replay.as_deref().unwrap_or(Path::new(""))),
                },
                (BackendKind::Scripted, b @ BackendConfig::Scripted { .. }) => b.clone(),
                (BackendKind::Scripted, _) => {
                    return Err(Error::Config(
                        "--backend scripted needs --replay or backend.replay_path".into(),
                    ))
                }
                (BackendKind::Http, b @ BackendConfig::Http { .. }) => b.clone(),
                (BackendKind::Http, _) => return Err(Error::Config(
                    "--backend http needs run.backend.endpoint and run.backend.model in the config"
                        .into(),
                )),
            };
    } else if let (Some(replay), BackendConfig::Scripted { .. }) = (&opts.replay, &file.run.backend)
    {
        file.run.backend = BackendConfig::Scripted {
            replay_path: path_string(replay),
        };
    }
    file.run.validate()?;
    let anchors = opts.anchors.clone().or(file.anchors);
    let out_dir = opts
        .out_dir
        .clone()
        .or(file.out_dir)
        .unwrap_or_else(|| PathBuf::from("runs/latest"));
    Ok((file.run, anchors, out_dir))
}

fn path_string(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

/// Bearer token from the environment variable the config names.
pub fn resolve_token(api_key_env: Option<&str>) -> Result<Option<String>> {
    match api_key_env {
        None => Ok(None),
        Some(var) => std::env::var(var).map(Some).map_err(|_| {
            Error::Config(format!(
                "environment variable {var} (run.backend.api_key_env) is not set"
            ))
        }),
    }
}

/// `coevo run`. Progress lines go to `progress`.
pub fn cmd_run(opts: &RunOptions, progress: &mut dyn Write) -> Result<()> {
    let (cfg, anchors_path, out_dir) = resolve_run_config(opts)?;
    let anchors = anchors_path.as_deref().map(load_anchor_pool).transpose()?;
    fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    match cfg.backend.clone() {
        BackendConfig::Sim if opts.record.is_none() => {
            let orch = Orchestrator::simulated(cfg, anchors)?;
            drive(orch, &out_dir, opts, progress)
        }
        BackendConfig::Sim => {
            // Recording needs text exchanges, so the simulated world is
            // driven through its text interface.
            let backend = SimulatedBackend::new(
                cfg.sim.initial_challenger(),
                cfg.sim.initial_solver()?,
                cfg.seed,
            );
            let anchors = Some(anchors.map_or_else(|| sim_anchor_pool(&cfg), Ok)?);
            text_run(cfg, anchors, backend, &out_dir, opts, progress)
        }
        BackendConfig::Scripted { replay_path } => {
            let backend = ScriptedBackend::load(&replay_path)?;
            let anchors = Some(anchors.map_or_else(|| sim_anchor_pool(&cfg), Ok)?);
            text_run(cfg, anchors, backend, &out_dir, opts, progress)
        }
        BackendConfig::Http {
            endpoint,
            model,
            api_key_env,
        } => {
            let token = resolve_token(api_key_env.as_deref())?;
            let backend = HttpBackend::new(endpoint, model, token)?;
            text_run(cfg, anchors, backend, &out_dir, opts, progress)
        }
    }
}

/// The simulated world's anchor pool, used by sim and scripted runs that
/// name no anchor file so that a recording replays against the same pool.
fn sim_anchor_pool(cfg: &RunConfig) -> Result<AnchorPool> {
    Ok(cfg
        .sim
        .anchor_pool(&mut rng::stream(cfg.seed, &[tag::POOL]))?)
}

fn text_run<B: TextGen + 'static>(
    cfg: RunConfig,
    anchors: Option<AnchorPool>,
    backend: B,
    out_dir: &Path,
    opts: &RunOptions,
    progress: &mut dyn Write,
) -> Result<()> {
    let anchors = anchors.unwrap_or_else(AnchorPool::empty);
    let (generation, judge) = (cfg.generation, cfg.judge);
    match &opts.record {
        Some(path) => {
            let backend = Recorder::create(backend, path).map_err(|e| Error::io(path, e))?;
            let agents = TextAgents::new(backend, generation, judge);
            drive(
                Orchestrator::new(cfg, anchors, agents, SolverScoring::Composite)?,
                out_dir,
                opts,
                progress,
            )
        }
        None => {
            let agents = TextAgents::new(backend, generation, judge);
            drive(
                Orchestrator::new(cfg, anchors, agents, SolverScoring::Composite)?,
                out_dir,
                opts,
                progress,
            )
        }
    }
}

/// Run the loop, logging every step and checkpointing after it.
fn drive<A: Agents>(
    mut orch: Orchestrator<A>,
    out_dir: &Path,
    opts: &RunOptions,
    progress: &mut dyn Write,
) -> Result<()> {
    let ck_path = out_dir.join(CHECKPOINT_FILE);
    let mut log = if opts.resume {
        let state = Checkpoint::load(&ck_path)?.state_for(orch.config())?;
        orch.restore_state(state)?;
        // Records past the checkpoint belong to steps that will run again.
        let kept: Vec<StepRecord> = read_jsonl(out_dir.join(RUN_LOG_FILE))?
            .into_iter()
            .filter(|r: &StepRecord| r.step < orch.next_step())
            .collect();
        let mut log = LogWriter::open(out_dir, false)?;
        for r in &kept {
            log.write(r)?;
        }
        let _ = writeln!(progress, "resuming at step {}", orch.next_step());
        log
    } else {
        LogWriter::open(out_dir, false)?
    };
    Checkpoint::new(orch.config(), &orch.state()?)?.save(&ck_path)?;
    let total = orch.total_steps();
    let cycle_len = orch.config().schedule().cycle_len();
    let mut executed = 0;
    while opts.max_steps.is_none_or(|m| executed < m) {
        let Some(record) = orch.step()? else { break };
        executed += 1;
        log.write(&record)?;
        Checkpoint::new(orch.config(), &orch.state()?)?.save(&ck_path)?;
        if record.step % cycle_len == 0 || record.step == total {
            let _ = writeln!(progress, "{}", progress_line(&record, total));
        }
    }
    Ok(())
}

fn progress_line(r: &StepRecord, total: u64) -> String {
    let mut line = format!("step {}/{} (cycle {})", r.step, total, r.cycle);
    if let Some(acc) = r.accuracy {
        line.push_str(&format!(" solver accuracy {acc:.3}"));
    }
    if let Some(mc) = r.policy.mean_competence {
        line.push_str(&format!(" mean competence {mc:.3}"));
    }
    if let Some(reason) = &r.skipped {
        line.push_str(&format!(" skipped: {reason}"));
    }
    line
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardFramework {
    Rfew,
    Rzero,
    Abszero,
    Sqlm,
    Spice,
}

/// Inputs of `coevo eval-rewards`.
#[derive(Debug, Clone, Default)]
pub struct RewardArgs {
    pub p_hat: Option<f64>,
    pub p_succ: Option<f64>,
    pub rep: f64,
    pub align: Option<f64>,
    pub var: Option<f64>,
    pub invalid: bool,
    pub weights: RewardWeights,
}

/// `coevo eval-rewards`: one challenger reward.
pub fn cmd_eval_rewards(framework: RewardFramework, args: &RewardArgs) -> Result<f64> {
    let needs_p_hat = !matches!(framework, RewardFramework::Spice);
    let mut input = if args.invalid {
        ChallengerRewardInput::invalid()
    } else {
        let p_hat = match args.p_hat {
            Some(p) => p,
            None if needs_p_hat => {
                return Err(Error::Config("--p-hat is required for this reward".into()))
            }
            None => 0.0,
        };
        ChallengerRewardInput::valid(p_hat)
    };
    input = input.with_rep_penalty(args.rep);
    if let Some(a) = args.align {
        input = input.with_align(a);
    }
    if let Some(v) = args.var {
        input = input.with_variance(v);
    }
    if let Some(p) = args.p_succ {
        input = input.with_aux_pass_rate(p);
    }
    let w = &args.weights;
    Ok(match framework {
        RewardFramework::Rfew => challenger_reward_rfew(&input, w)?,
        RewardFramework::Rzero => challenger_reward_rzero(&input, w)?,
        RewardFramework::Abszero => challenger_reward_abszero(&input)?,
        RewardFramework::Sqlm => challenger_reward_sqlm(&input)?,
        RewardFramework::Spice => challenger_reward_spice(&input)?,
    })
}

/// `coevo filter`: the in-band rows of a success-rate file, as JSONL.
pub fn cmd_filter(stats: &Path, tau_low: f64, tau_high: f64, out: &mut dyn Write) -> Result<()> {
    let rows = load_success_stats(stats)?;
    for row in filter_mid_band(&rows, tau_low, tau_high)? {
        let line = serde_json::to_string(&row).map_err(|e| Error::Config(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| Error::io("<stdout>", e))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_questions: usize,
    pub lexical_diversity_pct: f64,
    pub mean_word_count: f64,
    pub mean_rep_penalty: f64,
    pub per_question_rep_penalty: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub difficulty: Option<f64>,
}

/// `coevo metrics`: text statistics of a question file, plus difficulty
/// when a success-rate file is given.
pub fn cmd_metrics(
    questions: &Path,
    stats: Option<&Path>,
    sim_threshold: Option<f64>,
) -> Result<MetricsReport> {
    let batch = load_questions(questions)?;
    if batch.is_empty() {
        return Err(
            coevo_core::Error::Data(format!("{}: no questions", questions.display())).into(),
        );
    }
    let text = BatchTextStats::compute(&batch, sim_threshold.unwrap_or(DEFAULT_SIM_THRESHOLD))?;
    let difficulty = stats
        .map(|p| load_success_stats(p).and_then(|s| Ok(difficulty(&s)?)))
        .transpose()?;
    Ok(MetricsReport {
        n_questions: text.n_questions,
        lexical_diversity_pct: text.lexical_diversity_pct,
        mean_word_count: text.mean_word_count,
        mean_rep_penalty: text.mean_rep_penalty(),
        per_question_rep_penalty: text.per_question_rep_penalty,
        difficulty,
    })
}
