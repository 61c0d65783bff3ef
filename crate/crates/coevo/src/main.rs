use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use coevo::cli::{self, BackendKind, RewardArgs, RewardFramework, RunOptions};
use coevo::core::rewards::RewardWeights;
use coevo::error::exit;
use coevo::Error;

/// Challenger/solver self-play: run the loop, score rewards, filter and
/// inspect curricula.
#[derive(Parser)]
#[command(name = "coevo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the alternating challenger/solver loop.
    Run(RunArgs),
    /// Evaluate one challenger reward.
    EvalRewards(EvalArgs),
    /// Keep the success-rate records whose p_hat lies in the band.
    Filter {
        /// JSONL file of {"question_id", "answers", "judgments", ...} rows.
        stats: PathBuf,
        #[arg(long, default_value_t = 0.3)]
        tau_low: f64,
        #[arg(long, default_value_t = 0.7)]
        tau_high: f64,
    },
    /// Diversity, length and repetition statistics of a question file.
    Metrics {
        /// One question per line.
        questions: PathBuf,
        /// Success-rate file for the difficulty figure.
        #[arg(long)]
        stats: Option<PathBuf>,
        #[arg(long)]
        sim_threshold: Option<f64>,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    /// TOML (or .json) config; desk-scale simulated defaults when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    backend: Option<Backend>,
    /// Replay file for the scripted backend.
    #[arg(long)]
    replay: Option<PathBuf>,
    /// Record backend exchanges to a replay file.
    #[arg(long)]
    record: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// JSONL anchor pool.
    #[arg(long)]
    anchors: Option<PathBuf>,
    /// Override a config field, e.g. `--set run.tau_low=0.2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Continue from the checkpoint in the output directory.
    #[arg(long)]
    resume: bool,
    /// Stop after this many steps.
    #[arg(long)]
    max_steps: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Sim,
    Scripted,
    Http,
}

#[derive(Clone, Copy, ValueEnum)]
enum Framework {
    Rfew,
    Rzero,
    Abszero,
    Sqlm,
    Spice,
}

#[derive(clap::Args)]
struct EvalArgs {
    #[arg(value_enum)]
    framework: Framework,
    #[arg(long)]
    p_hat: Option<f64>,
    /// Second pass-rate (sqlm).
    #[arg(long)]
    p_succ: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    rep: f64,
    #[arg(long)]
    align: Option<f64>,
    /// Correctness variance (spice).
    #[arg(long)]
    var: Option<f64>,
    /// Score the question as malformed.
    #[arg(long)]
    invalid: bool,
    #[arg(long)]
    lambda_rep: Option<f64>,
    #[arg(long)]
    lambda_align: Option<f64>,
    #[arg(long)]
    rho_inv: Option<f64>,
}

fn run(cli: Cli) -> Result<(), Error> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Run(a) => {
            let opts = RunOptions {
                config: a.config,
                seed: a.seed,
                backend: a.backend.map(|b| match b {
                    Backend::Sim => BackendKind::Sim,
                    Backend::Scripted => BackendKind::Scripted,
                    Backend::Http => BackendKind::Http,
                }),
                replay: a.replay,
                record: a.record,
                out_dir: a.out_dir,
                anchors: a.anchors,
                overrides: a.overrides,
                resume: a.resume,
                max_steps: a.max_steps,
            };
            cli::cmd_run(&opts, &mut std::io::stderr())
        }
        Command::EvalRewards(a) => {
            let mut weights = RewardWeights::default();
            if let Some(v) = a.lambda_rep {
                weights.lambda_rep = v;
            }
            if let Some(v) = a.lambda_align {
                weights.lambda_align = v;
            }
            if let Some(v) = a.rho_inv {
                weights.rho_inv = v;
            }
            let framework = match a.framework {
                Framework::Rfew => RewardFramework::Rfew,
                Framework::Rzero => RewardFramework::Rzero,
                Framework::Abszero => RewardFramework::Abszero,
                Framework::Sqlm => RewardFramework::Sqlm,
                Framework::Spice => RewardFramework::Spice,
            };
            let args = RewardArgs {
                p_hat: a.p_hat,
                p_succ: a.p_succ,
                rep: a.rep,
                align: a.align,
                var: a.var,
                invalid: a.invalid,
                weights,
            };
            let r = cli::cmd_eval_rewards(framework, &args)?;
            writeln!(out, "{r}").map_err(|e| Error::io("<stdout>", e))
        }
        Command::Filter {
            stats,
            tau_low,
            tau_high,
        } => cli::cmd_filter(&stats, tau_low, tau_high, &mut out),
        Command::Metrics {
            questions,
            stats,
            sim_threshold,
        } => {
            let report = cli::cmd_metrics(&questions, stats.as_deref(), sim_threshold)?;
            let text = serde_json::to_string_pretty(&report).expect("report serializes");
            writeln!(out, "{text}").map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                exit::CONFIG as u8
            } else {
                exit::OK as u8
            });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
