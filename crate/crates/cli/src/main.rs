//! `difftd`: run and sweep grid-world experiments, check mean-field systems,
//! run the invariant suite and export diagnostic MDPs.
//!
//! Exit status: 0 on success, 1 when a checked invariant fails, 2 on a
//! usage or configuration error.

mod config;
mod oracle;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use difftd::checks::verify_suite;
use difftd::envs::Diagnostic;
use difftd::experiments::{export, sweep, EnvSpec, ExperimentConfig, SweepResult};
use difftd::mdp::TabularMdp;
use difftd::Error;

use crate::config::{Config, ConfigError};

const DEFAULT_OUT: &str = "difftd-out";

#[derive(Debug, Parser)]
#[command(name = "difftd", version, about = "Differential TD learning: experiments and oracle checks")]
struct Cli {
    /// Configuration file (TOML, schema_version = 1).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory. Defaults to ./difftd-out for run and sweep.
    #[arg(long, global = true, env = "DIFFTD_OUT")]
    out: Option<PathBuf>,
    /// Override the base seed of every experiment (and the verify seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for trials. Defaults to one per core.
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(1..))]
    jobs: Option<u32>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every `[[experiment]]` that has a single (alpha, eta) setting.
    Run,
    /// Sweep every `[[experiment]]` and report the best setting.
    Sweep,
    /// Spectral and fixed-point report for the `[oracle]` system.
    OracleCheck,
    /// Shaping invariance, update-form equivalence, return identity and
    /// b_star consistency.
    Verify,
    /// Print a diagnostic MDP as JSON, e.g. `corridor(3)` or `random(5,2,7)`.
    ExportMdp {
        /// `corridor(k)`, `two_state_loop` or `random(n,a,seed)`.
        name: String,
    },
}

/// Failure of a command, carrying its exit status.
enum Failure {
    Usage(String),
    Verification(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain(_) | Error::Numerical { .. } => Failure::Verification(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

type Outcome = Result<(), Failure>;

/// Write to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn load(cli: &Cli) -> Result<Config, Failure> {
    let path = cli.config.as_deref().ok_or_else(|| Failure::Usage("this command needs --config".into()))?;
    Ok(Config::load(path)?)
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn write_outputs(results: &[SweepResult], config: &Config, dir: &Path) -> Outcome {
    let files = export(results, dir, config.file.export.options())?;
    for f in files {
        emit(&format!("wrote {}\n", f.display()));
    }
    Ok(())
}

fn experiments(cli: &Cli, config: &Config) -> Result<Vec<ExperimentConfig>, Failure> {
    let exps = config.experiments(cli.seed);
    if exps.is_empty() {
        return Err(Failure::Usage(format!("{}: no [[experiment]] tables", config.path.display())));
    }
    Ok(exps)
}

fn describe(result: &SweepResult) -> String {
    let best = result.best_cell();
    let eta = best.cell.eta.map(|e| format!(", eta {e}")).unwrap_or_default();
    format!(
        "{} {}: alpha {}{eta}: total episodes {:.2} +- {:.2}, final quarter {:.2} +- {:.2} ({} runs)",
        result.config.env.label(),
        result.config.algorithm.name(),
        best.cell.alpha,
        best.mean_total,
        best.stderr_total,
        best.mean_final_quarter,
        best.stderr_final_quarter,
        best.runs.len()
    )
}

fn cmd_run(cli: &Cli) -> Outcome {
    let config = load(cli)?;
    let exps = experiments(cli, &config)?;
    for (i, e) in exps.iter().enumerate() {
        if e.cells().len() != 1 {
            return Err(Failure::Usage(format!(
                "{}:{}: experiment #{} has {} settings; use `sweep`",
                config.path.display(),
                config.experiment_line(i),
                i + 1,
                e.cells().len()
            )));
        }
    }
    let mut results = Vec::new();
    for e in exps {
        let result = sweep(&e)?;
        emit(&format!("{}\n", describe(&result)));
        results.push(result);
    }
    write_outputs(&results, &config, &out_dir(cli))
}

fn cmd_sweep(cli: &Cli) -> Outcome {
    let config = load(cli)?;
    let mut results = Vec::new();
    for e in experiments(cli, &config)? {
        let result = sweep(&e)?;
        emit(&format!("best {}\n", describe(&result)));
        results.push(result);
    }
    write_outputs(&results, &config, &out_dir(cli))
}

fn cmd_oracle(cli: &Cli) -> Outcome {
    let config = load(cli)?;
    let oracle = config
        .file
        .oracle
        .as_ref()
        .ok_or_else(|| Failure::Usage(format!("{}: no [oracle] table", config.path.display())))?;
    let report = oracle::oracle_check(oracle.get_ref())?;
    emit(&report.render());
    if let Some(dir) = &cli.out {
        fs::create_dir_all(dir).map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))?;
        let path = dir.join("oracle.json");
        let json = serde_json::to_string_pretty(&report).expect("reports serialize");
        fs::write(&path, json).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        emit(&format!("wrote {}\n", path.display()));
    }
    let bad = report.violations();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verification(format!("failed: {}", bad.join(", "))))
    }
}

fn cmd_verify(cli: &Cli) -> Outcome {
    let section = match &cli.config {
        Some(_) => load(cli)?.file.verify,
        None => Default::default(),
    };
    let outcomes = verify_suite(section.options(cli.seed))?;
    let mut failed = Vec::new();
    for o in &outcomes {
        let tag = if o.passed { "ok" } else { "FAILED" };
        emit(&format!("[{tag}] {}: {:.3e} (tolerance {:.0e}) {}\n", o.name, o.value, o.tolerance, o.detail));
        if !o.passed {
            failed.push(o.name.clone());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verification(format!("failed invariant: {}", failed.join(", "))))
    }
}

fn cmd_export_mdp(cli: &Cli, name: &str) -> Outcome {
    let which: Diagnostic = name.parse()?;
    let mdp: TabularMdp<f64> = difftd::envs::make_diagnostic(&which)?;
    let json = mdp.to_json();
    match &cli.out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))?;
            let label = EnvSpec::Diagnostic { name: which }.label();
            let path = dir.join(format!("{label}.json"));
            fs::write(&path, json + "\n").map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            emit(&format!("wrote {}\n", path.display()));
        }
        None => emit(&format!("{json}\n")),
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Run => cmd_run(cli),
        Command::Sweep => cmd_sweep(cli),
        Command::OracleCheck => cmd_oracle(cli),
        Command::Verify => cmd_verify(cli),
        Command::ExportMdp { name } => cmd_export_mdp(cli, name),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code().clamp(0, 255) as u8);
        }
    };
    let outcome = match cli.jobs {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n as usize).build() {
            Ok(pool) => pool.install(|| dispatch(&cli)),
            Err(e) => Err(Failure::Usage(format!("cannot start {n} worker threads: {e}"))),
        },
        None => dispatch(&cli),
    };
    let _ = std::io::stdout().flush();
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification(msg)) => {
            eprintln!("difftd: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("difftd: {msg}");
            ExitCode::from(2)
        }
    }
}
