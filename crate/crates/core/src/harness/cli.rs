//! Command-line front end. Exit codes: 0 when every check passes, 1 when
//! one fails, 2 on configuration errors.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::harness::config::{
    parse_k_list, parse_kappa_list, ConfigFile, Experiment, ExperimentConfig, Overrides,
};
use crate::harness::experiments::run_experiment;
use crate::harness::report::ExperimentReport;
use crate::harness::with_pool;

#[derive(Debug, Parser)]
#[command(
    name = "pcli-lab",
    version,
    about = "Experiments on oblivious p-CLI first-order methods"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the experiment named in the config file (default: all of them).
    Run(CommonArgs),
    /// Strongly convex lower bound against every shipped schedule.
    VerifyLbSc(CommonArgs),
    /// Smooth lower bound against the schedules that use only L.
    VerifyLbSmooth(CommonArgs),
    /// Iteration counts against kappa and their log-log slopes.
    RateFit(CommonArgs),
    /// Power-form-or-exceeds check near L.
    LemmaB3(CommonArgs),
    /// Monte Carlo of SAG, SAGA and SVRG against their expected dynamics.
    Stochastic(CommonArgs),
    /// Restarted smooth AGD: halving and iteration totals.
    RestartDemo(CommonArgs),
    /// Chebyshev optimum against the lower bound.
    Polybound(CommonArgs),
}

#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    /// JSON config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated condition numbers.
    #[arg(long)]
    pub kappa: Option<String>,
    /// Iteration counts: comma-separated, ranges as `a:b`.
    #[arg(long)]
    pub k: Option<String>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// CSV destination (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Command {
    fn parts(&self) -> (Option<Experiment>, &CommonArgs) {
        match self {
            Command::Run(a) => (None, a),
            Command::VerifyLbSc(a) => (Some(Experiment::VerifyLbSc), a),
            Command::VerifyLbSmooth(a) => (Some(Experiment::VerifyLbSmooth), a),
            Command::RateFit(a) => (Some(Experiment::RateFit), a),
            Command::LemmaB3(a) => (Some(Experiment::LemmaB3), a),
            Command::Stochastic(a) => (Some(Experiment::Stochastic), a),
            Command::RestartDemo(a) => (Some(Experiment::RestartDemo), a),
            Command::Polybound(a) => (Some(Experiment::Polybound), a),
        }
    }
}

impl CommonArgs {
    fn overrides(&self) -> Result<Overrides> {
        Ok(Overrides {
            kappa_list: self.kappa.as_deref().map(parse_kappa_list).transpose()?,
            k_list: self.k.as_deref().map(parse_k_list).transpose()?,
            eps: self.eps,
            seed: self.seed,
            output_path: self.out.clone(),
        })
    }
}

/// Resolve the configurations a command runs.
pub fn plan(command: &Command) -> Result<Vec<ExperimentConfig>> {
    let (fixed, args) = command.parts();
    let file = args.config.as_deref().map(ConfigFile::load).transpose()?;
    let over = args.overrides()?;
    let which = fixed
        .or_else(|| file.as_ref().and_then(|f| f.experiment))
        .unwrap_or(Experiment::All);
    let list: Vec<Experiment> = if which == Experiment::All {
        Experiment::CONCRETE.to_vec()
    } else {
        vec![which]
    };
    list.into_iter()
        .map(|e| ExperimentConfig::resolve(e, file.as_ref(), &over))
        .collect()
}

/// Run the planned experiments and merge their reports.
pub fn execute(configs: &[ExperimentConfig]) -> Result<ExperimentReport> {
    let mut rep = ExperimentReport::default();
    for cfg in configs {
        rep.merge(with_pool(|| run_experiment(cfg))?);
    }
    rep.sort();
    Ok(rep)
}

fn exit_for(err: &Error) -> ExitCode {
    match err {
        Error::Config(_)
        | Error::InvalidParameter(_)
        | Error::Json(_)
        | Error::Io(_)
        | Error::MissingMu(_) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

/// Parse `args`, run, write the CSV, and map the outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let configs = match plan(&cli.command) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let rep = match execute(&configs) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_for(&e);
        }
    };
    let csv = rep.to_csv();
    let out = configs.iter().find_map(|c| c.output_path.clone());
    let written = match &out {
        Some(path) => std::fs::write(path, &csv),
        None => std::io::stdout().lock().write_all(csv.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("error: cannot write report: {e}");
        return ExitCode::from(2);
    }
    for note in &rep.notes {
        eprintln!("note: {note}");
    }
    let failed: Vec<_> = rep.failures().collect();
    eprintln!(
        "{} of {} checks pass",
        rep.rows.len() - failed.len(),
        rep.rows.len()
    );
    for r in &failed {
        eprintln!(
            "FAIL {} {} kappa={:?} k={:?} margin={:e}",
            r.experiment, r.label, r.kappa, r.k, r.margin
        );
    }
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
