//! `feller`: runs estimators and ergodicity diagnostics on the built-in
//! models and writes reproducible CSV or JSON tables.

mod commands;
mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::{Diagnostic, Outcome};
use config::{ExperimentConfig, Format, Settings};

#[derive(Parser)]
#[command(name = "feller", version, about = "Simulation and ergodicity diagnostics for Markov-Feller semigroups")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form transition probabilities of the countable chain
    ExactCtmc(CtmcArgs),
    /// Dump jump-chain records of an IFS with jumps
    Simulate(ExperimentArgs),
    /// Monte Carlo estimates of P_t f(x) and ball-hitting probabilities
    Estimate(ExperimentArgs),
    /// Run one diagnostic and write its report
    Diagnose {
        #[arg(value_enum)]
        kind: Kind,
        #[command(flatten)]
        args: ExperimentArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Ec,
    Eprop,
    Lowerbound,
    Stability,
    Assumptions,
    C2,
}

impl From<Kind> for Diagnostic {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Ec => Diagnostic::Ec,
            Kind::Eprop => Diagnostic::Eprop,
            Kind::Lowerbound => Diagnostic::LowerBound,
            Kind::Stability => Diagnostic::Stability,
            Kind::Assumptions => Diagnostic::Assumptions,
            Kind::C2 => Diagnostic::C2,
        }
    }
}

#[derive(Args)]
struct CtmcArgs {
    /// Level n >= 2 of the states 1/n and n
    #[arg(long)]
    n: u32,
    /// Comma-separated times
    #[arg(long, default_value = "1")]
    t: String,
    /// Also print P_t f (xmin1 or bump:lo:hi:eps)
    #[arg(long)]
    f: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: String,
    #[arg(long)]
    plot: Option<PathBuf>,
}

/// Every flag here may also be set in the `--config` file under the same
/// name; flags win.
#[derive(Args)]
struct ExperimentArgs {
    /// Flat key = value settings file
    #[arg(long)]
    config: Option<PathBuf>,
    /// ctmc, flip or halving
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    samples: Option<String>,
    #[arg(long)]
    confidence: Option<String>,
    /// Worker threads; defaults to FELLER_WORKERS, then to the core count
    #[arg(long)]
    workers: Option<String>,
    /// Sample even when a closed-form law exists
    #[arg(long)]
    monte_carlo: bool,
    /// Comma-separated initial points; fractions such as 1/4 are accepted
    #[arg(long)]
    initials: Option<String>,
    #[arg(long)]
    times: Option<String>,
    /// Ball radii
    #[arg(long, alias = "radii")]
    eps: Option<String>,
    /// Anchor point
    #[arg(long)]
    z: Option<String>,
    #[arg(long)]
    window_start: Option<String>,
    #[arg(long)]
    window_end: Option<String>,
    /// `auto` or x@t,x@t,...
    #[arg(long)]
    pairs: Option<String>,
    #[arg(long)]
    horizon: Option<String>,
    #[arg(long)]
    trajectories: Option<String>,
    #[arg(long)]
    t_search: Option<String>,
    #[arg(long)]
    n_trunc: Option<String>,
    /// Test function: xmin1 or bump:lo:hi:eps
    #[arg(long)]
    f: Option<String>,
    #[arg(long)]
    out: Option<String>,
    /// csv or json
    #[arg(long)]
    format: Option<String>,
    /// Write an SVG line chart here
    #[arg(long)]
    plot: Option<String>,
}

impl ExperimentArgs {
    fn resolve(self) -> Result<ExperimentConfig> {
        let file = commands::read_config(self.config.as_deref())?;
        let mut flags = Settings::default();
        let entries = [
            ("model", self.model),
            ("lambda", self.lambda),
            ("seed", self.seed),
            ("samples", self.samples),
            ("confidence", self.confidence),
            ("workers", self.workers),
            ("monte-carlo", self.monte_carlo.then(|| "true".to_string())),
            ("initials", self.initials),
            ("times", self.times),
            ("eps", self.eps),
            ("z", self.z),
            ("window-start", self.window_start),
            ("window-end", self.window_end),
            ("pairs", self.pairs),
            ("horizon", self.horizon),
            ("trajectories", self.trajectories),
            ("t-search", self.t_search),
            ("n-trunc", self.n_trunc),
            ("f", self.f),
            ("out", self.out),
            ("format", self.format),
            ("plot", self.plot),
        ];
        for (key, value) in entries {
            if let Some(v) = value {
                flags.set(key, &v)?;
            }
        }
        let env = std::env::var(config::WORKERS_ENV).ok();
        ExperimentConfig::resolve(file.overlay(flags), env.as_deref())
    }
}

fn write(outcome: &Outcome, format: Format, out: Option<&Path>, plot: Option<&Path>) -> Result<()> {
    let text = outcome.table.render(format)?;
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    if let Some(path) = plot {
        let c = &outcome.chart;
        std::fs::write(path, output::svg(&c.title, c.x_label, c.y_label, &c.series))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    let (outcome, format, out, plot) = match cli.command {
        Command::ExactCtmc(a) => {
            let format = match a.format.as_str() {
                "csv" => Format::Csv,
                "json" => Format::Json,
                other => anyhow::bail!("unknown format `{other}` (expected csv or json)"),
            };
            let ts = config::parse_list(&a.t)?;
            (commands::exact_ctmc(a.n, &ts, a.f.as_deref())?, format, a.out, a.plot)
        }
        Command::Simulate(a) => {
            let cfg = a.resolve()?;
            (commands::simulate(&cfg)?, cfg.format, cfg.out, cfg.plot)
        }
        Command::Estimate(a) => {
            let cfg = a.resolve()?;
            (commands::estimate(&cfg)?, cfg.format, cfg.out, cfg.plot)
        }
        Command::Diagnose { kind, args } => {
            let cfg = args.resolve()?;
            (commands::diagnose(kind.into(), &cfg)?, cfg.format, cfg.out, cfg.plot)
        }
    };
    write(&outcome, format, out.as_deref(), plot.as_deref())?;
    Ok(!outcome.failed)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: one or more cells failed; see the error column");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
