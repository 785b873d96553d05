use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use cgolab::par;
use cgolab::report::{self, PipelineConfig};
use cgolab::synth::DgpConfig;
use clap::{Args, Parser, Subcommand};
use tracing_subscriber::EnvFilter;

/// Capital gains overhang, risk proxies, double sorts and Fama-MacBeth
/// regressions.
///
/// Worker threads are capped by the CGOLAB_THREADS environment variable.
/// Log verbosity follows RUST_LOG (default `info`).
#[derive(Parser, Debug)]
#[command(name = "cgolab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the full pipeline and write every table.
    Run(PipelineArgs),
    /// Check inputs and print coverage without estimating anything.
    Validate(PipelineArgs),
    /// Write a synthetic dataset with planted effects.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
struct PipelineArgs {
    /// Flat `key = value` config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated subset of beta,retvol,ivol,inv_age,cfvol.
    #[arg(long)]
    proxies: Option<String>,
    /// Newey-West lag, or `auto`.
    #[arg(long)]
    nw_lag: Option<String>,
    /// Also write the full 5x5 portfolio grid.
    #[arg(long)]
    full_grid: bool,
    /// Also write monthly portfolio returns and regression slopes.
    #[arg(long)]
    dump_monthly: bool,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Config file; `synth.*` keys set generator parameters.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "synth_data")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    stocks: Option<usize>,
    /// Months after the burn-in.
    #[arg(long)]
    months: Option<usize>,
}

fn pipeline_config(a: &PipelineArgs) -> anyhow::Result<PipelineConfig> {
    let mut cfg = match &a.config {
        Some(p) => PipelineConfig::from_file(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(d) = &a.data_dir {
        cfg.data_dir = d.clone();
    }
    if let Some(o) = &a.out {
        cfg.output_dir = o.clone();
    }
    if let Some(p) = &a.proxies {
        cfg.proxies = report::parse_proxies(p)?;
    }
    if let Some(l) = &a.nw_lag {
        cfg.nw_lag = report::parse_lag(l)?;
    }
    cfg.full_grid |= a.full_grid;
    cfg.dump_monthly |= a.dump_monthly;
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run(a) => {
            let cfg = pipeline_config(&a)?;
            let summary = report::cmd_run(&cfg)?;
            for f in &summary.files {
                println!("{}", f.display());
            }
        }
        Command::Validate(a) => {
            let cfg = pipeline_config(&a)?;
            print!("{}", report::cmd_validate(&cfg)?);
        }
        Command::Synth(a) => {
            let mut cfg = match &a.config {
                Some(p) => report::dgp_from_file(p)?,
                None => DgpConfig::default(),
            };
            if let Some(s) = a.seed {
                cfg.seed = s;
            }
            if let Some(n) = a.stocks {
                cfg.n_stocks = n;
            }
            if let Some(m) = a.months {
                cfg.n_months = m;
            }
            let files = report::cmd_synth(&cfg, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
            for f in &files {
                println!("{}", f.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match par::with_threads(par::threads_from_env(), || run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
