use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stmala_harness::config::SamplerKind;
use stmala_harness::experiment::{run_experiment, run_oracle, Report};
use stmala_harness::validate::run_all;
use stmala_harness::{ExperimentConfig, Result};

#[derive(Parser)]
#[command(
    name = "stmala",
    version,
    about = "Shrinkage-thresholding MALA experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured sampler.
    Sample(Common),
    /// Enumerate the model posterior and activation probabilities.
    Oracle(Common),
    /// Run STMALA and RJMCMC side by side.
    Compare(Common),
    /// Run the numerical property suites.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Draws per operator for the Monte Carlo density match.
    #[arg(long, default_value_t = 1_000_000)]
    draws: usize,
    #[arg(long)]
    quiet: bool,
}

fn load(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(path) => {
            let mut cfg = ExperimentConfig::load(path)?;
            if let Some(dir) = path.parent() {
                cfg.resolve_paths(dir);
            }
            cfg
        }
        None => ExperimentConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.experiment.seed = s;
    }
    if let Some(r) = c.replicates {
        cfg.experiment.replicates = r;
    }
    if let Some(o) = &c.out {
        cfg.experiment.out_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_report(report: &Report) {
    println!("sampler,replicate,acceptance_rate,final_error,mean_active");
    for r in &report.results {
        println!(
            "{},{},{:.4},{},{:.3}",
            r.sampler.name(),
            r.replicate,
            r.acceptance_rate,
            r.final_error.map(|e| format!("{e:.4}")).unwrap_or_default(),
            r.mean_active
        );
    }
    println!("wrote {}", report.out_dir.display());
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Sample(c) => {
            let cfg = load(&c)?;
            let report = run_experiment(&cfg, &[cfg.sampler.kind], &cfg.experiment.out_dir)?;
            if !c.quiet {
                print_report(&report);
            }
        }
        Command::Compare(c) => {
            let cfg = load(&c)?;
            let stmala = match cfg.sampler.kind {
                SamplerKind::Rjmcmc => SamplerKind::BlockStmala,
                k => k,
            };
            let report = run_experiment(
                &cfg,
                &[stmala, SamplerKind::Rjmcmc],
                &cfg.experiment.out_dir,
            )?;
            if !c.quiet {
                print_report(&report);
            }
        }
        Command::Oracle(c) => {
            let cfg = load(&c)?;
            let act = run_oracle(&cfg, &cfg.experiment.out_dir)?;
            if !c.quiet {
                println!("component,prob");
                for (i, p) in act.iter().enumerate() {
                    println!("{i},{p:.6}");
                }
            }
        }
        Command::Validate(v) => {
            let results = run_all(v.seed, v.draws);
            if !v.quiet {
                for r in &results {
                    println!("{r}");
                }
            }
            return Ok(results.iter().all(|r| r.passed));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
