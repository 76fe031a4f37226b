use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use dualkin_cli::{emit_report, parse_config, run_suite, ExperimentConfig, Suite};

#[derive(Parser)]
#[command(name = "dualkin", version, about = "Verification suites for the dual hierarchy, its mean-field limit and kinetic expansions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    options: Options,
}

#[derive(Subcommand)]
enum Command {
    /// Cumulants, hierarchy expansion, norm estimate and Duhamel identity.
    Verify,
    /// Mean-field convergence and the limit hierarchy.
    Meanfield,
    /// Vlasov series and propagation of chaos.
    Chaos,
    /// Kinetic cluster expansion, functionals and duality.
    #[command(name = "gke-duality")]
    GkeDuality,
    /// Grid Hartree solver and the rank-one consistency check.
    Hartree,
}

#[derive(Args)]
struct Options {
    /// JSON configuration; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for the report and tables.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for independent experiment points.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    jobs: Option<u16>,
    /// Multiplies every absolute tolerance.
    #[arg(long, global = true, default_value_t = 1.0)]
    tol_scale: f64,
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let suite = match cli.command {
        Command::Verify => Suite::Verify,
        Command::Meanfield => Suite::Meanfield,
        Command::Chaos => Suite::Chaos,
        Command::GkeDuality => Suite::GkeDuality,
        Command::Hartree => Suite::Hartree,
    };
    let o = cli.options;
    if !(o.tol_scale.is_finite() && o.tol_scale > 0.0) {
        anyhow::bail!("--tol-scale must be positive, got {}", o.tol_scale);
    }
    let mut config = match &o.config {
        Some(path) => parse_config(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = o.seed {
        config.seed = seed;
    }
    if let Some(out) = o.out {
        config.output = Some(out);
    }
    let dir = config.output.clone().unwrap_or_else(|| PathBuf::from("dualkin-out").join(suite.name()));
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = o.jobs {
        pool = pool.num_threads(jobs as usize);
    }
    let output = pool.build()?.install(|| run_suite(&config, suite, o.tol_scale))?;
    emit_report(&output, &dir).with_context(|| format!("writing to {}", dir.display()))?;
    for c in &output.report.checks {
        println!("{} {:<44} {:>12.5e} (tol {:.3e})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.tolerance);
    }
    println!("{}: {} -> {}", suite, if output.report.pass { "all checks passed" } else { "FAILED" }, dir.display());
    Ok(output.report.pass)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
