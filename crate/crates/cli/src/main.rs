use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Result};
use brickwall_cli::commands::{self, ExtendReport};
use brickwall_cli::config::DEFAULT_MAX_DIMENSION;
use brickwall_cli::verify::{run_verify, verify_gatefile};
use brickwall_cli::{ExperimentConfig, GateFile};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "brickwall", version, about = "Optimize brick-wall circuits approximating lattice time evolution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `[output] dir`, defaults to `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for randomized elements; overrides the config value.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the trust-region optimization; writes gates.json, trace.csv and summary.json.
    Optimize(Common),
    /// Tabulate splitting-method errors; writes benchmark.csv.
    Benchmark(Common),
    /// Evaluate stored gates on larger lattices; writes extend.csv.
    Extend {
        #[command(flatten)]
        common: Common,
        /// Gate file; defaults to `[extend] gatefile`, then `<out>/gates.json`.
        #[arg(long)]
        gatefile: Option<PathBuf>,
        /// Lattice sizes; overrides `[extend] sizes`.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
    },
    /// Run the oracle battery, and check the metrics of a gate file if given.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        gatefile: Option<PathBuf>,
    },
}

fn load(common: &Common, required: bool) -> Result<Option<ExperimentConfig>> {
    let config = match &common.config {
        Some(path) => {
            let mut c = ExperimentConfig::load(path)?;
            if let Some(seed) = common.seed {
                c.seed = seed;
            }
            Some(c)
        }
        None if required => bail!("--config is required for this command"),
        None => None,
    };
    Ok(config)
}

fn out_dir(common: &Common, config: Option<&ExperimentConfig>) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| config.and_then(|c| c.output.dir.clone()))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn print_extend(report: &ExtendReport, path: &Path) {
    if let Some(w) = &report.warning {
        eprintln!("warning: {w}");
    }
    println!("{:>6} {:>6} {:>4} {:>13} {:>13}", "size", "sites", "n", "spectral", "frobenius");
    for r in &report.rows {
        println!("{:>6} {:>6} {:>4} {:>13.6e} {:>13.6e}", r.size, r.sites, r.n, r.spectral, r.frobenius);
    }
    println!("wrote {}", path.display());
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Optimize(common) => {
            let config = load(&common, true)?.expect("required");
            let out = out_dir(&common, Some(&config));
            let o = commands::cmd_optimize(&config, &out)?;
            let s = &o.summary;
            println!(
                "{} layers, {} iterations ({} accepted, {}), {:.1} s",
                s.layers, s.iterations, s.accepted_steps, s.termination, s.seconds
            );
            println!(
                "spectral error {:.6e} -> {:.6e}, f {:.12e} -> {:.12e}",
                s.warm_start_metrics.spectral, s.final_metrics.spectral, s.warm_start_metrics.f, s.final_metrics.f
            );
            println!("wrote {}", out.display());
            Ok(true)
        }
        Command::Benchmark(common) => {
            let config = load(&common, true)?.expect("required");
            let out = out_dir(&common, Some(&config));
            let rows = commands::cmd_benchmark(&config, &out)?;
            println!("{:<16} {:>3} {:>4} {:>4} {:>13} {:>13}", "method", "r", "s", "n", "spectral", "frobenius");
            for r in &rows {
                let opt = |v: Option<usize>| v.map_or("-".to_string(), |x| x.to_string());
                println!(
                    "{:<16} {:>3} {:>4} {:>4} {:>13.6e} {:>13.6e}",
                    r.method,
                    opt(r.r),
                    opt(r.s),
                    r.n,
                    r.spectral,
                    r.frobenius
                );
            }
            println!("wrote {}", out.join(commands::BENCHMARK_FILE).display());
            Ok(true)
        }
        Command::Extend { common, gatefile, sizes } => {
            let config = load(&common, false)?;
            let out = out_dir(&common, config.as_ref());
            let path = commands::resolve_gatefile(gatefile, config.as_ref(), &out);
            let sizes = sizes.or_else(|| config.as_ref().map(|c| c.extend.sizes.clone())).unwrap_or_default();
            let cap = config.as_ref().map_or(DEFAULT_MAX_DIMENSION, |c| c.max_dimension);
            let report = commands::cmd_extend(&path, &sizes, cap, &out)?;
            print_extend(&report, &out.join(commands::EXTEND_FILE));
            Ok(true)
        }
        Command::Verify { common, gatefile } => {
            let config = load(&common, false)?;
            let seed = common.seed.or(config.as_ref().map(|c| c.seed)).unwrap_or(0);
            let mut checks = run_verify(seed)?;
            if let Some(path) = gatefile {
                checks.push(verify_gatefile(&GateFile::read(&path)?)?);
            }
            for c in &checks {
                println!("{c}");
            }
            Ok(checks.iter().all(|c| c.passed))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: verification failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
