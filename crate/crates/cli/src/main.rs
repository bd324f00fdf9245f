use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use levy_lmm_cli::{bench, compare, finish, price, validate, CommandReport, ExperimentConfig};

#[derive(Parser, Debug)]
#[command(name = "levy-lmm", version, about = "Monte Carlo experiments for Levy-driven LIBOR market models")]
struct Cli {
    /// TOML experiment config; every field has a default.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides simulation.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads. Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory; overrides output.dir.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct MethodArgs {
    /// Comma-separated schemes, e.g. euler,picard,pc.
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<String>>,
    /// Comma-separated drift modes: full, first, second, frozen.
    #[arg(long, value_delimiter = ',')]
    modes: Option<Vec<String>>,
    /// Overrides simulation.paths.
    #[arg(long)]
    paths: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Price the configured products with every scheme/mode pair.
    Price(MethodArgs),
    /// Paired differences of every scheme/mode pair against the first.
    Compare(MethodArgs),
    /// Timing and drift-cost scaling over rate and path counts.
    Bench {
        #[command(flatten)]
        methods: MethodArgs,
        /// Comma-separated rate counts; overrides bench.n_values.
        #[arg(long, value_delimiter = ',')]
        n_values: Option<Vec<usize>>,
        /// Comma-separated path counts; overrides bench.path_values.
        #[arg(long, value_delimiter = ',')]
        path_values: Option<Vec<u64>>,
    },
    /// Check the model conditions.
    Validate,
}

fn apply(config: &mut ExperimentConfig, m: &MethodArgs) {
    if let Some(s) = &m.schemes {
        config.simulation.schemes = s.clone();
    }
    if let Some(s) = &m.modes {
        config.simulation.modes = s.clone();
    }
    if let Some(p) = m.paths {
        config.simulation.paths = p;
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.simulation.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output.dir = out.display().to_string();
    }
    match &cli.command {
        Command::Price(m) | Command::Compare(m) => apply(&mut config, m),
        Command::Bench {
            methods,
            n_values,
            path_values,
        } => {
            apply(&mut config, methods);
            if let Some(n) = n_values {
                config.bench.n_values = n.clone();
            }
            if let Some(p) = path_values {
                config.bench.path_values = p.clone();
            }
        }
        Command::Validate => {}
    }
    config.check()?;

    let threads = cli.threads.unwrap_or_else(rayon::current_num_threads).max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("building thread pool")?;
    let report: CommandReport = pool.install(|| -> Result<_> {
        Ok(match cli.command {
            Command::Price(_) => price(&config)?,
            Command::Compare(_) => compare(&config)?,
            Command::Bench { .. } => bench(&config)?,
            Command::Validate => validate(&config)?.0,
        })
    })?;
    let dir = PathBuf::from(&config.output.dir);
    let manifest = finish(&dir, &config, &report, threads)?;
    print!("{}", report.summary);
    for f in &report.files {
        println!("wrote {}", dir.join(&f.name).display());
    }
    println!("wrote {}", manifest.display());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
