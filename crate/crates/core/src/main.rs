use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use msalab::experiment::{output, persist, resolve_out_dir, run, Command, RunConfig};
use msalab::Error;

/// Finite-volume multi-scale analysis experiments.
#[derive(Debug, Parser)]
#[command(name = "msalab", version, about)]
struct Cli {
    /// TOML configuration file; every section is optional.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Base seed for all disorder draws.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Number of trials (realisations for eigen-decay).
    #[arg(long, global = true, value_name = "N")]
    trials: Option<u64>,
    /// Worker threads; affects scheduling only.
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,
    /// Output directory (default: $MSALAB_OUT, then ./msalab-out).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Certify the quasi-metric constant C(ρ) for n = 1..n_max.
    QuasiMetric {
        /// Exponent ρ (repeatable).
        #[arg(long)]
        rho: Vec<f64>,
        #[arg(long)]
        n_max: Option<u32>,
    },
    /// Compare dist(E, σ(H)) ≤ ε frequencies with the Wegner bound.
    Wegner,
    /// Estimate spectral near-coincidences between two disjoint boxes.
    PairResonance,
    /// Estimate the probability that two disjoint cubes are both bad.
    BadPair,
    /// Check the coupling step on sampled boxes.
    Coupling,
    /// Iterate the scale ladder and find the minimal admissible log L₀.
    Ladder,
    /// Fit eigenfunction decay over an ensemble of realisations.
    EigenDecay,
    /// Check the dangerous-cube cover on random bad-center triples.
    CoverCheck,
}

impl Sub {
    fn command(&self) -> Command {
        match self {
            Sub::QuasiMetric { .. } => Command::QuasiMetric,
            Sub::Wegner => Command::Wegner,
            Sub::PairResonance => Command::PairResonance,
            Sub::BadPair => Command::BadPair,
            Sub::Coupling => Command::Coupling,
            Sub::Ladder => Command::Ladder,
            Sub::EigenDecay => Command::EigenDecay,
            Sub::CoverCheck => Command::CoverCheck,
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Precondition(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::from_toml(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.execution.seed = s;
    }
    if let Some(t) = cli.trials {
        cfg.execution.trials = t;
    }
    if let Some(w) = cli.workers {
        cfg.execution.workers = w;
    }
    if let Some(o) = &cli.out {
        cfg.execution.out = Some(o.clone());
    }
    if let Sub::QuasiMetric { rho, n_max } = &cli.command {
        if !rho.is_empty() {
            cfg.quasi_metric.rho = Some(rho.clone());
        }
        if let Some(n) = n_max {
            cfg.quasi_metric.n_max = *n;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("msalab: {e}");
    ExitCode::from(if e.is_numerical() { 3 } else { 2 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let cmd = cli.command.command();
    let started = output::now();
    let result = match run(cmd, &cfg) {
        Ok(r) => r,
        Err(e) => return fail(&e),
    };
    let mut stdout = io::stdout().lock();
    // A closed pipe only loses the echo; the files are still written.
    let _ = result.summary.iter().try_for_each(|line| writeln!(stdout, "{line}"));
    let dir = resolve_out_dir(cfg.execution.out.as_deref());
    match persist(&dir, cmd, &cfg, &result, started) {
        Ok(files) => {
            let _ = writeln!(stdout, "wrote {} in {}", files.join(", "), dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("msalab: writing {}: {e}", dir.display());
            ExitCode::from(1)
        }
    }
}
