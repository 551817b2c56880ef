//! `hmorrey`: runs one experiment and writes its rows as CSV.

use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use heisenberg_core::experiments::{self, Experiment, ExperimentConfig, Record};

#[derive(Parser)]
#[command(name = "hmorrey", version, about = "Morrey-space experiments on the Heisenberg group")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON configuration; fields that are absent keep the experiment defaults.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// CSV destination; standard output when neither this nor `output` is set.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Worker threads (parallel builds only).
    #[arg(long, value_name = "K")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Heat kernel under both conventions and the unit-ball volume.
    HeatKernel(Common),
    /// Critical radius at the configured points.
    Rho(Common),
    /// Norms of one test function.
    Norm(Common),
    /// Fractional integral ratios in the free case.
    Hls(Common),
    /// Morrey boundedness sweep.
    ThmMorrey(Common),
    /// Weak Morrey boundedness sweep.
    ThmWeak(Common),
    /// Morrey to Hölder/BMO sweep.
    ThmHoelder(Common),
    /// Free-case ratios, lemma orientations and dilation invariance.
    FreeCase(Common),
    /// Elementary inequality checks.
    Inequalities(Common),
}

impl Command {
    fn split(&self) -> (Experiment, &Common) {
        match self {
            Command::HeatKernel(c) => (Experiment::HeatKernel, c),
            Command::Rho(c) => (Experiment::Rho, c),
            Command::Norm(c) => (Experiment::Norm, c),
            Command::Hls(c) => (Experiment::Hls, c),
            Command::ThmMorrey(c) => (Experiment::ThmMorrey, c),
            Command::ThmWeak(c) => (Experiment::ThmWeak, c),
            Command::ThmHoelder(c) => (Experiment::ThmHoelder, c),
            Command::FreeCase(c) => (Experiment::FreeCase, c),
            Command::Inequalities(c) => (Experiment::Inequalities, c),
        }
    }
}

fn run(exp: Experiment, cfg: &ExperimentConfig) -> Result<Vec<Record>> {
    Ok(match exp {
        Experiment::HeatKernel => experiments::heat_kernel_table(cfg)?,
        Experiment::Rho => experiments::rho_table(cfg)?,
        Experiment::Norm => experiments::norm_table(cfg)?,
        Experiment::Hls => experiments::run_hls(cfg)?.records(),
        Experiment::ThmMorrey => experiments::run_morrey_boundedness(cfg)?.records(),
        Experiment::ThmWeak => experiments::run_weak_morrey_boundedness(cfg)?.records(),
        Experiment::ThmHoelder => experiments::run_hoelder_boundedness(cfg)?.records(),
        Experiment::FreeCase => experiments::run_free_case(cfg)?.records(),
        Experiment::Inequalities => experiments::run_inequality_suite(cfg)?.records(),
    })
}

fn configure_threads(threads: Option<usize>) -> Result<()> {
    let Some(k) = threads else { return Ok(()) };
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(k)
        .build_global()
        .context("building the thread pool")?;
    #[cfg(not(feature = "parallel"))]
    if k > 1 {
        eprintln!("warning: built without the `parallel` feature; --threads {k} ignored");
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let (exp, common) = cli.command.split();
    configure_threads(common.threads)?;
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(exp, path).with_context(|| format!("loading {}", path.display()))?,
        None => ExperimentConfig::defaults_for(exp),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output = Some(out.clone());
    }
    let records = run(exp, &cfg).with_context(|| format!("running {}", exp.name()))?;
    match &cfg.output {
        Some(path) => experiments::write_csv_file(path, &records).with_context(|| format!("writing {}", path.display()))?,
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            experiments::write_csv(&mut lock, &records)?;
            lock.flush()?;
        }
    }
    Ok(())
}
