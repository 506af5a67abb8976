//! `vibent` command-line scenario runner.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use vibent::config::Config;
use vibent::scenario::{Scenario, ScenarioKind};

#[derive(Parser, Debug)]
#[command(name = "vibent", version, about = "Entanglement of TLS-coupled vibrational modes: scenario runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML file overriding the scenario defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Paper-scale Fock truncation and simulated time for exact-model runs.
    #[arg(long, global = true)]
    full_dims: bool,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for randomized inputs (anharmonic mode spectra).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Three-mode exact model: tripartite entanglement, QFI, region grid.
    Triangle,
    /// Genuine N-partite entanglement of mode subsets (Gaussian model).
    Multimode,
    /// E^{1|k} against g0 and temperature for k = 2..max_k.
    DepthScan,
    /// E^{1|2}(t) from the exact and Gaussian models side by side.
    Compare,
    /// Qubit fluctuation spectrum and the induced mode bath.
    TlsSpectrum,
    /// Modulation adjacency matrices.
    Adjacency,
}

impl Command {
    fn kind(self) -> ScenarioKind {
        match self {
            Command::Triangle => ScenarioKind::Triangle,
            Command::Multimode => ScenarioKind::Multimode,
            Command::DepthScan => ScenarioKind::DepthScan,
            Command::Compare => ScenarioKind::Compare,
            Command::TlsSpectrum => ScenarioKind::TlsSpectrum,
            Command::Adjacency => ScenarioKind::Adjacency,
        }
    }
}

fn run(cli: &Cli) -> Result<bool, Box<dyn std::error::Error>> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let kind = cli.command.kind();
    let scenario = Scenario::from_config(kind, &cfg, cli.full_dims, cli.seed)?;
    scenario.params.warn_regime();
    log::info!("running {kind}");
    let start = Instant::now();
    let output = scenario.run()?;
    for path in output.write(&cli.out)? {
        println!("{}", path.display());
    }
    log::info!("{kind} finished in {:.1} s", start.elapsed().as_secs_f64());
    if !output.failures.is_empty() {
        eprintln!("{} sweep point(s) failed, see failures.csv", output.failures.len());
    }
    Ok(output.failures.is_empty())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
