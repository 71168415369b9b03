use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dat_core::controller::Mode;
use dat_core::monte_carlo::run_monte_carlo;
use dat_core::output::{render_analysis, render_summary, write_outputs};
use dat_core::scenario::Scenario;
use dat_core::Result;

#[derive(Parser)]
#[command(name = "dat", version, about = "Multi-stage distributed average tracking over lossy, delayed networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate an ensemble and write trajectories, errors and the analysis report.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        mode: Option<Mode>,
    },
    /// Print the analysis report without simulating.
    Analyze {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the bundled four-agent experiment with 10 and 100 stages in both modes.
    ReproducePaper {
        #[arg(long, default_value = "paper_out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        runs: Option<usize>,
    },
}

fn simulate(scenario: &Scenario, out: &Path) -> Result<String> {
    let report = scenario.analysis()?;
    if !report.validity.is_valid() {
        let failed: Vec<&str> = report.validity.failures().map(|c| c.name).collect();
        eprintln!("warning: gains outside the guaranteed range: {}", failed.join(", "));
    }
    let ensemble = run_monte_carlo(scenario)?;
    write_outputs(scenario, &report, &ensemble, out)?;
    Ok(render_summary(scenario, &report, &ensemble))
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, seed, runs, out, mode } => {
            let mut scenario = Scenario::load(&config)?;
            if let Some(seed) = seed {
                scenario.seed = seed;
            }
            if let Some(runs) = runs {
                scenario.runs = runs;
            }
            if let Some(mode) = mode {
                scenario.mode = mode;
            }
            print!("{}", simulate(&scenario, &out)?);
        }
        Command::Analyze { config } => {
            let scenario = Scenario::load(&config)?;
            print!("{}", render_analysis(&scenario, &scenario.analysis()?));
        }
        Command::ReproducePaper { out, seed, runs } => {
            let mut base = Scenario::paper();
            if let Some(seed) = seed {
                base.seed = seed;
            }
            if let Some(runs) = runs {
                base.runs = runs;
            }
            for mode in [Mode::Compensated, Mode::Naive] {
                for stages in [10, 100] {
                    let mut scenario = base.clone();
                    scenario.mode = mode;
                    scenario.gains.n_stages = stages;
                    let dir = out.join(format!("{mode}_n{stages}"));
                    let summary = simulate(&scenario, &dir)?;
                    println!("[{}]", dir.display());
                    print!("{summary}");
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
