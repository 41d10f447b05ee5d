use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use netfhn::config::{parse_config, BuiltProblem};
use netfhn::integrator::simulate;
use netfhn::output;
use netfhn::verify::run_battery;
use netfhn::{Error, Result};

/// Stochastic FitzHugh-Nagumo dynamics on metric networks: simulation,
/// verification, and spectral inspection.
#[derive(Parser)]
#[command(name = "netfhn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one noise path and write the trajectory CSV and jump NDJSON.
    Simulate {
        /// JSON configuration file.
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the verification battery; exit nonzero iff any check fails.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Monte Carlo paths for the statistical checks.
        #[arg(long, default_value_t = 2000)]
        paths: usize,
        /// Directory for the JSON report (default: current directory).
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Write the generator's eigenvalues as CSV.
    Spectrum {
        #[arg(long)]
        config: PathBuf,
        /// Output CSV file.
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(config_path: &Path, seed_override: Option<u64>) -> Result<BuiltProblem> {
    let text = std::fs::read_to_string(config_path).map_err(|e| {
        Error::Config(vec![format!("cannot read {}: {e}", config_path.display())])
    })?;
    let config = parse_config(&text)?;
    let mut built = config.build()?;
    if let Some(seed) = seed_override {
        built.seed = seed;
    }
    Ok(built)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Simulate { config, seed, out } => {
            let built = load(&config, seed)?;
            let path = built
                .problem
                .noise
                .sample_jumps(built.problem.horizon, built.seed, 0)?;
            let traj = simulate(&built.problem, &built.scheme, &path)?;
            std::fs::create_dir_all(&out)?;
            let mesh = &built.problem.gen.mesh;
            std::fs::write(out.join("trajectory.csv"), output::trajectory_csv(mesh, &traj))?;
            std::fs::write(out.join("jumps.ndjson"), output::jumps_ndjson(&traj))?;
            println!(
                "simulated t in [0, {}]: {} recorded states, {} jumps -> {}",
                built.problem.horizon,
                traj.times.len(),
                traj.jump_log.len(),
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify {
            config,
            seed,
            paths,
            out,
        } => {
            let built = load(&config, seed)?;
            let reports = run_battery(&built.problem, &built.scheme, paths, built.seed)?;
            for report in &reports {
                println!("{}", report.summary_line());
            }
            std::fs::create_dir_all(&out)?;
            std::fs::write(out.join("report.json"), output::report_json(&reports)?)?;
            if reports.iter().all(|r| r.passed) {
                println!("all checks passed");
                Ok(ExitCode::SUCCESS)
            } else {
                println!("some checks failed");
                Ok(ExitCode::from(1))
            }
        }
        Command::Spectrum { config, out } => {
            let built = load(&config, None)?;
            std::fs::write(&out, output::spectrum_csv(&built.problem.dec))?;
            println!(
                "wrote {} eigenvalues to {}",
                built.problem.dec.dim(),
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Config(_) | Error::ConfigParse(_) => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}
