use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use semloc::config::Profile;
use semloc::tooling::{self, EvaluateOptions, LocalizeOptions, Source, ToolError};

#[derive(Parser)]
#[command(name = "semloc", version, about = "Localize a vehicle object map in a reference object map")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the localization pipeline over a recorded or simulated run.
    Localize(LocalizeArgs),
    /// Generate a scenario and write its run files.
    Simulate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Rebuild a report from a run directory and its event log.
    Evaluate {
        #[arg(long)]
        run_dir: PathBuf,
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        events: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
        /// Compute errors in the xy plane.
        #[arg(long = "2d")]
        planar: bool,
        /// Compare against replaying only the first accepted transform.
        #[arg(long)]
        ablation: bool,
        /// Write tabular error series into this directory.
        #[arg(long)]
        series_dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML pipeline configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Parameter profile: kitti or katwijk.
    #[arg(long)]
    profile: Option<Profile>,
}

#[derive(Args)]
struct LocalizeArgs {
    #[arg(long, conflicts_with_all = ["run_dir", "reference"])]
    scenario: Option<PathBuf>,
    #[arg(long, conflicts_with = "reference")]
    run_dir: Option<PathBuf>,
    #[arg(long, requires_all = ["observations", "odometry"])]
    reference: Option<PathBuf>,
    #[arg(long)]
    observations: Option<PathBuf>,
    #[arg(long)]
    odometry: Option<PathBuf>,
    #[arg(long)]
    ground_truth: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "2d")]
    planar: bool,
    #[arg(long)]
    ablation: bool,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

fn source(args: &LocalizeArgs) -> Result<Source, ToolError> {
    if let Some(p) = &args.scenario {
        return Ok(Source::Scenario(p.clone()));
    }
    if let Some(d) = &args.run_dir {
        return Ok(Source::RunDir(d.clone()));
    }
    match (&args.reference, &args.observations, &args.odometry) {
        (Some(r), Some(o), Some(d)) => Ok(Source::Files {
            reference: r.clone(),
            observations: o.clone(),
            odometry: d.clone(),
            ground_truth: args.ground_truth.clone(),
        }),
        _ => Err(ToolError::Input(
            "give --scenario, --run-dir, or --reference with --observations and --odometry".into(),
        )),
    }
}

fn run(cli: Cli) -> Result<i32, ToolError> {
    match cli.command {
        Command::Localize(args) => {
            let opts = LocalizeOptions {
                source: source(&args)?,
                config: args.config.config,
                profile: args.config.profile,
                seed: args.seed,
                planar: args.planar,
                ablation: args.ablation,
                out_dir: args.out_dir,
                report: args.report,
            };
            let outcome = tooling::localize(&opts)?;
            let s = &outcome.report.summary;
            match (s.localized, s.position_error) {
                (true, Some(p)) => eprintln!(
                    "localized: {} events, mean position error {:.3} m",
                    s.event_count, p.mean
                ),
                (true, None) => eprintln!("localized: {} events", s.event_count),
                (false, _) => eprintln!("never localized"),
            }
            Ok(outcome.exit_code)
        }
        Command::Simulate { spec, out_dir, seed } => {
            let run = tooling::simulate(&spec, &out_dir, seed)?;
            eprintln!(
                "wrote {} steps, {} reference objects to {}",
                run.len(),
                run.reference_map.len(),
                out_dir.display()
            );
            Ok(0)
        }
        Command::Evaluate {
            run_dir,
            report,
            events,
            config,
            planar,
            ablation,
            series_dir,
        } => {
            let opts = EvaluateOptions {
                run_dir,
                events,
                report: Some(report),
                config: config.config,
                profile: config.profile,
                planar,
                ablation,
                series_dir,
            };
            tooling::evaluate(&opts)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
