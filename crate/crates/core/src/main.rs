use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crplan::bench::{benchmark, format_table};
use crplan::report::write_csv;
use crplan::scenario::{load_scenario, run_scenario, PathSource, Planner};
use crplan::Error;

const EXIT_OK: u8 = 0;
const EXIT_PLANNER_FAILURE: u8 = 1;
const EXIT_INPUT_ERROR: u8 = 2;

#[derive(Parser)]
#[command(
    name = "crplan",
    version,
    about = "Motion planning for a two-segment continuum manipulator",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and print a summary (optionally writing the
    /// per-step CSV log)
    Run {
        /// Scenario description file (TOML)
        scenario: PathBuf,
        /// Write the per-step CSV log here
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the scenario's RNG seed
        #[arg(long)]
        seed: Option<u64>,
        /// Override the scenario's planner
        #[arg(long, value_enum)]
        planner: Option<Planner>,
    },
    /// Benchmark scenarios across every applicable planner
    Bench {
        /// Scenario description files (TOML)
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
        /// Repetitions per scenario/planner pair
        #[arg(long)]
        reps: usize,
        /// Write the text table here as well as stdout
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the rows as JSON here
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Check that a scenario file parses and is internally consistent
    Validate {
        /// Scenario description file (TOML)
        scenario: PathBuf,
    },
}

/// Input problems exit 2; failures of the planning itself exit 1.
fn exit_for(err: &Error) -> u8 {
    match err {
        Error::Parse { .. } | Error::Validation(_) | Error::Io(_) => EXIT_INPUT_ERROR,
        Error::NoPathFound(_) | Error::SingularTask | Error::CoincidentEscape => {
            EXIT_PLANNER_FAILURE
        }
    }
}

fn label_for(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn describe_source(source: &PathSource) -> String {
    match source {
        PathSource::FixedCircle {
            center,
            radius,
            n_points,
        } => format!(
            "fixed circle, center ({}, {}, {}), radius {}, {} points",
            center[0], center[1], center[2], radius, n_points
        ),
        PathSource::Srrt {
            start,
            goal,
            n_samples,
            ..
        } => format!(
            "tree search from ({}, {}, {}) to ({}, {}, {}), {} samples",
            start[0], start[1], start[2], goal[0], goal[1], goal[2], n_samples
        ),
    }
}

fn cmd_run(
    scenario_path: &Path,
    out: Option<&Path>,
    seed: Option<u64>,
    planner: Option<Planner>,
) -> u8 {
    let scenario = match load_scenario(scenario_path) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_for(&e);
        }
    };
    let effective = planner.unwrap_or(scenario.planner);
    let report = match run_scenario(&scenario, seed, planner) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_for(&e);
        }
    };

    let traj = &report.trajectory;
    println!("scenario:       {}", label_for(scenario_path));
    println!("planner:        {}", effective.label());
    println!("seed:           {}", seed.unwrap_or(scenario.rng_seed));
    println!("steps:          {}", traj.steps.len());
    println!(
        "succeeded:      {}",
        if report.outcome.succeeded { "yes" } else { "no" }
    );
    if let Some(reason) = &report.outcome.failure_reason {
        println!("failure:        {reason:?}");
    }
    if let Some(min) = traj.min_clearance() {
        println!("min clearance:  {min:.3} mm");
    }
    println!("final error:    {:.4} mm", traj.final_tracking_error());
    println!(
        "time:           {:.3} s path + {:.3} s motion = {:.3} s",
        report.timings.path_planning,
        report.timings.motion_planning,
        report.timings.total()
    );

    if let Some(out_path) = out {
        if let Err(e) = write_csv(&report, out_path) {
            eprintln!("error: {e}");
            return exit_for(&e);
        }
        println!("csv:            {}", out_path.display());
    }

    if report.outcome.succeeded {
        EXIT_OK
    } else {
        EXIT_PLANNER_FAILURE
    }
}

fn cmd_bench(
    scenario_paths: &[PathBuf],
    reps: usize,
    out: Option<&Path>,
    json: Option<&Path>,
) -> u8 {
    if reps == 0 {
        eprintln!("error: --reps must be at least 1");
        return EXIT_INPUT_ERROR;
    }
    let mut labeled = Vec::new();
    for path in scenario_paths {
        match load_scenario(path) {
            Ok(s) => labeled.push((label_for(path), s)),
            Err(e) => {
                eprintln!("error: {e}");
                return exit_for(&e);
            }
        }
    }
    let rows = benchmark(&labeled, reps);
    let table = format_table(&rows);
    print!("{table}");
    if let Some(path) = out {
        if let Err(e) = std::fs::write(path, &table) {
            eprintln!("error: {e}");
            return EXIT_INPUT_ERROR;
        }
    }
    if let Some(path) = json {
        let body = serde_json::to_string_pretty(&rows).expect("rows serialize");
        if let Err(e) = std::fs::write(path, body) {
            eprintln!("error: {e}");
            return EXIT_INPUT_ERROR;
        }
    }
    EXIT_OK
}

fn cmd_validate(scenario_path: &Path) -> u8 {
    match load_scenario(scenario_path) {
        Ok(s) => {
            println!("ok: {}", scenario_path.display());
            println!("planner:    {}", s.planner.label());
            println!("seed:       {}", s.rng_seed);
            println!("obstacles:  {}", s.obstacles.len());
            println!("path:       {}", describe_source(&s.path_source));
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_for(&e)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run {
            scenario,
            out,
            seed,
            planner,
        } => cmd_run(&scenario, out.as_deref(), seed, planner),
        Command::Bench {
            scenarios,
            reps,
            out,
            json,
        } => cmd_bench(&scenarios, reps, out.as_deref(), json.as_deref()),
        Command::Validate { scenario } => cmd_validate(&scenario),
    };
    ExitCode::from(code)
}
