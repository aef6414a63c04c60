//! `sim` — runs, lists, and validates simulation experiments.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use scfde::experiments::{self, ExperimentSpec, RunOptions};

#[derive(Parser)]
#[command(
    name = "sim",
    version,
    about = "Link-level simulator for cyclic-prefix single-carrier multi-user MIMO uplinks",
    after_help = "Experiments are JSON files (see the repository README for the schema) or one \
                  of the bundled names from `sim list-specs`."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write CSV curves plus a manifest
    Run {
        /// Bundled experiment name or path to an experiment JSON file
        spec: String,
        /// Override the experiment's seed
        #[arg(long, value_name = "S")]
        seed: Option<u64>,
        /// Worker threads (default: all cores)
        #[arg(long, value_name = "W", env = "SIM_WORKERS")]
        workers: Option<usize>,
        /// Output directory for curves and the manifest
        #[arg(long, value_name = "DIR", env = "SIM_OUT_DIR", default_value = "out")]
        out: PathBuf,
    },
    /// List the experiments bundled with the simulator
    ListSpecs,
    /// Check an experiment file (and its scenario) without running it
    Validate {
        /// Bundled experiment name or path to an experiment JSON file
        spec: String,
    },
}

/// Loads a spec argument: a bundled name first, a file path otherwise.
/// Returns the parsed spec and the directory scenario references resolve
/// against.
fn load_spec(arg: &str) -> Result<(ExperimentSpec, Option<PathBuf>), String> {
    if let Some(parsed) = experiments::bundled_spec(arg) {
        return parsed.map(|s| (s, None)).map_err(|e| format!("bundled {arg}: {e}"));
    }
    let path = Path::new(arg);
    if !path.exists() {
        return Err(format!(
            "{arg}: not a bundled experiment (see `sim list-specs`) and no such file"
        ));
    }
    let text = std::fs::read_to_string(path).map_err(|e| format!("{arg}: {e}"))?;
    let spec = ExperimentSpec::from_json(&text).map_err(|e| format!("{arg}: {e}"))?;
    let base = path.parent().map(Path::to_path_buf);
    Ok((spec, base))
}

fn run(spec_arg: &str, seed: Option<u64>, workers: Option<usize>, out: PathBuf) -> ExitCode {
    let (spec, base_dir) = match load_spec(spec_arg) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let opts = RunOptions { seed, out_dir: out, base_dir };
    let (cfg, effective_seed) = match experiments::preflight(&spec, &opts) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };

    if let Some(w) = workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w).build_global() {
            eprintln!("error: worker pool: {e}");
            return ExitCode::from(2);
        }
    }

    println!(
        "{}: N={} Ls={} NT={} NR={} seed={}",
        spec.name, cfg.n, cfg.ls, cfg.n_t, cfg.n_r, effective_seed
    );
    let started = Instant::now();
    match experiments::run_experiment(&spec, &opts) {
        Ok(manifest) => {
            for curve in &manifest.curves {
                println!("  wrote {}", opts.out_dir.join(&curve.file).display());
            }
            println!(
                "  wrote {}",
                opts.out_dir.join(format!("{}_manifest.json", manifest.name)).display()
            );
            println!(
                "{} curves in {:.1}s",
                manifest.curves.len(),
                started.elapsed().as_secs_f64()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn list_specs() -> ExitCode {
    for (name, json) in experiments::bundled() {
        match ExperimentSpec::from_json(json) {
            Ok(spec) => {
                println!("{name:8} {}", spec.description.as_deref().unwrap_or(""));
            }
            Err(e) => {
                eprintln!("error: bundled {name}: {e}");
                return ExitCode::from(2);
            }
        }
    }
    ExitCode::SUCCESS
}

fn validate(spec_arg: &str) -> ExitCode {
    let (spec, base_dir) = match load_spec(spec_arg) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let opts = RunOptions { base_dir, ..Default::default() };
    match experiments::preflight(&spec, &opts) {
        Ok((cfg, seed)) => {
            println!(
                "{}: ok (N={} Ls={} NT={} NR={} seed={}, {} detector(s), hash {})",
                spec.name,
                cfg.n,
                cfg.ls,
                cfg.n_t,
                cfg.n_r,
                seed,
                spec.detectors.len(),
                spec.config_hash()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {spec_arg}: {e}");
            ExitCode::from(1)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { spec, seed, workers, out } => run(&spec, seed, workers, out),
        Command::ListSpecs => list_specs(),
        Command::Validate { spec } => validate(&spec),
    }
}
