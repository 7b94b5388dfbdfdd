use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use trunctest::checks::{self, Scale};
use trunctest::manifest::{calibrate_all, MANIFEST_FILE};
use trunctest::report::{emit_report, parse_results_csv};
use trunctest::sweep::{run_sweep, SweepSpec};
use trunctest_core::hardinstance::{
    calibrate_hard_instance, chi_square_closed_form, embed, hard_instance_for_alpha,
    sample_complexity_floor,
};

#[derive(Parser)]
#[command(name = "trunctest", version, about = "Mean testing under unknown truncation")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Select per-tester threshold constants and write calibration.json.
    Calibrate {
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Directory receiving the manifest.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run or resume a power-curve sweep.
    Sweep {
        /// Sweep spec (JSON). Defaults to the built-in phase-transition grid.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Calibration manifest.
        #[arg(long, default_value = MANIFEST_FILE)]
        manifest: PathBuf,
        /// Overrides the spec's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the spec's base seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print a calibrated hard instance as JSON.
    Hardinstance {
        /// Tail mass. Mutually exclusive with --alpha.
        #[arg(long, conflicts_with = "alpha")]
        eps: Option<f64>,
        /// Mean shift to solve for instead of ε.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 16)]
        dim: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Run the property checks and print one PASS/FAIL line each.
    Verify {
        /// Smaller Monte-Carlo effort (smoke test; thresholds unchanged).
        #[arg(long)]
        quick: bool,
        /// Scratch directory for the determinism check.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rebuild summary.json and plot data from a results.csv.
    Report {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring thread pool")?;
    }
    match cli.command {
        Command::Calibrate { trials, seed, out } => {
            let manifest = calibrate_all(trials, seed)?;
            let path = out.join(MANIFEST_FILE);
            manifest.save(&path)?;
            for e in &manifest.entries {
                println!("{}: c_n={} c_thr={} accept={:?}", e.tester.name(), e.c_n, e.c_thr, e.accept_rates);
            }
            println!("wrote {}", path.display());
        }
        Command::Sweep { config, manifest, out, seed } => {
            let mut spec = match &config {
                Some(p) => SweepSpec::from_json_file(p)?,
                None => SweepSpec::default_phase_transition(PathBuf::from("sweep"), 1),
            };
            if let Some(o) = out {
                spec.output_dir = o;
            }
            if let Some(s) = seed {
                spec.base_seed = s;
            }
            let curves = run_sweep(&spec, &manifest)?;
            let expected = spec.grid.iter().map(|c| c.n_ladder.len()).sum::<usize>();
            let got = curves.iter().map(|c| c.points.len()).sum::<usize>();
            for c in &curves {
                let rates: Vec<String> = c.points.iter().map(|p| format!("{}:{:.2}", p.n, p.rate)).collect();
                println!("{:>3} {:<14} {:<14} {}", c.cell_index, c.cell.tester.name(), c.cell.instance.name(), rates.join(" "));
            }
            emit_report(&curves, &spec.output_dir)?;
            if got != expected {
                bail!("sweep incomplete: {got} of {expected} blocks");
            }
        }
        Command::Hardinstance { eps, alpha, dim, seed } => {
            let h = match (eps, alpha) {
                (_, Some(a)) => hard_instance_for_alpha(a)?,
                (Some(e), None) => calibrate_hard_instance(e)?,
                (None, None) => bail!("pass --eps or --alpha"),
            };
            let record = embed(&h, dim, seed)?.record();
            let out = serde_json::json!({
                "instance": record,
                "chi_square": chi_square_closed_form(&h),
                "sample_complexity_floor": sample_complexity_floor(&h, dim),
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
        Command::Verify { quick, out } => {
            let scale = if quick { Scale::quick() } else { Scale::acceptance() };
            let scratch;
            let dir = match out {
                Some(d) => {
                    std::fs::create_dir_all(&d).with_context(|| d.display().to_string())?;
                    d
                }
                None => {
                    scratch = tempfile_dir()?;
                    scratch.clone()
                }
            };
            let results = checks::run_all(&scale, &dir);
            for c in &results {
                println!("{}", c.line());
            }
            if results.iter().any(|c| !c.passed) {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Report { results, out } => {
            let curves = parse_results_csv(&results)?;
            let files = emit_report(&curves, &out)?;
            println!("wrote {} and {} plot files", files.summary.display(), files.plots.len());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn tempfile_dir() -> anyhow::Result<PathBuf> {
    let dir = std::env::temp_dir().join(format!("trunctest-verify-{}", std::process::id()));
    std::fs::create_dir_all(&dir).with_context(|| dir.display().to_string())?;
    Ok(dir)
}
