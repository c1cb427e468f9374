use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use smc_core::config::load_config;
use smc_core::dynamics::{gradient_rel_error, DisturbanceSignal, FD_STEP};
use smc_core::runner::{run_scenario, sweep, write_sweep_csv, write_sweep_file};
use smc_core::verify::{render_table, run_suite, Suite};
use smc_core::{RunConfig, ScenarioKind, SmcError};

#[derive(Parser)]
#[command(name = "smc", version, about = "Sliding mode control synthesis, simulation and verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one closed-loop simulation and write trajectory CSV + report JSON.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output.dir` from the config.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Re-run a config over a list of values for one numeric field.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Dotted field path, e.g. `controller.n`.
        #[arg(long)]
        param: String,
        /// Comma-separated values; may be empty.
        #[arg(long, allow_hyphen_values = true, default_value = "")]
        values: String,
        /// Write the table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a verification suite and print a pass/fail table.
    Verify {
        #[arg(value_enum)]
        suite: SuiteArg,
    },
    /// Compare analytic and finite-difference surface gradients.
    Gradcheck {
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Reaching,
    Disturbance,
    Gradients,
    Lyapunov,
    All,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Self {
        match s {
            SuiteArg::Reaching => Suite::Reaching,
            SuiteArg::Disturbance => Suite::Disturbance,
            SuiteArg::Gradients => Suite::Gradients,
            SuiteArg::Lyapunov => Suite::Lyapunov,
            SuiteArg::All => Suite::All,
        }
    }
}

fn load(path: &Path) -> Result<RunConfig, SmcError> {
    load_config(path)?.with_env_seed()
}

fn parse_values(text: &str) -> Result<Vec<f64>, SmcError> {
    text.split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| {
            v.parse::<f64>().map_err(|_| SmcError::ConfigValidation(vec![format!("--values: not a number: {v:?}")]))
        })
        .collect()
}

fn gradcheck(name: &str, samples: usize, seed: u64) -> Result<(), SmcError> {
    let kind: ScenarioKind = name.parse()?;
    let (_, surface) = kind.build::<f64>(&Default::default(), DisturbanceSignal::zero(), DisturbanceSignal::zero())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let x: Vec<f64> = (0..kind.dimension()).map(|_| rng.gen_range(-10.0..=10.0)).collect();
        worst = worst.max(gradient_rel_error(&surface.gradient(&x)?, &surface.gradient_fd(&x, FD_STEP)?));
    }
    let verdict = if worst <= 1e-6 { "PASS" } else { "FAIL" };
    println!("{kind}: {samples} states, max relative error {worst:.3e} (tolerance 1e-6) {verdict}");
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode, SmcError> {
    match cli.command {
        Command::Simulate { config, out_dir } => {
            let mut cfg = load(&config)?;
            if let Some(dir) = out_dir {
                cfg.output.dir = dir;
            }
            let (outcome, files) = run_scenario(&cfg)?;
            let r = &outcome.report;
            if let Some(e) = &r.error {
                eprintln!("warning: simulation stopped early: {}", e.message);
            }
            match r.reach.and_then(|x| x.t_reach_measured) {
                Some(t) => println!(
                    "reached |s| <= {:e} at t = {t:.6} (predicted {:.6})",
                    r.reach.unwrap().eps_band,
                    r.reach.unwrap().t_r_predicted
                ),
                None => println!("sliding surface not reached"),
            }
            println!("reaching bound satisfied: {}", r.reaching_bound_verified);
            println!("wrote {} and {}", files.trajectory_csv.display(), files.report_json.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { config, param, values, out } => {
            let cfg = load(&config)?;
            let rows = sweep(&cfg, &param, &parse_values(&values)?)?;
            match out {
                Some(path) => write_sweep_file(&rows, &path)?,
                None => write_sweep_csv(&rows, std::io::stdout().lock())?,
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { suite } => {
            let results = run_suite(suite.into());
            print!("{}", render_table(&results));
            Ok(if results.iter().all(|r| r.passed) { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Gradcheck { scenario, samples, seed } => {
            gradcheck(&scenario, samples, seed)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                SmcError::ConfigSyntax(_) | SmcError::ConfigValidation(_) | SmcError::Parameter(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
