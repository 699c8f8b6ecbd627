//! Scenario runner CLI: run single scenarios, parameter sweeps, validate
//! configs, and browse the built-in scenario library.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use unosim::config::{ConfigError, ScenarioConfig};
use unosim::runner::{self, SweepAxis};
use unosim::scenarios;

#[derive(Parser)]
#[command(name = "unosim", version, about = "Packet-level simulator for unified inter/intra-datacenter transport")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario from a config file or a built-in scenario name.
    Run {
        config: String,
        /// Output directory (overrides the config; UNOSIM_OUTPUT_DIR also works).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed override (UNOSIM_SEED also works).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run one isolated simulation per axis value and aggregate the results.
    Sweep {
        config: String,
        /// load | rtt_ratio | seed
        #[arg(long)]
        axis: String,
        /// Comma-separated values, e.g. 0.2,0.4,0.6,0.8
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Validate a config file and report every violation.
    Validate { config: String },
    /// List the built-in scenarios.
    ListScenarios,
    /// Print a scenario's description and fully-resolved config.
    Describe { scenario: String },
}

fn load_config(arg: &str) -> Result<ScenarioConfig, ConfigError> {
    let path = Path::new(arg);
    if path.exists() {
        ScenarioConfig::load(path)
    } else if let Some(s) = scenarios::find(arg) {
        Ok((s.build)())
    } else {
        Err(ConfigError::Io(format!(
            "{arg}: not a file and not a built-in scenario (see list-scenarios)"
        )))
    }
}

fn apply_overrides(cfg: &mut ScenarioConfig, out: Option<PathBuf>, seed: Option<u64>) {
    if let Some(out) = out {
        cfg.run.output_dir = out.to_string_lossy().into_owned();
    } else if let Ok(dir) = std::env::var("UNOSIM_OUTPUT_DIR") {
        cfg.run.output_dir = dir;
    }
    if let Some(seed) = seed {
        cfg.run.seed = seed;
    } else if let Ok(seed) = std::env::var("UNOSIM_SEED") {
        if let Ok(seed) = seed.parse() {
            cfg.run.seed = seed;
        }
    }
}

// Exit codes: 0 success, 1 config error, 2 runtime invariant violation.
fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

enum CliError {
    Config(String),
    Runtime(String),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Run { config, out, seed } => {
            let mut cfg = load_config(&config)?;
            apply_overrides(&mut cfg, out, seed);
            cfg.validate()?;
            let out_dir = PathBuf::from(&cfg.run.output_dir);
            let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
                runner::run_to_dir(&cfg, &out_dir)
            }));
            match result {
                Ok(Ok(out)) => {
                    for (k, v) in &out.summary {
                        println!("{k} = {v}");
                    }
                    println!("outputs written to {}", out_dir.display());
                    Ok(())
                }
                Ok(Err(runner::RunError::Config(e))) => Err(CliError::Config(e.to_string())),
                Ok(Err(runner::RunError::Workload(e))) => Err(CliError::Config(e)),
                Ok(Err(e)) => Err(CliError::Runtime(e.to_string())),
                Err(p) => Err(CliError::Runtime(panic_message(p))),
            }
        }
        Cmd::Sweep {
            config,
            axis,
            values,
            out,
            seed,
        } => {
            let mut cfg = load_config(&config)?;
            apply_overrides(&mut cfg, out, seed);
            cfg.validate()?;
            let axis = SweepAxis::parse(&axis)
                .ok_or_else(|| CliError::Config(format!("unknown axis {axis:?} (load | rtt_ratio | seed)")))?;
            if values.is_empty() {
                return Err(CliError::Config("sweep needs at least one value".into()));
            }
            let out_root = PathBuf::from(&cfg.run.output_dir);
            let points = runner::sweep(&cfg, axis, &values, &out_root)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            for p in &points {
                match &p.result {
                    Ok(_) => println!("{}: ok ({})", p.value, p.dir.display()),
                    Err(e) => println!("{}: FAILED ({e})", p.value),
                }
            }
            println!("aggregate table: {}", out_root.join("aggregate.csv").display());
            Ok(())
        }
        Cmd::Validate { config } => {
            let cfg = load_config(&config)?;
            cfg.validate()?;
            println!("ok");
            Ok(())
        }
        Cmd::ListScenarios => {
            for s in scenarios::SCENARIOS {
                println!("{:<28} {}", s.name, s.description);
            }
            Ok(())
        }
        Cmd::Describe { scenario } => {
            let s = scenarios::find(&scenario)
                .ok_or_else(|| CliError::Config(format!("unknown scenario {scenario:?}")))?;
            println!("# {}", s.name);
            println!("# {}", s.description);
            println!("{}", (s.build)().to_toml());
            Ok(())
        }
    }
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = p.downcast_ref::<String>() {
        s.clone()
    } else {
        "runtime panic".into()
    }
}
