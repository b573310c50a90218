//! Scenario runner CLI.
//!
//! Subcommands:
//!   run <CONFIG>       integrate a scenario and write its CSV + manifest
//!   oracle <CONFIG>    write the exact-reference rows for the scenario
//!   diagnose <CONFIG>  convergence / consistency gates, nonzero exit on failure
//!   list               scenario names and one-line descriptions
//!   help [SCENARIO]    usage, or the canonical config for one scenario
//!
//! Exit codes: 0 success, 1 numerical failure, 2 usage or config error.

use std::path::PathBuf;
use std::process::ExitCode;

use twqfi::scenario::{
    canonical_example, diagnose, list_scenarios, run_oracle, run_scenario, RunOptions,
    ScenarioConfig, ScenarioKind,
};
use twqfi::Error;

const OUT_DIR_ENV: &str = "TWQFI_OUT_DIR";

fn usage() -> String {
    format!(
        "twqfi - stochastic phase-space QFI scenario runner

USAGE:
  twqfi run <CONFIG>      [--seed N] [--workers N] [--out PATH]
  twqfi oracle <CONFIG>   [--seed N] [--workers N] [--out PATH]
  twqfi diagnose <CONFIG> [--seed N] [--workers N]
  twqfi list
  twqfi help [SCENARIO]

OPTIONS:
  --seed N      override the config seed
  --workers N   cap the worker thread count (results are identical at any N)
  --out PATH    output CSV path (a .manifest.json is written alongside)

ENVIRONMENT:
  {OUT_DIR_ENV}   base directory for relative output paths

EXIT CODES:
  0 success, 1 numerical failure, 2 usage or config error
"
    )
}

#[derive(Debug)]
enum Command {
    Run(PathBuf, RunOptions),
    Oracle(PathBuf, RunOptions),
    Diagnose(PathBuf, RunOptions),
    List,
    Help(Option<String>),
}

fn parse_args(args: &[String]) -> Result<Command, String> {
    if args.is_empty() {
        return Err("missing subcommand".into());
    }
    if args.iter().any(|a| a == "--help" || a == "-h") {
        // scenario schemas live under `twqfi help <scenario>`
        return Ok(Command::Help(None));
    }
    match args[0].as_str() {
        "list" => Ok(Command::List),
        "help" => Ok(Command::Help(args.get(1).cloned())),
        verb @ ("run" | "oracle" | "diagnose") => {
            let mut config: Option<PathBuf> = None;
            let mut opts = RunOptions {
                out_dir: std::env::var_os(OUT_DIR_ENV).map(PathBuf::from),
                ..Default::default()
            };
            let mut rest = args[1..].iter();
            while let Some(arg) = rest.next() {
                match arg.as_str() {
                    "--seed" => {
                        let value = rest.next().ok_or("--seed needs a value")?;
                        opts.seed =
                            Some(value.parse().map_err(|_| format!("bad seed `{value}`"))?);
                    }
                    "--workers" => {
                        let value = rest.next().ok_or("--workers needs a value")?;
                        opts.workers =
                            Some(value.parse().map_err(|_| format!("bad workers `{value}`"))?);
                    }
                    "--out" => {
                        let value = rest.next().ok_or("--out needs a value")?;
                        opts.out = Some(PathBuf::from(value));
                    }
                    flag if flag.starts_with('-') => {
                        return Err(format!("unknown flag `{flag}`"));
                    }
                    path => {
                        if config.replace(PathBuf::from(path)).is_some() {
                            return Err(format!("unexpected extra argument `{path}`"));
                        }
                    }
                }
            }
            let config = config.ok_or_else(|| format!("{verb} needs a config path"))?;
            Ok(match verb {
                "run" => Command::Run(config, opts),
                "oracle" => Command::Oracle(config, opts),
                _ => Command::Diagnose(config, opts),
            })
        }
        other => Err(format!("unknown subcommand `{other}`")),
    }
}

fn scenario_help(topic: &str) -> Option<String> {
    let kind = ScenarioKind::all().into_iter().find(|k| k.name() == topic)?;
    Some(format!(
        "{} - {}\n\ncanonical config:\n\n{}",
        kind.name(),
        kind.description(),
        canonical_example(kind)
    ))
}

fn load_config(path: &PathBuf) -> Result<ScenarioConfig, String> {
    ScenarioConfig::from_path(path).map_err(|e| format!("{}: {e}", path.display()))
}

/// 1 for numerical/runtime failures, 2 for configuration mistakes.
fn failure_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let command = match parse_args(&args) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("error: {msg}\n\n{}", usage());
            return ExitCode::from(2);
        }
    };
    match command {
        Command::List => {
            for (name, description) in list_scenarios() {
                println!("{name:<16} {description}");
            }
            println!("\n`twqfi help <scenario>` prints a scenario's canonical config.");
            ExitCode::SUCCESS
        }
        Command::Help(None) => {
            println!("{}", usage());
            ExitCode::SUCCESS
        }
        Command::Help(Some(topic)) => match scenario_help(&topic) {
            Some(text) => {
                println!("{text}");
                ExitCode::SUCCESS
            }
            None => {
                eprintln!("error: unknown help topic `{topic}`\n\n{}", usage());
                ExitCode::from(2)
            }
        },
        Command::Run(path, opts) => run_command(&path, &opts, false),
        Command::Oracle(path, opts) => run_command(&path, &opts, true),
        Command::Diagnose(path, opts) => {
            let mut cfg = match load_config(&path) {
                Ok(c) => c,
                Err(msg) => {
                    eprintln!("error: {msg}");
                    return ExitCode::from(2);
                }
            };
            if let Some(seed) = opts.seed {
                cfg.numerics.seed = seed;
            }
            if let Some(workers) = opts.workers {
                cfg.numerics.workers = Some(workers);
            }
            match diagnose(&cfg) {
                Ok(report) => {
                    print!("{}", report.render());
                    if report.passed() {
                        ExitCode::SUCCESS
                    } else {
                        eprintln!("diagnosis failed");
                        ExitCode::from(1)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(failure_code(&e))
                }
            }
        }
    }
}

fn run_command(path: &PathBuf, opts: &RunOptions, is_oracle: bool) -> ExitCode {
    let cfg = match load_config(path) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let result = if is_oracle {
        run_oracle(&cfg, opts)
    } else {
        run_scenario(&cfg, opts)
    };
    match result {
        Ok(out) => {
            println!(
                "{}: {} rows -> {} (non-finite trajectories: {})",
                out.manifest.scenario,
                out.manifest.rows,
                out.csv_path.display(),
                out.manifest.non_finite_trajectories
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(failure_code(&e))
        }
    }
}
