use std::net::TcpListener;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use seals::config::{builtin_names, resolve_scenario};
use seals::envserver::{server, Env};
use seals::scenarios::run_scenario;

/// Cross-medium aerial-aquatic manipulator simulator.
#[derive(Debug, Parser)]
#[command(name = "seals", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Run a scripted scenario and write its logs. Exits 0 only if every check passes.
    Run {
        /// Scenario file, or the name of a built-in scenario.
        scenario: String,
        /// Output directory for run.csv, imu.csv and summary.json.
        #[arg(long)]
        out: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        verbose: bool,
    },
    /// Serve a scenario over the line-delimited JSON and WebSocket protocol.
    Serve {
        /// Scenario file, or the name of a built-in scenario.
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 7777)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long)]
        verbose: bool,
    },
    /// List the built-in scenarios.
    List,
}

fn init_logging(verbose: bool) {
    let level = if verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
}

fn run(scenario: &str, out: PathBuf, seed: Option<u64>, verbose: bool) -> Result<bool, String> {
    let mut cfg = resolve_scenario(scenario).map_err(|e| e.to_string())?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    init_logging(verbose || cfg.logging.verbose);
    let outcome = run_scenario(&cfg).map_err(|e| e.to_string())?;
    outcome.write_to(&out).map_err(|e| e.to_string())?;
    for c in &outcome.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    println!("wrote {}", out.display());
    Ok(outcome.passed())
}

fn serve(scenario: &str, host: &str, port: u16, verbose: bool) -> Result<(), String> {
    init_logging(verbose);
    let cfg = resolve_scenario(scenario).map_err(|e| e.to_string())?;
    let env = Env::new(&cfg).map_err(|e| e.to_string())?;
    let listener = TcpListener::bind((host, port)).map_err(|e| format!("cannot bind {host}:{port}: {e}"))?;
    let handle = server::spawn(env, listener).map_err(|e| e.to_string())?;
    println!("serving {} on {}", cfg.name, handle.addr);
    handle.wait();
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Run { scenario, out, seed, verbose } => run(&scenario, out, seed, verbose).map(|ok| if ok { 0 } else { 1 }),
        Cmd::Serve { scenario, port, host, verbose } => serve(&scenario, &host, port, verbose).map(|_| 0),
        Cmd::List => {
            builtin_names().for_each(|n| println!("{n}"));
            Ok(0)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
