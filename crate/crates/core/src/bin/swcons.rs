use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use switching_consensus::pipeline::{cmd_certify, cmd_simulate, cmd_sweep, cmd_validate};
use switching_consensus::{Error, RunConfig};

#[derive(Parser)]
#[command(name = "swcons", version, about = "Switched HK / CS simulations and certificates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long, value_name = "INT")]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate and write the trajectory CSV plus a summary.
    Simulate(Common),
    /// Simulate and check every certificate; exit 1 if any fails.
    Certify(Common),
    /// One certify run per value of a numeric config field.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Dotted path of the field, e.g. `schedule.bad0`.
        #[arg(long, value_name = "NAME")]
        axis: String,
        /// Comma-separated values; may be empty.
        #[arg(long, value_name = "CSV", default_value = "")]
        values: String,
    },
    /// Check the schedule hypotheses without integrating.
    Validate(Common),
}

fn load(c: &Common) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::from_path(&c.config)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn load_value(c: &Common) -> Result<serde_json::Value, Error> {
    let text = std::fs::read_to_string(&c.config).map_err(|e| Error::Io { path: c.config.clone(), source: e })?;
    let mut v: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    if let Some(s) = c.seed {
        v["seed"] = s.into();
    }
    Ok(v)
}

fn parse_values(csv: &str) -> Result<Vec<f64>, Error> {
    csv.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| Error::Config(format!("--values: cannot parse {s:?} as a number"))))
        .collect()
}

fn print_json<T: serde::Serialize>(v: &T) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Simulate(c) => {
            print_json(&cmd_simulate(&load(&c)?, &c.out)?);
            Ok(0)
        }
        Command::Certify(c) => {
            let cfg = load(&c)?;
            let report = cmd_certify(&cfg, &c.out)?;
            eprintln!("all_ok = {} ({})", report.all_ok, c.out.join(&cfg.outputs.report_json).display());
            Ok(if report.all_ok { 0 } else { 1 })
        }
        Command::Sweep { common, axis, values } => {
            let values = parse_values(&values)?;
            let rows = cmd_sweep(&load_value(&common)?, &axis, &values, &common.out)?;
            eprintln!("{} runs, aggregate in {}", rows.len(), common.out.join("sweep.csv").display());
            Ok(0)
        }
        Command::Validate(c) => {
            let outcome = cmd_validate(&load(&c)?, Some(&c.out))?;
            print_json(&outcome);
            if let Some(v) = &outcome.validation.first_violation {
                eprintln!("error: {}", v.message);
            }
            Ok(if outcome.ok { 0 } else { 3 })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
