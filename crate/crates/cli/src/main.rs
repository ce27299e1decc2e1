//! `thinfilm`: steady states, constants, evolution runs and blow-up
//! classification from the command line.

mod config;
mod error;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use serde_json::Value;

use config::{parse_config, parse_value, Command};

#[derive(Debug, Parser)]
#[command(name = "thinfilm", version, about = "Thin-film equation toolkit")]
struct Cli {
    /// Command to run; defaults to the config file's `command`, else `constants`.
    #[arg(value_enum)]
    command: Option<Command>,

    /// Same as the positional command.
    #[arg(long = "command", value_enum, conflicts_with = "command")]
    command_flag: Option<Command>,

    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,

    #[arg(long)]
    m: Option<f64>,
    #[arg(long)]
    mass: Option<f64>,
    /// Steady profile height (required for `steady` at m = 3).
    #[arg(long)]
    height: Option<f64>,
    /// Dilation factor of the steady state used as initial data.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    grid_n: Option<usize>,
    #[arg(long)]
    grid_half_width: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sweep worker threads (0 = all cores).
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write into a non-empty output directory.
    #[arg(long)]
    overwrite: bool,
    /// Any config key as `dotted.key=value`, value parsed as JSON when possible.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Cli {
    fn overrides(&self) -> Result<Vec<(String, Value)>, error::CliError> {
        let mut out: Vec<(String, Value)> = Vec::new();
        let mut put = |k: &str, v: Value| out.push((k.to_string(), v));
        if let Some(c) = self.command.or(self.command_flag) {
            put("command", serde_json::to_value(c).expect("enum serializes"));
        }
        let nums = [
            ("params.m", self.m),
            ("params.mass", self.mass),
            ("params.height", self.height),
            ("initial.lambda", self.lambda),
            ("solver.epsilon", self.epsilon),
            ("solver.t_end", self.t_end),
            ("grid.half_width", self.grid_half_width),
        ];
        for (k, v) in nums {
            if let Some(v) = v {
                put(k, Value::from(v));
            }
        }
        if let Some(n) = self.grid_n {
            put("grid.n", Value::from(n));
        }
        if let Some(p) = &self.out {
            put("output_dir", Value::from(p.display().to_string()));
        }
        if let Some(j) = self.jobs {
            put("jobs", Value::from(j));
        }
        if let Some(s) = self.seed {
            put("seed", Value::from(s));
        }
        if self.overwrite {
            put("overwrite", Value::Bool(true));
        }
        for item in &self.set {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| error::CliError::config(item.clone(), "expected KEY=VALUE"))?;
            put(k.trim(), parse_value(v.trim()));
        }
        Ok(out)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = cli
        .overrides()
        .and_then(|o| parse_config(cli.config.as_deref(), &o))
        .and_then(|cfg| run::run(&cfg));
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
