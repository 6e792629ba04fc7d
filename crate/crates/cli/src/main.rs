use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use frontflow::config::{ExperimentConfig, ScenarioName};
use frontflow::scenario::{self, Relation};

#[derive(Parser)]
#[command(name = "frontflow", version, about = "Anisotropic threshold dynamics experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a config file.
    Run {
        config: PathBuf,
        /// Output directory; defaults to `output.dir` from the config.
        #[arg(long)]
        outdir: Option<PathBuf>,
        /// Override `scenario.name`.
        #[arg(long)]
        scenario: Option<String>,
        /// Print the parsed config in canonical form and exit.
        #[arg(long)]
        print_config: bool,
        /// Worker threads for grid and sweep work.
        #[arg(long, env = "FRONTFLOW_THREADS")]
        threads: Option<usize>,
    },
}

enum Outcome {
    Pass,
    Fail,
}

fn run(cli: Cli) -> Result<Outcome> {
    let Command::Run {
        config,
        outdir,
        scenario: name,
        print_config,
        threads,
    } = cli.command;
    let text = std::fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
    let mut cfg = ExperimentConfig::parse_str(&text)?;
    if let Some(name) = name {
        cfg.scenario.name = ScenarioName::parse(&name)?;
    }
    cfg.validate()?;
    if print_config {
        print!("{}", cfg.to_toml());
        return Ok(Outcome::Pass);
    }
    if let Some(k) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let outdir = outdir.unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    let report = scenario::run(&cfg, &outdir)?;
    for m in &report.metrics {
        println!(
            "{:<32} {:>14.6e}  {}",
            m.name,
            m.value,
            match (m.relation, m.pass) {
                (Relation::Info, _) => "info",
                (_, true) => "ok",
                (_, false) => "FAIL",
            }
        );
    }
    Ok(if report.passed() { Outcome::Pass } else { Outcome::Fail })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
