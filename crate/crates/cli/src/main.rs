use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kahler_lab::flow::FlowMode;
use kahler_lab_cli::config::parse_probes;
use kahler_lab_cli::suite::{run_suite, summary_lines};
use kahler_lab_cli::{commands, scenarios, CliError, ExperimentConfig, Result};

#[derive(Parser)]
#[command(name = "kahler-lab", version, about = "Monge-Ampere, Kahler-Ricci flow and Mabuchi energy experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the limit twisted Monge-Ampere equation on the base.
    SolveMa(Common),
    /// Solve the Calabi equation for omega0 on the total space.
    SolveCalabi(Common),
    /// Run the normalized Kahler-Ricci flow.
    Flow(Common),
    /// Evaluate Mabuchi energies or their small-t expansions.
    Energy(Common),
    /// Run the acceptance battery; all criteria unless a scenario or config is given.
    Suite(Common),
    /// List the built-in scenarios.
    Scenarios,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Full,
    Reduced,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config.
    #[arg(long, conflicts_with = "scenario")]
    config: Option<PathBuf>,
    /// Built-in scenario name.
    #[arg(long)]
    scenario: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated probe times.
    #[arg(long)]
    probes: Option<String>,
    /// Newton tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Seed of the randomized checks.
    #[arg(long)]
    seed: Option<u64>,
}

const DEFAULT_SEED: u64 = 20240917;

impl Common {
    fn config(&self) -> Result<Option<ExperimentConfig>> {
        let mut cfg = match (&self.config, &self.scenario) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(name)) => scenarios::scenario(name)?,
            (None, None) => return Ok(None),
        };
        if let Some(p) = &self.probes {
            let probes = parse_probes(p)?;
            let flow = cfg.flow.as_mut().ok_or_else(|| CliError::Config("--probes needs a flow section".into()))?;
            flow.probes = probes;
        }
        if let Some(tol) = self.tol {
            cfg.solver.tol = tol;
        }
        if let Some(m) = self.mode {
            let flow = cfg.flow.as_mut().ok_or_else(|| CliError::Config("--mode needs a flow section".into()))?;
            flow.mode = match m {
                ModeArg::Full => FlowMode::Full,
                ModeArg::Reduced => FlowMode::Reduced,
            };
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out = Some(o.clone());
        }
        cfg.validate()?;
        Ok(Some(cfg))
    }

    fn required(&self) -> Result<ExperimentConfig> {
        self.config()?.ok_or_else(|| CliError::Config("one of --config or --scenario is required".into()))
    }

    fn out_dir(&self, cfg: Option<&ExperimentConfig>) -> PathBuf {
        self.out
            .clone()
            .or_else(|| cfg.and_then(|c| c.out.clone()))
            .unwrap_or_else(|| PathBuf::from("out").join(cfg.map(|c| c.scenario.as_str()).unwrap_or("suite")))
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::SolveMa(c) => {
            let cfg = c.required()?;
            commands::solve_ma(&cfg, &c.out_dir(Some(&cfg)))?;
        }
        Command::SolveCalabi(c) => {
            let cfg = c.required()?;
            commands::solve_calabi(&cfg, &c.out_dir(Some(&cfg)))?;
        }
        Command::Flow(c) => {
            let cfg = c.required()?;
            commands::flow(&cfg, &c.out_dir(Some(&cfg)))?;
        }
        Command::Energy(c) => {
            let cfg = c.required()?;
            commands::energy(&cfg, &c.out_dir(Some(&cfg)))?;
        }
        Command::Suite(c) => {
            let cfg = c.config()?;
            let seed = c.seed.or(cfg.as_ref().map(|c| c.seed)).unwrap_or(DEFAULT_SEED);
            let verdict = run_suite(cfg.as_ref(), &c.out_dir(cfg.as_ref()), seed)?;
            for line in summary_lines(&verdict) {
                println!("{line}");
            }
            return Ok(verdict.passed());
        }
        Command::Scenarios => {
            for name in scenarios::NAMES {
                println!("{name}");
            }
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
