//! Batch front-end: parse a scenario file, dispatch to the computational
//! modules, and emit tables and CSV files.
//!
//! Exit codes: 0 success, 2 configuration error, 3 computational error.

mod commands;
mod outputs;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};

use outputs::{scenario_hash, OutputContext};
use scenario::{LoadedScenario, Scenario};

#[derive(Parser)]
#[command(
    name = "hsps",
    version,
    about = "Heralded single-photon source simulation and time-tag analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario file (TOML with named sections).
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,

    /// Override a scenario value: --set section.key=value (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Output directory.
    #[arg(long, global = true, default_value = "hsps-out")]
    out: PathBuf,

    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Suppress timestamps in output headers for byte-identical reruns.
    #[arg(long, global = true)]
    deterministic: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve phasematching peaks (optionally after offset calibration).
    Phasematch,
    /// Compute the SPDC output spectrum.
    Spectrum,
    /// Mode-overlap coupling efficiencies.
    Coupling,
    /// Loss-budget totals.
    Budget,
    /// Evaluate coating stacks (optionally converting between media).
    Coating,
    /// Optimize stack layer thicknesses toward transmission targets.
    OptimizeCoating,
    /// Simulate a time-tag stream.
    Simulate,
    /// Count coincidences and compute estimators on a tag stream.
    Analyze {
        /// Tag-stream file (binary .tags or CSV twin).
        #[arg(long)]
        input: PathBuf,
    },
    /// Simulate and analyze a series of pump strengths.
    Sweep,
    /// Run the bundled scenarios end to end.
    Reproduce,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(error) => {
            eprintln!("error: {error:#}");
            ExitCode::from(classify_exit(&error))
        }
    }
}

/// 2 for configuration problems, 3 for computational failures.
fn classify_exit(error: &anyhow::Error) -> u8 {
    for cause in error.chain() {
        if let Some(core) = cause.downcast_ref::<hsps_core::Error>() {
            return match core {
                hsps_core::Error::Config(_)
                | hsps_core::Error::Parse { .. }
                | hsps_core::Error::Io(_) => 2,
                _ => 3,
            };
        }
    }
    2
}

fn parse_overrides(raw: &[String]) -> anyhow::Result<Vec<(String, String)>> {
    raw.iter()
        .map(|entry| {
            entry
                .split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| anyhow!("--set expects KEY=VALUE, got {entry:?}"))
        })
        .collect()
}

fn load_scenario(cli: &Cli) -> anyhow::Result<LoadedScenario> {
    let path = cli
        .scenario
        .as_ref()
        .ok_or_else(|| anyhow!("this subcommand requires --scenario"))?;
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    load_scenario_text(&text, cli, path.parent().unwrap_or(std::path::Path::new(".")))
}

fn load_scenario_text(
    text: &str,
    cli: &Cli,
    base_dir: &std::path::Path,
) -> anyhow::Result<LoadedScenario> {
    let mut overrides = parse_overrides(&cli.set)?;
    if let Some(seed) = cli.seed {
        overrides.push(("seed".to_string(), seed.to_string()));
    }
    let scenario = Scenario::parse(text, &overrides)?;
    Ok(LoadedScenario {
        hash_hex: scenario_hash(text, &overrides),
        scenario,
        base_dir: base_dir.to_path_buf(),
    })
}

fn output_context(cli: &Cli, loaded: &LoadedScenario) -> anyhow::Result<OutputContext> {
    OutputContext::new(
        cli.out.clone(),
        loaded.hash_hex.clone(),
        loaded.scenario.seed,
        cli.deterministic,
    )
}

fn run(cli: &Cli) -> anyhow::Result<String> {
    match &cli.command {
        Command::Phasematch => {
            let loaded = load_scenario(cli)?;
            commands::cmd_phasematch(&loaded, &output_context(cli, &loaded)?)
        }
        Command::Spectrum => {
            let loaded = load_scenario(cli)?;
            commands::cmd_spectrum(&loaded, &output_context(cli, &loaded)?)
        }
        Command::Coupling => {
            let loaded = load_scenario(cli)?;
            commands::cmd_coupling(&loaded, &output_context(cli, &loaded)?)
        }
        Command::Budget => {
            let loaded = load_scenario(cli)?;
            commands::cmd_budget(&loaded, &output_context(cli, &loaded)?)
        }
        Command::Coating => {
            let loaded = load_scenario(cli)?;
            commands::cmd_coating(&loaded, &output_context(cli, &loaded)?)
        }
        Command::OptimizeCoating => {
            let loaded = load_scenario(cli)?;
            commands::cmd_optimize_coating(&loaded, &output_context(cli, &loaded)?)
        }
        Command::Simulate => {
            let loaded = load_scenario(cli)?;
            commands::cmd_simulate(&loaded, &output_context(cli, &loaded)?)
        }
        Command::Analyze { input } => {
            // scenario is optional; without one, defaults come from the stream
            let loaded = match &cli.scenario {
                Some(_) => load_scenario(cli)?,
                None => load_scenario_text("", cli, std::path::Path::new("."))?,
            };
            commands::cmd_analyze(&loaded, &output_context(cli, &loaded)?, input)
        }
        Command::Sweep => {
            let loaded = load_scenario(cli)?;
            commands::cmd_sweep(&loaded, &output_context(cli, &loaded)?)
        }
        Command::Reproduce => run_reproduce(cli),
    }
}

/// Bundled scenarios, run end to end into per-step subdirectories.
fn run_reproduce(cli: &Cli) -> anyhow::Result<String> {
    const STEPS: &[(&str, &str)] = &[
        ("coupling", include_str!("../data/reproduce_coupling.toml")),
        ("budget", include_str!("../data/reproduce_budget.toml")),
        ("phasematch", include_str!("../data/reproduce_phasematch.toml")),
        ("coating", include_str!("../data/reproduce_coating.toml")),
        ("sweep", include_str!("../data/reproduce_sweep.toml")),
    ];
    let mut report = String::new();
    let inputs_dir = cli.out.join("inputs");
    std::fs::create_dir_all(&inputs_dir)?;

    for (name, text) in STEPS {
        std::fs::write(inputs_dir.join(format!("{name}.toml")), text)?;
        let loaded = load_scenario_text(text, cli, &inputs_dir)?;
        let out = OutputContext::new(
            cli.out.join(name),
            loaded.hash_hex.clone(),
            loaded.scenario.seed,
            cli.deterministic,
        )?;
        report.push_str(&format!("== {name} ==\n"));
        let step_report = match *name {
            "coupling" => commands::cmd_coupling(&loaded, &out)?,
            "budget" => commands::cmd_budget(&loaded, &out)?,
            "phasematch" => {
                let peaks = commands::cmd_phasematch(&loaded, &out.subdir("peaks")?)?;
                let spectrum = commands::cmd_spectrum(&loaded, &out.subdir("spectrum")?)?;
                format!("{peaks}{spectrum}")
            }
            "coating" => commands::cmd_coating(&loaded, &out)?,
            "sweep" => {
                let analyze = commands::simulate_then_analyze(&loaded, &out.subdir("single")?)?;
                let sweep = commands::cmd_sweep(&loaded, &out.subdir("points")?)?;
                format!("{analyze}{sweep}")
            }
            other => unreachable!("unknown step {other}"),
        };
        report.push_str(&step_report);
        report.push('\n');
    }
    Ok(report)
}
