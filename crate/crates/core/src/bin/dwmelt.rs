use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dwmelt::error::{Error, Result};
use dwmelt::runner::{
    preset, presets, resume_experiment, run_convergence_suite, run_experiment, run_model_comparison, run_preset,
    ConvergenceReport, ExperimentConfig, ModelComparison, Preset, PresetOutcome, RunOutput,
};

#[derive(Parser)]
#[command(name = "dwmelt", version, about = "Domain-wall melting runs on Bose-Hubbard, t-J and XXZ chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Override a config field, e.g. `--set evolution.horizon=4` (repeatable, last wins).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output root directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn overrides(&self) -> Vec<String> {
        let mut v = self.set.clone();
        if let Some(o) = &self.out {
            v.push(format!("outputs.root={}", toml::Value::String(o.display().to_string())));
        }
        v
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one config file or every config of a preset.
    Run {
        config: Option<PathBuf>,
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Compare a Bose-Hubbard run with its t-J counterpart.
    Compare {
        #[arg(required_unless_present = "preset")]
        bh: Option<PathBuf>,
        #[arg(required_unless_present = "preset")]
        tj: Option<PathBuf>,
        #[arg(long, conflicts_with_all = ["bh", "tj"])]
        preset: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Repeat a run at several accuracy thresholds.
    Converge {
        config: Option<PathBuf>,
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        #[arg(long = "epsilon", value_name = "EPS", num_args = 1..)]
        epsilons: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Continue an interrupted run from its checkpoint.
    Resume {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// List presets, or print the configs of one as TOML.
    Presets { name: Option<String> },
}

fn load(path: &Path, common: &Common) -> Result<ExperimentConfig> {
    ExperimentConfig::load(path)?.with_overrides(&common.overrides())
}

fn report_run(out: &RunOutput) {
    let last = out.record.samples.last().map_or(0.0, |s| s.time);
    let worst = out.record.steps.iter().map(|d| d.infidelity_bound).fold(0.0, f64::max);
    println!("{}\t{}\tt = {last}\tinfidelity bound {worst:.3e}", out.config.name, out.dir.display());
}

fn report_compare(c: &ModelComparison) {
    println!("{} vs {}", c.a_hash, c.b_hash);
    for (k, d) in &c.max_deviation {
        println!("  {k}\t{d:.3e}");
    }
}

fn report_converge(r: &ConvergenceReport) {
    for l in &r.levels {
        println!("{:e} -> {:e}\tmax deviation {:.3e}", l.coarse, l.fine, l.overall());
    }
    if !r.monotone() {
        println!("non-monotone: {}", r.non_monotone.join(", "));
    }
}

fn report_outcome(o: &PresetOutcome) {
    match o {
        PresetOutcome::Runs(v) => v.iter().for_each(report_run),
        PresetOutcome::Compare(v) => v.iter().for_each(report_compare),
        PresetOutcome::Converge(r) => report_converge(r),
    }
}

fn missing(what: &str) -> Error {
    Error::Parameter(format!("give a config file or --preset ({what})"))
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run { config, preset: name, common } => match (config, name) {
            (Some(path), _) => report_run(&run_experiment(&load(&path, &common)?)?),
            (None, Some(name)) => report_outcome(&run_preset(&preset(&name)?, &common.overrides())?),
            (None, None) => return Err(missing("run")),
        },
        Command::Compare { bh, tj, preset: name, common } => match (bh, tj, name) {
            (Some(a), Some(b), _) => report_compare(&run_model_comparison(&load(&a, &common)?, &load(&b, &common)?)?),
            (_, _, Some(name)) => match preset(&name)? {
                p @ Preset::Compare(_) => report_outcome(&run_preset(&p, &common.overrides())?),
                _ => return Err(Error::Parameter(format!("preset `{name}` is not a comparison"))),
            },
            _ => return Err(missing("compare")),
        },
        Command::Converge { config, preset: name, epsilons, common } => {
            let (cfg, defaults) = match (config, name) {
                (Some(path), _) => (load(&path, &common)?, Vec::new()),
                (None, Some(name)) => match preset(&name)? {
                    Preset::Converge { config, epsilons } => (config.with_overrides(&common.overrides())?, epsilons),
                    _ => return Err(Error::Parameter(format!("preset `{name}` is not a convergence study"))),
                },
                (None, None) => return Err(missing("converge")),
            };
            let eps = if epsilons.is_empty() { defaults } else { epsilons };
            report_converge(&run_convergence_suite(&cfg, &eps)?);
        }
        Command::Resume { config, common } => report_run(&resume_experiment(&load(&config, &common)?)?),
        Command::Presets { name: None } => {
            for p in presets() {
                println!("{}\t{}", p.name, p.description);
            }
        }
        Command::Presets { name: Some(name) } => {
            for c in preset(&name)?.configs() {
                println!("# {}\n{}", c.name, c.to_toml()?);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
