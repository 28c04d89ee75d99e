use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use exo_dyad::analysis::{AnalysisOptions, LagKind};
use exo_dyad::metrics::AreaMode;
use exo_dyad::pipeline::{cmd_analyze, cmd_report, cmd_simulate, AnalyzeOptions};

#[derive(Parser)]
#[command(version, about = "Simulate and analyse virtually coupled exoskeleton gait training")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a dyad simulation and write its log
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Dotted-path override, e.g. `coupling.K_p=64`
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compute gait, deviation and effort metrics
    Analyze(AnalyzeArgs),
    /// Summarise one or more metrics tables
    Report {
        #[arg(long)]
        metrics: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Simulation output directory, log CSV, or dataset root
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Free-walking input used to express activation in percent
    #[arg(long)]
    baseline: Option<PathBuf>,
    /// Workspace area from per-stride convex hulls (default)
    #[arg(long, group = "area")]
    hull: bool,
    /// Workspace area from the shoelace formula on the mean stride loop
    #[arg(long, group = "area")]
    shoelace: bool,
    /// Workspace area from one hull over the whole block
    #[arg(long, group = "area")]
    pooled: bool,
    /// Signed lag, positive when the patient lags (default)
    #[arg(long, group = "lag")]
    signed_lag: bool,
    #[arg(long, group = "lag")]
    abs_lag: bool,
    /// Detect heel strikes from the ankle trajectory when none are recorded
    #[arg(long)]
    detect_strikes: bool,
    /// Nominal stride duration for the detector, s
    #[arg(long, default_value_t = 3.0)]
    cycle: f64,
    /// Patient label for simulation logs
    #[arg(long)]
    patient: Option<String>,
    /// Condition label for simulation logs
    #[arg(long)]
    condition: Option<String>,
}

impl AnalyzeArgs {
    fn options(&self) -> AnalyzeOptions {
        let area_mode = if self.shoelace {
            AreaMode::Shoelace
        } else if self.pooled {
            AreaMode::Pooled
        } else {
            AreaMode::Hull
        };
        AnalyzeOptions {
            analysis: AnalysisOptions {
                area_mode,
                lag: if self.abs_lag {
                    LagKind::Absolute
                } else {
                    LagKind::Signed
                },
                detect_strikes: self.detect_strikes,
                nominal_cycle_s: self.cycle,
                ..AnalysisOptions::default()
            },
            baseline: self.baseline.clone(),
            patient: self.patient.clone(),
            condition: self.condition.clone(),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { config, out, set, seed } => cmd_simulate(config, out, set, *seed),
        Command::Analyze(a) => cmd_analyze(&a.input, &a.out, &a.options()),
        Command::Report { metrics, out } => cmd_report(metrics, out),
    };
    match result {
        Ok(m) => {
            for f in &m.outputs {
                println!("{}  {}", f.sha256, f.path);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
