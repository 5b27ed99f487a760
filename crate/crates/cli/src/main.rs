use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use flatflow_cli::config::{ExcessProbeConfig, GoodTimesConfig};
use flatflow_cli::run::{diagnose, probe_excess, probe_harnack, run_scenario};
use flatflow_cli::{CliError, CliResult, ScenarioConfig};

#[derive(Parser)]
#[command(name = "flatflow", version, about = "Volume-preserving minimizing-movements flow with diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write every configured output.
    Run { config: PathBuf },
    /// Recompute apriori.csv and good_times.csv of a finished run.
    Diagnose {
        trace_dir: PathBuf,
        #[arg(long, requires_all = ["eps0", "delta0"])]
        t_start: Option<f64>,
        #[arg(long)]
        eps0: Option<f64>,
        #[arg(long)]
        delta0: Option<f64>,
    },
    /// Excess decay probe on the stored regions of a finished run.
    ProbeExcess {
        trace_dir: PathBuf,
        #[arg(long, value_parser = parse_point)]
        point: [f64; 2],
        #[arg(long)]
        t0: Option<f64>,
        #[arg(long)]
        r: f64,
        #[arg(long, default_value_t = 0.5)]
        sigma: f64,
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        #[arg(long, default_value_t = 2)]
        depth: usize,
        #[arg(long, default_value_t = 1.0)]
        c0: f64,
    },
    /// Parabola contact-set probe of a scenario.
    ProbeHarnack { config: PathBuf },
}

fn parse_point(s: &str) -> Result<[f64; 2], String> {
    let (x, y) = s.split_once(',').ok_or("expected x,y")?;
    let x = x.trim().parse().map_err(|e| format!("{e}"))?;
    let y = y.trim().parse().map_err(|e| format!("{e}"))?;
    Ok([x, y])
}

fn execute(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Run { config } => run_scenario(&ScenarioConfig::load(&config)?),
        Command::Diagnose { trace_dir, t_start, eps0, delta0 } => {
            let good = match (t_start, eps0, delta0) {
                (Some(t_start), Some(eps0), Some(delta0)) => Some(GoodTimesConfig { t_start, eps0, delta0 }),
                (None, None, None) => None,
                _ => return Err(CliError::Config("--t-start, --eps0 and --delta0 go together".into())),
            };
            diagnose(&trace_dir, good)
        }
        Command::ProbeExcess { trace_dir, point, t0, r, sigma, alpha, depth, c0 } => {
            let probe = ExcessProbeConfig { point, t0, r, sigma, alpha, depth, c0 };
            for l in probe_excess(&trace_dir, &probe)? {
                println!("r {:.5} excess {:.4e} ratio {:.4}", l.r, l.fit.excess, l.excess_ratio);
            }
            Ok(())
        }
        Command::ProbeHarnack { config } => probe_harnack(&ScenarioConfig::load(&config)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("flatflow: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
