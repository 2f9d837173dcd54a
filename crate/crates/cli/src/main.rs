//! `softgate` command-line front end.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use softgate::admissibility::ProbeGrid;
use softgate::gates::GateKind;
use softgate_cli::{
    cmd_check, cmd_compare, cmd_curves, cmd_train, parse_gate_list, CheckTarget, CmdError,
    CurveRequest, CustomCheck,
};

#[derive(Parser)]
#[command(
    name = "softgate",
    about = "Soft gate functions for policy optimization: curves, admissibility checks, toy training runs, and gate comparisons",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample gate values and derivatives onto a CSV grid.
    Curves(CurvesArgs),
    /// Verify the admissibility properties of a gate and write a JSON report.
    Check(CheckArgs),
    /// Run the toy training simulator from a config file.
    Train(TrainArgs),
    /// Run one configuration across several gates and seeds.
    Compare(CompareArgs),
}

#[derive(Args)]
struct CurvesArgs {
    /// Comma-separated gate list, or `all` / `smooth`.
    #[arg(long, default_value = "all")]
    gates: String,
    /// Comma-separated temperatures.
    #[arg(long, default_value = "1,5,10", value_delimiter = ',')]
    taus: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    x_min: f64,
    #[arg(long, default_value_t = 3.0)]
    x_max: f64,
    #[arg(long, default_value_t = 301)]
    points: usize,
    /// Clip width for hard_clip rows.
    #[arg(long, default_value_t = 0.2)]
    epsilon: f64,
    /// Output CSV path.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct CheckArgs {
    /// Gate to check (exclusive with --custom).
    #[arg(long, conflicts_with = "custom")]
    gate: Option<GateKindArg>,
    /// Temperature for --gate.
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    /// Built-in counterexample: identity, clip, shifted-peak, rescaled-peak.
    #[arg(long)]
    custom: Option<CustomCheck>,
    /// Clip width for --custom clip.
    #[arg(long, default_value_t = 0.2)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.01)]
    grid_step: f64,
    #[arg(long, default_value_t = 1000.0)]
    tail_probe: f64,
    /// Output JSON path.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Key-value configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for metrics.csv and summary.json.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    /// Key-value configuration file (gate and seed are overridden).
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated gate list, or `all` / `smooth`.
    #[arg(long, default_value = "smooth")]
    gates: String,
    /// Comma-separated seeds.
    #[arg(long, default_value = "0,1,2", value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Output CSV path.
    #[arg(long)]
    output: PathBuf,
}

/// Clap-friendly wrapper so `--gate` accepts the canonical names.
#[derive(Clone, Copy)]
struct GateKindArg(GateKind);

impl std::str::FromStr for GateKindArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.parse::<GateKind>()
            .map(GateKindArg)
            .map_err(|e| e.to_string())
    }
}

fn run(cli: Cli) -> Result<u8, CmdError> {
    match cli.command {
        Command::Curves(args) => {
            let request = CurveRequest {
                gates: parse_gate_list(&args.gates)?,
                taus: args.taus,
                x_min: args.x_min,
                x_max: args.x_max,
                points: args.points,
            };
            let rows = cmd_curves(&request, args.epsilon, &args.output)?;
            eprintln!("wrote {} rows to {}", rows, args.output.display());
            Ok(0)
        }
        Command::Check(args) => {
            let target = match (args.gate, args.custom) {
                (Some(GateKindArg(kind)), None) => CheckTarget::Gate {
                    kind,
                    tau: args.tau,
                },
                (None, Some(which)) => CheckTarget::Custom {
                    which,
                    epsilon: args.epsilon,
                },
                (None, None) => {
                    return Err(CmdError::Validation(anyhow::anyhow!(
                        "check needs either --gate or --custom"
                    )))
                }
                (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
            };
            let grid = ProbeGrid::new(args.grid_step, args.tail_probe)
                .map_err(|e| CmdError::Validation(e.into()))?;
            let all_pass = cmd_check(target, &grid, &args.output)?;
            eprintln!(
                "wrote {} ({})",
                args.output.display(),
                if all_pass {
                    "all checks passed"
                } else {
                    "checks failed"
                }
            );
            Ok(if all_pass { 0 } else { 1 })
        }
        Command::Train(args) => {
            let outcome = cmd_train(&args.config, &args.output)?;
            eprintln!(
                "wrote {} steps to {} (diverged: {})",
                outcome.metrics.len(),
                args.output.display(),
                outcome.diverged
            );
            Ok(if outcome.diverged { 1 } else { 0 })
        }
        Command::Compare(args) => {
            let gates = parse_gate_list(&args.gates)?;
            cmd_compare(&args.config, &gates, &args.seeds, &args.output)?;
            eprintln!("wrote {}", args.output.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.exit_code())
        }
    }
}
