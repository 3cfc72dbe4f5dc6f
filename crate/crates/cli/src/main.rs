use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use proxylab::losses::LossKind;
use proxylab_cli::commands;
use proxylab_cli::config::{ProtocolKind, SweepAxis, SweepSpec};
use proxylab_cli::{CliError, Result, RunConfig};

#[derive(Parser)]
#[command(name = "proxylab", version, about = "Train and evaluate proxy-based metric learning models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; defaults apply to missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated paired seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long, value_enum)]
    loss: Option<LossArg>,
    #[arg(long, value_enum)]
    protocol: Option<ProtocolArg>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum LossArg {
    Nca,
    Proxynca,
    #[value(name = "proxynca_pp")]
    ProxyncaPp,
    Normsoftmax,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ProtocolArg {
    #[value(name = "two_stage")]
    TwoStage,
    Single,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum AxisArg {
    Temperature,
    Kmax,
    #[value(name = "proxy_lr")]
    ProxyLr,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model and write checkpoint, logs and a test summary.
    Train(Common),
    /// Evaluate a checkpoint with Recall@K and NMI.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Dataset file; defaults to the test split of the configured dataset.
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Comma-separated recall cut-offs.
        #[arg(long, value_delimiter = ',')]
        ks: Option<Vec<usize>>,
    },
    /// Sweep one hyperparameter over paired seeds.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        axis: Option<AxisArg>,
        /// Comma-separated grid values.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        grid: Option<Vec<f64>>,
    },
    /// Full model and each single-enhancement removal over paired seeds.
    Ablate(Common),
    /// Two-moons temperature demonstration.
    Moons(Common),
}

fn resolve(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(seeds) = &common.seeds {
        cfg.seeds = seeds.clone();
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    if let Some(epochs) = common.epochs {
        cfg.epochs = epochs;
    }
    if let Some(t) = common.temperature {
        cfg.temperature = t;
    }
    if let Some(loss) = common.loss {
        cfg.loss = match loss {
            LossArg::Nca => LossKind::Nca,
            LossArg::Proxynca => LossKind::ProxyNca,
            LossArg::ProxyncaPp => LossKind::ProxyNcaPp,
            LossArg::Normsoftmax => LossKind::NormSoftmax,
        };
    }
    if let Some(p) = common.protocol {
        cfg.protocol = match p {
            ProtocolArg::TwoStage => ProtocolKind::TwoStage,
            ProtocolArg::Single => ProtocolKind::Single,
        };
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<serde_json::Value> {
    match cli.command {
        Command::Train(common) => commands::cmd_train(&resolve(&common)?),
        Command::Eval {
            common,
            checkpoint,
            dataset,
            ks,
        } => {
            let mut cfg = resolve(&common)?;
            if let Some(ks) = ks {
                cfg.ks = ks;
            }
            let r = commands::cmd_eval(&cfg, &checkpoint, dataset.as_deref())?;
            Ok(serde_json::json!({ "recall_at": r.recall_at, "nmi": r.nmi }))
        }
        Command::Sweep { common, axis, grid } => {
            let cfg = resolve(&common)?;
            let mut sweep = cfg.sweep.clone();
            if let Some(axis) = axis {
                let axis = match axis {
                    AxisArg::Temperature => SweepAxis::Temperature,
                    AxisArg::Kmax => SweepAxis::Kmax,
                    AxisArg::ProxyLr => SweepAxis::ProxyLr,
                };
                let grid = grid.clone().or_else(|| sweep.as_ref().map(|s| s.grid.clone()));
                sweep = Some(SweepSpec {
                    axis,
                    grid: grid.unwrap_or_default(),
                });
            } else if let (Some(s), Some(grid)) = (sweep.as_mut(), grid) {
                s.grid = grid;
            }
            let sweep = sweep.ok_or_else(|| CliError::config("sweep", "no sweep axis given"))?;
            let (rows, _) = commands::cmd_sweep(&cfg, &sweep)?;
            Ok(serde_json::to_value(rows)?)
        }
        Command::Ablate(common) => Ok(serde_json::to_value(commands::cmd_ablate(&resolve(&common)?)?.0)?),
        Command::Moons(common) => Ok(serde_json::to_value(commands::cmd_moons(&resolve(&common)?)?.0)?),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
