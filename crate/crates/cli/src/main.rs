use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ks_radial::harness::commands::{self, ExitStatus};
use ks_radial::harness::{Axis, RunConfig};
use ks_radial::{Error, Result};

#[derive(Parser)]
#[command(
    name = "ks-radial",
    version,
    about = "Radial Keller-Segel simulator and diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to `output.dir`, then $KS_OUT_DIR/<config stem>
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the solver and write series, final state and snapshots
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Comma-separated snapshot times, replacing `monitors.snapshot_times`
        #[arg(long, value_delimiter = ',')]
        snapshot_times: Option<Vec<f64>>,
    },
    /// Classify the nonlinearity and certify the structural conditions
    CheckConditions {
        #[command(flatten)]
        common: Common,
    },
    /// Write the configured initial data as a snapshot with its membership report
    MakeData {
        #[command(flatten)]
        common: Common,
    },
    /// Fit the diagnostics to a finished run directory
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Directory holding series.csv (and optionally snapshots.csv)
        #[arg(long)]
        run: PathBuf,
    },
    /// Simulate over the product of parameter axes
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Parallel runs
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Axis `key=v1,v2,...`; repeatable, replaces `sweep.axes`
        #[arg(long)]
        axis: Vec<String>,
    },
}

fn out_dir(common: &Common, cfg: &RunConfig, env_root: Option<PathBuf>) -> PathBuf {
    if let Some(out) = &common.out {
        return out.clone();
    }
    if let Some(dir) = &cfg.output_dir {
        return dir.clone();
    }
    let stem = common
        .config
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    env_root.unwrap_or_else(|| PathBuf::from("out")).join(stem)
}

fn load(common: &Common) -> Result<(RunConfig, PathBuf)> {
    let cfg = RunConfig::load(&common.config)?;
    let root = std::env::var_os("KS_OUT_DIR").map(PathBuf::from);
    let out = out_dir(common, &cfg, root);
    Ok((cfg, out))
}

fn announce(out: &Path) {
    eprintln!("artifacts in {}", out.display());
}

fn execute(command: Command) -> Result<ExitStatus> {
    match command {
        Command::Simulate {
            common,
            snapshot_times,
        } => {
            let (mut cfg, out) = load(&common)?;
            if let Some(times) = snapshot_times {
                cfg.monitors.snapshot_times = times;
            }
            let result = commands::simulate(&cfg, &out)?;
            print!("{}", result.summary.render());
            announce(&out);
            Ok(result.status)
        }
        Command::CheckConditions { common } => {
            let (cfg, out) = load(&common)?;
            print!("{}", commands::check_conditions(&cfg, &out)?);
            Ok(ExitStatus::Completed)
        }
        Command::MakeData { common } => {
            let (cfg, out) = load(&common)?;
            print!("{}", commands::make_data(&cfg, &out)?.render());
            announce(&out);
            Ok(ExitStatus::Completed)
        }
        Command::Analyze { common, run } => {
            let (cfg, out) = match &common.out {
                Some(_) => load(&common)?,
                None => (RunConfig::load(&common.config)?, run.clone()),
            };
            print!("{}", commands::analyze(&cfg, &run, &out)?.render());
            Ok(ExitStatus::Completed)
        }
        Command::Sweep {
            common,
            workers,
            axis,
        } => {
            let (cfg, out) = load(&common)?;
            let axes = if axis.is_empty() {
                cfg.sweep_axes.clone()
            } else {
                axis.iter()
                    .map(|a| Axis::parse(a))
                    .collect::<Result<Vec<_>>>()?
            };
            if workers == 0 {
                return Err(Error::Config("--workers must be positive".into()));
            }
            let rows = commands::sweep(&cfg, &axes, workers, &out)?;
            let failed = rows.iter().filter(|r| r.result.is_err()).count();
            println!("runs = {}", rows.len());
            println!("failed = {failed}");
            announce(&out);
            Ok(ExitStatus::Completed)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let status = match execute(cli.command) {
        Ok(status) => status,
        Err(e) => {
            eprintln!("error: {e}");
            ExitStatus::for_error(&e)
        }
    };
    ExitCode::from(status.code() as u8)
}
