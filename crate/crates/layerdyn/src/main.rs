use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use layerdyn::commands::{self, Sink};
use layerdyn::config::Format;
use layerdyn::error::config_err;
use layerdyn::{CliError, RunConfig};

#[derive(Parser)]
#[command(name = "layerdyn", version, about = "Simulate piecewise-smooth systems with hidden switching terms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output file (directory for `sweep`); stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Reserved; every method is deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one configuration and write the trajectory.
    Simulate(Common),
    /// Run one simulation per parameter value and write a summary.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<f64>,
    },
    /// Half the peak-to-peak range of a column over a time window.
    Amplitude {
        #[command(flatten)]
        common: Common,
        /// `lo,hi`
        #[arg(long, value_delimiter = ',', required = true)]
        window: Vec<f64>,
        #[arg(long, default_value = "lambda")]
        column: String,
    },
    /// Sliding modes along a grid of surface points.
    Sliding {
        #[command(flatten)]
        common: Common,
        /// `lo,hi,n` over the second state coordinate (`I` for the circuit).
        #[arg(long, value_delimiter = ',', required = true)]
        grid: Vec<f64>,
    },
    /// Equilibria of the layer system.
    Equilibria {
        #[command(flatten)]
        common: Common,
        /// Seed intervals for the non-switching coordinates, `lo,hi` each.
        #[arg(long = "bounds", value_delimiter = ',')]
        bounds: Vec<f64>,
    },
}

impl Common {
    fn load(&self) -> Result<(RunConfig, Sink), CliError> {
        if let Some(seed) = self.seed {
            log::debug!("seed {seed} ignored");
        }
        let cfg = RunConfig::load(&self.config)?;
        Ok((cfg, Sink { path: self.out.clone(), format: self.format.map(Into::into) }))
    }
}

fn grid(spec: &[f64]) -> Result<Vec<f64>, CliError> {
    let &[lo, hi, n] = spec else {
        return Err(config_err("grid is lo,hi,n"));
    };
    if !(n >= 1.0 && n.fract() == 0.0 && lo <= hi) {
        return Err(config_err("grid needs lo <= hi and a positive integer count"));
    }
    let n = n as usize;
    Ok((0..n).map(|k| if n == 1 { lo } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 }).collect())
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(common) => {
            let (cfg, sink) = common.load()?;
            let out = commands::simulate(&cfg, &sink)?;
            log::info!("{} samples, {} transitions", out.rows.len(), out.events.len());
        }
        Command::Sweep { common, param, values } => {
            let (cfg, sink) = common.load()?;
            let dir = sink.path.or(cfg.output.path.clone()).ok_or_else(|| config_err("sweep needs --out DIR"))?;
            let summaries = commands::sweep(&cfg, &param, &values, &dir, sink.format)?;
            log::info!("{} sweep members written to {}", summaries.len(), dir.display());
        }
        Command::Amplitude { common, window, column } => {
            let (cfg, _) = common.load()?;
            let &[lo, hi] = window.as_slice() else {
                return Err(config_err("window is lo,hi"));
            };
            let a = commands::amplitude_report(&cfg, lo, hi, &column)?;
            println!("{a:.16e}");
        }
        Command::Sliding { common, grid: spec } => {
            let (cfg, sink) = common.load()?;
            commands::sliding(&cfg, &grid(&spec)?, &sink)?;
        }
        Command::Equilibria { common, bounds } => {
            let (cfg, sink) = common.load()?;
            let bounds = if bounds.is_empty() {
                commands::default_bounds(&cfg)
            } else if bounds.len() % 2 == 0 {
                bounds.chunks(2).map(|c| (c[0], c[1])).collect()
            } else {
                return Err(config_err("bounds come in lo,hi pairs"));
            };
            commands::equilibria(&cfg, bounds, &sink)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
