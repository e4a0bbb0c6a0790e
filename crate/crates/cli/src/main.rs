use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use dpmimo::harness::{self, parse_xpc, parse_xpd, Overrides, PowerControl, UniMode};
use dpmimo::{Error, Result};

/// Dual-polarized massive MIMO spectral-efficiency simulator.
#[derive(Parser)]
#[command(name = "dpmimo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write CSV + JSON results.
    #[command(subcommand)]
    Run(Target),
}

#[derive(Subcommand)]
enum Target {
    /// Reproduce a figure preset (fig1..fig10).
    Figure {
        id: String,
        #[command(flatten)]
        flags: Flags,
    },
    /// Run a sweep described by a TOML file.
    Custom {
        config: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
}

#[derive(Args)]
struct Flags {
    /// Monte Carlo trials per setup.
    #[arg(long)]
    trials: Option<usize>,
    /// Number of random UE drops.
    #[arg(long)]
    setups: Option<usize>,
    /// Draws used to estimate MMSE/ZF precoder normalization.
    #[arg(long)]
    normalization_trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated BS antenna counts.
    #[arg(long = "m")]
    m_list: Option<String>,
    /// Comma-separated schemes: mmse, zf, mr.
    #[arg(long)]
    scheme: Option<String>,
    /// Comma-separated bounds, e.g. ul_uatf,dl_sic.
    #[arg(long)]
    bound: Option<String>,
    /// Comma-separated power-control modes: equal, maxsum.
    #[arg(long)]
    power_control: Option<String>,
    /// Comma-separated XPD values in dB (`inf` allowed).
    #[arg(long)]
    xpd_db: Option<String>,
    /// Comma-separated XPC values t = r, e.g. 0.8 or 0.6+0.2i.
    #[arg(long)]
    xpc: Option<String>,
    /// Comma-separated uni-polarized benchmark modes: off, half, full.
    #[arg(long)]
    uni: Option<String>,
}

fn split<T>(s: &Option<String>, parse: impl Fn(&str) -> Result<T>) -> Result<Option<Vec<T>>> {
    s.as_ref()
        .map(|s| {
            s.split(',')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(&parse)
                .collect()
        })
        .transpose()
}

fn parse_from<T: FromStr<Err = Error>>(s: &str) -> Result<T> {
    s.parse()
}

impl Flags {
    fn overrides(&self) -> Result<Overrides> {
        Ok(Overrides {
            trials: self.trials,
            setups: self.setups,
            normalization_trials: self.normalization_trials,
            seed: self.seed,
            threads: self.threads,
            out: self.out.clone(),
            m_list: split(&self.m_list, |s| {
                s.parse::<usize>()
                    .map_err(|_| config_error(format!("M: cannot parse '{s}'")))
            })?,
            schemes: split(&self.scheme, parse_from)?,
            bounds: split(&self.bound, parse_from)?,
            power_control: split(&self.power_control, parse_from::<PowerControl>)?,
            xpd_db: split(&self.xpd_db, parse_xpd)?,
            xpc: split(&self.xpc, parse_xpc)?,
            uni: split(&self.uni, parse_from::<UniMode>)?,
        })
    }
}

fn config_error(msg: String) -> Error {
    Error::Config(msg)
}

fn run(cli: Cli) -> Result<()> {
    let Command::Run(target) = cli.command;
    let record = match target {
        Target::Figure { id, flags } => harness::run_figure(&id, &flags.overrides()?)?,
        Target::Custom { config, flags } => {
            let mut plan = harness::load_plan(&config)?;
            flags.overrides()?.apply(&mut plan);
            harness::run_custom(&plan)?
        }
    };
    if record.skipped {
        eprintln!("{}: identical run already complete (plan {})", record.name, &record.plan_hash[..12]);
    } else {
        eprintln!("{}: {} cells in {:.1} s", record.name, record.cells.len(), record.wall_clock_s);
    }
    for c in &record.cells {
        println!("M={:<4} {:<28} {:<13} mean={:.4} stderr={:.4}", c.m, c.scheme, c.bound, c.mean, c.stderr);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
