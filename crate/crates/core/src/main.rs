use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use satubr::contract::{Policer, TrafficDescriptor, Verdict};
use satubr::harness::{self, FileConfig};
use satubr::mac::{slotted_aloha_throughput, MAC_TABLE};
use satubr::network::RunError;
use satubr::sim::SimTime;
use satubr::switch::DropPolicy;
use satubr::topology::{BufferSize, ConfigError, ScenarioClass};

const EXIT_CONFIG: u8 = 2;
const EXIT_ACCOUNTING: u8 = 3;

#[derive(Parser)]
#[command(name = "satubr", version, about = "TCP over satellite ATM-UBR buffer simulator")]
struct Cli {
    /// Scenario configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (default: standard output).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Random seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Bandwidth scaling factor.
    #[arg(long, global = true)]
    scale: Option<f64>,
    /// Switch drop policy: selective_drop or tail_drop.
    #[arg(long, global = true)]
    policy: Option<DropPolicy>,
    /// Worker threads for sweeps.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one configuration and print one CSV row.
    Run(PointArgs),
    /// Simulate a grid of buffer sizes and source counts.
    Sweep {
        #[command(flatten)]
        point: PointArgs,
        /// Also write per-point means to this file.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Print the media access comparison table or the slotted ALOHA curve.
    MacTable {
        /// Print S = G e^-G for G in [0, 5] instead of the table.
        #[arg(long)]
        aloha_curve: bool,
    },
    /// Check an arrival trace (one time in seconds per line) against a
    /// traffic contract.
    ContractCheck {
        trace: PathBuf,
        /// Peak cell rate, cells/s.
        #[arg(long)]
        pcr: f64,
        /// Sustainable cell rate, cells/s.
        #[arg(long, requires = "mbs")]
        scr: Option<f64>,
        /// Maximum burst size, cells.
        #[arg(long, requires = "scr")]
        mbs: Option<u32>,
        /// Cell delay variation tolerance, seconds.
        #[arg(long, default_value_t = 0.0)]
        cdvt: f64,
    },
}

#[derive(Args)]
struct PointArgs {
    /// Scenario class when no configuration file sets one.
    #[arg(long)]
    class: Option<ScenarioClass>,
    /// Number of TCP sources.
    #[arg(long)]
    sources: Option<u32>,
    /// Switch buffer in full-scale cells.
    #[arg(long, conflicts_with = "buffer_rtt")]
    buffer_cells: Option<u32>,
    /// Switch buffer as a fraction of the round-trip delay-bandwidth product.
    #[arg(long)]
    buffer_rtt: Option<f64>,
}

#[derive(Debug)]
enum Failure {
    Config(ConfigError),
    Accounting(String),
    Io(io::Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Config(c) => Failure::Config(c),
            RunError::Sim(s) => Failure::Accounting(s.to_string()),
        }
    }
}

fn load(cli: &Cli, point: &PointArgs) -> Result<FileConfig, Failure> {
    let mut fc = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::for_class(point.class.unwrap_or(ScenarioClass::Leo)),
    };
    if let (Some(class), Some(_)) = (point.class, &cli.config) {
        if class != fc.base.class {
            return Err(ConfigError::new("class", "conflicts with the configuration file").into());
        }
    }
    if let Some(n) = point.sources {
        fc.base.n_sources = n;
        fc.n_sources_set = true;
        fc.sweep_n_sources = None;
    }
    if let Some(c) = point.buffer_cells {
        fc.base.buffer = BufferSize::Cells(c);
        fc.buffer_set = true;
        fc.sweep_axis = None;
    }
    if let Some(f) = point.buffer_rtt {
        fc.base.buffer = BufferSize::RttFraction(f);
        fc.buffer_set = true;
        fc.sweep_axis = None;
    }
    if let Some(s) = cli.seed {
        fc.base.seed = s;
    }
    if let Some(s) = cli.scale {
        fc.base.scale = s;
    }
    if let Some(p) = cli.policy {
        fc.base.policy = p;
    }
    Ok(fc)
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn contract_check(trace: &Path, descriptor: TrafficDescriptor, out: &mut dyn Write) -> Result<(), Failure> {
    let mut policer = Policer::new(&descriptor).map_err(|e| ConfigError::new("contract", e.to_string()))?;
    let file = File::open(trace).map_err(|e| ConfigError::new("trace", format!("{}: {e}", trace.display())))?;
    let (mut conforming, mut total) = (0u64, 0u64);
    writeln!(out, "index,arrival_s,verdict")?;
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let field = format!("trace line {}", lineno + 1);
        let secs: f64 = text
            .parse()
            .map_err(|_| ConfigError::new(field.clone(), format!("not a number: '{text}'")))?;
        if !(secs >= 0.0 && secs.is_finite()) {
            return Err(ConfigError::new(field, "arrival times must be non-negative").into());
        }
        let verdict = policer
            .check(SimTime::from_secs_f64(secs))
            .map_err(|e| ConfigError::new(field, e.to_string()))?;
        let label = match verdict {
            Verdict::Conforming => "conforming",
            Verdict::NonConforming => "non_conforming",
        };
        writeln!(out, "{total},{text},{label}")?;
        total += 1;
        conforming += verdict.is_conforming() as u64;
    }
    eprintln!("{conforming} of {total} cells conforming");
    Ok(())
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Run(point) => {
            let cfg = load(cli, point)?.to_point()?;
            let row = harness::run_point(&cfg)?;
            harness::write_csv(output(&cli.out)?, &[row])?;
        }
        Command::Sweep { point, summary } => {
            let spec = load(cli, point)?.to_sweep()?;
            let outcome = harness::run_sweep(&spec, cli.jobs.max(1))?;
            let mut out = output(&cli.out)?;
            harness::write_csv(&mut out, &outcome.rows)?;
            if let Some((index, err)) = outcome.failure {
                writeln!(out, "# incomplete: run {index} failed: {err}")?;
                out.flush()?;
                return Err(err.into());
            }
            let means = harness::summarize(&outcome.rows);
            match summary {
                Some(path) => harness::write_summary(File::create(path)?, &means)?,
                None => harness::write_summary(io::stderr().lock(), &means)?,
            }
        }
        Command::MacTable { aloha_curve } => {
            let mut out = output(&cli.out)?;
            if *aloha_curve {
                writeln!(out, "offered_load,throughput")?;
                for i in 0..=100 {
                    let g = i as f64 * 0.05;
                    writeln!(out, "{g:.2},{:.6}", slotted_aloha_throughput(g))?;
                }
            } else {
                writeln!(out, "protocol,efficiency_min,efficiency_max,delay,stability,robustness,complexity")?;
                for r in MAC_TABLE {
                    writeln!(
                        out,
                        "{},{:.2},{:.2},{},{},{},{}",
                        r.name, r.efficiency_range.0, r.efficiency_range.1, r.delay, r.stability, r.robustness, r.complexity
                    )?;
                }
            }
        }
        Command::ContractCheck { trace, pcr, scr, mbs, cdvt } => {
            let descriptor = match (scr, mbs) {
                (Some(scr), Some(mbs)) => TrafficDescriptor::vbr(*pcr, *scr, *mbs, *cdvt, false),
                _ => TrafficDescriptor::ubr(*pcr, *cdvt),
            }
            .map_err(|e| ConfigError::new("contract", e.to_string()))?;
            contract_check(trace, descriptor, &mut *output(&cli.out)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Accounting(e)) => {
            eprintln!("accounting violation: {e}");
            ExitCode::from(EXIT_ACCOUNTING)
        }
        Err(Failure::Io(e)) => {
            eprintln!("i/o error: {e}");
            ExitCode::FAILURE
        }
    }
}
