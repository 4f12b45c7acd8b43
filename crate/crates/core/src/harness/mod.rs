//! Single runs, buffer sweeps and their CSV output.

pub mod config;

use std::io::{self, Write};

use rayon::prelude::*;

use crate::metrics::{cell_loss_ratio, efficiency, fairness_index, throughput_mbps, Fairness};
use crate::network::{Network, RunError};
use crate::sim::SimError;
use crate::switch::DropPolicy;
use crate::topology::{BufferSize, ConfigError, ScenarioClass, ScenarioConfig};

pub use config::FileConfig;

/// Column order of the results table.
pub const CSV_COLUMNS: [&str; 12] = [
    "scenario",
    "n_sources",
    "buffer_cells",
    "buffer_rtt_fraction",
    "seed",
    "duration_s",
    "efficiency",
    "fairness",
    "clr",
    "cells_dropped_selective",
    "cells_dropped_overflow",
    "per_vc_goodput_mbps",
];

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub scenario: ScenarioClass,
    pub n_sources: u32,
    pub buffer_cells: u32,
    pub buffer_rtt_fraction: f64,
    pub seed: u64,
    pub duration_s: f64,
    pub policy: DropPolicy,
    pub mss: u32,
    pub per_vc_goodput_bytes: Vec<u64>,
    pub per_vc_goodput_mbps: Vec<f64>,
    pub efficiency: f64,
    pub fairness: Fairness,
    pub clr: f64,
    pub cells_offered: u64,
    pub cells_dropped_selective: u64,
    pub cells_dropped_overflow: u64,
    pub frames_dropped_selective: u64,
    pub frames_dropped_overflow: u64,
    pub bottleneck_mean_occupancy: f64,
    pub bottleneck_max_occupancy: u32,
    /// Longest queueing delay at the bottleneck implied by its peak occupancy.
    pub max_queueing_delay_s: f64,
    pub timeouts: u64,
    pub fast_recoveries: u64,
    pub retransmissions: u64,
    pub events: u64,
    pub trace_digest: u64,
}

impl RunResult {
    pub fn csv_record(&self) -> Vec<String> {
        vec![
            self.scenario.to_string(),
            self.n_sources.to_string(),
            self.buffer_cells.to_string(),
            format!("{:.4}", self.buffer_rtt_fraction),
            self.seed.to_string(),
            format!("{:.3}", self.duration_s),
            format!("{:.6}", self.efficiency),
            match self.fairness {
                Fairness::Index(f) => format!("{f:.6}"),
                Fairness::NoTraffic => "na".to_string(),
            },
            format!("{:.8}", self.clr),
            self.cells_dropped_selective.to_string(),
            self.cells_dropped_overflow.to_string(),
            self.per_vc_goodput_mbps
                .iter()
                .map(|g| format!("{g:.6}"))
                .collect::<Vec<_>>()
                .join(";"),
        ]
    }
}

/// Builds the network, runs it for the configured duration and computes
/// the metrics.
pub fn run_point(cfg: &ScenarioConfig) -> Result<RunResult, RunError> {
    let stats = Network::run(cfg)?;
    let goodput: Vec<f64> = stats
        .per_vc_delivered_bytes
        .iter()
        .map(|&b| throughput_mbps(b, stats.measured_seconds))
        .collect();
    let accounting = |e: crate::metrics::MetricsError| RunError::Sim(SimError::Accounting(e.to_string()));
    let eff = efficiency(&goodput, stats.realized_rate_bps / 1e6, stats.mss).map_err(accounting)?;
    if eff > 1.0 + 1e-9 {
        return Err(RunError::Sim(SimError::Accounting(format!(
            "efficiency {eff} exceeds the segmentation ceiling"
        ))));
    }
    let dropped = stats.cells_dropped_selective() + stats.cells_dropped_overflow();
    let clr = cell_loss_ratio(dropped, stats.cells_sent_by_hosts).map_err(accounting)?;
    let cell_time = cfg.bottleneck().cell_time().as_secs_f64();
    Ok(RunResult {
        scenario: cfg.class,
        n_sources: cfg.n_sources,
        buffer_cells: cfg.buffer_cells(),
        buffer_rtt_fraction: cfg.buffer_rtt_fraction(),
        seed: cfg.seed,
        duration_s: cfg.duration,
        policy: cfg.policy,
        mss: stats.mss,
        fairness: fairness_index(&goodput),
        per_vc_goodput_bytes: stats.per_vc_delivered_bytes.clone(),
        per_vc_goodput_mbps: goodput,
        efficiency: eff,
        clr,
        cells_offered: stats.cells_sent_by_hosts,
        cells_dropped_selective: stats.cells_dropped_selective(),
        cells_dropped_overflow: stats.cells_dropped_overflow(),
        frames_dropped_selective: stats.frames_dropped_selective(),
        frames_dropped_overflow: stats.frames_dropped_overflow(),
        bottleneck_mean_occupancy: stats.bottleneck_mean_occupancy,
        bottleneck_max_occupancy: stats.bottleneck_max_occupancy,
        max_queueing_delay_s: stats.bottleneck_max_occupancy as f64 * cell_time,
        timeouts: stats.sender_stats.iter().map(|s| s.timeouts).sum(),
        fast_recoveries: stats.sender_stats.iter().map(|s| s.fast_recoveries).sum(),
        retransmissions: stats.sender_stats.iter().map(|s| s.retransmissions).sum(),
        events: stats.events,
        trace_digest: stats.trace_digest,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum SweepAxis {
    RttFractions(Vec<f64>),
    /// Full-scale cell counts.
    Cells(Vec<u32>),
}

impl SweepAxis {
    fn sizes(&self) -> Vec<BufferSize> {
        match self {
            SweepAxis::RttFractions(f) => f.iter().map(|&f| BufferSize::RttFraction(f)).collect(),
            SweepAxis::Cells(c) => c.iter().map(|&c| BufferSize::Cells(c)).collect(),
        }
    }

    fn len(&self) -> usize {
        match self {
            SweepAxis::RttFractions(f) => f.len(),
            SweepAxis::Cells(c) => c.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub base: ScenarioConfig,
    pub axis: SweepAxis,
    pub n_sources: Vec<u32>,
    /// One repetition per seed.
    pub seeds: Vec<u64>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.axis.len() == 0 {
            return Err(ConfigError::new("buffer_rtt_fractions", "no buffer sizes to sweep"));
        }
        if self.n_sources.is_empty() {
            return Err(ConfigError::new("n_sources", "no source counts to sweep"));
        }
        if self.seeds.is_empty() {
            return Err(ConfigError::new("repetitions", "must be at least 1"));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return Err(ConfigError::new("seed", "repetition seeds must be distinct"));
        }
        for (cfg, _) in self.points() {
            cfg.validate()?;
        }
        Ok(())
    }

    /// Every run in output order: grouped by source count, then buffer
    /// size, then seed. The second element is the point index.
    pub fn points(&self) -> Vec<(ScenarioConfig, usize)> {
        let mut out = Vec::new();
        let mut point = 0;
        for &n in &self.n_sources {
            for buffer in self.axis.sizes() {
                for &seed in &self.seeds {
                    let mut cfg = self.base.clone();
                    cfg.n_sources = n;
                    cfg.buffer = buffer;
                    cfg.seed = seed;
                    out.push((cfg, point));
                }
                point += 1;
            }
        }
        out
    }
}

/// Rows of a sweep. When a run fails, `rows` holds every row before it in
/// output order and `failure` says which run failed and why.
#[derive(Debug)]
pub struct SweepOutcome {
    pub rows: Vec<RunResult>,
    pub failure: Option<(usize, RunError)>,
}

/// Runs every point of `spec` on up to `jobs` threads. Row order does not
/// depend on `jobs`.
pub fn run_sweep(spec: &SweepSpec, jobs: usize) -> Result<SweepOutcome, ConfigError> {
    spec.validate()?;
    let points = spec.points();
    let results: Vec<Result<RunResult, RunError>> = if jobs <= 1 {
        points.iter().map(|(c, _)| run_point(c)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| ConfigError::new("jobs", e.to_string()))?;
        pool.install(|| points.par_iter().map(|(c, _)| run_point(c)).collect())
    };
    let mut rows = Vec::with_capacity(results.len());
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => {
                return Ok(SweepOutcome {
                    rows,
                    failure: Some((i, e)),
                })
            }
        }
    }
    Ok(SweepOutcome { rows, failure: None })
}

pub fn write_csv<W: Write>(out: W, rows: &[RunResult]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in rows {
        w.write_record(r.csv_record())?;
    }
    w.flush()
}

/// Mean efficiency and fairness of one sweep point over its seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub scenario: ScenarioClass,
    pub n_sources: u32,
    pub buffer_cells: u32,
    pub buffer_rtt_fraction: f64,
    pub runs: usize,
    pub mean_efficiency: f64,
    /// Mean over runs that carried traffic; `None` if none did.
    pub mean_fairness: Option<f64>,
}

pub fn summarize(rows: &[RunResult]) -> Vec<SummaryRow> {
    let mut out: Vec<(SummaryRow, Vec<f64>)> = Vec::new();
    for r in rows {
        let same = |s: &SummaryRow| {
            s.scenario == r.scenario && s.n_sources == r.n_sources && s.buffer_cells == r.buffer_cells
        };
        let idx = match out.iter().position(|(s, _)| same(s)) {
            Some(i) => i,
            None => {
                out.push((
                    SummaryRow {
                        scenario: r.scenario,
                        n_sources: r.n_sources,
                        buffer_cells: r.buffer_cells,
                        buffer_rtt_fraction: r.buffer_rtt_fraction,
                        runs: 0,
                        mean_efficiency: 0.0,
                        mean_fairness: None,
                    },
                    Vec::new(),
                ));
                out.len() - 1
            }
        };
        let (s, fair) = &mut out[idx];
        s.mean_efficiency += r.efficiency;
        s.runs += 1;
        if let Some(f) = r.fairness.value() {
            fair.push(f);
        }
    }
    out.into_iter()
        .map(|(mut s, fair)| {
            s.mean_efficiency /= s.runs as f64;
            if !fair.is_empty() {
                s.mean_fairness = Some(fair.iter().sum::<f64>() / fair.len() as f64);
            }
            s
        })
        .collect()
}

pub fn write_summary<W: Write>(out: W, rows: &[SummaryRow]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "scenario",
        "n_sources",
        "buffer_cells",
        "buffer_rtt_fraction",
        "runs",
        "mean_efficiency",
        "mean_fairness",
    ])?;
    for s in rows {
        w.write_record([
            s.scenario.to_string(),
            s.n_sources.to_string(),
            s.buffer_cells.to_string(),
            format!("{:.4}", s.buffer_rtt_fraction),
            s.runs.to_string(),
            format!("{:.6}", s.mean_efficiency),
            s.mean_fairness.map_or("na".to_string(), |f| format!("{f:.6}")),
        ])?;
    }
    w.flush()
}
