//! Scenario description for the N-source configuration: N TCP sources on
//! their own VCs, two earth-station switches and one satellite hop.
//!
//! ```text
//! src_i --access--> [switch 1] ==satellite==> [switch 2] --access--> sink_i
//! ```
//!
//! Delays are never scaled. The `scale` factor multiplies the link rate,
//! buffer sizes given in cells and receiver windows, so buffer/BDP ratios
//! are preserved at reduced cost.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::aal5::CELL_BITS;
use crate::sim::SimTime;
use crate::switch::{DropPolicy, SelectiveDropParams};
use crate::tcp::{TcpConfig, DEFAULT_MSS};

/// Cell-layer rate of an OC-3 link after SONET overhead.
pub const CELL_LAYER_RATE_BPS: f64 = 149.7e6;
/// Line rate, kept for reporting only.
pub const LINE_RATE_BPS: f64 = 155.52e6;

/// The buffer sizes studied, as multiples of the round-trip
/// delay-bandwidth product.
pub const BUFFER_RTT_FRACTIONS: [f64; 8] = [2.0, 1.0, 0.5, 0.25, 0.125, 0.0625, 0.031, 0.016];

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid config field '{field}': {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ScenarioClass {
    Leo,
    MultiLeo,
    Geo,
    Custom,
}

impl ScenarioClass {
    pub fn interswitch_delay(self) -> Option<f64> {
        match self {
            ScenarioClass::Leo => Some(0.005),
            ScenarioClass::MultiLeo => Some(0.100),
            ScenarioClass::Geo => Some(0.275),
            ScenarioClass::Custom => None,
        }
    }

    pub fn rcv_wnd(self) -> Option<u64> {
        match self {
            ScenarioClass::Leo => Some(600_000),
            ScenarioClass::MultiLeo => Some(2_500_000),
            ScenarioClass::Geo => Some(8_704_000),
            ScenarioClass::Custom => None,
        }
    }

    pub fn duration(self) -> Option<f64> {
        match self {
            ScenarioClass::Leo => Some(20.0),
            ScenarioClass::MultiLeo | ScenarioClass::Geo => Some(100.0),
            ScenarioClass::Custom => None,
        }
    }
}

impl fmt::Display for ScenarioClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScenarioClass::Leo => "LEO",
            ScenarioClass::MultiLeo => "MLEO",
            ScenarioClass::Geo => "GEO",
            ScenarioClass::Custom => "custom",
        })
    }
}

impl FromStr for ScenarioClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "leo" => Ok(ScenarioClass::Leo),
            "mleo" | "multi_leo" => Ok(ScenarioClass::MultiLeo),
            "geo" => Ok(ScenarioClass::Geo),
            "custom" => Ok(ScenarioClass::Custom),
            _ => Err(format!("unknown scenario class '{s}' (expected leo, mleo, geo or custom)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkSpec {
    pub rate_bps: f64,
    pub prop_delay: f64,
}

impl LinkSpec {
    pub fn new(rate_bps: f64, prop_delay: f64) -> Result<Self, ConfigError> {
        if !(rate_bps > 0.0 && rate_bps.is_finite()) {
            return Err(ConfigError::new("link_rate_mbps", "must be positive"));
        }
        if !(prop_delay >= 0.0 && prop_delay.is_finite()) {
            return Err(ConfigError::new("delay", "must be non-negative"));
        }
        Ok(LinkSpec { rate_bps, prop_delay })
    }

    /// Serialization time of one cell, rounded to the nanosecond.
    pub fn cell_time(&self) -> SimTime {
        SimTime::from_secs_f64(CELL_BITS as f64 / self.rate_bps)
    }

    pub fn prop(&self) -> SimTime {
        SimTime::from_secs_f64(self.prop_delay)
    }

    /// Cell rate actually realized with the rounded cell time, bits/s.
    pub fn realized_rate_bps(&self) -> f64 {
        CELL_BITS as f64 * 1e9 / self.cell_time().as_nanos() as f64
    }
}

/// How the switch buffer size was specified.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BufferSize {
    /// Cells at full (unscaled) bandwidth; multiplied by `scale`.
    Cells(u32),
    /// Multiple of the round-trip delay-bandwidth product.
    RttFraction(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicerConfig {
    /// Drop non-conforming cells instead of only counting them.
    pub police: bool,
    /// Peak cell rate in cells/s before scaling; defaults to the link cell rate.
    pub pcr: Option<f64>,
    pub cdvt: f64,
}

impl Default for PolicerConfig {
    fn default() -> Self {
        PolicerConfig {
            police: false,
            pcr: None,
            cdvt: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub class: ScenarioClass,
    pub n_sources: u32,
    pub access_delay: f64,
    pub interswitch_delay: f64,
    /// Cell-layer rate at full scale, bits/s.
    pub link_rate_bps: f64,
    pub scale: f64,
    pub buffer: BufferSize,
    /// Receiver window at full scale, bytes.
    pub rcv_wnd: u64,
    pub mss: u32,
    /// Scale the MSS together with the bandwidth, so a window holds the
    /// same number of segments and a frame the same share of the buffer as
    /// at full scale.
    pub scale_mss: bool,
    pub duration: f64,
    pub warmup: f64,
    pub seed: u64,
    pub policy: DropPolicy,
    pub selective_drop: SelectiveDropParams,
    pub tcp_tick: f64,
    pub initial_rto: f64,
    pub min_rto: f64,
    pub max_rto: f64,
    pub start_jitter: f64,
    pub policer: PolicerConfig,
}

impl ScenarioConfig {
    /// Defaults for a named class. Panics for `Custom`, which has no
    /// defaults for delay, window or duration.
    pub fn for_class(class: ScenarioClass, n_sources: u32, buffer: BufferSize) -> Self {
        ScenarioConfig {
            class,
            n_sources,
            access_delay: 0.005,
            interswitch_delay: class.interswitch_delay().expect("named class"),
            link_rate_bps: CELL_LAYER_RATE_BPS,
            scale: 1.0,
            buffer,
            rcv_wnd: class.rcv_wnd().expect("named class"),
            mss: DEFAULT_MSS,
            scale_mss: true,
            duration: class.duration().expect("named class"),
            warmup: 0.0,
            seed: 1,
            policy: DropPolicy::SelectiveDrop,
            selective_drop: SelectiveDropParams::default(),
            tcp_tick: 0.1,
            initial_rto: 3.0,
            min_rto: 0.2,
            max_rto: 64.0,
            start_jitter: 0.1,
            policer: PolicerConfig::default(),
        }
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_policy(mut self, policy: DropPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |f: &str, m: &str| Err(ConfigError::new(f, m));
        if self.n_sources < 1 {
            return err("n_sources", "must be at least 1");
        }
        if self.n_sources > u16::MAX as u32 {
            return err("n_sources", "too many sources");
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return err("duration_s", "must be positive");
        }
        if !(self.warmup >= 0.0 && self.warmup < self.duration) {
            return err("warmup_s", "must be in [0, duration)");
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return err("scale", "must be positive");
        }
        if !(self.access_delay >= 0.0 && self.access_delay.is_finite()) {
            return err("access_delay_ms", "must be non-negative");
        }
        if !(self.interswitch_delay >= 0.0 && self.interswitch_delay.is_finite()) {
            return err("interswitch_delay_ms", "must be non-negative");
        }
        LinkSpec::new(self.link_rate_bps * self.scale, 0.0)?;
        if self.mss == 0 || self.effective_mss() == 0 {
            return err("mss", "must be positive");
        }
        if self.effective_rcv_wnd() < self.effective_mss() as u64 {
            return err("rcv_wnd_bytes", "scaled receiver window is smaller than one MSS");
        }
        match self.buffer {
            BufferSize::RttFraction(f) if !(f > 0.0 && f.is_finite()) => {
                return err("buffer_rtt_fraction", "must be positive");
            }
            BufferSize::Cells(0) => return err("buffer_cells", "must be at least 1"),
            _ => {}
        }
        if self.buffer_cells() < 1 {
            return err("buffer_cells", "resolves to zero cells at this scale");
        }
        let sd = self.selective_drop;
        if !(0.0..=1.0).contains(&sd.r) {
            return err("r", "must be in [0, 1]");
        }
        if !(sd.z > 0.0 && sd.z <= 1.0) {
            return err("z", "must be in (0, 1]");
        }
        if !(self.tcp_tick > 0.0) {
            return err("tick_ms", "must be positive");
        }
        if !(self.min_rto > 0.0 && self.min_rto <= self.max_rto) {
            return err("min_rto_ms", "must be positive and at most max_rto");
        }
        if !(self.initial_rto > 0.0) {
            return err("initial_rto_ms", "must be positive");
        }
        if !(self.start_jitter >= 0.0) {
            return err("start_jitter_ms", "must be non-negative");
        }
        if let Some(pcr) = self.policer.pcr {
            if !(pcr > 0.0) {
                return err("pcr_cells_per_s", "must be positive");
            }
        }
        if !(self.policer.cdvt >= 0.0) {
            return err("cdvt_us", "must be non-negative");
        }
        Ok(())
    }

    pub fn bottleneck(&self) -> LinkSpec {
        LinkSpec {
            rate_bps: self.link_rate_bps * self.scale,
            prop_delay: self.interswitch_delay,
        }
    }

    pub fn access_link(&self) -> LinkSpec {
        LinkSpec {
            rate_bps: self.link_rate_bps * self.scale,
            prop_delay: self.access_delay,
        }
    }

    /// Cells per second at the scaled rate.
    pub fn cell_rate(&self) -> f64 {
        self.link_rate_bps * self.scale / CELL_BITS as f64
    }

    /// Round-trip delay-bandwidth product in cells.
    pub fn bdp_cells(&self) -> f64 {
        round_trip_time(self) * self.cell_rate()
    }

    pub fn buffer_cells(&self) -> u32 {
        match self.buffer {
            BufferSize::Cells(c) => (c as f64 * self.scale).round() as u32,
            BufferSize::RttFraction(f) => cells_for_rtt_fraction(self, f),
        }
    }

    /// Buffer size as a multiple of the round-trip delay-bandwidth product.
    pub fn buffer_rtt_fraction(&self) -> f64 {
        match self.buffer {
            BufferSize::RttFraction(f) => f,
            BufferSize::Cells(_) => {
                let bdp = self.bdp_cells();
                if bdp > 0.0 {
                    self.buffer_cells() as f64 / bdp
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    pub fn effective_mss(&self) -> u32 {
        if self.scale_mss {
            (self.mss as f64 * self.scale).round() as u32
        } else {
            self.mss
        }
    }

    pub fn effective_rcv_wnd(&self) -> u64 {
        (self.rcv_wnd as f64 * self.scale).round() as u64
    }

    pub fn tcp_config(&self) -> TcpConfig {
        TcpConfig {
            mss: self.effective_mss(),
            rcv_wnd: self.effective_rcv_wnd(),
            tick: SimTime::from_secs_f64(self.tcp_tick),
            initial_rto: SimTime::from_secs_f64(self.initial_rto),
            min_rto: SimTime::from_secs_f64(self.min_rto),
            max_rto: SimTime::from_secs_f64(self.max_rto),
            dup_thresh: 3,
        }
    }
}

/// Round-trip propagation time in seconds: two access hops and the
/// satellite hop, each way.
pub fn round_trip_time(cfg: &ScenarioConfig) -> f64 {
    2.0 * (2.0 * cfg.access_delay + cfg.interswitch_delay)
}

/// `fraction * RTT * rate / 424`, rounded to the nearest cell.
pub fn cells_for_rtt_fraction(cfg: &ScenarioConfig, fraction: f64) -> u32 {
    (fraction * cfg.bdp_cells()).round() as u32
}

/// Buffer sizes in cells for every fraction in [`BUFFER_RTT_FRACTIONS`].
pub fn buffer_grid(cfg: &ScenarioConfig) -> Vec<u32> {
    BUFFER_RTT_FRACTIONS
        .iter()
        .map(|&f| cells_for_rtt_fraction(cfg, f))
        .collect()
}
