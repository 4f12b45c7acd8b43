//! Scenario and sweep configuration files.
//!
//! The format is line-oriented `key = value` with `[section]` headers
//! (a TOML subset; string values are quoted). Every key is optional unless
//! noted; unknown sections and keys are rejected.
//!
//! ```text
//! [scenario]
//! class = "leo"                 # leo | mleo | geo | custom
//! n_sources = 15
//! buffer_rtt_fraction = 0.5     # or buffer_cells = 12000 (full-scale cells)
//! scale = 0.1
//! scale_mss = true
//! access_delay_ms = 5
//! interswitch_delay_ms = 5      # required for custom
//! link_rate_mbps = 149.7
//! rcv_wnd_bytes = 600000        # required for custom
//! mss = 9180
//! duration_s = 20               # required for custom
//! warmup_s = 0
//! seed = 1
//! start_jitter_ms = 100
//!
//! [switch]
//! policy = "selective_drop"     # selective_drop | tail_drop
//! r = 0.9
//! z = 0.8
//!
//! [tcp]
//! tick_ms = 100
//! initial_rto_ms = 3000
//! min_rto_ms = 200
//! max_rto_ms = 64000
//!
//! [policer]
//! police = false
//! pcr_cells_per_s = 353066      # defaults to the link cell rate
//! cdvt_us = 0
//!
//! [sweep]
//! buffer_rtt_fractions = "grid" # or a list, or buffer_cells = [...]
//! n_sources = [5, 15, 50]
//! repetitions = 1               # seeds seed, seed+1, ...
//! ```

use std::path::Path;

use toml::{Table, Value};

use crate::switch::DropPolicy;
use crate::topology::{BufferSize, ConfigError, ScenarioClass, ScenarioConfig, BUFFER_RTT_FRACTIONS};

use super::{SweepAxis, SweepSpec};

/// A parsed configuration file, before it is turned into a point or a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct FileConfig {
    pub base: ScenarioConfig,
    pub n_sources_set: bool,
    pub buffer_set: bool,
    pub sweep_axis: Option<SweepAxis>,
    pub sweep_n_sources: Option<Vec<u32>>,
    pub repetitions: u32,
}

impl FileConfig {
    /// Class defaults with nothing else set.
    pub fn for_class(class: ScenarioClass) -> Self {
        FileConfig {
            base: ScenarioConfig::for_class(class, 1, BufferSize::RttFraction(1.0)),
            n_sources_set: false,
            buffer_set: false,
            sweep_axis: None,
            sweep_n_sources: None,
            repetitions: 1,
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("config", format!("{}: {e}", path.display())))?;
        parse(&text)
    }

    /// One validated simulation point.
    pub fn to_point(&self) -> Result<ScenarioConfig, ConfigError> {
        if !self.n_sources_set {
            return Err(ConfigError::new("n_sources", "required"));
        }
        if !self.buffer_set {
            return Err(ConfigError::new("buffer_cells", "one of buffer_cells or buffer_rtt_fraction is required"));
        }
        self.base.validate()?;
        Ok(self.base.clone())
    }

    /// A sweep; axes not given in `[sweep]` fall back to the single
    /// `[scenario]` value.
    pub fn to_sweep(&self) -> Result<SweepSpec, ConfigError> {
        let axis = match &self.sweep_axis {
            Some(a) => a.clone(),
            None if self.buffer_set => match self.base.buffer {
                BufferSize::Cells(c) => SweepAxis::Cells(vec![c]),
                BufferSize::RttFraction(f) => SweepAxis::RttFractions(vec![f]),
            },
            None => return Err(ConfigError::new("buffer_rtt_fractions", "no buffer sizes to sweep")),
        };
        let n_sources = match &self.sweep_n_sources {
            Some(n) => n.clone(),
            None if self.n_sources_set => vec![self.base.n_sources],
            None => return Err(ConfigError::new("n_sources", "required")),
        };
        let seeds = (0..self.repetitions as u64).map(|i| self.base.seed.wrapping_add(i)).collect();
        let spec = SweepSpec {
            base: self.base.clone(),
            axis,
            n_sources,
            seeds,
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::new(field, message)
}

fn as_f64(key: &str, v: &Value) -> Result<f64, ConfigError> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(invalid(key, "expected a number")),
    }
}

fn as_u64(key: &str, v: &Value) -> Result<u64, ConfigError> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        _ => Err(invalid(key, "expected a non-negative integer")),
    }
}

fn as_u32(key: &str, v: &Value) -> Result<u32, ConfigError> {
    u32::try_from(as_u64(key, v)?).map_err(|_| invalid(key, "out of range"))
}

fn as_bool(key: &str, v: &Value) -> Result<bool, ConfigError> {
    v.as_bool().ok_or_else(|| invalid(key, "expected true or false"))
}

fn as_str<'a>(key: &str, v: &'a Value) -> Result<&'a str, ConfigError> {
    v.as_str().ok_or_else(|| invalid(key, "expected a quoted string"))
}

fn as_list<T>(key: &str, v: &Value, item: impl Fn(&str, &Value) -> Result<T, ConfigError>) -> Result<Vec<T>, ConfigError> {
    let items = match v {
        Value::Array(a) => a.iter().map(|x| item(key, x)).collect::<Result<Vec<_>, _>>()?,
        other => vec![item(key, other)?],
    };
    if items.is_empty() {
        return Err(invalid(key, "list is empty"));
    }
    Ok(items)
}

fn section<'a>(root: &'a Table, name: &str) -> Result<Option<&'a Table>, ConfigError> {
    match root.get(name) {
        None => Ok(None),
        Some(Value::Table(t)) => Ok(Some(t)),
        Some(_) => Err(invalid(name, "expected a [section]")),
    }
}

/// Parses a configuration file's text.
pub fn parse(text: &str) -> Result<FileConfig, ConfigError> {
    let root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| invalid("config", e.message().to_string()))?;
    for (key, value) in &root {
        match (key.as_str(), value) {
            ("scenario" | "switch" | "tcp" | "policer" | "sweep", Value::Table(_)) => {}
            (_, Value::Table(_)) => return Err(invalid(key, "unknown section")),
            _ => return Err(invalid(key, "key outside of any section")),
        }
    }

    let scenario = section(&root, "scenario")?;
    let class = match scenario.and_then(|s| s.get("class")) {
        Some(v) => as_str("class", v)?.parse::<ScenarioClass>().map_err(|e| invalid("class", e))?,
        None => ScenarioClass::Leo,
    };
    let mut fc = FileConfig::for_class(match class {
        ScenarioClass::Custom => ScenarioClass::Leo,
        c => c,
    });
    fc.base.class = class;
    let c = &mut fc.base;

    if let Some(s) = scenario {
        if class == ScenarioClass::Custom {
            for required in ["interswitch_delay_ms", "rcv_wnd_bytes", "duration_s"] {
                if !s.contains_key(required) {
                    return Err(invalid(required, "required for the custom class"));
                }
            }
        }
        if s.contains_key("buffer_cells") && s.contains_key("buffer_rtt_fraction") {
            return Err(invalid("buffer_cells", "conflicts with buffer_rtt_fraction"));
        }
        for (k, v) in s {
            match k.as_str() {
                "class" => {}
                "n_sources" => {
                    c.n_sources = as_u32(k, v)?;
                    fc.n_sources_set = true;
                }
                "buffer_cells" => {
                    c.buffer = BufferSize::Cells(as_u32(k, v)?);
                    fc.buffer_set = true;
                }
                "buffer_rtt_fraction" => {
                    c.buffer = BufferSize::RttFraction(as_f64(k, v)?);
                    fc.buffer_set = true;
                }
                "scale" => c.scale = as_f64(k, v)?,
                "scale_mss" => c.scale_mss = as_bool(k, v)?,
                "access_delay_ms" => c.access_delay = as_f64(k, v)? / 1e3,
                "interswitch_delay_ms" => c.interswitch_delay = as_f64(k, v)? / 1e3,
                "link_rate_mbps" => c.link_rate_bps = as_f64(k, v)? * 1e6,
                "rcv_wnd_bytes" => c.rcv_wnd = as_u64(k, v)?,
                "mss" => c.mss = as_u32(k, v)?,
                "duration_s" => c.duration = as_f64(k, v)?,
                "warmup_s" => c.warmup = as_f64(k, v)?,
                "seed" => c.seed = as_u64(k, v)?,
                "start_jitter_ms" => c.start_jitter = as_f64(k, v)? / 1e3,
                _ => return Err(invalid(k, "unknown key in [scenario]")),
            }
        }
    }
    if let Some(s) = section(&root, "switch")? {
        for (k, v) in s {
            match k.as_str() {
                "policy" => c.policy = as_str(k, v)?.parse::<DropPolicy>().map_err(|e| invalid(k, e))?,
                "r" => c.selective_drop.r = as_f64(k, v)?,
                "z" => c.selective_drop.z = as_f64(k, v)?,
                _ => return Err(invalid(k, "unknown key in [switch]")),
            }
        }
    }
    if let Some(s) = section(&root, "tcp")? {
        for (k, v) in s {
            match k.as_str() {
                "tick_ms" => c.tcp_tick = as_f64(k, v)? / 1e3,
                "initial_rto_ms" => c.initial_rto = as_f64(k, v)? / 1e3,
                "min_rto_ms" => c.min_rto = as_f64(k, v)? / 1e3,
                "max_rto_ms" => c.max_rto = as_f64(k, v)? / 1e3,
                _ => return Err(invalid(k, "unknown key in [tcp]")),
            }
        }
    }
    if let Some(s) = section(&root, "policer")? {
        for (k, v) in s {
            match k.as_str() {
                "police" => c.policer.police = as_bool(k, v)?,
                "pcr_cells_per_s" => c.policer.pcr = Some(as_f64(k, v)?),
                "cdvt_us" => c.policer.cdvt = as_f64(k, v)? / 1e6,
                _ => return Err(invalid(k, "unknown key in [policer]")),
            }
        }
    }
    if let Some(s) = section(&root, "sweep")? {
        if s.contains_key("buffer_cells") && s.contains_key("buffer_rtt_fractions") {
            return Err(invalid("buffer_cells", "conflicts with buffer_rtt_fractions"));
        }
        for (k, v) in s {
            match k.as_str() {
                "buffer_rtt_fractions" => {
                    fc.sweep_axis = Some(SweepAxis::RttFractions(match v {
                        Value::String(g) if g == "grid" => BUFFER_RTT_FRACTIONS.to_vec(),
                        _ => as_list(k, v, as_f64)?,
                    }))
                }
                "buffer_cells" => fc.sweep_axis = Some(SweepAxis::Cells(as_list(k, v, as_u32)?)),
                "n_sources" => fc.sweep_n_sources = Some(as_list(k, v, as_u32)?),
                "repetitions" => {
                    fc.repetitions = as_u32(k, v)?;
                    if fc.repetitions == 0 {
                        return Err(invalid(k, "must be at least 1"));
                    }
                }
                _ => return Err(invalid(k, "unknown key in [sweep]")),
            }
        }
    }
    Ok(fc)
}
