//! ATM traffic contracts: source traffic descriptors, QoS parameters, burst
//! tolerance and the Generic Cell Rate Algorithm.
//!
//! The GCRA is implemented in its virtual-scheduling form: a cell arriving
//! at `t` conforms iff `t >= TAT - L`, after which `TAT = max(t, TAT) + I`.
//! Non-conforming cells leave the state untouched.
//!
//! Times are integer nanoseconds. Increments are derived from rates with the
//! same half-up rounding used by the engine, and the burst tolerance fed to
//! the SCR bucket is computed from those rounded increments so that a greedy
//! MBS-cell burst lands exactly on the bucket limit.

use thiserror::Error;

use crate::sim::{secs_to_nanos, SimTime};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ServiceCategory {
    Cbr,
    VbrRt,
    VbrNrt,
    Abr,
    Ubr,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContractError {
    #[error("traffic descriptor is incomplete: {0}")]
    Incomplete(&'static str),
    #[error("invalid traffic descriptor: {0}")]
    Invalid(String),
    #[error("arrival at {arrival} precedes previous arrival at {previous}")]
    OutOfOrder { arrival: SimTime, previous: SimTime },
}

/// Source traffic descriptor. Rates are in cells per second.
#[derive(Clone, Debug, PartialEq)]
pub struct TrafficDescriptor {
    pub pcr: f64,
    pub scr: Option<f64>,
    pub mbs: Option<u32>,
    /// Cell delay variation tolerance, seconds.
    pub cdvt: f64,
    pub service_category: ServiceCategory,
    /// Minimum cell rate, ABR only.
    pub mcr: Option<f64>,
}

impl TrafficDescriptor {
    pub fn ubr(pcr: f64, cdvt: f64) -> Result<Self, ContractError> {
        let d = TrafficDescriptor {
            pcr,
            scr: None,
            mbs: None,
            cdvt,
            service_category: ServiceCategory::Ubr,
            mcr: None,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn vbr(pcr: f64, scr: f64, mbs: u32, cdvt: f64, rt: bool) -> Result<Self, ContractError> {
        let d = TrafficDescriptor {
            pcr,
            scr: Some(scr),
            mbs: Some(mbs),
            cdvt,
            service_category: if rt {
                ServiceCategory::VbrRt
            } else {
                ServiceCategory::VbrNrt
            },
            mcr: None,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<(), ContractError> {
        if !(self.pcr > 0.0 && self.pcr.is_finite()) {
            return Err(ContractError::Invalid(format!("pcr must be > 0, got {}", self.pcr)));
        }
        if !(self.cdvt >= 0.0 && self.cdvt.is_finite()) {
            return Err(ContractError::Invalid(format!("cdvt must be >= 0, got {}", self.cdvt)));
        }
        if let Some(scr) = self.scr {
            if !(scr > 0.0 && scr <= self.pcr) {
                return Err(ContractError::Invalid(format!(
                    "scr must satisfy 0 < scr <= pcr, got scr={scr} pcr={}",
                    self.pcr
                )));
            }
        }
        if self.mbs == Some(0) {
            return Err(ContractError::Invalid("mbs must be >= 1".into()));
        }
        match self.service_category {
            ServiceCategory::Ubr | ServiceCategory::Cbr if self.scr.is_some() || self.mbs.is_some() => {
                Err(ContractError::Invalid(
                    "CBR/UBR descriptors carry only pcr and cdvt".into(),
                ))
            }
            ServiceCategory::Abr if self.mcr.is_none() => Err(ContractError::Incomplete("mcr")),
            _ => Ok(()),
        }
    }

    /// `1/PCR` in nanoseconds.
    pub fn pcr_increment_ns(&self) -> u64 {
        secs_to_nanos(1.0 / self.pcr).max(1)
    }

    /// `1/SCR` in nanoseconds.
    pub fn scr_increment_ns(&self) -> Result<u64, ContractError> {
        let scr = self.scr.ok_or(ContractError::Incomplete("scr"))?;
        Ok(secs_to_nanos(1.0 / scr).max(1))
    }

    pub fn cdvt_ns(&self) -> u64 {
        secs_to_nanos(self.cdvt)
    }
}

/// QoS objectives negotiated for a connection.
#[derive(Clone, Debug, PartialEq)]
pub struct QosParams {
    pub max_ctd: f64,
    pub peak_to_peak_cdv: f64,
    pub clr: f64,
}

impl QosParams {
    pub fn new(max_ctd: f64, peak_to_peak_cdv: f64, clr: f64) -> Result<Self, ContractError> {
        if !(max_ctd >= 0.0 && peak_to_peak_cdv >= 0.0) {
            return Err(ContractError::Invalid("delays must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&clr) {
            return Err(ContractError::Invalid(format!("clr must be in [0,1], got {clr}")));
        }
        Ok(QosParams {
            max_ctd,
            peak_to_peak_cdv,
            clr,
        })
    }
}

/// Burst tolerance `(MBS - 1)(1/SCR - 1/PCR)` in seconds.
pub fn burst_tolerance(d: &TrafficDescriptor) -> Result<f64, ContractError> {
    let scr = d.scr.ok_or(ContractError::Incomplete("scr"))?;
    let mbs = d.mbs.ok_or(ContractError::Incomplete("mbs"))?;
    if scr > d.pcr {
        return Err(ContractError::Invalid("scr exceeds pcr".into()));
    }
    Ok((mbs as f64 - 1.0) * (1.0 / scr - 1.0 / d.pcr))
}

/// Burst tolerance in nanoseconds, computed from the rounded bucket
/// increments.
pub fn burst_tolerance_ns(d: &TrafficDescriptor) -> Result<u64, ContractError> {
    let mbs = d.mbs.ok_or(ContractError::Incomplete("mbs"))?;
    let t_scr = d.scr_increment_ns()?;
    let t_pcr = d.pcr_increment_ns();
    Ok((mbs as u64 - 1) * t_scr.saturating_sub(t_pcr))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Conforming,
    NonConforming,
}

impl Verdict {
    pub fn is_conforming(self) -> bool {
        self == Verdict::Conforming
    }
}

/// Virtual-scheduling GCRA(I, L).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GcraState {
    increment_ns: u64,
    limit_ns: u64,
    tat: SimTime,
    last_arrival: Option<SimTime>,
}

impl GcraState {
    pub fn new(increment_ns: u64, limit_ns: u64) -> Self {
        assert!(increment_ns > 0, "GCRA increment must be positive");
        GcraState {
            increment_ns,
            limit_ns,
            tat: SimTime::ZERO,
            last_arrival: None,
        }
    }

    /// GCRA(1/PCR, CDVT).
    pub fn for_pcr(d: &TrafficDescriptor) -> Self {
        GcraState::new(d.pcr_increment_ns(), d.cdvt_ns())
    }

    /// GCRA(1/SCR, BT + CDVT).
    pub fn for_scr(d: &TrafficDescriptor) -> Result<Self, ContractError> {
        Ok(GcraState::new(
            d.scr_increment_ns()?,
            burst_tolerance_ns(d)? + d.cdvt_ns(),
        ))
    }

    pub fn increment_ns(&self) -> u64 {
        self.increment_ns
    }

    pub fn limit_ns(&self) -> u64 {
        self.limit_ns
    }

    pub fn tat(&self) -> SimTime {
        self.tat
    }

    fn check_order(&self, arrival: SimTime) -> Result<(), ContractError> {
        match self.last_arrival {
            Some(previous) if arrival < previous => Err(ContractError::OutOfOrder { arrival, previous }),
            _ => Ok(()),
        }
    }

    /// Verdict for `arrival` without mutating the state.
    fn verdict(&self, arrival: SimTime) -> Verdict {
        if arrival.as_nanos() + self.limit_ns >= self.tat.as_nanos() {
            Verdict::Conforming
        } else {
            Verdict::NonConforming
        }
    }

    fn commit(&mut self, arrival: SimTime) {
        self.tat = self.tat.max(arrival) + SimTime::from_nanos(self.increment_ns);
    }

    pub fn check(&mut self, arrival: SimTime) -> Result<Verdict, ContractError> {
        self.check_order(arrival)?;
        self.last_arrival = Some(arrival);
        let v = self.verdict(arrival);
        if v.is_conforming() {
            self.commit(arrival);
        }
        Ok(v)
    }
}

/// Free-function form of [`GcraState::check`].
pub fn gcra_check(state: &mut GcraState, arrival: SimTime) -> Result<Verdict, ContractError> {
    state.check(arrival)
}

/// Coupled PCR/SCR conformance: a cell conforms only if both buckets accept
/// it, and only then are both buckets updated.
pub fn dual_bucket_check(
    pcr_state: &mut GcraState,
    scr_state: &mut GcraState,
    arrival: SimTime,
) -> Result<Verdict, ContractError> {
    pcr_state.check_order(arrival)?;
    scr_state.check_order(arrival)?;
    pcr_state.last_arrival = Some(arrival);
    scr_state.last_arrival = Some(arrival);
    if pcr_state.verdict(arrival).is_conforming() && scr_state.verdict(arrival).is_conforming() {
        pcr_state.commit(arrival);
        scr_state.commit(arrival);
        Ok(Verdict::Conforming)
    } else {
        Ok(Verdict::NonConforming)
    }
}

/// Per-connection policer built from a descriptor: single GCRA for
/// PCR-only contracts, coupled dual bucket otherwise.
#[derive(Clone, Debug)]
pub struct Policer {
    pcr: GcraState,
    scr: Option<GcraState>,
}

impl Policer {
    pub fn new(d: &TrafficDescriptor) -> Result<Self, ContractError> {
        d.validate()?;
        let scr = match (d.scr, d.mbs) {
            (Some(_), Some(_)) => Some(GcraState::for_scr(d)?),
            (None, None) => None,
            (Some(_), None) => return Err(ContractError::Incomplete("mbs")),
            (None, Some(_)) => return Err(ContractError::Incomplete("scr")),
        };
        Ok(Policer {
            pcr: GcraState::for_pcr(d),
            scr,
        })
    }

    pub fn check(&mut self, arrival: SimTime) -> Result<Verdict, ContractError> {
        match &mut self.scr {
            Some(scr) => dual_bucket_check(&mut self.pcr, scr, arrival),
            None => self.pcr.check(arrival),
        }
    }
}
