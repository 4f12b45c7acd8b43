//! Deterministic discrete-event engine.
//!
//! Time is an integer count of nanoseconds. Events are delivered in
//! `(fire_at, seq)` order where `seq` is assigned at insertion, so events
//! scheduled for the same instant fire in the order they were scheduled.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::ops::{Add, Sub};

use thiserror::Error;

/// Simulated time in nanoseconds since the start of a run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    pub const MAX: SimTime = SimTime(u64::MAX);

    pub const fn from_nanos(ns: u64) -> Self {
        SimTime(ns)
    }

    pub const fn from_millis(ms: u64) -> Self {
        SimTime(ms * 1_000_000)
    }

    /// Converts seconds to ticks, rounding half up to the nearest nanosecond.
    pub fn from_secs_f64(secs: f64) -> Self {
        SimTime(secs_to_nanos(secs))
    }

    pub const fn as_nanos(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e9
    }

    pub fn saturating_sub(self, other: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(other.0))
    }
}

impl Add for SimTime {
    type Output = SimTime;

    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl Sub for SimTime {
    type Output = SimTime;

    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.9}s", self.as_secs_f64())
    }
}

/// Round-half-up conversion of a non-negative duration in seconds to whole
/// nanoseconds. This is the single rounding rule used for every duration in
/// the simulator (propagation delays, cell times, timer values).
pub fn secs_to_nanos(secs: f64) -> u64 {
    assert!(secs >= 0.0 && secs.is_finite(), "invalid duration {secs}");
    (secs * 1e9 + 0.5).floor() as u64
}

/// Identifies the component an event is addressed to.
pub type ComponentId = u32;

#[derive(Clone, Debug)]
pub struct SimEvent<E> {
    pub fire_at: SimTime,
    pub seq: u64,
    pub target: ComponentId,
    pub payload: E,
}

impl<E> PartialEq for SimEvent<E> {
    fn eq(&self, other: &Self) -> bool {
        self.fire_at == other.fire_at && self.seq == other.seq
    }
}

impl<E> Eq for SimEvent<E> {}

impl<E> PartialOrd for SimEvent<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for SimEvent<E> {
    // Reversed so that `BinaryHeap` pops the earliest (fire_at, seq) first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .fire_at
            .cmp(&self.fire_at)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("event scheduled in the past: fire_at {fire_at} < clock {now}")]
    ScheduleInPast { fire_at: SimTime, now: SimTime },
    #[error("accounting violation: {0}")]
    Accounting(String),
    #[error("protocol violation: {0}")]
    Protocol(String),
}

/// Receives events popped from the queue.
pub trait Handler<E> {
    fn handle(&mut self, event: SimEvent<E>, queue: &mut EventQueue<E>) -> Result<(), SimError>;
}

/// Time-ordered event queue plus the simulation clock.
#[derive(Debug)]
pub struct EventQueue<E> {
    heap: BinaryHeap<SimEvent<E>>,
    next_seq: u64,
    now: SimTime,
    trace: TraceDigest,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        EventQueue {
            heap: BinaryHeap::new(),
            next_seq: 0,
            now: SimTime::ZERO,
            trace: TraceDigest::default(),
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Digest of `(fire_at, seq, target)` for every event delivered so far.
    pub fn trace_digest(&self) -> u64 {
        self.trace.0
    }

    /// Inserts an event, returning its sequence number.
    pub fn schedule(
        &mut self,
        fire_at: SimTime,
        target: ComponentId,
        payload: E,
    ) -> Result<u64, SimError> {
        if fire_at < self.now {
            return Err(SimError::ScheduleInPast {
                fire_at,
                now: self.now,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(SimEvent {
            fire_at,
            seq,
            target,
            payload,
        });
        Ok(seq)
    }

    /// Schedules an event `delay` after the current clock.
    pub fn schedule_in(
        &mut self,
        delay: SimTime,
        target: ComponentId,
        payload: E,
    ) -> Result<u64, SimError> {
        let at = self.now + delay;
        self.schedule(at, target, payload)
    }

    /// Processes every event with `fire_at <= end` in order. On return the
    /// clock is `end` (events never move it past `end`).
    pub fn run_until<H: Handler<E>>(&mut self, end: SimTime, handler: &mut H) -> Result<u64, SimError> {
        let mut processed = 0;
        while self.heap.peek().is_some_and(|ev| ev.fire_at <= end) {
            let event = self.heap.pop().expect("peeked");
            debug_assert!(event.fire_at >= self.now);
            self.now = event.fire_at;
            self.trace.push(event.fire_at.as_nanos(), event.seq, event.target);
            handler.handle(event, self)?;
            processed += 1;
        }
        if end > self.now {
            self.now = end;
        }
        Ok(processed)
    }
}

/// FNV-1a over the event trace.
#[derive(Debug, Clone, Copy)]
struct TraceDigest(u64);

impl Default for TraceDigest {
    fn default() -> Self {
        TraceDigest(0xcbf2_9ce4_8422_2325)
    }
}

impl TraceDigest {
    fn push(&mut self, fire_at: u64, seq: u64, target: ComponentId) {
        let words = [fire_at, seq, target as u64];
        for w in words {
            for b in w.to_le_bytes() {
                self.0 ^= b as u64;
                self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
            }
        }
    }
}
