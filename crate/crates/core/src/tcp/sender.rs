//! Greedy SACK TCP sender.
//!
//! Congestion control follows slow start / congestion avoidance with a
//! per-ACK increment. Loss recovery is SACK-based in the style of RFC 6675:
//! a hole is considered lost once more than `(dup_thresh - 1) * MSS` bytes
//! above it have been SACKed, the number of bytes in the network ("pipe")
//! excludes lost-but-not-yet-retransmitted data, and a segment may be sent
//! whenever `pipe + MSS <= cwnd`. Lost holes are retransmitted before new
//! data. After a retransmission timeout every un-SACKed byte below the
//! highest sequence sent is treated as lost and the same machinery
//! performs the go-back.

use super::{SackScoreboard, Segment, TcpConfig};
use crate::sim::SimTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum RecoveryKind {
    Fast,
    Timeout,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Recovery {
    kind: RecoveryKind,
    /// `snd_nxt` when recovery started; recovery ends once it is acked.
    point: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SenderStats {
    pub segments_sent: u64,
    pub new_data_bytes: u64,
    pub retransmissions: u64,
    pub fast_recoveries: u64,
    pub timeouts: u64,
    pub rtt_samples: u64,
}

#[derive(Clone, Debug)]
pub struct TcpSender {
    cfg: TcpConfig,
    cwnd: u64,
    ssthresh: u64,
    snd_una: u64,
    snd_nxt: u64,
    scoreboard: SackScoreboard,
    dupacks: u32,
    recovery: Option<Recovery>,
    /// Next byte eligible for retransmission during recovery; holes below it
    /// have already been retransmitted.
    high_rxt: u64,
    srtt_ns: Option<i64>,
    rttvar_ns: i64,
    rto: SimTime,
    timer: Option<SimTime>,
    /// (end sequence of the timed segment, send time)
    rtt_probe: Option<(u64, SimTime)>,
    stats: SenderStats,
}

impl TcpSender {
    pub fn new(cfg: TcpConfig) -> Self {
        assert!(cfg.mss > 0 && cfg.rcv_wnd >= cfg.mss as u64, "receiver window below one MSS");
        TcpSender {
            cwnd: cfg.mss as u64,
            ssthresh: cfg.rcv_wnd,
            rto: cfg.initial_rto,
            cfg,
            snd_una: 0,
            snd_nxt: 0,
            scoreboard: SackScoreboard::new(),
            dupacks: 0,
            recovery: None,
            high_rxt: 0,
            srtt_ns: None,
            rttvar_ns: 0,
            timer: None,
            rtt_probe: None,
            stats: SenderStats::default(),
        }
    }

    pub fn config(&self) -> &TcpConfig {
        &self.cfg
    }

    fn mss(&self) -> u64 {
        self.cfg.mss as u64
    }

    pub fn cwnd(&self) -> u64 {
        self.cwnd
    }

    pub fn ssthresh(&self) -> u64 {
        self.ssthresh
    }

    pub fn snd_una(&self) -> u64 {
        self.snd_una
    }

    pub fn snd_nxt(&self) -> u64 {
        self.snd_nxt
    }

    pub fn rto(&self) -> SimTime {
        self.rto
    }

    pub fn srtt(&self) -> Option<SimTime> {
        self.srtt_ns.map(|s| SimTime::from_nanos(s as u64))
    }

    /// Expiry time of the retransmission timer, if armed.
    pub fn timer(&self) -> Option<SimTime> {
        self.timer
    }

    pub fn scoreboard(&self) -> &SackScoreboard {
        &self.scoreboard
    }

    pub fn stats(&self) -> &SenderStats {
        &self.stats
    }

    pub fn in_recovery(&self) -> bool {
        self.recovery.is_some()
    }

    /// `snd_nxt - snd_una`.
    pub fn flight_size(&self) -> u64 {
        self.snd_nxt - self.snd_una
    }

    /// Outstanding bytes neither cumulatively nor selectively acknowledged.
    pub fn unsacked_outstanding(&self) -> u64 {
        self.scoreboard.gap_bytes_in(self.snd_una, self.snd_nxt)
    }

    /// Holes below this sequence number are considered lost.
    fn loss_boundary(&self) -> u64 {
        let Some(rec) = self.recovery else {
            return self.snd_una;
        };
        let threshold = (self.cfg.dup_thresh.max(1) as u64 - 1) * self.mss();
        let mut above = 0;
        let mut boundary = self.snd_una;
        for r in self.scoreboard.ranges().iter().rev() {
            above += r.end - r.start;
            if above > threshold {
                boundary = r.start;
                break;
            }
        }
        if rec.kind == RecoveryKind::Timeout {
            boundary = boundary.max(rec.point);
        }
        boundary.clamp(self.snd_una, self.snd_nxt)
    }

    /// Whether the un-SACKed segment at `seq` is considered lost, judged
    /// by SACK information alone.
    pub fn is_lost(&self, seq: u64) -> bool {
        let threshold = (self.cfg.dup_thresh.max(1) as u64 - 1) * self.mss();
        !self.scoreboard.contains(seq) && self.scoreboard.bytes_in(seq, u64::MAX) > threshold
    }

    /// Estimated bytes still in the network.
    pub fn pipe(&self) -> u64 {
        let outstanding = self.unsacked_outstanding();
        if self.recovery.is_none() {
            return outstanding;
        }
        let lost = self.scoreboard.gap_bytes_in(self.snd_una, self.loss_boundary());
        let rxt_to = self.high_rxt.clamp(self.snd_una, self.snd_nxt);
        let retransmitted = self.scoreboard.gap_bytes_in(self.snd_una, rxt_to);
        outstanding - lost + retransmitted
    }

    /// Lowest lost hole not yet retransmitted in this recovery episode.
    fn next_retransmission(&self) -> Option<u64> {
        self.recovery?;
        let from = self.high_rxt.max(self.snd_una);
        let seq = self.scoreboard.next_gap(from);
        (seq < self.snd_nxt && seq < self.loss_boundary()).then_some(seq)
    }

    fn emit_retransmission(&mut self, seq: u64) -> Segment {
        self.high_rxt = seq + self.mss();
        self.stats.retransmissions += 1;
        self.stats.segments_sent += 1;
        // Karn: nothing in flight across a retransmission is timed.
        self.rtt_probe = None;
        Segment::data(seq, self.cfg.mss, true)
    }

    /// Sends whatever the congestion and receiver windows allow.
    pub fn maybe_send(&mut self, now: SimTime) -> Vec<Segment> {
        let mut out = Vec::new();
        self.fill_window(now, &mut out);
        out
    }

    fn fill_window(&mut self, now: SimTime, out: &mut Vec<Segment>) {
        let mss = self.mss();
        let mut pipe = self.pipe();
        let sent_before = out.len();
        while pipe + mss <= self.cwnd {
            if let Some(seq) = self.next_retransmission() {
                out.push(self.emit_retransmission(seq));
            } else if self.snd_nxt + mss <= self.snd_una + self.cfg.rcv_wnd {
                let seq = self.snd_nxt;
                self.snd_nxt += mss;
                self.stats.segments_sent += 1;
                self.stats.new_data_bytes += mss;
                if self.rtt_probe.is_none() {
                    self.rtt_probe = Some((self.snd_nxt, now));
                }
                out.push(Segment::data(seq, self.cfg.mss, false));
            } else {
                break;
            }
            pipe += mss;
            debug_assert_eq!(pipe, self.pipe());
        }
        if out.len() > sent_before {
            debug_assert!(self.pipe() <= self.cwnd);
            debug_assert!(self.snd_nxt - self.snd_una <= self.cfg.rcv_wnd);
            if self.timer.is_none() {
                self.timer = Some(now + self.rto);
            }
        }
    }

    /// Processes an acknowledgment; returns the segments it releases.
    pub fn on_ack(&mut self, ack_seg: &Segment, now: SimTime) -> Vec<Segment> {
        let mut out = Vec::new();
        if ack_seg.ack < self.snd_una {
            return out;
        }
        let ack = ack_seg.ack.min(self.snd_nxt);
        let mss = self.mss();
        for b in ack_seg.sack_blocks.iter() {
            if b.start >= ack && b.end <= self.snd_nxt && b.start < b.end {
                self.scoreboard.insert(b.clone());
            }
        }
        if ack > self.snd_una {
            if let Some((end, sent)) = self.rtt_probe {
                if ack >= end {
                    self.rtt_sample(now - sent);
                    self.rtt_probe = None;
                }
            }
            self.snd_una = ack;
            self.scoreboard.trim_below(ack);
            self.dupacks = 0;
            match self.recovery {
                Some(rec) if ack >= rec.point => {
                    if rec.kind == RecoveryKind::Fast {
                        self.cwnd = self.ssthresh;
                    }
                    self.recovery = None;
                }
                Some(Recovery {
                    kind: RecoveryKind::Fast,
                    ..
                }) => {}
                _ => self.grow_cwnd(),
            }
            self.timer = (self.snd_una < self.snd_nxt).then(|| now + self.rto);
        } else if self.snd_nxt > self.snd_una && ack_seg.len == 0 {
            self.dupacks += 1;
            if self.recovery.is_none()
                && (self.dupacks >= self.cfg.dup_thresh || self.is_lost(self.snd_una))
            {
                self.enter_fast_recovery();
                // The first retransmission is not gated by pipe.
                let seq = self.scoreboard.next_gap(self.snd_una);
                if seq < self.snd_nxt {
                    out.push(self.emit_retransmission(seq));
                }
            }
        }
        debug_assert!(self.cwnd >= mss);
        debug_assert!(self.scoreboard.is_well_formed());
        debug_assert!(self.scoreboard.first().is_none_or(|r| r.start > self.snd_una));
        self.fill_window(now, &mut out);
        out
    }

    fn grow_cwnd(&mut self) {
        let mss = self.mss();
        if self.cwnd < self.ssthresh {
            self.cwnd += mss;
        } else {
            self.cwnd += (mss * mss / self.cwnd).max(1);
        }
    }

    fn reduce_ssthresh(&mut self) {
        self.ssthresh = (self.flight_size() / 2).max(2 * self.mss());
    }

    fn enter_fast_recovery(&mut self) {
        self.reduce_ssthresh();
        self.cwnd = self.ssthresh;
        self.recovery = Some(Recovery {
            kind: RecoveryKind::Fast,
            point: self.snd_nxt,
        });
        self.high_rxt = self.snd_una;
        self.rtt_probe = None;
        self.stats.fast_recoveries += 1;
    }

    /// Retransmission timer expiry.
    pub fn on_timeout(&mut self, now: SimTime) -> Vec<Segment> {
        self.timer = None;
        if self.snd_una == self.snd_nxt {
            return Vec::new();
        }
        self.stats.timeouts += 1;
        self.reduce_ssthresh();
        self.cwnd = self.mss();
        self.rto = (self.rto + self.rto).min(self.cfg.max_rto);
        self.recovery = Some(Recovery {
            kind: RecoveryKind::Timeout,
            point: self.snd_nxt,
        });
        self.high_rxt = self.snd_una;
        self.dupacks = 0;
        self.rtt_probe = None;
        self.maybe_send(now)
    }

    /// RFC 6298 estimator; the resulting RTO is rounded up to the timer
    /// granularity and clamped to `[min_rto, max_rto]`.
    fn rtt_sample(&mut self, rtt: SimTime) {
        let r = rtt.as_nanos() as i64;
        match self.srtt_ns {
            None => {
                self.srtt_ns = Some(r);
                self.rttvar_ns = r / 2;
            }
            Some(srtt) => {
                self.rttvar_ns += ((srtt - r).abs() - self.rttvar_ns) / 4;
                self.srtt_ns = Some(srtt + (r - srtt) / 8);
            }
        }
        self.stats.rtt_samples += 1;
        let tick = self.cfg.tick.as_nanos().max(1);
        let raw = self.srtt_ns.unwrap() as u64 + tick.max(4 * self.rttvar_ns as u64);
        let rounded = raw.div_ceil(tick) * tick;
        self.rto = SimTime::from_nanos(rounded).clamp(self.cfg.min_rto, self.cfg.max_rto);
    }
}
