use std::collections::VecDeque;

use super::{SackBlocks, SackScoreboard, Segment, MAX_SACK_BLOCKS};

/// How many recently received out-of-order segments are remembered for
/// ordering SACK blocks.
const RECENT_DEPTH: usize = 8;

/// Receiving side: tracks the cumulative ACK point and out-of-order data,
/// and acknowledges every data segment immediately.
#[derive(Clone, Debug, Default)]
pub struct TcpReceiver {
    rcv_nxt: u64,
    out_of_order: SackScoreboard,
    /// Start offsets of recent out-of-order arrivals, most recent first.
    recent: VecDeque<u64>,
    delivered: u64,
    segments_received: u64,
    duplicates: u64,
}

impl TcpReceiver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rcv_nxt(&self) -> u64 {
        self.rcv_nxt
    }

    /// Bytes handed to the application so far.
    pub fn delivered(&self) -> u64 {
        self.delivered
    }

    pub fn out_of_order(&self) -> &SackScoreboard {
        &self.out_of_order
    }

    pub fn segments_received(&self) -> u64 {
        self.segments_received
    }

    pub fn duplicates(&self) -> u64 {
        self.duplicates
    }

    pub fn on_data(&mut self, seg: &Segment) -> Segment {
        debug_assert!(seg.len > 0, "receiver fed a pure ACK");
        self.segments_received += 1;
        let (start, end) = (seg.seq, seg.end());
        if end <= self.rcv_nxt || (start > self.rcv_nxt && self.out_of_order.bytes_in(start, end) == end - start) {
            self.duplicates += 1;
        } else if start <= self.rcv_nxt {
            self.advance_to(end);
            while let Some(r) = self.out_of_order.pop_if_reaches(self.rcv_nxt) {
                self.advance_to(r.end);
            }
        } else {
            self.out_of_order.insert(start..end);
            self.recent.retain(|&s| s != start);
            self.recent.push_front(start);
            self.recent.truncate(RECENT_DEPTH);
        }
        Segment::pure_ack(self.rcv_nxt, self.sack_blocks())
    }

    fn advance_to(&mut self, end: u64) {
        if end > self.rcv_nxt {
            self.delivered += end - self.rcv_nxt;
            self.rcv_nxt = end;
        }
    }

    /// Blocks containing the most recent out-of-order arrivals first, then
    /// any remaining blocks in ascending order.
    fn sack_blocks(&mut self) -> SackBlocks {
        let rcv_nxt = self.rcv_nxt;
        self.recent.retain(|&s| s >= rcv_nxt);
        let mut out = SackBlocks::new();
        for &s in &self.recent {
            if out.len() == MAX_SACK_BLOCKS {
                return out;
            }
            if let Some(r) = self.out_of_order.range_containing(s) {
                if !out.iter().any(|b| *b == r) {
                    out.push(r);
                }
            }
        }
        for r in self.out_of_order.ranges() {
            if out.len() == MAX_SACK_BLOCKS {
                break;
            }
            if !out.iter().any(|b| b == r) {
                out.push(r.clone());
            }
        }
        out
    }
}
