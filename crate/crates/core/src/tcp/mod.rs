//! Unidirectional bulk-transfer SACK TCP: a greedy sender and an
//! acknowledging receiver.
//!
//! Every data segment carries exactly one MSS. Sequence numbers are plain
//! `u64` byte offsets starting at zero; there is no wraparound and no
//! connection setup.

mod receiver;
mod scoreboard;
mod sender;

use std::ops::Range;

pub use receiver::TcpReceiver;
pub use scoreboard::SackScoreboard;
pub use sender::{SenderStats, TcpSender};

use crate::sim::SimTime;

pub const DEFAULT_MSS: u32 = 9180;
pub const MAX_SACK_BLOCKS: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct TcpConfig {
    pub mss: u32,
    /// Maximum receiver window, bytes.
    pub rcv_wnd: u64,
    /// Retransmission timer granularity.
    pub tick: SimTime,
    pub initial_rto: SimTime,
    pub min_rto: SimTime,
    pub max_rto: SimTime,
    pub dup_thresh: u32,
}

impl Default for TcpConfig {
    fn default() -> Self {
        TcpConfig {
            mss: DEFAULT_MSS,
            rcv_wnd: 600_000,
            tick: SimTime::from_millis(100),
            initial_rto: SimTime::from_millis(3000),
            min_rto: SimTime::from_millis(200),
            max_rto: SimTime::from_millis(64_000),
            dup_thresh: 3,
        }
    }
}

/// Up to three SACK blocks, most recent first.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SackBlocks {
    blocks: [Range<u64>; MAX_SACK_BLOCKS],
    len: u8,
}

impl SackBlocks {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a block; returns false once full.
    pub fn push(&mut self, block: Range<u64>) -> bool {
        if self.len as usize == MAX_SACK_BLOCKS {
            return false;
        }
        self.blocks[self.len as usize] = block;
        self.len += 1;
        true
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn as_slice(&self) -> &[Range<u64>] {
        &self.blocks[..self.len as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Range<u64>> {
        self.as_slice().iter()
    }
}

impl<const N: usize> From<[Range<u64>; N]> for SackBlocks {
    fn from(blocks: [Range<u64>; N]) -> Self {
        let mut out = SackBlocks::new();
        for b in blocks {
            assert!(out.push(b), "at most {MAX_SACK_BLOCKS} SACK blocks");
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segment {
    pub seq: u64,
    /// Payload bytes; zero for a pure ACK.
    pub len: u32,
    pub ack: u64,
    pub sack_blocks: SackBlocks,
    pub is_retransmission: bool,
}

impl Segment {
    pub fn data(seq: u64, len: u32, is_retransmission: bool) -> Self {
        Segment {
            seq,
            len,
            ack: 0,
            sack_blocks: SackBlocks::new(),
            is_retransmission,
        }
    }

    pub fn pure_ack(ack: u64, sack_blocks: SackBlocks) -> Self {
        Segment {
            seq: 0,
            len: 0,
            ack,
            sack_blocks,
            is_retransmission: false,
        }
    }

    pub fn end(&self) -> u64 {
        self.seq + self.len as u64
    }
}
