//! AAL5 with LLC/SNAP encapsulation: frame sizing, segmentation into cells
//! and per-VC reassembly.
//!
//! Payload bytes are never materialized; frames and cells carry lengths and
//! identifiers only.

use thiserror::Error;

pub const CELL_BYTES: u32 = 53;
pub const CELL_PAYLOAD_BYTES: u32 = 48;
pub const CELL_HEADER_BYTES: u32 = 5;
pub const CELL_BITS: u32 = CELL_BYTES * 8;

pub const TCP_HEADER_BYTES: u32 = 20;
pub const IP_HEADER_BYTES: u32 = 20;
pub const LLC_HEADER_BYTES: u32 = 8;
pub const AAL5_TRAILER_BYTES: u32 = 8;

/// Bytes added to a TCP payload before padding to a cell multiple.
pub const ENCAPSULATION_OVERHEAD: u32 =
    TCP_HEADER_BYTES + IP_HEADER_BYTES + LLC_HEADER_BYTES + AAL5_TRAILER_BYTES;

pub type VcId = u32;

/// Which way a cell travels along its VC.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    /// Source to sink (TCP data).
    Forward,
    /// Sink to source (TCP acknowledgments).
    Reverse,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Cell {
    pub vc: VcId,
    pub dir: Direction,
    pub frame_id: u64,
    /// Position of this cell within its frame, starting at 0.
    pub index: u16,
    /// End-of-message: set on the last cell of the frame.
    pub eom: bool,
}

impl Cell {
    pub const PAYLOAD_BYTES: u32 = CELL_PAYLOAD_BYTES;
    pub const HEADER_BYTES: u32 = CELL_HEADER_BYTES;

    pub fn is_first(&self) -> bool {
        self.index == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Aal5Frame {
    pub vc: VcId,
    pub dir: Direction,
    pub frame_id: u64,
    pub tcp_payload_len: u32,
    pub total_encapsulated_len: u32,
    pub cell_count: u32,
}

impl Aal5Frame {
    pub fn new(vc: VcId, dir: Direction, frame_id: u64, tcp_payload_len: u32) -> Self {
        let total = tcp_payload_len + ENCAPSULATION_OVERHEAD;
        Aal5Frame {
            vc,
            dir,
            frame_id,
            tcp_payload_len,
            total_encapsulated_len: total,
            cell_count: cells_for_payload(tcp_payload_len),
        }
    }

    pub fn wire_bytes(&self) -> u64 {
        self.cell_count as u64 * CELL_BYTES as u64
    }

    pub fn cell(&self, index: u32) -> Cell {
        debug_assert!(index < self.cell_count);
        Cell {
            vc: self.vc,
            dir: self.dir,
            frame_id: self.frame_id,
            index: index as u16,
            eom: index + 1 == self.cell_count,
        }
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.cell_count).map(move |i| self.cell(i))
    }
}

/// Number of cells carrying a TCP segment with `tcp_payload_len` data bytes.
pub fn cells_for_payload(tcp_payload_len: u32) -> u32 {
    (tcp_payload_len + ENCAPSULATION_OVERHEAD).div_ceil(CELL_PAYLOAD_BYTES)
}

/// Wire bytes at the ATM layer for one TCP segment.
pub fn wire_bytes_for_payload(tcp_payload_len: u32) -> u64 {
    cells_for_payload(tcp_payload_len) as u64 * CELL_BYTES as u64
}

/// Segments one TCP segment into an AAL5 frame and its cells.
pub fn segment(tcp_payload_len: u32, vc: VcId, dir: Direction, frame_id: u64) -> (Aal5Frame, Vec<Cell>) {
    let frame = Aal5Frame::new(vc, dir, frame_id, tcp_payload_len);
    let cells = frame.cells().collect();
    (frame, cells)
}

/// Fraction of the cell-layer rate available to TCP payload at this MSS.
pub fn efficiency_ceiling(mss: u32) -> f64 {
    assert!(mss > 0, "mss must be positive");
    mss as f64 / wire_bytes_for_payload(mss) as f64
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReassemblyError {
    #[error("vc {vc}: cell of frame {got} arrived after frame {current} had started")]
    Interleaved { vc: VcId, current: u64, got: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReassemblyEvent {
    /// Every cell of the frame arrived in order.
    Complete { frame_id: u64, cells: u32 },
    /// The frame lost at least one cell; `cells` is how many did arrive.
    Discarded { frame_id: u64, cells: u32 },
}

#[derive(Clone, Copy, Debug)]
struct Partial {
    frame_id: u64,
    next_index: u32,
    received: u32,
    corrupt: bool,
}

/// Per-VC reassembly state.
///
/// A frame that lost cells is discarded as soon as the loss is provable: an
/// index gap inside the frame (reported at its EOM cell), or the first cell
/// of a newer frame arriving before the EOM.
#[derive(Clone, Debug, Default)]
pub struct Reassembler {
    vc: VcId,
    partial: Option<Partial>,
    last_frame: Option<u64>,
    pub frames_completed: u64,
    pub frames_discarded: u64,
    pub cells_wasted: u64,
}

impl Reassembler {
    pub fn new(vc: VcId) -> Self {
        Reassembler {
            vc,
            ..Default::default()
        }
    }

    /// Feeds one cell. Emits at most two events: the discard of a previous
    /// partial frame and/or the completion (or discard) of the current one.
    pub fn push(&mut self, cell: Cell) -> Result<Vec<ReassemblyEvent>, ReassemblyError> {
        let mut out = Vec::new();
        if let Some(last) = self.last_frame {
            if cell.frame_id < last {
                return Err(ReassemblyError::Interleaved {
                    vc: self.vc,
                    current: last,
                    got: cell.frame_id,
                });
            }
        }
        match self.partial {
            Some(p) if p.frame_id != cell.frame_id => {
                self.discard(p, &mut out);
                self.partial = None;
            }
            _ => {}
        }
        if self.partial.is_none() && self.last_frame == Some(cell.frame_id) {
            // Remainder of a frame already closed out as discarded.
            self.cells_wasted += 1;
            return Ok(out);
        }
        self.last_frame = Some(cell.frame_id);
        let p = self.partial.get_or_insert(Partial {
            frame_id: cell.frame_id,
            next_index: 0,
            received: 0,
            corrupt: false,
        });
        if cell.index as u32 != p.next_index {
            p.corrupt = true;
        }
        p.next_index = cell.index as u32 + 1;
        p.received += 1;
        if cell.eom {
            let p = self.partial.take().expect("partial present");
            if p.corrupt {
                self.discard(p, &mut out);
            } else {
                self.frames_completed += 1;
                out.push(ReassemblyEvent::Complete {
                    frame_id: p.frame_id,
                    cells: p.received,
                });
            }
        }
        Ok(out)
    }

    fn discard(&mut self, p: Partial, out: &mut Vec<ReassemblyEvent>) {
        self.frames_discarded += 1;
        self.cells_wasted += p.received as u64;
        out.push(ReassemblyEvent::Discarded {
            frame_id: p.frame_id,
            cells: p.received,
        });
    }
}
