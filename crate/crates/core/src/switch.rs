//! Output-port cell buffer of an earth-station switch.
//!
//! One FIFO per output port, capacity `K` cells, with per-VC occupancy
//! accounting. Under Selective Drop the decision to admit a frame is taken
//! when its first cell arrives:
//!
//! ```text
//! drop  iff  X > R*K  and  Y_i * N_a / X > Z
//! ```
//!
//! where `X` is total occupancy, `Y_i` the VC's occupancy and `N_a` the
//! number of VCs with at least one buffered cell. A dropped first cell puts
//! the VC into a discard state that swallows the rest of that frame. A cell
//! that finds the buffer full is dropped and likewise poisons the remainder
//! of its frame; cells of the frame already queued are left to drain.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use crate::aal5::{Cell, VcId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DropPolicy {
    SelectiveDrop,
    /// Plain cell-level tail drop, no frame awareness.
    TailDrop,
}

impl fmt::Display for DropPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DropPolicy::SelectiveDrop => "selective_drop",
            DropPolicy::TailDrop => "tail_drop",
        })
    }
}

impl FromStr for DropPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "selective_drop" => Ok(DropPolicy::SelectiveDrop),
            "tail_drop" => Ok(DropPolicy::TailDrop),
            other => Err(format!("unknown drop policy '{other}' (expected selective_drop or tail_drop)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SelectiveDropParams {
    /// Occupancy threshold as a fraction of capacity.
    pub r: f64,
    /// Fair-share scaling threshold, `0 < z <= 1`.
    pub z: f64,
}

impl Default for SelectiveDropParams {
    fn default() -> Self {
        SelectiveDropParams { r: 0.9, z: 0.8 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DropDecision {
    Accept,
    Drop,
}

/// The Selective Drop predicate on raw quantities.
pub fn selective_drop_predicate(
    capacity_k: u32,
    occupancy_x: u32,
    vc_occupancy_y: u32,
    active_n_a: u32,
    params: SelectiveDropParams,
) -> DropDecision {
    let x = occupancy_x as f64;
    if x > params.r * capacity_k as f64 && vc_occupancy_y as f64 * active_n_a as f64 / x > params.z {
        DropDecision::Drop
    } else {
        DropDecision::Accept
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DropCause {
    /// Frame rejected by the Selective Drop predicate.
    Selective,
    /// Buffer full (including the poisoned remainder of that frame).
    Overflow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnqueueOutcome {
    Queued,
    Dropped(DropCause),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct VcCounters {
    pub cells_received: u64,
    pub cells_queued: u64,
    pub cells_dropped_selective: u64,
    pub cells_dropped_overflow: u64,
    pub frames_dropped_selective: u64,
    pub frames_dropped_overflow: u64,
}

impl VcCounters {
    pub fn cells_dropped(&self) -> u64 {
        self.cells_dropped_selective + self.cells_dropped_overflow
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Discarding {
    frame_id: u64,
    cause: DropCause,
}

/// Finite FIFO cell buffer with per-VC accounting.
#[derive(Clone, Debug)]
pub struct SwitchBuffer {
    policy: DropPolicy,
    params: SelectiveDropParams,
    capacity_k: u32,
    queue: VecDeque<Cell>,
    per_vc_y: Vec<u32>,
    active_n_a: u32,
    discard_state: Vec<Option<Discarding>>,
    counters: Vec<VcCounters>,
    max_occupancy: u32,
}

impl SwitchBuffer {
    pub fn new(capacity_k: u32, n_vcs: usize, policy: DropPolicy, params: SelectiveDropParams) -> Self {
        assert!(capacity_k >= 1, "buffer capacity must be at least one cell");
        SwitchBuffer {
            policy,
            params,
            capacity_k,
            queue: VecDeque::with_capacity((capacity_k as usize).min(1 << 16)),
            per_vc_y: vec![0; n_vcs],
            active_n_a: 0,
            discard_state: vec![None; n_vcs],
            counters: vec![VcCounters::default(); n_vcs],
            max_occupancy: 0,
        }
    }

    pub fn policy(&self) -> DropPolicy {
        self.policy
    }

    pub fn capacity(&self) -> u32 {
        self.capacity_k
    }

    pub fn occupancy(&self) -> u32 {
        self.queue.len() as u32
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn vc_occupancy(&self, vc: VcId) -> u32 {
        self.per_vc_y[vc as usize]
    }

    pub fn active_vcs(&self) -> u32 {
        self.active_n_a
    }

    pub fn max_occupancy(&self) -> u32 {
        self.max_occupancy
    }

    pub fn counters(&self) -> &[VcCounters] {
        &self.counters
    }

    /// Pure Selective Drop test for a new frame on `vc`, on the current
    /// (pre-arrival) occupancy.
    pub fn drop_test(&self, vc: VcId) -> DropDecision {
        selective_drop_predicate(
            self.capacity_k,
            self.occupancy(),
            self.per_vc_y[vc as usize],
            self.active_n_a,
            self.params,
        )
    }

    pub fn enqueue_cell(&mut self, cell: Cell) -> EnqueueOutcome {
        let vc = cell.vc as usize;
        self.counters[vc].cells_received += 1;
        let outcome = match self.policy {
            DropPolicy::SelectiveDrop => self.admit_selective(cell),
            DropPolicy::TailDrop => {
                if self.occupancy() >= self.capacity_k {
                    // Remember the frame only to count it once; later cells are still offered.
                    if self.discard_state[vc].map(|d| d.frame_id) != Some(cell.frame_id) {
                        self.counters[vc].frames_dropped_overflow += 1;
                        self.discard_state[vc] = Some(Discarding {
                            frame_id: cell.frame_id,
                            cause: DropCause::Overflow,
                        });
                    }
                    EnqueueOutcome::Dropped(DropCause::Overflow)
                } else {
                    EnqueueOutcome::Queued
                }
            }
        };
        match outcome {
            EnqueueOutcome::Queued => {
                self.counters[vc].cells_queued += 1;
                if self.per_vc_y[vc] == 0 {
                    self.active_n_a += 1;
                }
                self.per_vc_y[vc] += 1;
                self.queue.push_back(cell);
                self.max_occupancy = self.max_occupancy.max(self.occupancy());
            }
            EnqueueOutcome::Dropped(DropCause::Selective) => self.counters[vc].cells_dropped_selective += 1,
            EnqueueOutcome::Dropped(DropCause::Overflow) => self.counters[vc].cells_dropped_overflow += 1,
        }
        outcome
    }

    fn admit_selective(&mut self, cell: Cell) -> EnqueueOutcome {
        let vc = cell.vc as usize;
        if cell.is_first() {
            self.discard_state[vc] = None;
            if self.drop_test(cell.vc) == DropDecision::Drop {
                return self.start_discard(cell, DropCause::Selective);
            }
        } else if let Some(d) = self.discard_state[vc] {
            if d.frame_id == cell.frame_id {
                if cell.eom {
                    self.discard_state[vc] = None;
                }
                return EnqueueOutcome::Dropped(d.cause);
            }
        }
        if self.occupancy() >= self.capacity_k {
            return self.start_discard(cell, DropCause::Overflow);
        }
        EnqueueOutcome::Queued
    }

    fn start_discard(&mut self, cell: Cell, cause: DropCause) -> EnqueueOutcome {
        let vc = cell.vc as usize;
        match cause {
            DropCause::Selective => self.counters[vc].frames_dropped_selective += 1,
            DropCause::Overflow => self.counters[vc].frames_dropped_overflow += 1,
        }
        if !cell.eom {
            self.discard_state[vc] = Some(Discarding {
                frame_id: cell.frame_id,
                cause,
            });
        }
        EnqueueOutcome::Dropped(cause)
    }

    /// Removes the head-of-line cell.
    pub fn dequeue_cell(&mut self) -> Option<Cell> {
        let cell = self.queue.pop_front()?;
        let y = &mut self.per_vc_y[cell.vc as usize];
        *y -= 1;
        if *y == 0 {
            self.active_n_a -= 1;
        }
        Some(cell)
    }

    /// Recomputes the accounting from the queue contents and compares.
    pub fn audit(&self) -> Result<(), String> {
        let mut y = vec![0u32; self.per_vc_y.len()];
        for c in &self.queue {
            y[c.vc as usize] += 1;
        }
        if y != self.per_vc_y {
            return Err(format!("per-VC occupancy {:?} != queue contents {:?}", self.per_vc_y, y));
        }
        let active = y.iter().filter(|&&v| v > 0).count() as u32;
        if active != self.active_n_a {
            return Err(format!("active VC count {} != {}", self.active_n_a, active));
        }
        if self.occupancy() > self.capacity_k {
            return Err(format!("occupancy {} exceeds capacity {}", self.occupancy(), self.capacity_k));
        }
        for (vc, c) in self.counters.iter().enumerate() {
            if c.cells_received != c.cells_queued + c.cells_dropped() {
                return Err(format!("vc {vc}: received != queued + dropped ({c:?})"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aal5::{segment, Direction};

    fn buffer(k: u32, policy: DropPolicy) -> SwitchBuffer {
        SwitchBuffer::new(k, 4, policy, SelectiveDropParams::default())
    }

    fn fill(buf: &mut SwitchBuffer, vc: VcId, n: u32, frame_id: u64) {
        // n cells of a single long frame
        for i in 0..n {
            let cell = Cell {
                vc,
                dir: Direction::Forward,
                frame_id,
                index: i as u16,
                eom: false,
            };
            assert_eq!(buf.enqueue_cell(cell), EnqueueOutcome::Queued);
        }
    }

    #[test]
    fn predicate_examples() {
        let p = SelectiveDropParams::default();
        assert_eq!(selective_drop_predicate(1000, 950, 200, 5, p), DropDecision::Drop);
        assert_eq!(selective_drop_predicate(1000, 950, 100, 5, p), DropDecision::Accept);
        assert_eq!(selective_drop_predicate(1000, 800, 800, 1, p), DropDecision::Accept);
        assert_eq!(selective_drop_predicate(1000, 0, 0, 0, p), DropDecision::Accept);
    }

    #[test]
    fn empty_buffer_accepts_first_cell() {
        let mut b = buffer(10, DropPolicy::SelectiveDrop);
        let (_, cells) = segment(0, 0, Direction::Forward, 0);
        assert_eq!(b.enqueue_cell(cells[0]), EnqueueOutcome::Queued);
        assert_eq!(b.occupancy(), 1);
        assert_eq!(b.active_vcs(), 1);
    }

    #[test]
    fn selective_drop_discards_whole_frame() {
        let mut b = SwitchBuffer::new(1000, 2, DropPolicy::SelectiveDrop, SelectiveDropParams::default());
        fill(&mut b, 0, 920, 1);
        assert_eq!(b.drop_test(0), DropDecision::Drop);
        let (_, cells) = segment(9180, 0, Direction::Forward, 2);
        let outcomes: Vec<_> = cells.into_iter().map(|c| b.enqueue_cell(c)).collect();
        assert!(outcomes.iter().all(|o| *o == EnqueueOutcome::Dropped(DropCause::Selective)));
        assert_eq!(b.counters()[0].cells_dropped_selective, 193);
        assert_eq!(b.counters()[0].frames_dropped_selective, 1);
        assert_eq!(b.occupancy(), 920);
        // The VC below its fair share is still admitted.
        let (_, other) = segment(0, 1, Direction::Forward, 3);
        assert_eq!(b.enqueue_cell(other[0]), EnqueueOutcome::Queued);
        b.audit().unwrap();
    }

    #[test]
    fn overflow_mid_frame_poisons_tail() {
        let mut b = buffer(100, DropPolicy::SelectiveDrop);
        let (_, cells) = segment(9180, 2, Direction::Forward, 9);
        let outcomes: Vec<_> = cells.into_iter().map(|c| b.enqueue_cell(c)).collect();
        assert!(outcomes[..100].iter().all(|o| *o == EnqueueOutcome::Queued));
        assert!(outcomes[100..]
            .iter()
            .all(|o| *o == EnqueueOutcome::Dropped(DropCause::Overflow)));
        assert_eq!(b.occupancy(), 100);
        // Drain some room; the rest of the poisoned frame stays dropped.
        for _ in 0..50 {
            b.dequeue_cell().unwrap();
        }
        let (_, next) = segment(0, 2, Direction::Forward, 10);
        assert_eq!(b.enqueue_cell(next[0]), EnqueueOutcome::Queued);
        assert_eq!(b.counters()[2].frames_dropped_overflow, 1);
        b.audit().unwrap();
    }

    #[test]
    fn poisoned_frame_stays_dropped_after_space_frees() {
        let mut b = buffer(5, DropPolicy::SelectiveDrop);
        let (_, cells) = segment(9180, 0, Direction::Forward, 1);
        let mut it = cells.into_iter();
        for c in it.by_ref().take(6) {
            b.enqueue_cell(c);
        }
        b.dequeue_cell();
        b.dequeue_cell();
        for c in it {
            assert_eq!(b.enqueue_cell(c), EnqueueOutcome::Dropped(DropCause::Overflow));
        }
        assert_eq!(b.occupancy(), 3);
    }

    #[test]
    fn fifo_across_vcs() {
        let mut b = buffer(10, DropPolicy::SelectiveDrop);
        for (vc, fid) in [(1, 1), (2, 2), (1, 3)] {
            let (_, cells) = segment(0, vc, Direction::Forward, fid);
            b.enqueue_cell(cells[0]);
        }
        let order: Vec<_> = std::iter::from_fn(|| b.dequeue_cell()).map(|c| c.vc).collect();
        assert_eq!(order, vec![1, 2, 1]);
        assert_eq!(b.occupancy(), 0);
        assert_eq!(b.active_vcs(), 0);
    }

    #[test]
    fn tail_drop_is_cell_level() {
        let mut b = buffer(3, DropPolicy::TailDrop);
        let (_, cells) = segment(200, 0, Direction::Forward, 1);
        let outcomes: Vec<_> = cells.iter().map(|c| b.enqueue_cell(*c)).collect();
        assert_eq!(outcomes[3], EnqueueOutcome::Dropped(DropCause::Overflow));
        b.dequeue_cell();
        assert_eq!(b.enqueue_cell(cells[4]), EnqueueOutcome::Queued);
    }

    #[test]
    fn policy_parses() {
        assert_eq!("tail_drop".parse::<DropPolicy>().unwrap(), DropPolicy::TailDrop);
        assert!("red".parse::<DropPolicy>().is_err());
        assert_eq!(DropPolicy::SelectiveDrop.to_string(), "selective_drop");
    }
}
