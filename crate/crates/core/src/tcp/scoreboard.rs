use std::ops::Range;

/// Sorted set of disjoint, non-adjacent byte ranges.
///
/// Used by the receiver for out-of-order data above `rcv_nxt` and by the
/// sender for SACKed data above `snd_una`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SackScoreboard {
    ranges: Vec<Range<u64>>,
}

impl SackScoreboard {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn ranges(&self) -> &[Range<u64>] {
        &self.ranges
    }

    pub fn total_bytes(&self) -> u64 {
        self.ranges.iter().map(|r| r.end - r.start).sum()
    }

    pub fn first(&self) -> Option<&Range<u64>> {
        self.ranges.first()
    }

    /// Inserts a range, merging with overlapping or adjacent ones. Returns
    /// whether any new byte was added.
    pub fn insert(&mut self, range: Range<u64>) -> bool {
        if range.start >= range.end {
            return false;
        }
        // first range whose end reaches the new start
        let lo = self.ranges.partition_point(|r| r.end < range.start);
        // first range starting strictly after the new end
        let hi = self.ranges.partition_point(|r| r.start <= range.end);
        if lo == hi {
            self.ranges.insert(lo, range);
            return true;
        }
        let merged = self.ranges[lo].start.min(range.start)..self.ranges[hi - 1].end.max(range.end);
        let covered: u64 = self.ranges[lo..hi].iter().map(|r| r.end - r.start).sum();
        let grew = merged.end - merged.start > covered;
        self.ranges.splice(lo..hi, std::iter::once(merged));
        grew
    }

    /// Drops everything below `point`.
    pub fn trim_below(&mut self, point: u64) {
        let keep_from = self.ranges.partition_point(|r| r.end <= point);
        self.ranges.drain(..keep_from);
        if let Some(first) = self.ranges.first_mut() {
            first.start = first.start.max(point);
        }
    }

    /// Removes and returns the first range if it starts at or below `point`.
    pub fn pop_if_reaches(&mut self, point: u64) -> Option<Range<u64>> {
        if self.ranges.first().is_some_and(|r| r.start <= point) {
            Some(self.ranges.remove(0))
        } else {
            None
        }
    }

    pub fn contains(&self, seq: u64) -> bool {
        let i = self.ranges.partition_point(|r| r.end <= seq);
        self.ranges.get(i).is_some_and(|r| r.start <= seq)
    }

    /// The range containing `seq`, if any.
    pub fn range_containing(&self, seq: u64) -> Option<Range<u64>> {
        let i = self.ranges.partition_point(|r| r.end <= seq);
        self.ranges.get(i).filter(|r| r.start <= seq).cloned()
    }

    /// Recorded bytes inside `[from, to)`.
    pub fn bytes_in(&self, from: u64, to: u64) -> u64 {
        if from >= to {
            return 0;
        }
        let i = self.ranges.partition_point(|r| r.end <= from);
        self.ranges[i..]
            .iter()
            .take_while(|r| r.start < to)
            .map(|r| r.end.min(to) - r.start.max(from))
            .sum()
    }

    /// Bytes in `[from, to)` that are not recorded.
    pub fn gap_bytes_in(&self, from: u64, to: u64) -> u64 {
        to.saturating_sub(from) - self.bytes_in(from, to)
    }

    /// First unrecorded byte at or after `from`.
    pub fn next_gap(&self, from: u64) -> u64 {
        match self.range_containing(from) {
            Some(r) => r.end,
            None => from,
        }
    }

    pub fn highest(&self) -> Option<u64> {
        self.ranges.last().map(|r| r.end)
    }

    pub(crate) fn is_well_formed(&self) -> bool {
        self.ranges.iter().all(|r| r.start < r.end)
            && self.ranges.windows(2).all(|w| w[0].end < w[1].start)
    }
}
