//! Session-parallel mini-batches.
//!
//! `batch_size` lanes each walk one training sequence; every call advances
//! all active lanes by one step. A lane that reaches the end of its sequence
//! picks up the next unstarted one and flags a reset so the caller zeroes
//! that lane's hidden state.

use rand::Rng;

use crate::ingest::SequenceDataset;
use crate::tensor::Triplet;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionBatch {
    /// Lane index of each row.
    pub lanes: Vec<usize>,
    pub current_items: Vec<usize>,
    pub target_items: Vec<usize>,
    /// True where the row's lane just started a new sequence.
    pub reset_mask: Vec<bool>,
}

impl SessionBatch {
    pub fn len(&self) -> usize {
        self.lanes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lanes.is_empty()
    }

    /// Score-matrix columns plus `(row, positive col, negative col)` triplets
    /// using the other rows' targets as negatives. Colliding targets are skipped.
    pub fn in_batch_triplets(&self) -> (Vec<usize>, Vec<Triplet>) {
        let n = self.len();
        let mut triplets = Vec::with_capacity(n * n.saturating_sub(1));
        for l in 0..n {
            for m in 0..n {
                if m != l && self.target_items[m] != self.target_items[l] {
                    triplets.push((l, l, m));
                }
            }
        }
        (self.target_items.clone(), triplets)
    }

    /// Targets followed by `count` uniformly drawn items shared across rows.
    /// Draws equal to a row's own positive are skipped for that row.
    pub fn uniform_triplets(&self, count: usize, n_items: usize, rng: &mut impl Rng) -> (Vec<usize>, Vec<Triplet>) {
        let n = self.len();
        let mut cols = self.target_items.clone();
        cols.extend((0..count).map(|_| rng.random_range(0..n_items)));
        let mut triplets = Vec::with_capacity(n * count);
        for l in 0..n {
            for c in n..cols.len() {
                if cols[c] != self.target_items[l] {
                    triplets.push((l, l, c));
                }
            }
        }
        (cols, triplets)
    }
}

pub struct SessionCursor<'d> {
    data: &'d SequenceDataset,
    order: Vec<usize>,
    next_seq: usize,
    lanes: Vec<Option<(usize, usize)>>,
    fresh: Vec<bool>,
}

impl<'d> SessionCursor<'d> {
    /// Lanes are filled from `order` (indices into `data.sequences`).
    pub fn new(data: &'d SequenceDataset, batch_size: usize, order: Vec<usize>) -> Self {
        let mut c = Self {
            data,
            order,
            next_seq: 0,
            lanes: vec![None; batch_size],
            fresh: vec![true; batch_size],
        };
        for lane in 0..batch_size {
            c.lanes[lane] = c.load_next();
        }
        c
    }

    pub fn in_order(data: &'d SequenceDataset, batch_size: usize) -> Self {
        Self::new(data, batch_size, (0..data.len()).collect())
    }

    fn load_next(&mut self) -> Option<(usize, usize)> {
        while self.next_seq < self.order.len() {
            let s = self.order[self.next_seq];
            self.next_seq += 1;
            if self.data.sequences[s].items.len() >= 2 {
                return Some((s, 0));
            }
        }
        None
    }

    /// Next lockstep step, or `None` once every sequence is exhausted.
    pub fn next_batch(&mut self) -> Option<SessionBatch> {
        let mut batch = SessionBatch {
            lanes: Vec::new(),
            current_items: Vec::new(),
            target_items: Vec::new(),
            reset_mask: Vec::new(),
        };
        for lane in 0..self.lanes.len() {
            let Some((s, pos)) = self.lanes[lane] else { continue };
            let items = &self.data.sequences[s].items;
            batch.lanes.push(lane);
            batch.current_items.push(items[pos]);
            batch.target_items.push(items[pos + 1]);
            batch.reset_mask.push(self.fresh[lane]);
            if pos + 2 < items.len() {
                self.lanes[lane] = Some((s, pos + 1));
                self.fresh[lane] = false;
            } else {
                self.lanes[lane] = self.load_next();
                self.fresh[lane] = true;
            }
        }
        (!batch.is_empty()).then_some(batch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_simulated_lanes() {
        // a b c = 0 1 2, x y = 3 4, then p q = 5 6 waiting.
        let ds = SequenceDataset::from_index_sequences(7, vec![vec![0, 1, 2], vec![3, 4], vec![5, 6]]);
        let mut cur = SessionCursor::in_order(&ds, 2);

        let b1 = cur.next_batch().unwrap();
        assert_eq!(b1.current_items, vec![0, 3]);
        assert_eq!(b1.target_items, vec![1, 4]);
        assert_eq!(b1.reset_mask, vec![true, true]);
        let (cols, trip) = b1.in_batch_triplets();
        assert_eq!(cols, vec![1, 4]);
        // lane 0: positive b, negative y; lane 1: positive y, negative b
        assert_eq!(trip, vec![(0, 0, 1), (1, 1, 0)]);

        let b2 = cur.next_batch().unwrap();
        assert_eq!(b2.current_items, vec![1, 5]);
        assert_eq!(b2.target_items, vec![2, 6]);
        assert_eq!(b2.reset_mask, vec![false, true]);

        assert!(cur.next_batch().is_none());
    }

    #[test]
    fn colliding_targets_are_skipped() {
        let ds = SequenceDataset::from_index_sequences(3, vec![vec![0, 2], vec![1, 2], vec![0, 1]]);
        let mut cur = SessionCursor::in_order(&ds, 3);
        let b = cur.next_batch().unwrap();
        let (_, trip) = b.in_batch_triplets();
        assert_eq!(trip, vec![(0, 0, 2), (1, 1, 2), (2, 2, 0), (2, 2, 1)]);
    }

    #[test]
    fn lanes_drain_to_end_of_epoch() {
        let ds = SequenceDataset::from_index_sequences(
            4,
            vec![vec![0, 1, 2, 3], vec![1, 2], vec![2, 3, 0], vec![3, 0]],
        );
        let mut cur = SessionCursor::in_order(&ds, 2);
        let mut steps = 0;
        while let Some(b) = cur.next_batch() {
            steps += b.len();
        }
        assert_eq!(steps, ds.n_transitions());
    }
}
