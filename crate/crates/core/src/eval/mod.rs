//! Next-item evaluation: rank every target, aggregate Recall@k and MRR@k,
//! and compare two runs with a paired t-test over per-event reciprocal ranks.

mod report;
mod stats;

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ingest::SequenceDataset;

pub use report::{compare_reports, format_report, parse_report, read_report, write_report, Comparison, MetricDelta};
pub use stats::{ln_gamma, paired_ttest, regularized_incomplete_beta, student_t_two_sided, Significance};

/// Cutoffs reported by default.
pub const DEFAULT_KS: [usize; 2] = [10, 20];

/// A frozen model that reads a session one item at a time.
pub trait SessionModel: Sync {
    type State: Send;

    fn n_items(&self) -> usize;

    /// State before any item is seen.
    fn start(&self) -> Self::State;

    fn observe(&self, state: &mut Self::State, item: usize);

    /// A score for every item; higher ranks first.
    fn scores(&self, state: &Self::State) -> Vec<f64>;
}

/// One prediction: after reading position `step`, where did the next item rank?
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankEvent {
    pub sequence_id: usize,
    pub step: usize,
    pub target_item: usize,
    /// 1-based; [`RankEvent::UNRANKED`] when the target was excluded.
    pub rank: usize,
}

impl RankEvent {
    pub const UNRANKED: usize = usize::MAX;

    pub fn reciprocal_rank(&self) -> f64 {
        if self.rank == Self::UNRANKED {
            0.0
        } else {
            1.0 / self.rank as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub recall: BTreeMap<usize, f64>,
    pub mrr: BTreeMap<usize, f64>,
    pub n_events: usize,
    pub per_event: Vec<RankEvent>,
}

impl EvalReport {
    pub fn from_events(per_event: Vec<RankEvent>, ks: &[usize]) -> Result<Self> {
        let mut recall = BTreeMap::new();
        let mut mrr = BTreeMap::new();
        for &k in ks {
            recall.insert(k, recall_at_k(&per_event, k)?);
            mrr.insert(k, mrr_at_k(&per_event, k)?);
        }
        Ok(Self {
            recall,
            mrr,
            n_events: per_event.len(),
            per_event,
        })
    }

    /// Concatenates the events of several reports, renumbering sequences so
    /// they stay distinct, and recomputes the metrics at `ks`.
    pub fn pool(reports: &[EvalReport], ks: &[usize]) -> Result<Self> {
        let mut events = Vec::new();
        let mut offset = 0;
        for r in reports {
            let next = r.per_event.iter().map(|e| e.sequence_id + 1).max().unwrap_or(0);
            events.extend(r.per_event.iter().map(|e| RankEvent {
                sequence_id: e.sequence_id + offset,
                ..*e
            }));
            offset += next;
        }
        Self::from_events(events, ks)
    }

    pub fn ks(&self) -> Vec<usize> {
        self.recall.keys().chain(self.mrr.keys()).copied().collect::<std::collections::BTreeSet<_>>().into_iter().collect()
    }

    pub fn reciprocal_ranks(&self) -> Vec<f64> {
        self.per_event.iter().map(RankEvent::reciprocal_rank).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalOptions {
    pub ks: Vec<usize>,
    /// Drop items already read in the session from the candidate ranking.
    pub exclude_seen: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            ks: DEFAULT_KS.to_vec(),
            exclude_seen: false,
        }
    }
}

/// `1 + #{better} + #{equal with lower index}`, ignoring `excluded`.
pub fn rank_of(scores: &[f64], target: usize, excluded: &[bool]) -> usize {
    if excluded.get(target).copied().unwrap_or(false) {
        return RankEvent::UNRANKED;
    }
    let st = scores[target];
    1 + scores
        .iter()
        .enumerate()
        .filter(|&(i, &s)| !excluded.get(i).copied().unwrap_or(false) && (s > st || (s == st && i < target)))
        .count()
}

/// Ranks every successor in every test sequence. Sequences are evaluated in
/// parallel; events come back in sequence order.
pub fn evaluate<M: SessionModel>(model: &M, test: &SequenceDataset, opts: &EvalOptions) -> Result<EvalReport> {
    if opts.ks.contains(&0) {
        return Err(Error::InvalidArgument("cutoffs must be >= 1".into()));
    }
    let n = model.n_items();
    if let Some(bad) = test.sequences.iter().flat_map(|s| &s.items).find(|&&i| i >= n) {
        return Err(Error::IndexOutOfRange { index: *bad, len: n });
    }
    let per_seq: Vec<Vec<RankEvent>> = test
        .sequences
        .par_iter()
        .enumerate()
        .map(|(sid, seq)| {
            let mut state = model.start();
            let mut seen = vec![false; if opts.exclude_seen { n } else { 0 }];
            let mut events = Vec::with_capacity(seq.items.len().saturating_sub(1));
            for (step, w) in seq.items.windows(2).enumerate() {
                model.observe(&mut state, w[0]);
                if opts.exclude_seen {
                    seen[w[0]] = true;
                }
                let scores = model.scores(&state);
                events.push(RankEvent {
                    sequence_id: sid,
                    step,
                    target_item: w[1],
                    rank: rank_of(&scores, w[1], &seen),
                });
            }
            events
        })
        .collect();
    EvalReport::from_events(per_seq.into_iter().flatten().collect(), &opts.ks)
}

fn check(events: &[RankEvent], k: usize) -> Result<()> {
    if events.is_empty() {
        return Err(Error::EmptyInput("rank events".into()));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    Ok(())
}

/// Fraction of events ranked within the top `k`.
pub fn recall_at_k(events: &[RankEvent], k: usize) -> Result<f64> {
    check(events, k)?;
    let hits = events.iter().filter(|e| e.rank <= k).count();
    Ok(hits as f64 / events.len() as f64)
}

/// Mean of `1/rank` over events, counting ranks beyond `k` as zero.
pub fn mrr_at_k(events: &[RankEvent], k: usize) -> Result<f64> {
    check(events, k)?;
    let sum: f64 = events
        .iter()
        .filter(|e| e.rank <= k)
        .map(|e| 1.0 / e.rank as f64)
        .sum();
    Ok(sum / events.len() as f64)
}
