//! Sequences mixing a first-order Markov chain with order-free bundles.
//!
//! At each step the next item is a Markov successor with probability
//! `markov_weight`, otherwise a uniformly chosen other member of the current
//! item's bundle. Items outside every bundle always take the Markov step.

use std::ops::RangeInclusive;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::ingest::{InteractionEvent, SequenceDataset};
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_items: usize,
    pub n_sequences: usize,
    pub seq_len_range: RangeInclusive<usize>,
    pub n_bundles: usize,
    pub bundle_size: usize,
    pub markov_weight: f64,
    /// Successors per item in the Markov chain.
    pub markov_fanout: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_items: 300,
            n_sequences: 2000,
            seq_len_range: 5..=15,
            n_bundles: 30,
            bundle_size: 5,
            markov_weight: 0.5,
            markov_fanout: 3,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.bundle_size < 2 {
            return bad("bundle_size must be >= 2".into());
        }
        if self.n_bundles * self.bundle_size > self.n_items {
            return bad(format!(
                "{} bundles of {} do not fit in {} items",
                self.n_bundles, self.bundle_size, self.n_items
            ));
        }
        if !(0.0..=1.0).contains(&self.markov_weight) {
            return bad(format!("markov_weight {} not in [0, 1]", self.markov_weight));
        }
        if *self.seq_len_range.start() < 2 || self.seq_len_range.is_empty() {
            return bad(format!("sequence length range {:?} must lie in [2, ∞)", self.seq_len_range));
        }
        if self.markov_fanout == 0 || self.markov_fanout > self.n_items {
            return bad(format!("markov_fanout must be in 1..={}", self.n_items));
        }
        if self.n_sequences == 0 {
            return bad("n_sequences must be >= 1".into());
        }
        Ok(())
    }
}

/// The planted structure behind a generated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthTruth {
    pub bundles: Vec<Vec<usize>>,
    /// Bundle index per item.
    pub bundle_of: Vec<Option<usize>>,
    /// Successor distribution per item, `(item, probability)`.
    pub transitions: Vec<Vec<(usize, f64)>>,
}

impl SynthTruth {
    pub fn transition_prob(&self, from: usize, to: usize) -> f64 {
        self.transitions[from].iter().filter(|&&(j, _)| j == to).map(|&(_, p)| p).sum()
    }
}

fn draw(rng: &mut impl Rng, dist: &[(usize, f64)]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for &(j, p) in dist {
        acc += p;
        if u < acc {
            return j;
        }
    }
    dist.last().expect("non-empty distribution").0
}

pub fn generate(cfg: &SynthConfig) -> Result<SequenceDataset> {
    generate_with_truth(cfg).map(|(ds, _)| ds)
}

pub fn generate_with_truth(cfg: &SynthConfig) -> Result<(SequenceDataset, SynthTruth)> {
    cfg.validate()?;
    let n = cfg.n_items;
    let mut rng = seed::rng(cfg.seed, seed::SYNTH);

    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let bundles: Vec<Vec<usize>> = perm
        .chunks(cfg.bundle_size)
        .take(cfg.n_bundles)
        .map(|c| {
            let mut b = c.to_vec();
            b.sort_unstable();
            b
        })
        .collect();
    let mut bundle_of = vec![None; n];
    for (b, members) in bundles.iter().enumerate() {
        for &i in members {
            bundle_of[i] = Some(b);
        }
    }

    let transitions: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|_| {
            let succ = rand::seq::index::sample(&mut rng, n, cfg.markov_fanout).into_vec();
            let w: Vec<f64> = succ.iter().map(|_| rng.random_range(0.5..1.5)).collect();
            let total: f64 = w.iter().sum();
            succ.into_iter().zip(w).map(|(j, x)| (j, x / total)).collect()
        })
        .collect();

    let mut seqs = Vec::with_capacity(cfg.n_sequences);
    for _ in 0..cfg.n_sequences {
        let len = rng.random_range(cfg.seq_len_range.clone());
        let mut cur = rng.random_range(0..n);
        let mut s = Vec::with_capacity(len);
        s.push(cur);
        while s.len() < len {
            let markov = rng.random::<f64>() < cfg.markov_weight;
            cur = match (markov, bundle_of[cur]) {
                (false, Some(b)) => {
                    let others: Vec<usize> = bundles[b].iter().copied().filter(|&i| i != cur).collect();
                    others[rng.random_range(0..others.len())]
                }
                _ => draw(&mut rng, &transitions[cur]),
            };
            s.push(cur);
        }
        seqs.push(s);
    }
    let truth = SynthTruth {
        bundles,
        bundle_of,
        transitions,
    };
    Ok((SequenceDataset::from_index_sequences(n, seqs), truth))
}

/// Interaction events with timestamps equal to the step index.
pub fn to_events(ds: &SequenceDataset) -> Vec<InteractionEvent> {
    ds.sequences
        .iter()
        .flat_map(|s| {
            s.items.iter().enumerate().map(move |(t, &i)| InteractionEvent {
                user: format!("u{}", ds.users.id(s.user)),
                item: format!("i{}", ds.items.id(i)),
                timestamp: t as u64,
            })
        })
        .collect()
}
