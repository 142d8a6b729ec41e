use std::collections::BTreeSet;

use caasr::graph::{build_adjacency, build_sppmi, count_cooccurrence};
use caasr::ingest::SequenceDataset;
use proptest::prelude::*;

fn arb_corpus() -> impl Strategy<Value = Vec<Vec<usize>>> {
    prop::collection::vec(prop::collection::vec(0usize..10, 2..9), 1..40)
}

/// Pair counts straight from the raw sequences.
fn brute_counts(seqs: &[Vec<usize>]) -> [[u64; 10]; 10] {
    let mut c = [[0u64; 10]; 10];
    for s in seqs {
        let set: BTreeSet<usize> = s.iter().copied().collect();
        for &i in &set {
            for &j in &set {
                if i != j {
                    c[i][j] += 1;
                }
            }
        }
    }
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn matches_brute_force(seqs in arb_corpus(), shift in 1.0f64..4.0) {
        let counts = count_cooccurrence(&SequenceDataset::from_index_sequences(10, seqs.clone())).unwrap();
        let s = build_sppmi::<f64>(&counts, shift).unwrap();
        let c = brute_counts(&seqs);
        let marginal: Vec<f64> = c.iter().map(|r| r.iter().sum::<u64>() as f64).collect();
        let total = marginal.iter().sum::<f64>() / 2.0;
        for i in 0..10 {
            for j in 0..10 {
                let want = if c[i][j] == 0 {
                    0.0
                } else {
                    ((c[i][j] as f64 * total / (marginal[i] * marginal[j])).ln() - shift.ln()).max(0.0)
                };
                prop_assert!((s.get(i, j) - want).abs() < 1e-12, "({i},{j}) {} vs {want}", s.get(i, j));
                prop_assert!(s.get(i, j) >= 0.0);
                prop_assert_eq!(s.get(i, j), s.get(j, i));
            }
            prop_assert_eq!(s.get(i, i), 0.0);
        }
    }

    #[test]
    fn larger_shift_never_adds_entries(seqs in arb_corpus(), a in 1.0f64..3.0, extra in 0.0f64..3.0) {
        let counts = count_cooccurrence(&SequenceDataset::from_index_sequences(10, seqs)).unwrap();
        let lo = build_sppmi::<f64>(&counts, a).unwrap();
        let hi = build_sppmi::<f64>(&counts, a + extra).unwrap();
        prop_assert!(hi.nnz() <= lo.nnz());
        for (i, j, v) in hi.iter() {
            prop_assert!(v <= lo.get(i, j) + 1e-12);
        }
    }

    #[test]
    fn adjacency_threshold_is_monotone(seqs in arb_corpus(), t in 1u64..6) {
        let counts = count_cooccurrence(&SequenceDataset::from_index_sequences(10, seqs)).unwrap();
        let a = build_adjacency::<f64>(&counts, t).unwrap();
        let b = build_adjacency::<f64>(&counts, t + 1).unwrap();
        prop_assert!(b.n_edges <= a.n_edges);
        prop_assert!(a.matrix.is_symmetric(0.0));
        prop_assert!(a.matrix.iter().all(|(i, j, v)| i != j && v == 1.0));
    }
}

#[test]
fn rejects_shift_below_one() {
    let counts = count_cooccurrence(&SequenceDataset::from_index_sequences(3, vec![vec![0, 1, 2]])).unwrap();
    assert!(build_sppmi::<f64>(&counts, 0.5).is_err());
}
