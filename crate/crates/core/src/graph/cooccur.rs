use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ingest::SequenceDataset;
use crate::Scalar;

use super::SparseMatrix;

/// Per-sequence co-occurrence counts over unordered item pairs.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CooccurrenceCounts {
    dim: usize,
    pairs: BTreeMap<(usize, usize), u64>,
    item_counts: Vec<u64>,
    total_pairs: u64,
}

impl CooccurrenceCounts {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            pairs: BTreeMap::new(),
            item_counts: vec![0; dim],
            total_pairs: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Count for the unordered pair `{i, j}`; zero on the diagonal.
    pub fn count(&self, i: usize, j: usize) -> u64 {
        let key = if i < j { (i, j) } else { (j, i) };
        self.pairs.get(&key).copied().unwrap_or(0)
    }

    /// Non-zero pairs `(i, j, count)` with `i < j`, in lexicographic order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        self.pairs.iter().map(|(&(i, j), &c)| (i, j, c))
    }

    pub fn n_pairs(&self) -> usize {
        self.pairs.len()
    }

    /// Marginal `#(I_i) = Σ_j count(i, j)`.
    pub fn item_count(&self, i: usize) -> u64 {
        self.item_counts[i]
    }

    /// `#pairs = Σ count` over unordered pairs.
    pub fn total_pairs(&self) -> u64 {
        self.total_pairs
    }

    fn add_pair(&mut self, i: usize, j: usize, c: u64) {
        *self.pairs.entry((i, j)).or_default() += c;
        self.item_counts[i] += c;
        self.item_counts[j] += c;
        self.total_pairs += c;
    }

    fn add_sequence(&mut self, items: &[usize]) {
        let mut uniq = items.to_vec();
        uniq.sort_unstable();
        uniq.dedup();
        for (a, &i) in uniq.iter().enumerate() {
            for &j in &uniq[a + 1..] {
                self.add_pair(i, j, 1);
            }
        }
    }

    /// Pointwise sum of two count maps over the same item set.
    pub fn merge(mut self, other: Self) -> Self {
        assert_eq!(self.dim, other.dim);
        for (i, j, c) in other.pairs() {
            self.add_pair(i, j, c);
        }
        self
    }

    /// Symmetric count matrix with both `(i, j)` and `(j, i)` stored.
    pub fn to_matrix<T: Scalar>(&self) -> SparseMatrix<T> {
        let entries = self
            .pairs()
            .flat_map(|(i, j, c)| {
                let v = T::from_u64(c).expect("count fits scalar");
                [(i, j, v), (j, i, v)]
            })
            .collect();
        SparseMatrix::from_triplets(self.dim, entries).expect("valid pair indices")
    }
}

/// Counts, for every unordered item pair, the number of sequences containing
/// both items. Repeats within a sequence count once; self pairs are ignored.
pub fn count_cooccurrence(train: &SequenceDataset) -> Result<CooccurrenceCounts> {
    if train.is_empty() {
        return Err(Error::EmptyInput("training sequences".into()));
    }
    let dim = train.n_items();
    let counts = train
        .sequences
        .par_chunks(256)
        .map(|chunk| {
            let mut c = CooccurrenceCounts::new(dim);
            for s in chunk {
                c.add_sequence(&s.items);
            }
            c
        })
        .reduce(|| CooccurrenceCounts::new(dim), CooccurrenceCounts::merge);
    Ok(counts)
}

/// Binary item graph built from co-occurrence counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Adjacency<T> {
    pub matrix: SparseMatrix<T>,
    pub n_edges: usize,
}

impl<T: Scalar> Adjacency<T> {
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// Undirected edges `(i, j)` with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.matrix.iter().filter(|&(i, j, _)| i < j).map(|(i, j, _)| (i, j))
    }

    /// `2E / (N (N - 1))`; zero for graphs with fewer than two nodes.
    pub fn density(&self) -> f64 {
        let n = self.dim() as f64;
        if n < 2.0 {
            0.0
        } else {
            2.0 * self.n_edges as f64 / (n * (n - 1.0))
        }
    }

    /// Present when the graph has no edges, in which case every graph model
    /// degenerates to its zero-hop behaviour.
    pub fn warning(&self) -> Option<String> {
        (self.n_edges == 0).then(|| {
            format!(
                "item graph over {} items has no edges; graph convolution reduces to the identity",
                self.dim()
            )
        })
    }

    pub fn from_edges(dim: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut entries = Vec::with_capacity(edges.len() * 2);
        for &(i, j) in edges {
            if i == j {
                return Err(Error::Contract(format!("self loop at {i}")));
            }
            entries.push((i, j, T::one()));
            entries.push((j, i, T::one()));
        }
        let matrix = SparseMatrix::from_triplets(dim, entries)?;
        Ok(Self {
            n_edges: edges.len(),
            matrix,
        })
    }
}

/// `A(i, j) = 1` where the pair count reaches `threshold`.
pub fn build_adjacency<T: Scalar>(counts: &CooccurrenceCounts, threshold: u64) -> Result<Adjacency<T>> {
    if threshold < 1 {
        return Err(Error::InvalidArgument("graph threshold must be >= 1".into()));
    }
    let edges: Vec<(usize, usize)> = counts
        .pairs()
        .filter(|&(_, _, c)| c >= threshold)
        .map(|(i, j, _)| (i, j))
        .collect();
    Adjacency::from_edges(counts.dim(), &edges)
}
