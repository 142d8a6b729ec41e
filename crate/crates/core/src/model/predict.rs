use crate::error::{Error, Result};
use crate::eval::SessionModel;
use crate::tensor::{dot, DenseTensor};
use crate::Scalar;

use super::gru::GruWeights;

/// Indices of the `m` highest `h · Z_i`, ties broken by ascending index,
/// skipping `exclude`.
pub fn predict_topk<T: Scalar>(h: &[T], z: &DenseTensor<T>, m: usize, exclude: &[usize]) -> Result<Vec<usize>> {
    let n = z.rows();
    if m > n {
        return Err(Error::InvalidArgument(format!("top {m} requested from {n} items")));
    }
    if h.len() != z.cols() {
        return Err(Error::ShapeMismatch {
            op: "predict_topk",
            detail: format!("h has {} dims, Z has {}", h.len(), z.cols()),
        });
    }
    let scores: Vec<T> = (0..n).map(|i| dot(h, z.row(i))).collect();
    Ok(top_indices(&scores, m, exclude))
}

/// Ranking by descending score then ascending index.
pub fn top_indices<T: Scalar>(scores: &[T], m: usize, exclude: &[usize]) -> Vec<usize> {
    let mut skip = vec![false; scores.len()];
    for &e in exclude {
        if e < skip.len() {
            skip[e] = true;
        }
    }
    let mut idx: Vec<usize> = (0..scores.len()).filter(|&i| !skip[i]).collect();
    idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    idx.truncate(m);
    idx
}

/// Frozen item table plus GRU, stepping one session at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct GruRecommender<T> {
    pub items: DenseTensor<T>,
    pub gru: GruWeights<T>,
}

impl<T: Scalar> GruRecommender<T> {
    pub fn new(items: DenseTensor<T>, gru: GruWeights<T>) -> Self {
        Self { items, gru }
    }
}

impl<T: Scalar> SessionModel for GruRecommender<T> {
    type State = Vec<T>;

    fn n_items(&self) -> usize {
        self.items.rows()
    }

    fn start(&self) -> Vec<T> {
        vec![T::zero(); self.gru.dim()]
    }

    fn observe(&self, h: &mut Vec<T>, item: usize) {
        *h = self.gru.step(self.items.row(item), h);
    }

    fn scores(&self, h: &Vec<T>) -> Vec<f64> {
        (0..self.items.rows())
            .map(|i| dot(h, self.items.row(i)).to_f64_lossy())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use proptest::prelude::*;

    #[test]
    fn one_hot_and_ties() {
        let z = DenseTensor::<f64>::identity(5);
        let mut h = vec![0.0; 5];
        h[3] = 1.0;
        assert_eq!(predict_topk(&h, &z, 1, &[]).unwrap(), vec![3]);
        assert_eq!(predict_topk(&[0.0; 5], &z, 3, &[]).unwrap(), vec![0, 1, 2]);
        assert_eq!(predict_topk(&h, &z, 2, &[3]).unwrap(), vec![0, 1]);
        assert!(predict_topk(&h, &z, 6, &[]).is_err());
    }

    #[test]
    fn full_ranking_is_sorted_permutation() {
        let mut rng = seed::rng(4, "p");
        let z = DenseTensor::<f64>::uniform(30, 4, -1.0, 1.0, &mut rng);
        let h = DenseTensor::<f64>::uniform(1, 4, -1.0, 1.0, &mut rng);
        let ranked = predict_topk(h.row(0), &z, 30, &[]).unwrap();
        let mut oracle: Vec<(f64, usize)> = (0..30).map(|i| (-dot(h.row(0), z.row(i)), i)).collect();
        oracle.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(ranked, oracle.into_iter().map(|(_, i)| i).collect::<Vec<_>>());
    }

    proptest! {
        #[test]
        fn exclusion_filters_full_ranking(
            scores in prop::collection::vec(-3i32..3, 1..25),
            exclude in prop::collection::vec(0usize..25, 0..6),
            m in 0usize..25,
        ) {
            let s: Vec<f64> = scores.iter().map(|&v| v as f64).collect();
            let full = top_indices(&s, s.len(), &[]);
            let want: Vec<usize> = full.into_iter().filter(|i| !exclude.contains(i)).take(m).collect();
            prop_assert_eq!(top_indices(&s, m, &exclude), want);
        }
    }
}
