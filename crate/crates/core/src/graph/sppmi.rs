use crate::error::{Error, Result};
use crate::Scalar;

use super::{CooccurrenceCounts, SparseMatrix};

/// Shifted positive PMI over counted pairs:
/// `S(i, j) = max(log(#(i,j) · #pairs / (#(i) · #(j))) − log(shift), 0)`.
///
/// Stored symmetrically; uncounted pairs and clamped entries are absent.
pub fn build_sppmi<T: Scalar>(counts: &CooccurrenceCounts, shift: f64) -> Result<SparseMatrix<T>> {
    if !(shift >= 1.0) {
        return Err(Error::InvalidArgument(format!("SPPMI shift must be >= 1, got {shift}")));
    }
    let total = T::from_u64(counts.total_pairs()).expect("count fits scalar");
    let log_shift = T::lit(shift).ln();
    let mut entries = Vec::new();
    for (i, j, c) in counts.pairs() {
        let num = T::from_u64(c).expect("count fits scalar") * total;
        let den = T::from_u64(counts.item_count(i)).expect("count fits scalar")
            * T::from_u64(counts.item_count(j)).expect("count fits scalar");
        let v = (num / den).ln() - log_shift;
        if v > T::zero() {
            entries.push((i, j, v));
            entries.push((j, i, v));
        }
    }
    SparseMatrix::from_triplets(counts.dim(), entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::count_cooccurrence;
    use crate::ingest::SequenceDataset;

    fn toy() -> CooccurrenceCounts {
        let ds = SequenceDataset::from_index_sequences(3, vec![vec![0, 1, 2], vec![0, 1], vec![1, 2]]);
        count_cooccurrence(&ds).unwrap()
    }

    #[test]
    fn hand_derived_matrix() {
        // #pairs = 5; #(a)=3, #(b)=4, #(c)=3
        // PMI(a,b) = ln(2·5/12) < 0, PMI(b,c) = ln(10/12) < 0, PMI(a,c) = ln(5/9) < 0
        let s = build_sppmi::<f64>(&toy(), 1.0).unwrap();
        assert_eq!(s.nnz(), 0);

        // A corpus with a positive entry: [a,b], [a,b], [c,d]
        let ds = SequenceDataset::from_index_sequences(4, vec![vec![0, 1], vec![0, 1], vec![2, 3]]);
        let c = count_cooccurrence(&ds).unwrap();
        // #pairs = 3; #(a)=#(b)=2, #(c)=#(d)=1
        let s = build_sppmi::<f64>(&c, 1.0).unwrap();
        let ab = (2.0f64 * 3.0 / 4.0).ln();
        let cd = (3.0f64).ln();
        assert!((s.get(0, 1) - ab).abs() < 1e-15);
        assert!((s.get(3, 2) - cd).abs() < 1e-15);
        let s2 = build_sppmi::<f64>(&c, 2.0).unwrap();
        assert_eq!(s2.get(0, 1), 0.0);
        assert!((s2.get(2, 3) - (cd - 2f64.ln())).abs() < 1e-15);
    }

    #[test]
    fn zero_pmi_is_clamped_and_huge_shift_empties() {
        // Two items always together: PMI = ln(1·1/(1·1)) = 0.
        let ds = SequenceDataset::from_index_sequences(2, vec![vec![0, 1]]);
        let c = count_cooccurrence(&ds).unwrap();
        assert_eq!(build_sppmi::<f64>(&c, 1.0).unwrap().nnz(), 0);
        let ds = SequenceDataset::from_index_sequences(4, vec![vec![0, 1], vec![2, 3]]);
        let c = count_cooccurrence(&ds).unwrap();
        assert_eq!(build_sppmi::<f64>(&c, 1.0).unwrap().nnz(), 4);
        assert_eq!(build_sppmi::<f64>(&c, 1e9).unwrap().nnz(), 0);
        assert!(build_sppmi::<f64>(&c, 0.5).is_err());
    }
}
