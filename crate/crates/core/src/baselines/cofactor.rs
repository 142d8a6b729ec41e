//! GRU with a free item table that is also factorized against SPPMI.

use crate::error::{Error, Result};
use crate::graph::SparseMatrix;
use crate::ingest::SequenceDataset;
use crate::model::{train_sequential, CaasrConfig, SequentialObjective, TrainOutcome};
use crate::seed;
use crate::tensor::{DenseTensor, ParamStore, Tape, Var, INIT_RANGE};
use crate::Scalar;

pub const Z_SEQ: &str = "cof.z_seq";
pub const Z_CON: &str = "cof.z_con";

#[derive(Debug, Clone, PartialEq)]
pub struct CofactorConfig {
    pub model: CaasrConfig,
    /// Multiplier on the factorization term.
    pub factor_weight: f64,
}

impl Default for CofactorConfig {
    fn default() -> Self {
        Self {
            model: CaasrConfig {
                learning_rate: 0.01,
                ..Default::default()
            },
            factor_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CofactorParams<T> {
    pub z_seq: DenseTensor<T>,
    pub z_con: DenseTensor<T>,
}

impl<T: Scalar> CofactorParams<T> {
    pub fn from_store(store: &ParamStore<T>) -> Result<Self> {
        let z_seq = store.value(store.require(Z_SEQ)?).clone();
        let z_con = store.value(store.require(Z_CON)?).clone();
        if z_seq.shape() != z_con.shape() {
            return Err(Error::Mismatch("cofactor embeddings differ in shape".into()));
        }
        Ok(Self { z_seq, z_con })
    }
}

/// `L_s + w · Σ_{S_ij ≠ 0} (S_ij − Z_con,i · Z_seq,j)²`. Every stored entry of
/// the symmetric SPPMI matrix is used, so both orientations of a pair count.
pub struct CofactorObjective<'a, T> {
    entries: Vec<(usize, usize, T)>,
    dim: usize,
    weight: T,
    _sppmi: std::marker::PhantomData<&'a T>,
}

impl<'a, T: Scalar> CofactorObjective<'a, T> {
    pub fn new(sppmi: &'a SparseMatrix<T>, weight: f64) -> Self {
        Self {
            entries: sppmi.iter().filter(|&(_, _, v)| v != T::zero()).collect(),
            dim: sppmi.dim(),
            weight: T::lit(weight),
            _sppmi: std::marker::PhantomData,
        }
    }
}

impl<'a, T: Scalar> SequentialObjective<'a, T> for CofactorObjective<'a, T> {
    fn init_item_params(&self, store: &mut ParamStore<T>, n: usize, d: usize, rng: &mut seed::Rng) -> Result<()> {
        if n != self.dim {
            return Err(Error::ShapeMismatch {
                op: "cofactor",
                detail: format!("SPPMI over {} items, dataset has {n}", self.dim),
            });
        }
        store.insert(Z_SEQ, DenseTensor::uniform(n, d, -INIT_RANGE, INIT_RANGE, rng));
        Ok(())
    }

    fn init_extra_params(&self, store: &mut ParamStore<T>, n: usize, d: usize, rng: &mut seed::Rng) -> Result<()> {
        store.insert(Z_CON, DenseTensor::uniform(n, d, -INIT_RANGE, INIT_RANGE, rng));
        Ok(())
    }

    fn item_table(&self, tape: &mut Tape<'a, T>, store: &ParamStore<T>) -> Result<Var> {
        tape.param(store, store.require(Z_SEQ)?)
    }

    fn auxiliary_loss(&self, tape: &mut Tape<'a, T>, store: &ParamStore<T>) -> Result<Option<Var>> {
        if self.entries.is_empty() {
            return Ok(None);
        }
        let z_con = tape.param(store, store.require(Z_CON)?)?;
        let z_seq = tape.param(store, store.require(Z_SEQ)?)?;
        let f = tape.factorization(z_con, z_seq, self.entries.clone())?;
        Ok(Some(tape.scale(f, self.weight)?))
    }
}

pub fn cofactor_train<T: Scalar>(
    train: &SequenceDataset,
    sppmi: &SparseMatrix<T>,
    cfg: &CofactorConfig,
) -> Result<TrainOutcome<T>> {
    train_sequential(&cfg.model, train, &mut CofactorObjective::new(sppmi, cfg.factor_weight))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_sppmi, count_cooccurrence};
    use crate::model::{batch_loss, train_gru4rec, EpochRngs, SessionCursor};
    use crate::tensor::gradient_check_with;

    fn toy() -> SequenceDataset {
        SequenceDataset::from_index_sequences(
            6,
            vec![vec![0, 1, 2, 3], vec![1, 2, 3, 4], vec![0, 1, 2], vec![2, 3, 4, 5], vec![4, 5, 0, 1]],
        )
    }

    fn cfg() -> CofactorConfig {
        CofactorConfig {
            model: CaasrConfig { latent_dim: 4, batch_size: 2, max_epochs: 4, seed: 3, ..Default::default() },
            factor_weight: 1.0,
        }
    }

    #[test]
    fn empty_sppmi_is_gru4rec() {
        let s = SparseMatrix::<f64>::zeros(6);
        let a = cofactor_train(&toy(), &s, &cfg()).unwrap();
        let b = train_gru4rec::<f64>(&cfg().model, &toy()).unwrap();
        assert_eq!(a.batch_losses, b.batch_losses);
        assert_eq!(a.epoch_losses, b.epoch_losses);
        assert_eq!(a.store.value(a.store.require(Z_SEQ).unwrap()), b.store.value(b.store.require("theta.0").unwrap()));
    }

    fn sppmi() -> SparseMatrix<f64> {
        let clustered = SequenceDataset::from_index_sequences(
            6,
            vec![vec![0, 1], vec![0, 1], vec![2, 3], vec![2, 3], vec![4, 5], vec![0, 1, 4], vec![2, 5]],
        );
        let s = build_sppmi(&count_cooccurrence(&clustered).unwrap(), 1.0).unwrap();
        assert!(s.nnz() > 0);
        s
    }

    #[test]
    fn zero_context_gives_squared_sppmi() {
        let s = sppmi();
        let obj = CofactorObjective::new(&s, 1.0);
        let mut store = ParamStore::<f64>::new();
        store.insert(Z_SEQ, DenseTensor::uniform(6, 3, -1.0, 1.0, &mut seed::rng(0, "c")));
        store.insert(Z_CON, DenseTensor::zeros(&[6, 3]));
        let mut tape = Tape::new();
        let aux = obj.auxiliary_loss(&mut tape, &store).unwrap().unwrap();
        let want: f64 = s.iter().map(|(_, _, v)| v * v).sum();
        assert!((tape.scalar(aux) - want).abs() < 1e-12);
    }

    #[test]
    fn combined_gradient_check() {
        let s = sppmi();
        let obj = CofactorObjective::new(&s, 1.0);
        let c = CaasrConfig { dropout_rate: 0.0, ..cfg().model };
        let mut store = ParamStore::new();
        let mut rng = seed::rng(2, seed::INIT);
        obj.init_item_params(&mut store, 6, 4, &mut rng).unwrap();
        crate::model::init_gru(&mut store, 4, &mut rng);
        obj.init_extra_params(&mut store, 6, 4, &mut rng).unwrap();
        for p in store.iter_mut() {
            p.value = p.value.map(|v| v * 6.0);
        }
        let data = toy();
        let batch = SessionCursor::in_order(&data, 2).next_batch().unwrap();
        let err = gradient_check_with(&store, 1e-6, 300, 0, |tape, st| {
            let h = DenseTensor::zeros(&[2, 4]);
            Ok(batch_loss(tape, st, &obj, &c, &batch, h, false, &mut EpochRngs::new(0, 0))?.loss)
        })
        .unwrap();
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn combined_loss_decreases() {
        let s = sppmi();
        let mut c = cfg();
        c.model.max_epochs = 25;
        let obj = CofactorObjective::new(&s, 1.0);
        let first = {
            let mut store = ParamStore::new();
            let mut rng = seed::rng(c.model.seed, seed::INIT);
            obj.init_item_params(&mut store, 6, 4, &mut rng).unwrap();
            crate::model::init_gru(&mut store, 4, &mut rng);
            obj.init_extra_params(&mut store, 6, 4, &mut rng).unwrap();
            let mut tape = Tape::new();
            let v = obj.auxiliary_loss(&mut tape, &store).unwrap().unwrap();
            tape.scalar(v)
        };
        let out = cofactor_train(&toy(), &s, &c).unwrap();
        let mut tape = Tape::new();
        let v = obj.auxiliary_loss(&mut tape, &out.store).unwrap().unwrap();
        assert!(tape.scalar(v) < first);
        assert!(out.epoch_losses.last().unwrap() < &out.epoch_losses[0]);
    }
}
