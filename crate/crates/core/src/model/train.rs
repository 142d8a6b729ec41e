//! Session-parallel training shared by every GRU-based model.
//!
//! A [`SequentialObjective`] decides where the item table comes from and may
//! add terms to the loss; the loop, initialization order and random streams
//! are common, so two objectives producing the same item table train
//! identically.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::graph::ChebyshevBasis;
use crate::ingest::SequenceDataset;
use crate::seed;
use crate::tensor::{rmsprop_step, DenseTensor, ParamStore, Tape, Var, INIT_RANGE};
use crate::Scalar;

use super::batch::{SessionBatch, SessionCursor};
use super::config::{CaasrConfig, NegativeSampling};
use super::embed::{graph_embed_tape, theta_name};
use super::gru::{apply_reset, gru_step, init_gru, GruIds, GruWeights};
use super::predict::GruRecommender;

pub trait SequentialObjective<'a, T: Scalar> {
    /// Registers the parameters the item table is built from. Drawn before
    /// the GRU weights.
    fn init_item_params(&self, store: &mut ParamStore<T>, n_items: usize, d: usize, rng: &mut seed::Rng) -> Result<()>;

    /// Registers anything else. Drawn after the GRU weights.
    fn init_extra_params(&self, _store: &mut ParamStore<T>, _n_items: usize, _d: usize, _rng: &mut seed::Rng) -> Result<()> {
        Ok(())
    }

    /// Called before each epoch.
    fn begin_epoch(&mut self, _epoch: usize, _root_seed: u64) -> Result<()> {
        Ok(())
    }

    /// The N×d item embeddings fed to the GRU and used for scoring.
    fn item_table(&self, tape: &mut Tape<'a, T>, store: &ParamStore<T>) -> Result<Var>;

    /// Terms added to the per-batch BPR sum.
    fn auxiliary_loss(&self, _tape: &mut Tape<'a, T>, _store: &ParamStore<T>) -> Result<Option<Var>> {
        Ok(None)
    }

    /// Item table as plain values.
    fn item_table_values(&self, store: &ParamStore<T>) -> Result<DenseTensor<T>> {
        let mut tape = Tape::new();
        let z = self.item_table(&mut tape, store)?;
        Ok(tape.value(z).clone())
    }
}

/// Item table is a free embedding matrix `theta.0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Gru4RecObjective;

impl<'a, T: Scalar> SequentialObjective<'a, T> for Gru4RecObjective {
    fn init_item_params(&self, store: &mut ParamStore<T>, n: usize, d: usize, rng: &mut seed::Rng) -> Result<()> {
        store.insert(theta_name(0), DenseTensor::uniform(n, d, -INIT_RANGE, INIT_RANGE, rng));
        Ok(())
    }

    fn item_table(&self, tape: &mut Tape<'a, T>, store: &ParamStore<T>) -> Result<Var> {
        tape.param(store, store.require(&theta_name(0))?)
    }
}

/// Item table is the graph convolution of the filter bank `theta.k`.
#[derive(Debug, Clone, Copy)]
pub struct CaasrObjective<'a, T> {
    pub basis: &'a ChebyshevBasis<T>,
}

impl<'a, T: Scalar> SequentialObjective<'a, T> for CaasrObjective<'a, T> {
    fn init_item_params(&self, store: &mut ParamStore<T>, n: usize, d: usize, rng: &mut seed::Rng) -> Result<()> {
        if n != self.basis.dim() {
            return Err(Error::ShapeMismatch {
                op: "caasr",
                detail: format!("basis over {} items, dataset has {n}", self.basis.dim()),
            });
        }
        for k in 0..=self.basis.order() {
            store.insert(theta_name(k), DenseTensor::uniform(n, d, -INIT_RANGE, INIT_RANGE, rng));
        }
        Ok(())
    }

    fn item_table(&self, tape: &mut Tape<'a, T>, store: &ParamStore<T>) -> Result<Var> {
        let theta = (0..=self.basis.order())
            .map(|k| tape.param(store, store.require(&theta_name(k))?))
            .collect::<Result<Vec<_>>>()?;
        graph_embed_tape(tape, &theta, self.basis)
    }
}

/// Random state threaded through one epoch.
pub struct EpochRngs {
    pub dropout: seed::Rng,
    pub negatives: seed::Rng,
}

impl EpochRngs {
    pub fn new(root: u64, epoch: usize) -> Self {
        Self {
            dropout: seed::rng_indexed(root, seed::DROPOUT, epoch as u64),
            negatives: seed::rng_indexed(root, seed::NEGATIVES, epoch as u64),
        }
    }
}

pub struct BatchLoss {
    /// Full objective.
    pub loss: Var,
    /// BPR sum alone.
    pub bpr: Var,
    pub n_triplets: usize,
    /// Un-dropped hidden state, one row per batch row.
    pub hidden: Var,
}

/// Records one batch's objective on `tape`. `h_prev` rows must align with
/// the batch rows; reset rows are zeroed here.
#[allow(clippy::too_many_arguments)]
pub fn batch_loss<'a, T: Scalar, O: SequentialObjective<'a, T> + ?Sized>(
    tape: &mut Tape<'a, T>,
    store: &ParamStore<T>,
    objective: &O,
    cfg: &CaasrConfig,
    batch: &SessionBatch,
    mut h_prev: DenseTensor<T>,
    training: bool,
    rngs: &mut EpochRngs,
) -> Result<BatchLoss> {
    let gru = GruIds::lookup(store)?;
    let table = objective.item_table(tape, store)?;
    apply_reset(&mut h_prev, &batch.reset_mask);
    let h_prev = tape.constant(h_prev)?;
    let z = tape.gather(table, &batch.current_items)?;
    let z = tape.dropout(z, cfg.dropout_rate, training, &mut rngs.dropout)?;
    let vars = gru.vars(tape, store)?;
    let hidden = gru_step(tape, z, h_prev, &vars)?;
    let h_out = tape.dropout(hidden, cfg.dropout_rate, training, &mut rngs.dropout)?;

    let n_items = tape.value(table).rows();
    let (cols, triplets) = match cfg.negatives {
        NegativeSampling::InBatch => batch.in_batch_triplets(),
        NegativeSampling::Uniform(n) => batch.uniform_triplets(n, n_items, &mut rngs.negatives),
    };
    let n_triplets = triplets.len();
    let targets = tape.gather(table, &cols)?;
    let scores = tape.matmul_bt(h_out, targets)?;
    let bpr = tape.pairwise_bpr(scores, triplets)?;

    let mut loss = bpr;
    if let Some(aux) = objective.auxiliary_loss(tape, store)? {
        loss = tape.add(loss, aux)?;
    }
    if cfg.l2_lambda > 0.0 {
        let half = T::lit(cfg.l2_lambda / 2.0);
        for id in store.ids() {
            let p = tape.param(store, id)?;
            let sq = tape.sum_squares(p)?;
            let term = tape.scale(sq, half)?;
            loss = tape.add(loss, term)?;
        }
    }
    Ok(BatchLoss {
        loss,
        bpr,
        n_triplets,
        hidden,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome<T> {
    pub store: ParamStore<T>,
    /// Mean BPR loss per triplet, per epoch.
    pub epoch_losses: Vec<f64>,
    /// Mean BPR loss per triplet, per batch in order (zero for batches without triplets).
    pub batch_losses: Vec<f64>,
}

impl<T: Scalar> TrainOutcome<T> {
    pub fn gru(&self) -> Result<GruWeights<T>> {
        GruWeights::from_store(&self.store)
    }
}

/// Epochs × lockstep batches with RMSprop. Parameters are drawn from the
/// `init` stream, sequence order from `shuffle`, masks from `dropout`.
pub fn train_sequential<'a, T: Scalar, O: SequentialObjective<'a, T>>(
    cfg: &CaasrConfig,
    train: &SequenceDataset,
    objective: &mut O,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyInput("training sequences".into()));
    }
    train.validate()?;
    let (n, d) = (train.n_items(), cfg.latent_dim);
    let mut init_rng = seed::rng(cfg.seed, seed::INIT);
    let mut store = ParamStore::new();
    objective.init_item_params(&mut store, n, d, &mut init_rng)?;
    init_gru(&mut store, d, &mut init_rng);
    objective.init_extra_params(&mut store, n, d, &mut init_rng)?;
    let opt = cfg.optimizer();

    let mut epoch_losses = Vec::with_capacity(cfg.max_epochs);
    let mut batch_losses = Vec::new();
    for epoch in 0..cfg.max_epochs {
        objective.begin_epoch(epoch, cfg.seed)?;
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut seed::rng_indexed(cfg.seed, seed::SHUFFLE, epoch as u64));
        let mut rngs = EpochRngs::new(cfg.seed, epoch);
        let mut cursor = SessionCursor::new(train, cfg.batch_size, order);
        let mut hidden = DenseTensor::<T>::zeros(&[cfg.batch_size, d]);
        let (mut sum, mut count) = (0.0, 0usize);
        let mut index = 0;
        while let Some(batch) = cursor.next_batch() {
            let diverged = |e: Error| match e {
                Error::NonFinite(what) => Error::Diverged {
                    epoch,
                    batch: index,
                    detail: format!("non-finite {what}"),
                },
                other => other,
            };
            let h_prev = hidden.gather_rows(&batch.lanes)?;
            let mut tape = Tape::new();
            let out = batch_loss(&mut tape, &store, objective, cfg, &batch, h_prev, true, &mut rngs).map_err(diverged)?;
            let bpr = tape.scalar(out.bpr).to_f64_lossy();
            if !tape.scalar(out.loss).is_finite() {
                return Err(diverged(Error::NonFinite("loss".into())));
            }
            let grads = tape.backward(out.loss).map_err(diverged)?;
            grads.accumulate_into(&mut store);
            rmsprop_step(&mut store, &opt);
            if !store.all_finite() {
                return Err(diverged(Error::NonFinite("parameters".into())));
            }
            let h_new = tape.value(out.hidden);
            for (r, &lane) in batch.lanes.iter().enumerate() {
                hidden.row_mut(lane).copy_from_slice(h_new.row(r));
            }
            sum += bpr;
            count += out.n_triplets;
            batch_losses.push(if out.n_triplets > 0 { bpr / out.n_triplets as f64 } else { 0.0 });
            index += 1;
        }
        epoch_losses.push(if count > 0 { sum / count as f64 } else { 0.0 });
    }
    Ok(TrainOutcome {
        store,
        epoch_losses,
        batch_losses,
    })
}

/// CAASR: graph-convolved item table. At order 0 this is GRU4Rec.
pub fn train<T: Scalar>(
    cfg: &CaasrConfig,
    train: &SequenceDataset,
    basis: &ChebyshevBasis<T>,
) -> Result<TrainOutcome<T>> {
    if basis.order() != cfg.cheb_order {
        return Err(Error::InvalidArgument(format!(
            "basis order {} differs from configured order {}",
            basis.order(),
            cfg.cheb_order
        )));
    }
    train_sequential(cfg, train, &mut CaasrObjective { basis })
}

pub fn train_gru4rec<T: Scalar>(cfg: &CaasrConfig, train: &SequenceDataset) -> Result<TrainOutcome<T>> {
    train_sequential(cfg, train, &mut Gru4RecObjective)
}

/// Frozen predictor from a trained store.
pub fn recommender<'a, T: Scalar, O: SequentialObjective<'a, T>>(
    objective: &O,
    store: &ParamStore<T>,
) -> Result<GruRecommender<T>> {
    Ok(GruRecommender::new(objective.item_table_values(store)?, GruWeights::from_store(store)?))
}

/// Writes `epoch<TAB>loss` lines.
pub fn format_loss_trace(losses: &[f64]) -> String {
    losses
        .iter()
        .enumerate()
        .map(|(e, l)| format!("{}\t{l}\n", e + 1))
        .collect()
}
