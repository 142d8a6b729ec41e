//! GRU with a free item table tied to a graph autoencoder's node embeddings
//! through an L2 penalty.

use std::collections::HashSet;

use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{Adjacency, ChebyshevBasis};
use crate::ingest::SequenceDataset;
use crate::model::{graph_embed_tape, train_sequential, CaasrConfig, SequentialObjective, TrainOutcome};
use crate::seed;
use crate::tensor::{DenseTensor, ParamStore, Tape, Var, INIT_RANGE};
use crate::Scalar;

pub const Z_SEQ: &str = "gae.z_seq";

pub fn theta_prime_name(k: usize) -> String {
    format!("gae.theta.{k}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphAeConfig {
    /// `cheb_order` is the encoder order.
    pub model: CaasrConfig,
    /// Sampled non-edges per existing edge.
    pub neg_multiplier: usize,
    pub link_weight: f64,
    pub tie_weight: f64,
}

impl Default for GraphAeConfig {
    fn default() -> Self {
        Self {
            model: CaasrConfig::default(),
            neg_multiplier: 5,
            link_weight: 1.0,
            tie_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphAeParams<T> {
    pub theta_prime: Vec<DenseTensor<T>>,
    pub z_seq: DenseTensor<T>,
}

impl<T: Scalar> GraphAeParams<T> {
    pub fn from_store(store: &ParamStore<T>) -> Result<Self> {
        let mut theta_prime = Vec::new();
        while let Some(id) = store.id(&theta_prime_name(theta_prime.len())) {
            theta_prime.push(store.value(id).clone());
        }
        if theta_prime.is_empty() {
            return Err(Error::Mismatch(format!("missing parameter {}", theta_prime_name(0))));
        }
        Ok(Self {
            theta_prime,
            z_seq: store.value(store.require(Z_SEQ)?).clone(),
        })
    }
}

/// `count` unordered pairs `i < j` drawn uniformly without replacement from
/// pairs that are neither edges nor self-loops. Returns every such pair when
/// fewer exist.
pub fn sample_non_edges(n: usize, edges: &[(usize, usize)], count: usize, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    let edge_set: HashSet<(usize, usize)> = edges.iter().map(|&(i, j)| (i.min(j), i.max(j))).collect();
    let total = n * n.saturating_sub(1) / 2;
    let available = total - edge_set.len();
    if count >= available || available <= 4 * count {
        let pool: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|p| !edge_set.contains(p))
            .collect();
        if count >= pool.len() {
            return pool;
        }
        let mut picked = sample(rng, pool.len(), count).into_vec();
        picked.sort_unstable();
        return picked.into_iter().map(|k| pool[k]).collect();
    }
    let mut chosen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if i == j {
            continue;
        }
        let p = (i.min(j), i.max(j));
        if !edge_set.contains(&p) && chosen.insert(p) {
            out.push(p);
        }
    }
    out
}

/// `L_s + w_l · BCE(links) + w_t · ‖Z′ − Z_seq‖²`, with
/// `Z′ = Σ_k T_k Θ′_k` and `Z_seq` feeding the GRU.
pub struct GraphAeObjective<'a, T> {
    basis: &'a ChebyshevBasis<T>,
    edges: Vec<(usize, usize)>,
    neg_multiplier: usize,
    link_weight: T,
    tie_weight: T,
    links: Vec<(usize, usize, T)>,
}

impl<'a, T: Scalar> GraphAeObjective<'a, T> {
    pub fn new(basis: &'a ChebyshevBasis<T>, adjacency: &Adjacency<T>, cfg: &GraphAeConfig) -> Result<Self> {
        if adjacency.n_edges == 0 {
            return Err(Error::InvalidArgument("graph autoencoder needs at least one edge".into()));
        }
        if cfg.neg_multiplier < 1 {
            return Err(Error::InvalidArgument("neg_multiplier must be >= 1".into()));
        }
        if adjacency.dim() != basis.dim() {
            return Err(Error::ShapeMismatch {
                op: "graphae",
                detail: format!("adjacency over {} items, basis over {}", adjacency.dim(), basis.dim()),
            });
        }
        let mut obj = Self {
            basis,
            edges: adjacency.edges().collect(),
            neg_multiplier: cfg.neg_multiplier,
            link_weight: T::lit(cfg.link_weight),
            tie_weight: T::lit(cfg.tie_weight),
            links: Vec::new(),
        };
        obj.resample(&mut seed::rng_indexed(cfg.model.seed, seed::GRAPH_NEGATIVES, 0));
        Ok(obj)
    }

    fn resample(&mut self, rng: &mut impl Rng) {
        let neg = sample_non_edges(self.basis.dim(), &self.edges, self.neg_multiplier * self.edges.len(), rng);
        self.links = self
            .edges
            .iter()
            .map(|&(i, j)| (i, j, T::one()))
            .chain(neg.into_iter().map(|(i, j)| (i, j, T::zero())))
            .collect();
    }

    /// Current training links `(i, j, label)`.
    pub fn links(&self) -> &[(usize, usize, T)] {
        &self.links
    }

    pub fn set_links(&mut self, links: Vec<(usize, usize, T)>) {
        self.links = links;
    }

    /// The three terms separately: `(bce, tie)`, unweighted, plus `Z′`.
    pub fn terms(&self, tape: &mut Tape<'a, T>, store: &ParamStore<T>) -> Result<(Var, Var, Var)> {
        let theta = (0..=self.basis.order())
            .map(|k| tape.param(store, store.require(&theta_prime_name(k))?))
            .collect::<Result<Vec<_>>>()?;
        let z_prime = graph_embed_tape(tape, &theta, self.basis)?;
        let bce = tape.link_bce(z_prime, self.links.clone())?;
        let z_seq = tape.param(store, store.require(Z_SEQ)?)?;
        let diff = tape.sub(z_prime, z_seq)?;
        let tie = tape.sum_squares(diff)?;
        Ok((bce, tie, z_prime))
    }
}

impl<'a, T: Scalar> SequentialObjective<'a, T> for GraphAeObjective<'a, T> {
    fn init_item_params(&self, store: &mut ParamStore<T>, n: usize, d: usize, rng: &mut seed::Rng) -> Result<()> {
        if n != self.basis.dim() {
            return Err(Error::ShapeMismatch {
                op: "graphae",
                detail: format!("basis over {} items, dataset has {n}", self.basis.dim()),
            });
        }
        store.insert(Z_SEQ, DenseTensor::uniform(n, d, -INIT_RANGE, INIT_RANGE, rng));
        Ok(())
    }

    fn init_extra_params(&self, store: &mut ParamStore<T>, n: usize, d: usize, rng: &mut seed::Rng) -> Result<()> {
        for k in 0..=self.basis.order() {
            store.insert(theta_prime_name(k), DenseTensor::uniform(n, d, -INIT_RANGE, INIT_RANGE, rng));
        }
        Ok(())
    }

    fn begin_epoch(&mut self, epoch: usize, root_seed: u64) -> Result<()> {
        self.resample(&mut seed::rng_indexed(root_seed, seed::GRAPH_NEGATIVES, epoch as u64));
        Ok(())
    }

    fn item_table(&self, tape: &mut Tape<'a, T>, store: &ParamStore<T>) -> Result<Var> {
        tape.param(store, store.require(Z_SEQ)?)
    }

    fn auxiliary_loss(&self, tape: &mut Tape<'a, T>, store: &ParamStore<T>) -> Result<Option<Var>> {
        let (bce, tie, _) = self.terms(tape, store)?;
        let bce = tape.scale(bce, self.link_weight)?;
        let tie = tape.scale(tie, self.tie_weight)?;
        Ok(Some(tape.add(bce, tie)?))
    }
}

pub fn graphae_train<T: Scalar>(
    train: &SequenceDataset,
    basis: &ChebyshevBasis<T>,
    adjacency: &Adjacency<T>,
    cfg: &GraphAeConfig,
) -> Result<TrainOutcome<T>> {
    if basis.order() != cfg.model.cheb_order {
        return Err(Error::InvalidArgument(format!(
            "basis order {} differs from configured order {}",
            basis.order(),
            cfg.model.cheb_order
        )));
    }
    train_sequential(&cfg.model, train, &mut GraphAeObjective::new(basis, adjacency, cfg)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{basis_from_adjacency, build_adjacency, count_cooccurrence};
    use crate::model::{batch_loss, init_gru, EpochRngs, SessionCursor};
    use crate::tensor::{gradient_check_with, sigmoid};
    use proptest::prelude::*;

    fn toy() -> SequenceDataset {
        SequenceDataset::from_index_sequences(
            7,
            vec![vec![0, 1, 2, 3], vec![1, 2, 3, 4], vec![0, 1, 2], vec![2, 3, 4, 5], vec![4, 5, 6, 1], vec![5, 6, 0]],
        )
    }

    fn graph() -> (Adjacency<f64>, ChebyshevBasis<f64>) {
        let adj = build_adjacency::<f64>(&count_cooccurrence(&toy()).unwrap(), 2).unwrap();
        let basis = basis_from_adjacency(&adj.matrix, 2).unwrap();
        (adj, basis)
    }

    fn cfg() -> GraphAeConfig {
        GraphAeConfig {
            model: CaasrConfig { latent_dim: 4, cheb_order: 2, batch_size: 2, max_epochs: 3, seed: 5, ..Default::default() },
            neg_multiplier: 2,
            ..Default::default()
        }
    }

    #[test]
    fn non_edges_avoid_edges_and_loops() {
        let edges = vec![(0, 1), (2, 3), (1, 4)];
        for s in 0..20 {
            let mut rng = seed::rng(s, "n");
            let got = sample_non_edges(40, &edges, 50, &mut rng);
            assert_eq!(got.len(), 50);
            let set: HashSet<_> = got.iter().copied().collect();
            assert_eq!(set.len(), 50);
            assert!(got.iter().all(|&(i, j)| i < j && !edges.contains(&(i, j))));
            let small = sample_non_edges(5, &edges, 100, &mut rng);
            assert_eq!(small.len(), 10 - 3);
            assert!(small.iter().all(|&(i, j)| i < j && !edges.contains(&(i, j))));
        }
    }

    #[test]
    fn requires_edges_and_multiplier() {
        let (adj, basis) = graph();
        let empty = Adjacency::<f64>::from_edges(7, &[]).unwrap();
        assert!(GraphAeObjective::new(&basis, &empty, &cfg()).is_err());
        let bad = GraphAeConfig { neg_multiplier: 0, ..cfg() };
        assert!(GraphAeObjective::new(&basis, &adj, &bad).is_err());
    }

    #[test]
    fn identical_embeddings_have_no_tie_penalty_and_unit_logit() {
        let basis = ChebyshevBasis::<f64>::identity(2);
        let adj = Adjacency::from_edges(2, &[(0, 1)]).unwrap();
        let mut obj = GraphAeObjective::new(&basis, &adj, &GraphAeConfig { neg_multiplier: 1, ..cfg() }).unwrap();
        obj.set_links(vec![(0, 1, 1.0)]);
        let z = DenseTensor::matrix(2, 2, vec![0.6, 0.8, 0.6, 0.8]);
        let mut store = ParamStore::new();
        store.insert(Z_SEQ, z.clone());
        store.insert(theta_prime_name(0), z);
        let mut tape = Tape::new();
        let (bce, tie, _) = obj.terms(&mut tape, &store).unwrap();
        assert_eq!(tape.scalar(tie), 0.0);
        assert!((tape.scalar(bce) + sigmoid(1.0f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn all_terms_pass_gradient_check() {
        let (adj, basis) = graph();
        let c = GraphAeConfig { model: CaasrConfig { dropout_rate: 0.0, ..cfg().model }, ..cfg() };
        let obj = GraphAeObjective::new(&basis, &adj, &c).unwrap();
        let mut store = ParamStore::new();
        let mut rng = seed::rng(4, seed::INIT);
        obj.init_item_params(&mut store, 7, 4, &mut rng).unwrap();
        init_gru(&mut store, 4, &mut rng);
        obj.init_extra_params(&mut store, 7, 4, &mut rng).unwrap();
        for p in store.iter_mut() {
            p.value = p.value.map(|v| v * 6.0);
        }
        let data = toy();
        let batch = SessionCursor::in_order(&data, 2).next_batch().unwrap();
        let err = gradient_check_with(&store, 1e-6, 400, 0, |tape, st| {
            let h = DenseTensor::zeros(&[2, 4]);
            Ok(batch_loss(tape, st, &obj, &c.model, &batch, h, false, &mut EpochRngs::new(0, 0))?.loss)
        })
        .unwrap();
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn trains_deterministically() {
        let (adj, basis) = graph();
        let a = graphae_train(&toy(), &basis, &adj, &cfg()).unwrap();
        let b = graphae_train(&toy(), &basis, &adj, &cfg()).unwrap();
        assert_eq!(a, b);
        let p = GraphAeParams::from_store(&a.store).unwrap();
        assert_eq!(p.theta_prime.len(), 3);
    }

    proptest! {
        #[test]
        fn bce_invariant_to_non_edge_order(rot in 0usize..50, seed_v in 0u64..100) {
            let (adj, basis) = graph();
            let mut obj = GraphAeObjective::new(&basis, &adj, &cfg()).unwrap();
            let mut store = ParamStore::new();
            let mut rng = seed::rng(seed_v, "b");
            obj.init_item_params(&mut store, 7, 4, &mut rng).unwrap();
            obj.init_extra_params(&mut store, 7, 4, &mut rng).unwrap();
            let eval = |o: &GraphAeObjective<'_, f64>| {
                let mut tape = Tape::new();
                let (bce, _, _) = o.terms(&mut tape, &store).unwrap();
                tape.scalar(bce)
            };
            let before = eval(&obj);
            let mut links = obj.links().to_vec();
            let n_pos = adj.n_edges;
            let neg_len = links.len() - n_pos;
            links[n_pos..].rotate_left(rot % neg_len.max(1));
            links[n_pos..].reverse();
            obj.set_links(links);
            prop_assert!((eval(&obj) - before).abs() < 1e-12);
        }
    }
}
