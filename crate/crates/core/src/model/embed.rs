use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::ChebyshevBasis;
use crate::tensor::{DenseTensor, ParamStore, Tape, Var, INIT_RANGE};
use crate::Scalar;

use super::gru::GruWeights;

pub fn theta_name(k: usize) -> String {
    format!("theta.{k}")
}

/// `Z = Σ_k T_k Θ_k`. The one-hot input features are the identity, so the
/// basis multiplies the filters directly.
pub fn graph_embed<T: Scalar>(theta: &[DenseTensor<T>], basis: &ChebyshevBasis<T>) -> Result<DenseTensor<T>> {
    check_filters(theta.iter().map(|t| t.shape()), basis)?;
    let (n, d) = (basis.dim(), theta[0].cols());
    let mut z = DenseTensor::zeros(&[n, d]);
    for (t_k, th) in basis.terms().iter().zip(theta) {
        let part = DenseTensor::matrix(n, d, t_k.mul_dense(th.data(), d));
        z.add_assign(&part);
    }
    Ok(z)
}

/// Tape version of [`graph_embed`].
pub fn graph_embed_tape<'a, T: Scalar>(
    tape: &mut Tape<'a, T>,
    theta: &[Var],
    basis: &'a ChebyshevBasis<T>,
) -> Result<Var> {
    let shapes: Vec<Vec<usize>> = theta.iter().map(|&v| tape.value(v).shape().to_vec()).collect();
    check_filters(shapes.iter().map(Vec::as_slice), basis)?;
    let mut z = tape.spmm(basis.term(0), theta[0])?;
    for (k, &th) in theta.iter().enumerate().skip(1) {
        let part = tape.spmm(basis.term(k), th)?;
        z = tape.add(z, part)?;
    }
    Ok(z)
}

fn check_filters<'s>(mut shapes: impl ExactSizeIterator<Item = &'s [usize]>, basis: &ChebyshevBasis<impl Scalar>) -> Result<()> {
    if shapes.len() != basis.order() + 1 {
        return Err(Error::ShapeMismatch {
            op: "graph_embed",
            detail: format!("{} filters for a basis of order {}", shapes.len(), basis.order()),
        });
    }
    let first = shapes.next().expect("at least one filter").to_vec();
    if first.len() != 2 || first[0] != basis.dim() || shapes.any(|s| s != first.as_slice()) {
        return Err(Error::ShapeMismatch {
            op: "graph_embed",
            detail: format!("filters must all be {}×d", basis.dim()),
        });
    }
    Ok(())
}

/// Filter bank plus GRU weights.
#[derive(Debug, Clone, PartialEq)]
pub struct CaasrParams<T> {
    pub theta: Vec<DenseTensor<T>>,
    pub gru: GruWeights<T>,
}

impl<T: Scalar> CaasrParams<T> {
    /// `U(−0.1, 0.1)` filters then GRU weights, drawn in checkpoint-name order.
    pub fn init(n_items: usize, d: usize, order: usize, rng: &mut impl Rng) -> Self {
        let mut store = ParamStore::new();
        for k in 0..=order {
            store.insert(theta_name(k), DenseTensor::uniform(n_items, d, -INIT_RANGE, INIT_RANGE, rng));
        }
        super::gru::init_gru(&mut store, d, rng);
        Self::from_store(&store).expect("freshly built store")
    }

    pub fn order(&self) -> usize {
        self.theta.len() - 1
    }

    pub fn from_store(store: &ParamStore<T>) -> Result<Self> {
        let mut theta = Vec::new();
        while let Some(id) = store.id(&theta_name(theta.len())) {
            theta.push(store.value(id).clone());
        }
        if theta.is_empty() {
            return Err(Error::Mismatch("missing parameter theta.0".into()));
        }
        let p = Self {
            theta,
            gru: GruWeights::from_store(store)?,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let shape = self.theta[0].shape();
        if shape.len() != 2 || shape[1] != self.gru.dim() || self.theta.iter().any(|t| t.shape() != shape) {
            return Err(Error::Mismatch("filter bank shapes disagree with GRU dimension".into()));
        }
        if !self.theta.iter().chain(&self.gru.w).chain(&self.gru.u).all(DenseTensor::is_finite) {
            return Err(Error::NonFinite("parameters".into()));
        }
        Ok(())
    }

    pub fn named(&self) -> Vec<(String, DenseTensor<T>)> {
        let mut out: Vec<_> = self
            .theta
            .iter()
            .enumerate()
            .map(|(k, t)| (theta_name(k), t.clone()))
            .collect();
        out.extend(self.gru.named());
        out
    }

    pub fn to_store(&self) -> ParamStore<T> {
        ParamStore::from_named_values(self.named())
    }

    pub fn sq_norm(&self) -> T {
        self.theta.iter().chain(&self.gru.w).chain(&self.gru.u).map(DenseTensor::sq_norm).sum()
    }
}
