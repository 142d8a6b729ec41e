use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{dot, sigmoid, DenseTensor, ParamId, ParamStore, Tape, Var, INIT_RANGE};
use crate::Scalar;

pub const GATES: [char; 3] = ['c', 'r', 'h'];

/// Checkpoint names in initialization order.
pub fn gru_param_names() -> Vec<String> {
    GATES
        .iter()
        .map(|g| format!("gru.W.{g}"))
        .chain(GATES.iter().map(|g| format!("gru.U.{g}")))
        .collect()
}

/// Input (`w`) and recurrent (`u`) weights, each `[update, reset, candidate]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GruWeights<T> {
    pub w: [DenseTensor<T>; 3],
    pub u: [DenseTensor<T>; 3],
}

impl<T: Scalar> GruWeights<T> {
    pub fn zeros(d: usize) -> Self {
        let z = || DenseTensor::zeros(&[d, d]);
        Self {
            w: [z(), z(), z()],
            u: [z(), z(), z()],
        }
    }

    pub fn dim(&self) -> usize {
        self.w[0].rows()
    }

    pub fn from_store(store: &ParamStore<T>) -> Result<Self> {
        let names = gru_param_names();
        let get = |i: usize| -> Result<DenseTensor<T>> { Ok(store.value(store.require(&names[i])?).clone()) };
        let w = [get(0)?, get(1)?, get(2)?];
        let u = [get(3)?, get(4)?, get(5)?];
        let d = w[0].rows();
        if w.iter().chain(&u).any(|m| m.shape() != [d, d]) {
            return Err(Error::Mismatch("GRU weights must all be d×d".into()));
        }
        Ok(Self { w, u })
    }

    pub fn named(&self) -> Vec<(String, DenseTensor<T>)> {
        gru_param_names()
            .into_iter()
            .zip(self.w.iter().chain(&self.u).cloned())
            .collect()
    }

    /// One step for a single row vector. Row-vector convention: `z · W`.
    pub fn step(&self, z: &[T], h: &[T]) -> Vec<T> {
        let d = self.dim();
        let proj = |m: &DenseTensor<T>, x: &[T]| -> Vec<T> {
            let mut out = vec![T::zero(); d];
            for (p, &xv) in x.iter().enumerate() {
                if xv == T::zero() {
                    continue;
                }
                for (o, &mv) in out.iter_mut().zip(m.row(p)) {
                    *o += xv * mv;
                }
            }
            out
        };
        let zc = proj(&self.w[0], z);
        let hc = proj(&self.u[0], h);
        let zr = proj(&self.w[1], z);
        let hr = proj(&self.u[1], h);
        let c: Vec<T> = zc.iter().zip(&hc).map(|(&a, &b)| sigmoid(a + b)).collect();
        let r: Vec<T> = zr.iter().zip(&hr).map(|(&a, &b)| sigmoid(a + b)).collect();
        let rh: Vec<T> = r.iter().zip(h).map(|(&a, &b)| a * b).collect();
        let zh = proj(&self.w[2], z);
        let rhu = proj(&self.u[2], &rh);
        (0..d)
            .map(|i| {
                let cand = (zh[i] + rhu[i]).tanh();
                (T::one() - c[i]) * h[i] + c[i] * cand
            })
            .collect()
    }
}

/// Registers the six GRU matrices, drawing `U(−0.1, 0.1)` in name order.
pub fn init_gru<T: Scalar>(store: &mut ParamStore<T>, d: usize, rng: &mut impl Rng) -> GruIds {
    let ids: Vec<ParamId> = gru_param_names()
        .into_iter()
        .map(|n| store.insert(n, DenseTensor::uniform(d, d, -INIT_RANGE, INIT_RANGE, rng)))
        .collect();
    GruIds {
        w: [ids[0], ids[1], ids[2]],
        u: [ids[3], ids[4], ids[5]],
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GruIds {
    pub w: [ParamId; 3],
    pub u: [ParamId; 3],
}

impl GruIds {
    pub fn lookup<T: Scalar>(store: &ParamStore<T>) -> Result<Self> {
        let names = gru_param_names();
        let id = |i: usize| store.require(&names[i]);
        Ok(Self {
            w: [id(0)?, id(1)?, id(2)?],
            u: [id(3)?, id(4)?, id(5)?],
        })
    }

    pub fn vars<T: Scalar>(&self, tape: &mut Tape<'_, T>, store: &ParamStore<T>) -> Result<GruVars> {
        let mut v = |id| tape.param(store, id);
        Ok(GruVars {
            w: [v(self.w[0])?, v(self.w[1])?, v(self.w[2])?],
            u: [v(self.u[0])?, v(self.u[1])?, v(self.u[2])?],
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GruVars {
    pub w: [Var; 3],
    pub u: [Var; 3],
}

/// Zeroes the rows of `h` flagged in `reset_mask`.
pub fn apply_reset<T: Scalar>(h: &mut DenseTensor<T>, reset_mask: &[bool]) {
    for (r, &reset) in reset_mask.iter().enumerate() {
        if reset {
            h.row_mut(r).iter_mut().for_each(|v| *v = T::zero());
        }
    }
}

/// Batched GRU step on the tape. `h_prev` must already be reset-masked.
pub fn gru_step<T: Scalar>(tape: &mut Tape<'_, T>, z: Var, h_prev: Var, p: &GruVars) -> Result<Var> {
    let gate = |tape: &mut Tape<'_, T>, wi: Var, ui: Var| -> Result<Var> {
        let a = tape.matmul(z, wi)?;
        let b = tape.matmul(h_prev, ui)?;
        let s = tape.add(a, b)?;
        tape.sigmoid(s)
    };
    let c = gate(tape, p.w[0], p.u[0])?;
    let r = gate(tape, p.w[1], p.u[1])?;
    let zh = tape.matmul(z, p.w[2])?;
    let rh = tape.mul(r, h_prev)?;
    let rhu = tape.matmul(rh, p.u[2])?;
    let pre = tape.add(zh, rhu)?;
    let cand = tape.tanh(pre)?;
    let keep = tape.one_minus(c)?;
    let old = tape.mul(keep, h_prev)?;
    let new = tape.mul(c, cand)?;
    tape.add(old, new)
}

/// Plain-value batched step: rows of `z` and `h_prev` are lanes.
pub fn gru_step_values<T: Scalar>(
    z: &DenseTensor<T>,
    h_prev: &DenseTensor<T>,
    weights: &GruWeights<T>,
    reset_mask: &[bool],
) -> Result<DenseTensor<T>> {
    let d = weights.dim();
    if z.cols() != d || h_prev.cols() != d || z.rows() != h_prev.rows() || reset_mask.len() != z.rows() {
        return Err(Error::ShapeMismatch {
            op: "gru_step",
            detail: format!("z {:?}, h {:?}, d {d}, mask {}", z.shape(), h_prev.shape(), reset_mask.len()),
        });
    }
    let mut h = h_prev.clone();
    apply_reset(&mut h, reset_mask);
    let mut out = Vec::with_capacity(z.len());
    for r in 0..z.rows() {
        out.extend(weights.step(z.row(r), h.row(r)));
    }
    Ok(DenseTensor::matrix(z.rows(), d, out))
}

/// `h · (z_p − z_q)`.
pub fn score_triplet<T: Scalar>(h: &[T], z_p: &[T], z_q: &[T]) -> T {
    dot(h, z_p) - dot(h, z_q)
}
