use rand::seq::index::sample;
use rand::SeedableRng;

use crate::error::{Error, Result};
use crate::seed::Rng;
use crate::Scalar;

use super::{ParamId, ParamStore, Tape, Var};

/// Coordinates checked when the store is larger than this.
pub const DEFAULT_CHECK_COORDS: usize = 200;

/// Largest relative error between tape gradients and central differences,
/// `|a − n| / max(|a|, |n|, 1e−8)`, over a sample of parameter coordinates.
pub fn gradient_check<'a, T, F>(store: &ParamStore<T>, eps: T, f: F) -> Result<T>
where
    T: Scalar,
    F: Fn(&mut Tape<'a, T>, &ParamStore<T>) -> Result<Var>,
{
    gradient_check_with(store, eps, DEFAULT_CHECK_COORDS, 0, f)
}

pub fn gradient_check_with<'a, T, F>(
    store: &ParamStore<T>,
    eps: T,
    max_coords: usize,
    seed: u64,
    f: F,
) -> Result<T>
where
    T: Scalar,
    F: Fn(&mut Tape<'a, T>, &ParamStore<T>) -> Result<Var>,
{
    let mut analytic = store.clone();
    analytic.zero_grads();
    {
        let mut tape = Tape::new();
        let loss = f(&mut tape, store)?;
        tape.backward(loss)?.accumulate_into(&mut analytic);
    }

    let coords: Vec<(ParamId, usize)> = store
        .ids()
        .flat_map(|id| (0..store.value(id).len()).map(move |k| (id, k)))
        .collect();
    let chosen: Vec<usize> = if coords.len() <= max_coords {
        (0..coords.len()).collect()
    } else {
        let mut picked = sample(&mut Rng::seed_from_u64(seed), coords.len(), max_coords).into_vec();
        picked.sort_unstable();
        picked
    };

    let eval = |s: &ParamStore<T>| -> Result<T> {
        let mut tape = Tape::new();
        let loss = f(&mut tape, s)?;
        let v = tape.scalar(loss);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite("gradient_check loss".into()))
        }
    };

    let floor = T::lit(1e-8);
    let two = T::lit(2.0);
    let mut probe = store.clone();
    let mut worst = T::zero();
    for &c in &chosen {
        let (id, k) = coords[c];
        let orig = store.value(id).data()[k];
        probe.value_mut(id).data_mut()[k] = orig + eps;
        let up = eval(&probe)?;
        probe.value_mut(id).data_mut()[k] = orig - eps;
        let down = eval(&probe)?;
        probe.value_mut(id).data_mut()[k] = orig;

        let numeric = (up - down) / (two * eps);
        let a = analytic.grad(id).data()[k];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
        worst = worst.max(rel);
    }
    Ok(worst)
}
