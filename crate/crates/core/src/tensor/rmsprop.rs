use crate::error::{Error, Result};
use crate::Scalar;

use super::ParamStore;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub decay: f64,
    pub epsilon: f64,
}

impl OptimizerConfig {
    pub const DEFAULT_DECAY: f64 = 0.9;
    pub const DEFAULT_EPSILON: f64 = 1e-8;

    pub fn new(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            decay: Self::DEFAULT_DECAY,
            epsilon: Self::DEFAULT_EPSILON,
        }
    }

    /// `lr = 0` is accepted so frozen-parameter runs can be expressed.
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate {}", self.learning_rate)));
        }
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return Err(Error::InvalidArgument(format!("decay {} not in (0, 1)", self.decay)));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!("epsilon {} must be > 0", self.epsilon)));
        }
        Ok(())
    }
}

/// One RMSprop update over every parameter, then zeroes the gradients.
///
/// `s ← ρ s + (1 − ρ) g²`, `θ ← θ − lr · g / √(s + ε)`.
pub fn rmsprop_step<T: Scalar>(store: &mut ParamStore<T>, cfg: &OptimizerConfig) {
    let lr = T::lit(cfg.learning_rate);
    let rho = T::lit(cfg.decay);
    let one_minus_rho = T::one() - rho;
    let eps = T::lit(cfg.epsilon);
    for p in store.iter_mut() {
        let grads = p.grad.data_mut();
        let values = p.value.data_mut();
        let state = p.state.data_mut();
        for ((g, v), s) in grads.iter_mut().zip(values.iter_mut()).zip(state.iter_mut()) {
            *s = rho * *s + one_minus_rho * *g * *g;
            *v -= lr * *g / (*s + eps).sqrt();
            *g = T::zero();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::DenseTensor;

    fn store(v: f64, g: f64) -> ParamStore<f64> {
        let mut s = ParamStore::new();
        let id = s.insert("w", DenseTensor::full(&[2, 2], v));
        s.param_mut(id).grad = DenseTensor::full(&[2, 2], g);
        s
    }

    #[test]
    fn zero_gradient_leaves_values() {
        let mut s = store(0.3, 0.0);
        rmsprop_step(&mut s, &OptimizerConfig::new(0.01));
        assert_eq!(s.iter().next().unwrap().value.data(), &[0.3; 4]);
    }

    #[test]
    fn first_step_arithmetic() {
        let mut s = store(0.0, 1.0);
        rmsprop_step(&mut s, &OptimizerConfig::new(0.01));
        let want = -0.01 / (0.1f64 + 1e-8).sqrt();
        let p = s.iter().next().unwrap();
        assert!(p.value.data().iter().all(|&v| (v - want).abs() < 1e-15));
        assert!(p.grad.data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn constant_gradient_step_tends_to_lr() {
        // s_t = 1 − 0.9^t → 1, so |Δθ| = lr / √(s_t + ε) → lr / √(1 + ε).
        let mut s = store(0.0, 1.0);
        let cfg = OptimizerConfig::new(0.01);
        let mut last = 0.0;
        let mut prev = 0.0;
        for _ in 0..400 {
            let id = s.id("w").unwrap();
            s.param_mut(id).grad = DenseTensor::full(&[2, 2], 1.0);
            prev = s.value(id).data()[0];
            rmsprop_step(&mut s, &cfg);
            last = s.value(id).data()[0];
        }
        let step = prev - last;
        assert!((step - 0.01 / (1.0f64 + 1e-8).sqrt()).abs() < 1e-12, "step {step}");
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let mut s = store(0.7, 3.0);
        rmsprop_step(&mut s, &OptimizerConfig::new(0.0));
        assert_eq!(s.iter().next().unwrap().value.data(), &[0.7; 4]);
    }

    #[test]
    fn config_validation() {
        assert!(OptimizerConfig::new(0.01).validate().is_ok());
        assert!(OptimizerConfig { decay: 1.0, ..OptimizerConfig::new(0.01) }.validate().is_err());
        assert!(OptimizerConfig { epsilon: 0.0, ..OptimizerConfig::new(0.01) }.validate().is_err());
        assert!(OptimizerConfig::new(-1.0).validate().is_err());
    }
}
