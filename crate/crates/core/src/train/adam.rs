use crate::error::{Error, Result};
use crate::nn::Parameterized;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Moments for one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
        }
    }

    /// One bias-corrected update of `param` at step `t` (1-based).
    pub fn update(&mut self, param: &mut [T], grad: &[T], t: u64, lr: f64, adam: &Adam<T>) {
        let (b1, b2) = (T::of(adam.beta1), T::of(adam.beta2));
        let c1 = T::of(1.0 - adam.beta1.powi(t as i32));
        let c2 = T::of(1.0 - adam.beta2.powi(t as i32));
        let lr = T::of(lr);
        let eps = T::of(adam.eps);
        let one = T::one();
        for (((p, &g), m), v) in param.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = b1 * *m + (one - b1) * g;
            *v = b2 * *v + (one - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

/// Adam over every parameter of a model, matched by visiting order.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Completed steps.
    pub t: u64,
    pub states: Vec<AdamState<T>>,
}

impl<T: Scalar> Default for Adam<T> {
    fn default() -> Self {
        Self {
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            eps: ADAM_EPS,
            t: 0,
            states: Vec::new(),
        }
    }
}

impl<T: Scalar> Adam<T> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Applies one step using the gradients stored on the parameters.
    /// A non-finite gradient refuses the whole step and leaves all state
    /// untouched.
    pub fn step(&mut self, model: &mut dyn Parameterized<T>, lr: f64) -> Result<()> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::Config(format!("learning rate {lr} must be positive")));
        }
        let mut bad = None;
        let mut lens = Vec::new();
        model.visit_params("", &mut |name, p| {
            lens.push(p.len());
            if bad.is_none() && p.grad().is_some_and(|g| g.iter().any(|v| !v.is_finite())) {
                bad = Some(name.to_string());
            }
        });
        if let Some(name) = bad {
            return Err(Error::Numeric(format!("non-finite gradient in {name}; step refused")));
        }
        if self.states.is_empty() {
            self.states = lens.iter().map(|&n| AdamState::new(n)).collect();
        } else if self.states.len() != lens.len()
            || self.states.iter().zip(&lens).any(|(s, &n)| s.m.len() != n)
        {
            return Err(Error::Shape("optimizer state does not match model parameters".into()));
        }
        self.t += 1;
        let t = self.t;
        let mut states = std::mem::take(&mut self.states);
        let mut i = 0;
        model.visit_params("", &mut |_, p: &mut Tensor<T>| {
            let (data, grad) = p.split_mut();
            if let Some(grad) = grad {
                states[i].update(data, grad, t, lr, self);
            }
            i += 1;
        });
        self.states = states;
        Ok(())
    }
}
