use serde::{Deserialize, Serialize};

use crate::graph::Param;
use crate::real::Real;
use crate::tensor::Tensor;

/// Bias-corrected Adam.
#[derive(Clone, Debug)]
pub struct Adam<T> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(params: &[Param<T>], lr: f64) -> Self {
        let zeros = || params.iter().map(|p| Tensor::zeros(p.value.dims())).collect::<Vec<_>>();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One update from the gradients stored in `params`.
    pub fn update(&mut self, params: &mut [Param<T>]) {
        assert_eq!(params.len(), self.m.len(), "optimizer built for another graph");
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2) = (T::from_f64(self.beta1), T::from_f64(self.beta2));
        let (ob1, ob2) = (T::from_f64(1.0 - self.beta1), T::from_f64(1.0 - self.beta2));
        let inv_c2 = T::from_f64(1.0 / c2);
        let step = T::from_f64(self.lr / c1);
        let eps = T::from_f64(self.eps);
        for ((p, m), v) in params.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            let g = p.grad.data();
            for (((w, &gi), mi), vi) in p.value.data_mut().iter_mut().zip(g).zip(m.data_mut()).zip(v.data_mut()) {
                *mi = b1 * *mi + ob1 * gi;
                *vi = b2 * *vi + ob2 * gi * gi;
                *w -= step * *mi / ((*vi * inv_c2).sqrt() + eps);
            }
        }
    }
}

/// Halves (by default) the learning rate after `patience` epochs without a
/// relative improvement of `threshold` in the monitored loss.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReduceOnPlateau {
    pub factor: f64,
    pub patience: usize,
    pub threshold: f64,
    pub min_lr: f64,
    best: f64,
    bad_epochs: usize,
}

impl Default for ReduceOnPlateau {
    fn default() -> Self {
        Self::new(0.5, 5)
    }
}

impl ReduceOnPlateau {
    pub fn new(factor: f64, patience: usize) -> Self {
        Self {
            factor,
            patience,
            threshold: 1e-4,
            min_lr: 0.0,
            best: f64::INFINITY,
            bad_epochs: 0,
        }
    }

    /// Returns the learning rate for the next epoch.
    pub fn observe(&mut self, loss: f64, lr: f64) -> f64 {
        if loss < self.best * (1.0 - self.threshold) {
            self.best = loss;
            self.bad_epochs = 0;
            return lr;
        }
        self.bad_epochs += 1;
        if self.bad_epochs > self.patience {
            self.bad_epochs = 0;
            return (lr * self.factor).max(self.min_lr);
        }
        lr
    }
}
