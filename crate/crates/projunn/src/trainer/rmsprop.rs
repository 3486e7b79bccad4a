//! RMSprop for the Euclidean parameters. Unitary parameters do NOT go
//! through this preconditioner; they get plain manifold steps at
//! `lr / unitary_lr_divisor` (momentum-style state transported on the
//! manifold traded away for stability).

use crate::numerics::{DenseMatrix, Entry};

pub const RMSPROP_DECAY: f64 = 0.99;
pub const RMSPROP_EPS: f64 = 1e-8;

/// Running mean of squared gradient magnitudes for one parameter tensor.
#[derive(Clone, Debug)]
pub struct RmspropState {
    acc: Vec<f64>,
}

impl RmspropState {
    pub fn new(len: usize) -> Self {
        Self { acc: vec![0.0; len] }
    }

    pub fn accumulator(&self) -> &[f64] {
        &self.acc
    }

    fn precondition(&mut self, i: usize, g_sq: f64) -> f64 {
        let v = RMSPROP_DECAY * self.acc[i] + (1.0 - RMSPROP_DECAY) * g_sq;
        self.acc[i] = v;
        1.0 / (v.sqrt() + RMSPROP_EPS)
    }

    /// `v <- 0.99 v + 0.01 |g|^2; p <- p - lr g / (sqrt(v) + 1e-8)`.
    pub fn step_matrix<T: Entry>(
        &mut self,
        param: &mut DenseMatrix<T>,
        grad: &DenseMatrix<T>,
        lr: f64,
    ) {
        assert!(param.same_shape(grad), "rmsprop shape mismatch");
        assert_eq!(self.acc.len(), param.data().len(), "rmsprop state mismatch");
        for (i, (p, g)) in param.data_mut().iter_mut().zip(grad.data()).enumerate() {
            let scale = self.precondition(i, g.modulus_sq());
            *p -= g.scale(lr * scale);
        }
    }

    pub fn step_vec(&mut self, param: &mut [f64], grad: &[f64], lr: f64) {
        assert_eq!(param.len(), grad.len());
        assert_eq!(self.acc.len(), param.len(), "rmsprop state mismatch");
        for (i, (p, g)) in param.iter_mut().zip(grad).enumerate() {
            let scale = self.precondition(i, g * g);
            *p -= lr * g * scale;
        }
    }
}

/// Free-function form of the matrix step.
pub fn rmsprop_step<T: Entry>(
    state: &mut RmspropState,
    param: &mut DenseMatrix<T>,
    grad: &DenseMatrix<T>,
    lr: f64,
) {
    state.step_matrix(param, grad, lr);
}
