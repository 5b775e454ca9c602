use ndarray::Array2;

use super::objective::GradientSet;
use crate::error::{Error, Result};
use crate::propagation::ModelParams;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub first_moment: [Array2<f64>; 4],
    pub second_moment: [Array2<f64>; 4],
    pub step: u64,
    pub learning_rate: f64,
}

impl OptimizerState {
    pub fn new(params: &ModelParams, learning_rate: f64) -> Self {
        let zeros = || params.tensors().map(|t| Array2::zeros(t.dim()));
        Self { first_moment: zeros(), second_moment: zeros(), step: 0, learning_rate }
    }
}

/// Bias-corrected Adam update of every parameter tensor.
pub fn adam_step(params: &mut ModelParams, grads: &GradientSet, state: &mut OptimizerState) -> Result<()> {
    for (p, g) in params.tensors().iter().zip(grads.tensors()) {
        if p.dim() != g.dim() {
            return Err(Error::shape("gradient", p.dim(), g.dim()));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let correct1 = 1.0 - BETA1.powi(t);
    let correct2 = 1.0 - BETA2.powi(t);
    let lr = state.learning_rate;
    for (k, (p, g)) in params.tensors_mut().into_iter().zip(grads.tensors()).enumerate() {
        let m = &mut state.first_moment[k];
        let v = &mut state.second_moment[k];
        ndarray::Zip::from(p).and(m).and(v).and(g).for_each(|p, m, v, &g| {
            *m = BETA1 * *m + (1.0 - BETA1) * g;
            *v = BETA2 * *v + (1.0 - BETA2) * g * g;
            let m_hat = *m / correct1;
            let v_hat = *v / correct2;
            *p -= lr * m_hat / (v_hat.sqrt() + EPSILON);
        });
    }
    Ok(())
}

/// `lr ← lr · ratio`, applied once per epoch.
pub fn decay_learning_rate(state: &mut OptimizerState, ratio: f64) {
    state.learning_rate *= ratio;
}
