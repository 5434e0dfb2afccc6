//! Adaptive-moment gradient engine and the solvers built on it.
//!
//! Simplex-valued unknowns are always optimized through temperature-scaled
//! softmax logits, never by projection, so iterates stay in the interior.

mod adam;
mod approx;
mod barycenter;
mod maxent;
mod sampling;

pub use adam::{adaptive_step, AdamState, OptimizerConfig};
pub use approx::{approximate_measure, ApproxMode, ApproxResult, SparsityPenalty};
pub use barycenter::{barycenter_solve, BarycenterResult};
pub use maxent::{maxent_solve, MaxEntResult};
pub use sampling::{minibatch_sample, GaussianMixture, Sampler, Target};

use nalgebra::DVector;

/// Logits whose temperature-scaled softmax is a point of the simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexParam {
    pub logits: DVector<f64>,
    pub temperature: f64,
}

impl SimplexParam {
    pub fn new(logits: DVector<f64>, temperature: f64) -> Self {
        SimplexParam { logits, temperature }
    }

    pub fn uniform(n: usize, temperature: f64) -> Self {
        SimplexParam::new(DVector::zeros(n), temperature)
    }

    pub fn probabilities(&self) -> DVector<f64> {
        softmax(&self.logits, self.temperature)
    }

    /// Pull a gradient with respect to the probabilities back to the logits.
    pub fn pullback(&self, p: &DVector<f64>, grad_p: &DVector<f64>) -> DVector<f64> {
        softmax_pullback(p, grad_p, self.temperature)
    }
}

pub(crate) fn softmax(logits: &DVector<f64>, temperature: f64) -> DVector<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut p = logits.map(|z| ((z - max) / temperature).exp());
    let total = p.sum();
    p /= total;
    p
}

/// `dL/dz_k = p_k (g_k - <p, g>) / T`
pub(crate) fn softmax_pullback(p: &DVector<f64>, grad_p: &DVector<f64>, temperature: f64) -> DVector<f64> {
    let mean = p.dot(grad_p);
    DVector::from_fn(p.len(), |k, _| p[k] * (grad_p[k] - mean) / temperature)
}

/// Norm of `g` after removing its component along the ones vector.
pub fn tangent_norm(g: &DVector<f64>) -> f64 {
    let mean = g.mean();
    g.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>().sqrt()
}

/// One row of a solver trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub objective: f64,
}
