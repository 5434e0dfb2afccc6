use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{GaitError, Result};

/// Settings shared by every gradient-based solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Use the running maximum of the second moment (AMSGrad).
    pub max_correction: bool,
    pub steps: usize,
    pub batch_size: Option<usize>,
    pub seed: u64,
    /// Logit scaling for simplex parameters.
    pub temperature: f64,
    /// Stop once the tangent gradient norm drops below this value.
    pub early_stop: Option<f64>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            step_size: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_correction: false,
            steps: 1000,
            batch_size: None,
            seed: 0,
            temperature: 1.0,
            early_stop: None,
        }
    }
}

impl OptimizerConfig {
    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = steps;
        self
    }

    pub fn with_step_size(mut self, lr: f64) -> Self {
        self.step_size = lr;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_batch_size(mut self, batch: Option<usize>) -> Self {
        self.batch_size = batch;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(GaitError::InvalidParameter(msg));
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return bad(format!("step size must be positive, got {}", self.step_size));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("decay rates must lie in [0, 1)".into());
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive".into());
        }
        if self.steps == 0 {
            return bad("steps must be >= 1".into());
        }
        if self.batch_size == Some(0) {
            return bad("batch size must be >= 1".into());
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return bad("temperature must be positive".into());
        }
        Ok(())
    }
}

/// Moment estimates for one parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub params: DVector<f64>,
    first: DVector<f64>,
    second: DVector<f64>,
    second_max: DVector<f64>,
    t: u32,
}

impl AdamState {
    pub fn new(params: DVector<f64>) -> Self {
        let n = params.len();
        AdamState { params, first: DVector::zeros(n), second: DVector::zeros(n), second_max: DVector::zeros(n), t: 0 }
    }

    pub fn steps_taken(&self) -> u32 {
        self.t
    }
}

/// One adaptive-moment descent step, `theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)`.
pub fn adaptive_step(state: &mut AdamState, grad: &DVector<f64>, config: &OptimizerConfig) -> Result<()> {
    if grad.len() != state.params.len() {
        return Err(GaitError::DimensionMismatch {
            what: "gradient length",
            expected: state.params.len(),
            got: grad.len(),
        });
    }
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(GaitError::NumericalFailure {
            step: state.t as usize,
            what: format!("non-finite gradient component {i}"),
        });
    }
    state.t += 1;
    let (b1, b2) = (config.beta1, config.beta2);
    let bias1 = 1.0 - b1.powi(state.t as i32);
    let bias2 = 1.0 - b2.powi(state.t as i32);
    for i in 0..grad.len() {
        let g = grad[i];
        state.first[i] = b1 * state.first[i] + (1.0 - b1) * g;
        state.second[i] = b2 * state.second[i] + (1.0 - b2) * g * g;
        let v = if config.max_correction {
            state.second_max[i] = state.second_max[i].max(state.second[i]);
            state.second_max[i]
        } else {
            state.second[i]
        };
        let m_hat = state.first[i] / bias1;
        let v_hat = v / bias2;
        state.params[i] -= config.step_size * m_hat / (v_hat.sqrt() + config.epsilon);
    }
    Ok(())
}
