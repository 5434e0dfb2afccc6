use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{adaptive_step, softmax, softmax_pullback, AdamState, OptimizerConfig, TraceRow};
use crate::entropy::{entropy_from_profile, DiscreteDistribution, EntropyOrder};
use crate::error::{GaitError, Result};
use crate::kernels::SimilaritySpace;

/// Standard deviation of the initial logits (variance 4).
const INIT_LOGIT_STD: f64 = 2.0;

#[derive(Debug, Clone)]
pub struct MaxEntResult {
    /// Best iterate seen.
    pub distribution: DiscreteDistribution,
    /// Order-1 entropy of `distribution`.
    pub entropy: f64,
    /// Entropy of the iterate at each step.
    pub trace: Vec<TraceRow>,
}

impl MaxEntResult {
    /// Running maximum of the traced entropy.
    pub fn best_so_far(&self) -> Vec<f64> {
        self.trace
            .iter()
            .scan(f64::NEG_INFINITY, |best, r| {
                *best = best.max(r.objective);
                Some(*best)
            })
            .collect()
    }
}

/// Maximize the order-1 entropy over the simplex by adaptive-moment ascent
/// on softmax logits.
pub fn maxent_solve(space: &SimilaritySpace, config: &OptimizerConfig) -> Result<MaxEntResult> {
    config.validate()?;
    let n = space.len();
    let k = space.matrix();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let normal = Normal::new(0.0, INIT_LOGIT_STD).expect("valid normal");
    let logits = DVector::from_fn(n, |_, _| normal.sample(&mut rng));
    let mut state = AdamState::new(logits);

    let mut trace = Vec::with_capacity(config.steps);
    let mut best: Option<(f64, DVector<f64>)> = None;
    for step in 0..=config.steps {
        let p = softmax(&state.params, config.temperature);
        let kp = k * &p;
        let h = entropy_from_profile(p.as_slice(), kp.as_slice(), EntropyOrder::SHANNON);
        if !h.is_finite() {
            return Err(GaitError::NumericalFailure { step, what: "entropy is not finite".into() });
        }
        if best.as_ref().is_none_or(|(b, _)| h > *b) {
            best = Some((h, p.clone()));
        }
        if step == config.steps {
            break;
        }
        trace.push(TraceRow { step, objective: h });

        // grad of H, then negate: we descend on -H
        let ratio = p.component_div(&kp);
        let back = k * ratio;
        let grad_h = DVector::from_fn(n, |i, _| -kp[i].ln() - back[i]);
        let neg = -grad_h;
        let gz = softmax_pullback(&p, &neg, config.temperature);
        if let Some(tol) = config.early_stop {
            if gz.norm() * config.temperature < tol {
                break;
            }
        }
        adaptive_step(&mut state, &gz, config).map_err(|e| match e {
            GaitError::NumericalFailure { what, .. } => GaitError::NumericalFailure { step, what },
            other => other,
        })?;
    }
    let (entropy, p) = best.expect("at least one iterate");
    Ok(MaxEntResult { distribution: DiscreteDistribution::from_weights(p)?, entropy, trace })
}
