use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{adaptive_step, minibatch_sample, softmax, softmax_pullback, AdamState, OptimizerConfig, Target, TraceRow};
use crate::divergence::{atom_grads_with_blocks, gait_divergence_empirical, grad_weights_raw, EmpiricalMeasure};
use crate::entropy::DiscreteDistribution;
use crate::error::{GaitError, Result};
use crate::kernels::{build_block_gram, BlockGram, KernelSpec, Points};

/// Which parts of the approximating measure are free.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApproxMode {
    Locations,
    Weights,
    Both,
}

impl ApproxMode {
    fn moves_atoms(self) -> bool {
        matches!(self, ApproxMode::Locations | ApproxMode::Both)
    }

    fn moves_weights(self) -> bool {
        matches!(self, ApproxMode::Weights | ApproxMode::Both)
    }
}

impl std::str::FromStr for ApproxMode {
    type Err = GaitError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "locations" => Ok(ApproxMode::Locations),
            "weights" => Ok(ApproxMode::Weights),
            "both" => Ok(ApproxMode::Both),
            other => Err(GaitError::InvalidParameter(format!(
                "unknown mode '{other}' (expected locations, weights or both)"
            ))),
        }
    }
}

/// `lambda * sum q_i^rho`, followed by pruning of small weights after the
/// last step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparsityPenalty {
    pub weight: f64,
    pub exponent: f64,
    pub prune_threshold: f64,
}

impl Default for SparsityPenalty {
    fn default() -> Self {
        SparsityPenalty { weight: 0.01, exponent: 0.75, prune_threshold: 0.01 }
    }
}

impl SparsityPenalty {
    pub fn validate(&self) -> Result<()> {
        if !(self.weight >= 0.0 && self.weight.is_finite()) {
            return Err(GaitError::InvalidParameter("penalty weight must be >= 0".into()));
        }
        if !(self.exponent > 0.0 && self.exponent <= 1.0) {
            return Err(GaitError::InvalidParameter("penalty exponent must lie in (0, 1]".into()));
        }
        if !(self.prune_threshold >= 0.0) {
            return Err(GaitError::InvalidParameter("prune threshold must be >= 0".into()));
        }
        Ok(())
    }

    pub fn value(&self, q: &[f64]) -> f64 {
        self.weight * q.iter().map(|v| v.powf(self.exponent)).sum::<f64>()
    }

    pub fn grad(&self, q: &[f64]) -> DVector<f64> {
        DVector::from_iterator(q.len(), q.iter().map(|v| self.weight * self.exponent * v.powf(self.exponent - 1.0)))
    }

    /// Zero every weight below the threshold and renormalize. The largest
    /// weight always survives.
    pub fn prune(&self, q: &DiscreteDistribution) -> Result<DiscreteDistribution> {
        let s = q.as_slice();
        let top = s.iter().enumerate().fold(0, |best, (i, &v)| if v > s[best] { i } else { best });
        let kept = DVector::from_fn(s.len(), |i, _| if s[i] >= self.prune_threshold || i == top { s[i] } else { 0.0 });
        DiscreteDistribution::from_weights(kept)
    }
}

#[derive(Debug, Clone)]
pub struct ApproxResult {
    pub measure: EmpiricalMeasure,
    /// Divergence plus penalty at each step.
    pub trace: Vec<TraceRow>,
    /// Steps at which a nonsmooth kernel met coincident atoms.
    pub degenerate_steps: usize,
}

/// Minimize `D(P || Q) [+ penalty(q)]` over the atoms and/or weights of `Q`,
/// starting from `init`. `P` is the whole target, or a fresh minibatch each
/// step when `config.batch_size` is set.
pub fn approximate_measure(
    target: &mut Target,
    init: &EmpiricalMeasure,
    spec: &KernelSpec,
    mode: ApproxMode,
    penalty: Option<&SparsityPenalty>,
    config: &OptimizerConfig,
) -> Result<ApproxResult> {
    config.validate()?;
    spec.validate()?;
    if let Some(pen) = penalty {
        pen.validate()?;
        if !mode.moves_weights() {
            return Err(GaitError::InvalidParameter(
                "a sparsity penalty needs free weights (mode weights or both)".into(),
            ));
        }
    }
    if target.dim() != init.dim() {
        return Err(GaitError::DimensionMismatch { what: "atom dimension", expected: target.dim(), got: init.dim() });
    }
    if matches!(target, Target::Generator(_)) && config.batch_size.is_none() {
        return Err(GaitError::InvalidParameter("a generator target needs a batch size".into()));
    }

    let t = config.temperature;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut atoms = AdamState::new(DVector::from_column_slice(init.atoms.as_slice()));
    let init_logits = init.weights.as_vector().map(|w| t * w.max(f64::MIN_POSITIVE).ln());
    let mut logits = AdamState::new(init_logits);
    let fixed_q = init.weights.clone();
    let d = init.dim();

    // the Gram blocks only stay put when nothing moves on either side
    let mut cached: Option<(EmpiricalMeasure, BlockGram)> = match (&*target, config.batch_size, mode) {
        (Target::Empirical(m), None, ApproxMode::Weights) => {
            Some((m.clone(), build_block_gram(&m.atoms, &init.atoms, spec)?))
        }
        _ => None,
    };

    let mut trace = Vec::with_capacity(config.steps);
    let mut degenerate_steps = 0;
    for step in 0..config.steps {
        let y = Points::new(d, atoms.params.as_slice().to_vec())?;
        let q = if mode.moves_weights() {
            DiscreteDistribution::from_weights(softmax(&logits.params, t))?
        } else {
            fixed_q.clone()
        };
        let fresh;
        let (pm, blocks) = match &mut cached {
            Some((m, b)) => (&*m, &*b),
            None => {
                let pm = match (&*target, config.batch_size) {
                    (Target::Empirical(m), None) => m.clone(),
                    (_, Some(k)) => minibatch_sample(target, k, &mut rng)?,
                    (Target::Generator(_), None) => unreachable!("rejected above"),
                };
                let b = build_block_gram(&pm.atoms, &y, spec)?;
                fresh = (pm, b);
                (&fresh.0, &fresh.1)
            }
        };

        let report = gait_divergence_empirical(blocks, &pm.weights, &q)?;
        let objective = report.value + penalty.map_or(0.0, |pen| pen.value(q.as_slice()));
        if !objective.is_finite() {
            return Err(GaitError::NumericalFailure { step, what: "approximation objective is not finite".into() });
        }
        trace.push(TraceRow { step, objective });

        let reindex = |e: GaitError| match e {
            GaitError::NumericalFailure { what, .. } => GaitError::NumericalFailure { step, what },
            other => other,
        };
        let atom_grad = if mode.moves_atoms() {
            let qm = EmpiricalMeasure::new(y, q.clone())?;
            let g = atom_grads_with_blocks(blocks, pm, &qm, spec, false, true)?;
            degenerate_steps += g.degenerate as usize;
            Some(DVector::from_column_slice(g.y.as_slice()))
        } else {
            None
        };
        if mode.moves_weights() {
            let (_, mut gq) = grad_weights_raw(blocks, pm.weights.as_vector(), q.as_vector())?;
            if let Some(pen) = penalty {
                gq += pen.grad(q.as_slice());
            }
            let gz = softmax_pullback(q.as_vector(), &gq, t);
            adaptive_step(&mut logits, &gz, config).map_err(reindex)?;
        }
        if let Some(g) = atom_grad {
            adaptive_step(&mut atoms, &g, config).map_err(reindex)?;
        }
    }

    let y = Points::new(d, atoms.params.as_slice().to_vec())?;
    let mut q =
        if mode.moves_weights() { DiscreteDistribution::from_weights(softmax(&logits.params, t))? } else { fixed_q };
    if let Some(pen) = penalty {
        q = pen.prune(&q)?;
    }
    Ok(ApproxResult { measure: EmpiricalMeasure::new(y, q)?, trace, degenerate_steps })
}
