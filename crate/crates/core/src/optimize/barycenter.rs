use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{adaptive_step, softmax, softmax_pullback, AdamState, OptimizerConfig, TraceRow};
use crate::error::{GaitError, Result};
use crate::kernels::{GridMeasure, SeparableGaussian};

#[derive(Debug, Clone)]
pub struct BarycenterResult {
    pub barycenter: GridMeasure,
    /// Mean divergence over the minibatch at each step.
    pub trace: Vec<TraceRow>,
}

/// Precomputed per-image quantities.
struct Prepared {
    mass: DMatrix<f64>,
    profile: DMatrix<f64>,
    /// `<P, log KP>`
    self_term: f64,
}

/// Minimize `(1/n) sum_i D(P_i || Q)` over grid measures `Q`.
///
/// Every Gram product goes through the separable operator. Since the
/// divergence is linear in each `P_i` apart from the constant `<P, log KP>`,
/// a step costs three convolutions whatever the batch size.
pub fn barycenter_solve(images: &[GridMeasure], sigma: f64, config: &OptimizerConfig) -> Result<BarycenterResult> {
    config.validate()?;
    let first = images.first().ok_or_else(|| GaitError::InvalidParameter("at least one image is required".into()))?;
    let d = first.side();
    if let Some(bad) = images.iter().find(|im| im.side() != d) {
        return Err(GaitError::DimensionMismatch { what: "image side", expected: d, got: bad.side() });
    }
    let op = SeparableGaussian::new(d, sigma)?;
    let prepared: Vec<Prepared> = images
        .iter()
        .map(|im| {
            let profile = op.apply(im.mass())?;
            let self_term =
                im.mass().iter().zip(profile.iter()).filter(|(&p, _)| p > 0.0).map(|(&p, &kp)| p * kp.ln()).sum();
            Ok(Prepared { mass: im.mass().clone(), profile, self_term })
        })
        .collect::<Result<_>>()?;

    let n = images.len();
    let batch = config.batch_size.unwrap_or(n).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = AdamState::new(DVector::zeros(d * d));
    let mut trace = Vec::with_capacity(config.steps);

    for step in 0..config.steps {
        let chosen: Vec<usize> = if batch == n {
            (0..n).collect()
        } else {
            let mut idx = rand::seq::index::sample(&mut rng, n, batch).into_vec();
            idx.sort_unstable();
            idx
        };
        let mut mass_sum = DMatrix::zeros(d, d);
        let mut profile_sum = DMatrix::zeros(d, d);
        let mut self_sum = 0.0;
        for &i in &chosen {
            mass_sum += &prepared[i].mass;
            profile_sum += &prepared[i].profile;
            self_sum += prepared[i].self_term;
        }
        let b = chosen.len() as f64;

        let q_vec = softmax(&state.params, config.temperature);
        let q = DMatrix::from_column_slice(d, d, q_vec.as_slice());
        let kq = op.apply(&q)?;

        let log_kq = kq.map(f64::ln);
        let ratio = profile_sum.component_div(&kq);
        let objective = 1.0 + (self_sum - mass_sum.dot(&log_kq) - q.dot(&ratio)) / b;
        if !objective.is_finite() {
            return Err(GaitError::NumericalFailure { step, what: "barycenter objective is not finite".into() });
        }
        trace.push(TraceRow { step, objective });

        // dD/dQ = -K(S1/KQ) - S2/KQ + K(Q S2 / KQ^2), averaged over the batch
        let t1 = op.apply(&mass_sum.component_div(&kq))?;
        let t3 = op.apply(&q.component_mul(&ratio).component_div(&kq))?;
        let grad_q = (t3 - t1 - &ratio) / b;
        let grad_q = DVector::from_column_slice(grad_q.as_slice());
        let gz = softmax_pullback(&q_vec, &grad_q, config.temperature);
        adaptive_step(&mut state, &gz, config).map_err(|e| match e {
            GaitError::NumericalFailure { what, .. } => GaitError::NumericalFailure { step, what },
            other => other,
        })?;
    }
    let q_vec = softmax(&state.params, config.temperature);
    let barycenter = GridMeasure::from_intensities(DMatrix::from_column_slice(d, d, q_vec.as_slice()))?;
    Ok(BarycenterResult { barycenter, trace })
}
