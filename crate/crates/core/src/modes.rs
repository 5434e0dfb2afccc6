//! Counting modes of a sample: sweep a kernel bandwidth (or a collision
//! radius), then pick the scale where the curve flattens out.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entropy::{entropy_from_profile, DiscreteDistribution, EntropyOrder};
use crate::error::{GaitError, Result};
use crate::kernels::{distance, KernelSpec, Points};

/// Scales swept by default.
pub const DEFAULT_SCALE_MIN: f64 = 0.1;
pub const DEFAULT_SCALE_MAX: f64 = 25.0;
pub const DEFAULT_SCALE_COUNT: usize = 100;

/// A curve sampled over increasing scales.
///
/// Straight out of a sweep, `smoothed_second_deriv` holds the raw second
/// derivative and nothing is selected; [`curvature_select`] smooths it and
/// picks an index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub scales: Vec<f64>,
    pub values: Vec<f64>,
    pub smoothed_second_deriv: Vec<f64>,
    pub selected_index: Option<usize>,
}

impl SweepResult {
    fn new(scales: Vec<f64>, values: Vec<f64>) -> Self {
        let d2 = second_derivative(&scales, &values);
        SweepResult { scales, values, smoothed_second_deriv: d2, selected_index: None }
    }

    /// `(scale, value)` at the selected index.
    pub fn selected(&self) -> Option<(f64, f64)> {
        self.selected_index.map(|i| (self.scales[i], self.values[i]))
    }
}

/// `count` evenly spaced values from `min` to `max` inclusive.
pub fn linspace(min: f64, max: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![min],
        _ => (0..count).map(|i| min + (max - min) * i as f64 / (count - 1) as f64).collect(),
    }
}

pub fn default_scales() -> Vec<f64> {
    linspace(DEFAULT_SCALE_MIN, DEFAULT_SCALE_MAX, DEFAULT_SCALE_COUNT)
}

/// Largest pairwise Euclidean distance; useful to express scales relative
/// to the data.
pub fn diameter(points: &Points) -> f64 {
    let n = points.len();
    (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| distance(points.row(i), points.row(j), 2.0))
        .fold(0.0, f64::max)
}

fn check_scales(scales: &[f64], at_least: usize) -> Result<()> {
    if scales.len() < at_least {
        return Err(GaitError::InvalidParameter(format!("need at least {at_least} scales, got {}", scales.len())));
    }
    if scales.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(GaitError::InvalidParameter("scales must be positive and finite".into()));
    }
    if scales.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(GaitError::InvalidParameter("scales must be strictly increasing".into()));
    }
    Ok(())
}

/// Order-1 entropy (log-diversity) of the weighted sample at each bandwidth,
/// using the kernel family `family(sigma)`.
pub fn diversity_sweep(
    points: &Points,
    weights: Option<&DiscreteDistribution>,
    family: fn(f64) -> KernelSpec,
    scales: &[f64],
) -> Result<SweepResult> {
    let n = points.len();
    if n == 0 {
        return Err(GaitError::InvalidParameter("empty sample".into()));
    }
    check_scales(scales, 3)?;
    let p = match weights {
        Some(w) if w.len() != n => {
            return Err(GaitError::DimensionMismatch { what: "sample weights", expected: n, got: w.len() })
        }
        Some(w) => w.as_vector().clone(),
        None => DVector::from_element(n, 1.0 / n as f64),
    };
    for &s in scales {
        family(s).validate()?;
    }

    // the squared distances are shared by every bandwidth of the rbf family
    let squared = matches!(family(1.0), KernelSpec::RbfSq { .. }).then(|| {
        DMatrix::from_fn(n, n, |i, j| {
            let d = distance(points.row(i), points.row(j), 2.0);
            d * d
        })
    });
    let values: Vec<f64> = scales
        .par_iter()
        .map(|&s| {
            let k = match (&squared, family(s)) {
                (Some(sq), KernelSpec::RbfSq { sigma }) => sq.map(|d2| (-d2 / (2.0 * sigma * sigma)).exp()),
                (_, spec) => DMatrix::from_fn(n, n, |i, j| spec.eval(points.row(i), points.row(j))),
            };
            let kp = &k * &p;
            entropy_from_profile(p.as_slice(), kp.as_slice(), EntropyOrder::SHANNON)
        })
        .collect();
    Ok(SweepResult::new(scales.to_vec(), values))
}

/// Three-point second derivative on a possibly nonuniform grid; the two
/// endpoints copy their neighbours.
pub fn second_derivative(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n < 3 {
        return vec![0.0; n];
    }
    let mut d2 = vec![0.0; n];
    for i in 1..n - 1 {
        let (h0, h1) = (x[i] - x[i - 1], x[i + 1] - x[i]);
        d2[i] = 2.0 * (h0 * y[i + 1] - (h0 + h1) * y[i] + h1 * y[i - 1]) / (h0 * h1 * (h0 + h1));
    }
    d2[0] = d2[1];
    d2[n - 1] = d2[n - 2];
    d2
}

/// Local least-squares polynomial smoothing. The window shrinks
/// symmetrically near the ends, and the degree drops with it when the
/// window gets too short to support it.
pub fn savitzky_golay(y: &[f64], window: usize, degree: usize) -> Result<Vec<f64>> {
    if window.is_multiple_of(2) || window <= degree {
        return Err(GaitError::InvalidParameter(format!(
            "window must be odd and larger than the degree (window {window}, degree {degree})"
        )));
    }
    let n = y.len();
    let half = window / 2;
    let mut out = vec![0.0; n];
    let mut weights_cache: Vec<Option<Vec<f64>>> = vec![None; half + 1];
    for (i, o) in out.iter_mut().enumerate() {
        let h = half.min(i).min(n - 1 - i);
        let w = weights_cache[h].get_or_insert_with(|| centre_weights(h, degree.min(2 * h)));
        *o = w.iter().zip(&y[i - h..=i + h]).map(|(a, b)| a * b).sum();
    }
    Ok(out)
}

/// Weights that evaluate at offset 0 the least-squares polynomial fitted to
/// offsets `-h..=h`.
fn centre_weights(h: usize, degree: usize) -> Vec<f64> {
    let len = 2 * h + 1;
    let v = DMatrix::from_fn(len, degree + 1, |r, c| (r as f64 - h as f64).powi(c as i32));
    let gram = v.tr_mul(&v);
    let inv = gram.try_inverse().expect("Vandermonde on distinct offsets has full rank");
    // row 0 of (V^T V)^{-1} V^T
    let row = inv.row(0) * v.transpose();
    row.iter().copied().collect()
}

/// Smoothing and selection settings for [`curvature_select`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureRule {
    pub window: usize,
    pub degree: usize,
    pub threshold: f64,
}

impl Default for CurvatureRule {
    fn default() -> Self {
        CurvatureRule { window: 11, degree: 3, threshold: 0.01 }
    }
}

/// Smooth the second derivative of the curve with respect to scale and
/// select the first index where its magnitude is below the threshold.
pub fn curvature_select(sweep: &SweepResult, rule: &CurvatureRule) -> Result<SweepResult> {
    if sweep.scales.len() != sweep.values.len() {
        return Err(GaitError::DimensionMismatch {
            what: "sweep values",
            expected: sweep.scales.len(),
            got: sweep.values.len(),
        });
    }
    if sweep.scales.len() < rule.window {
        return Err(GaitError::InvalidParameter(format!(
            "need at least {} scales for the smoothing window, got {}",
            rule.window,
            sweep.scales.len()
        )));
    }
    let raw = second_derivative(&sweep.scales, &sweep.values);
    let smoothed = savitzky_golay(&raw, rule.window, rule.degree)?;
    let selected_index = smoothed.iter().position(|v| v.abs() < rule.threshold);
    Ok(SweepResult {
        scales: sweep.scales.clone(),
        values: sweep.values.clone(),
        smoothed_second_deriv: smoothed,
        selected_index,
    })
}

/// Outcome of a collision count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BirthdayEstimate {
    Finite(f64),
    /// No pair was within the radius; the support looks unbounded.
    NoCollisions,
}

impl BirthdayEstimate {
    /// `+inf` for no collisions.
    pub fn value(self) -> f64 {
        match self {
            BirthdayEstimate::Finite(v) => v,
            BirthdayEstimate::NoCollisions => f64::INFINITY,
        }
    }
}

fn check_birthday(points: &Points, eps: f64) -> Result<()> {
    if points.len() < 2 {
        return Err(GaitError::InvalidParameter("need at least two samples".into()));
    }
    if !(eps > 0.0) {
        return Err(GaitError::InvalidParameter(format!("collision radius must be positive, got {eps}")));
    }
    Ok(())
}

/// Sorted distances over unordered pairs.
fn pair_distances(points: &Points, order: f64) -> Vec<f64> {
    let m = points.len();
    let mut d: Vec<f64> = (0..m)
        .into_par_iter()
        .flat_map_iter(|i| (i + 1..m).map(move |j| distance(points.row(i), points.row(j), order)))
        .collect();
    d.sort_by(f64::total_cmp);
    d
}

fn estimate_from_count(m: usize, unordered: usize) -> BirthdayEstimate {
    // c counts ordered pairs, so m identical samples give n = 1
    let c = 2 * unordered;
    if c == 0 {
        BirthdayEstimate::NoCollisions
    } else {
        let m = m as f64;
        BirthdayEstimate::Finite(m * (m - 1.0) / c as f64)
    }
}

/// Support-size estimate `m(m-1)/c`, where `c` counts ordered pairs of
/// samples closer than `eps` in the `order`-norm.
pub fn birthday_estimate(points: &Points, eps: f64, order: f64) -> Result<BirthdayEstimate> {
    check_birthday(points, eps)?;
    let m = points.len();
    let mut count = 0;
    for i in 0..m {
        for j in i + 1..m {
            if distance(points.row(i), points.row(j), order) < eps {
                count += 1;
            }
        }
    }
    Ok(estimate_from_count(m, count))
}

/// `log n_hat` at each radius (`+inf` where nothing collides).
pub fn birthday_sweep(points: &Points, epsilons: &[f64], order: f64) -> Result<SweepResult> {
    check_scales(epsilons, 1)?;
    check_birthday(points, epsilons[0])?;
    let d = pair_distances(points, order);
    let m = points.len();
    let values = epsilons.iter().map(|&e| estimate_from_count(m, d.partition_point(|&v| v < e)).value().ln()).collect();
    Ok(SweepResult::new(epsilons.to_vec(), values))
}
