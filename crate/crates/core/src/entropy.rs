//! Similarity-sensitive entropy of every order, diversity, and analytic
//! derivatives of the order-1 entropy.

use nalgebra::{DMatrix, DVector};

use crate::error::{GaitError, Result};
use crate::kernels::SimilaritySpace;

/// Entries above this count as support.
pub const SUPPORT_THRESHOLD: f64 = 1e-15;

const SIMPLEX_TOL: f64 = 1e-12;

/// A probability vector on a finite space.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution(DVector<f64>);

impl DiscreteDistribution {
    /// Checked constructor: entries must be nonnegative and sum to 1 within 1e-12.
    pub fn new(p: DVector<f64>) -> Result<Self> {
        check_nonnegative(&p)?;
        let total = p.sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(GaitError::NotADistribution(format!("sums to {total}")));
        }
        Ok(DiscreteDistribution(p))
    }

    /// Normalize nonnegative weights with positive total.
    pub fn from_weights(w: DVector<f64>) -> Result<Self> {
        check_nonnegative(&w)?;
        let total = w.sum();
        if total <= 0.0 {
            return Err(GaitError::NotADistribution("weights sum to zero".into()));
        }
        Ok(DiscreteDistribution(w / total))
    }

    pub fn from_slice(p: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(p))
    }

    pub fn uniform(n: usize) -> Self {
        DiscreteDistribution(DVector::from_element(n, 1.0 / n as f64))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &v)| v > SUPPORT_THRESHOLD).map(|(i, _)| i)
    }

    pub fn is_interior(&self) -> bool {
        self.0.iter().all(|&v| v > 0.0)
    }
}

fn check_nonnegative(p: &DVector<f64>) -> Result<()> {
    if p.is_empty() {
        return Err(GaitError::NotADistribution("empty vector".into()));
    }
    if p.iter().any(|v| !v.is_finite()) {
        return Err(GaitError::NonFinite("probability vector"));
    }
    if let Some((i, v)) = p.iter().enumerate().find(|(_, &v)| v < 0.0) {
        return Err(GaitError::NotADistribution(format!("entry {i} is negative ({v})")));
    }
    Ok(())
}

/// Order of the entropy: a nonnegative real or infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EntropyOrder {
    Finite(f64),
    Infinity,
}

impl EntropyOrder {
    pub const SHANNON: EntropyOrder = EntropyOrder::Finite(1.0);

    pub fn new(alpha: f64) -> Result<Self> {
        if alpha.is_nan() || alpha < 0.0 {
            return Err(GaitError::InvalidParameter(format!("entropy order must be >= 0, got {alpha}")));
        }
        Ok(if alpha.is_infinite() { EntropyOrder::Infinity } else { EntropyOrder::Finite(alpha) })
    }
}

impl std::str::FromStr for EntropyOrder {
    type Err = GaitError;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if matches!(t, "inf" | "infinity" | "Inf" | "∞") {
            return Ok(EntropyOrder::Infinity);
        }
        let v: f64 = t.parse().map_err(|_| GaitError::InvalidParameter(format!("bad entropy order '{s}'")))?;
        EntropyOrder::new(v)
    }
}

fn check_dims(space: &SimilaritySpace, p: &DiscreteDistribution) -> Result<()> {
    if space.len() != p.len() {
        return Err(GaitError::DimensionMismatch { what: "distribution length", expected: space.len(), got: p.len() });
    }
    Ok(())
}

/// Similarity profile `K p`: expected similarity of each point to a
/// `p`-distributed sample.
pub fn similarity_profile(space: &SimilaritySpace, p: &DiscreteDistribution) -> Result<DVector<f64>> {
    check_dims(space, p)?;
    Ok(space.apply(p.as_vector()))
}

/// Weighted power mean `<w, x^beta>^(1/beta)`, with the geometric mean at
/// `beta = 0` and min/max over the support of `w` at `beta = -inf/+inf`.
pub fn power_mean(w: &[f64], x: &[f64], beta: f64) -> Result<f64> {
    if w.len() != x.len() {
        return Err(GaitError::DimensionMismatch { what: "power mean arguments", expected: w.len(), got: x.len() });
    }
    if beta.is_nan() {
        return Err(GaitError::InvalidParameter("power mean order is NaN".into()));
    }
    let support: Vec<(f64, f64)> =
        w.iter().zip(x).filter(|(&wi, _)| wi > SUPPORT_THRESHOLD).map(|(&wi, &xi)| (wi, xi)).collect();
    if support.is_empty() {
        return Err(GaitError::NotADistribution("weights have empty support".into()));
    }
    if support.iter().any(|&(_, xi)| !(xi > 0.0)) {
        return Err(GaitError::InvalidParameter("power mean needs positive values on the support".into()));
    }
    let v = if beta == f64::INFINITY {
        support.iter().map(|s| s.1).fold(f64::MIN, f64::max)
    } else if beta == f64::NEG_INFINITY {
        support.iter().map(|s| s.1).fold(f64::MAX, f64::min)
    } else if beta == 0.0 {
        support.iter().map(|&(wi, xi)| wi * xi.ln()).sum::<f64>().exp()
    } else {
        support.iter().map(|&(wi, xi)| wi * xi.powf(beta)).sum::<f64>().powf(1.0 / beta)
    };
    Ok(v)
}

/// GAIT entropy of order `alpha`.
///
/// `alpha = 1` uses `-<p, log Kp>` directly and `alpha = inf` uses
/// `-log max (Kp)_i` over the support; every sum runs over `supp(p)` only.
pub fn gait_entropy(space: &SimilaritySpace, p: &DiscreteDistribution, order: EntropyOrder) -> Result<f64> {
    let kp = similarity_profile(space, p)?;
    Ok(entropy_from_profile(p.as_slice(), kp.as_slice(), order))
}

/// Entropy given a precomputed profile. Internal callers guarantee lengths.
pub(crate) fn entropy_from_profile(p: &[f64], kp: &[f64], order: EntropyOrder) -> f64 {
    let supp = p.iter().zip(kp).filter(|(&pi, _)| pi > SUPPORT_THRESHOLD).map(|(&pi, &ki)| (pi, ki));
    match order {
        EntropyOrder::Infinity => -supp.map(|s| s.1).fold(f64::MIN, f64::max).ln(),
        EntropyOrder::Finite(1.0) => -supp.map(|(pi, ki)| pi * ki.ln()).sum::<f64>(),
        EntropyOrder::Finite(a) => {
            let s: f64 = supp.map(|(pi, ki)| pi * ki.powf(a - 1.0)).sum();
            s.ln() / (1.0 - a)
        }
    }
}

/// Effective number of points, `exp(H)`.
pub fn diversity(space: &SimilaritySpace, p: &DiscreteDistribution, order: EntropyOrder) -> Result<f64> {
    gait_entropy(space, p, order).map(f64::exp)
}

/// `grad_p H_1 = -log(Kp) - K (p / Kp)`.
pub fn entropy_grad(space: &SimilaritySpace, p: &DiscreteDistribution) -> Result<DVector<f64>> {
    check_dims(space, p)?;
    if !p.is_interior() {
        return Err(GaitError::NotInterior("entropy gradient"));
    }
    Ok(entropy_grad_unchecked(space.matrix(), p.as_vector()))
}

pub(crate) fn entropy_grad_unchecked(k: &DMatrix<f64>, p: &DVector<f64>) -> DVector<f64> {
    let kp = k * p;
    let ratio = p.component_div(&kp);
    let back = k * ratio;
    DVector::from_fn(p.len(), |i, _| -kp[i].ln() - back[i])
}

/// Negative Hessian of the order-1 entropy:
/// `diag(1/Kp) K + K diag(1/Kp) - K diag(p / (Kp)^2) K`.
pub fn neg_entropy_hessian(space: &SimilaritySpace, p: &DiscreteDistribution) -> Result<DMatrix<f64>> {
    check_dims(space, p)?;
    if !p.is_interior() {
        return Err(GaitError::NotInterior("entropy Hessian"));
    }
    Ok(neg_entropy_hessian_unchecked(space.matrix(), p.as_vector()))
}

pub(crate) fn neg_entropy_hessian_unchecked(k: &DMatrix<f64>, p: &DVector<f64>) -> DMatrix<f64> {
    let n = p.len();
    let kp = k * p;
    let inv = kp.map(|v| 1.0 / v);
    let w = DVector::from_fn(n, |i, _| p[i] / (kp[i] * kp[i]));
    // K diag(w) K
    let kw = DMatrix::from_fn(n, n, |i, j| k[(i, j)] * w[j]);
    let middle = kw * k;
    let mut h = DMatrix::from_fn(n, n, |i, j| inv[i] * k[(i, j)] + k[(i, j)] * inv[j] - middle[(i, j)]);
    // exact symmetry
    for i in 0..n {
        for j in 0..i {
            let s = 0.5 * (h[(i, j)] + h[(j, i)]);
            h[(i, j)] = s;
            h[(j, i)] = s;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{KernelSpec, Points};

    fn fig2() -> SimilaritySpace {
        SimilaritySpace::explicit(DMatrix::from_row_slice(3, 3, &[1.0, 0.7, 0.1, 0.7, 1.0, 0.1, 0.1, 0.1, 1.0]))
            .unwrap()
    }

    fn dist(p: &[f64]) -> DiscreteDistribution {
        DiscreteDistribution::from_slice(p).unwrap()
    }

    #[test]
    fn profile_identity_and_ones() {
        let p = dist(&[0.2, 0.3, 0.5]);
        let kp = similarity_profile(&SimilaritySpace::identity(3), &p).unwrap();
        assert_eq!(kp, *p.as_vector());
        let kp = similarity_profile(&SimilaritySpace::all_ones(3), &p).unwrap();
        assert!(kp.iter().all(|&v| (v - 1.0).abs() < 1e-15));
        assert!(similarity_profile(&SimilaritySpace::identity(2), &p).is_err());
    }

    #[test]
    fn profile_fig2_near_half() {
        let p = dist(&[0.273, 0.273, 0.454]);
        let kp = similarity_profile(&fig2(), &p).unwrap();
        // printed as [1/2, 1/2, 1/2]; the exact constant is 5.6/11
        for v in kp.iter() {
            assert!((v - 0.5).abs() < 0.01);
        }
    }

    #[test]
    fn power_mean_cases() {
        assert!((power_mean(&[0.25, 0.75], &[2.0, 6.0], 1.0).unwrap() - 5.0).abs() < 1e-15);
        assert!((power_mean(&[0.5, 0.5], &[1.0, 4.0], 0.0).unwrap() - 2.0).abs() < 1e-15);
        let h = power_mean(&[0.3, 0.7], &[2.0, 5.0], -1.0).unwrap();
        assert!((h - 1.0 / (0.3 / 2.0 + 0.7 / 5.0)).abs() < 1e-14);
        assert!((h - 3.448_275_862_068_965_5).abs() < 1e-12);
        assert_eq!(power_mean(&[0.5, 0.5, 0.0], &[1.0, 4.0, 9.0], f64::INFINITY).unwrap(), 4.0);
        assert_eq!(power_mean(&[0.5, 0.5, 0.0], &[1.0, 4.0, 0.1], f64::NEG_INFINITY).unwrap(), 1.0);
        assert!(power_mean(&[0.5, 0.5], &[1.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn entropy_is_log_power_mean_of_distinctiveness() {
        let k = fig2();
        let p = dist(&[0.1, 0.6, 0.3]);
        let kp = similarity_profile(&k, &p).unwrap();
        let dist_v: Vec<f64> = kp.iter().map(|v| 1.0 / v).collect();
        for a in [0.0, 0.5, 1.0, 2.0, 3.5] {
            let h = gait_entropy(&k, &p, EntropyOrder::Finite(a)).unwrap();
            let m = power_mean(p.as_slice(), &dist_v, 1.0 - a).unwrap();
            assert!((h - m.ln()).abs() < 1e-13, "alpha {a}");
        }
        let h = gait_entropy(&k, &p, EntropyOrder::Infinity).unwrap();
        let m = power_mean(p.as_slice(), &dist_v, f64::NEG_INFINITY).unwrap();
        assert!((h - m.ln()).abs() < 1e-13);
    }

    #[test]
    fn identity_reduces_to_shannon_and_renyi() {
        let p = dist(&[0.1, 0.2, 0.3, 0.4]);
        let id = SimilaritySpace::identity(4);
        let shannon: f64 = -p.as_slice().iter().map(|v| v * v.ln()).sum::<f64>();
        assert!((gait_entropy(&id, &p, EntropyOrder::SHANNON).unwrap() - shannon).abs() < 1e-15);
        let renyi2 = -(p.as_slice().iter().map(|v| v * v).sum::<f64>()).ln();
        assert!((gait_entropy(&id, &p, EntropyOrder::Finite(2.0)).unwrap() - renyi2).abs() < 1e-14);
        let u = DiscreteDistribution::uniform(7);
        let h = gait_entropy(&SimilaritySpace::identity(7), &u, EntropyOrder::SHANNON).unwrap();
        assert!((h - 7f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn order_zero_identity_counts_support() {
        let p = dist(&[0.5, 0.0, 0.25, 0.25, 0.0]);
        let h = gait_entropy(&SimilaritySpace::identity(5), &p, EntropyOrder::Finite(0.0)).unwrap();
        assert!((h - 3f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn two_point_entropy_and_diversity() {
        let pts = Points::from_rows(&[[0.0], [1.0]]).unwrap();
        let k = SimilaritySpace::from_points(&pts, &KernelSpec::exp_metric(1.0)).unwrap();
        // dense scan over theta: the maximum sits at 1/2, with exp(H) = 1 + tanh(r/2)
        let best = (1..10_000)
            .map(|i| {
                let t = i as f64 / 10_000.0;
                diversity(&k, &dist(&[t, 1.0 - t]), EntropyOrder::SHANNON).unwrap()
            })
            .fold(f64::MIN, f64::max);
        assert!((best - (1.0 + 0.5f64.tanh())).abs() < 1e-12);
        let half = diversity(&k, &DiscreteDistribution::uniform(2), EntropyOrder::SHANNON).unwrap();
        assert!((half - (1.0 + 0.5f64.tanh())).abs() < 1e-14);
    }

    #[test]
    fn fig2_maximizer_beats_uniform() {
        let k = fig2();
        let star = gait_entropy(&k, &dist(&[0.273, 0.273, 0.454]), EntropyOrder::SHANNON).unwrap();
        let unif = gait_entropy(&k, &DiscreteDistribution::uniform(3), EntropyOrder::SHANNON).unwrap();
        assert!(star > unif);
    }

    #[test]
    fn diversity_extremes() {
        let p = dist(&[0.1, 0.2, 0.7]);
        for a in [0.0, 1.0, 2.0] {
            let d = diversity(&SimilaritySpace::all_ones(3), &p, EntropyOrder::Finite(a)).unwrap();
            assert!((d - 1.0).abs() < 1e-14);
        }
        let d = diversity(&SimilaritySpace::identity(5), &DiscreteDistribution::uniform(5), EntropyOrder::Infinity)
            .unwrap();
        assert!((d - 5.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_identity_and_ones() {
        let p = dist(&[0.1, 0.2, 0.3, 0.4]);
        let g = entropy_grad(&SimilaritySpace::identity(4), &p).unwrap();
        for i in 0..4 {
            assert!((g[i] - (-p.as_slice()[i].ln() - 1.0)).abs() < 1e-14);
        }
        let g = entropy_grad(&SimilaritySpace::all_ones(4), &p).unwrap();
        let mean = g.mean();
        assert!(g.iter().all(|v| (v - mean).abs() < 1e-14));
        assert!(entropy_grad(&SimilaritySpace::identity(2), &dist(&[1.0, 0.0])).is_err());
    }

    #[test]
    fn hessian_identity_and_ones() {
        let p = dist(&[0.1, 0.2, 0.3, 0.4]);
        let h = neg_entropy_hessian(&SimilaritySpace::identity(4), &p).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 1.0 / p.as_slice()[i] } else { 0.0 };
                assert!((h[(i, j)] - expect).abs() < 1e-12);
            }
        }
        let h = neg_entropy_hessian(&SimilaritySpace::all_ones(4), &p).unwrap();
        let v = DVector::from_column_slice(&[1.0, -2.0, 0.5, 0.5]);
        assert!((v.dot(&(&h * &v))).abs() < 1e-12);
        assert!(neg_entropy_hessian(&SimilaritySpace::identity(2), &dist(&[1.0, 0.0])).is_err());
    }

    #[test]
    fn order_parsing() {
        assert_eq!("inf".parse::<EntropyOrder>().unwrap(), EntropyOrder::Infinity);
        assert_eq!("2".parse::<EntropyOrder>().unwrap(), EntropyOrder::Finite(2.0));
        assert!("-1".parse::<EntropyOrder>().is_err());
        assert!("abc".parse::<EntropyOrder>().is_err());
    }

    #[test]
    fn distribution_validation() {
        assert!(DiscreteDistribution::from_slice(&[0.5, 0.6]).is_err());
        assert!(DiscreteDistribution::from_slice(&[1.5, -0.5]).is_err());
        assert!(DiscreteDistribution::from_slice(&[]).is_err());
        let d = DiscreteDistribution::from_weights(DVector::from_column_slice(&[1.0, 3.0])).unwrap();
        assert_eq!(d.as_slice(), &[0.25, 0.75]);
    }
}
