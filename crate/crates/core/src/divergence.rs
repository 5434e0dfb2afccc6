//! The GAIT divergence: the Bregman gap of the negative order-1 entropy,
//! for distributions on one space and for empirical measures with
//! different supports.

use nalgebra::DVector;

use crate::entropy::{DiscreteDistribution, SUPPORT_THRESHOLD};
use crate::error::{GaitError, Result};
use crate::kernels::{build_block_gram, BlockGram, KernelSpec, Points, SimilaritySpace};

/// Weighted atoms in `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    pub atoms: Points,
    pub weights: DiscreteDistribution,
}

impl EmpiricalMeasure {
    pub fn new(atoms: Points, weights: DiscreteDistribution) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(GaitError::DimensionMismatch {
                what: "measure weights",
                expected: atoms.len(),
                got: weights.len(),
            });
        }
        Ok(EmpiricalMeasure { atoms, weights })
    }

    pub fn uniform(atoms: Points) -> Result<Self> {
        let n = atoms.len();
        if n == 0 {
            return Err(GaitError::InvalidParameter("measure needs at least one atom".into()));
        }
        Ok(EmpiricalMeasure { atoms, weights: DiscreteDistribution::uniform(n) })
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.atoms.dim()
    }
}

/// Value of the empirical divergence with its two non-constant terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergenceReport {
    pub value: f64,
    /// `<p, log(K_xx p / K_xy q)>`
    pub term_log: f64,
    /// `<q, K_yx p / K_yy q>`
    pub term_ratio: f64,
}

/// The four profile products every quantity here is built from.
struct Profiles {
    /// `K_xx p`
    a: DVector<f64>,
    /// `K_xy q`
    b: DVector<f64>,
    /// `K_yx p`
    c: DVector<f64>,
    /// `K_yy q`
    e: DVector<f64>,
}

impl Profiles {
    fn new(blocks: &BlockGram, p: &DVector<f64>, q: &DVector<f64>) -> Self {
        Profiles { a: &blocks.xx * p, b: &blocks.xy * q, c: blocks.xy.tr_mul(p), e: &blocks.yy * q }
    }
}

/// `1 + <w, log(num/den)> - <v, num2/den2>` over the supports of `w` and `v`.
fn bregman_terms(
    w: &[f64],
    num: &[f64],
    den: &[f64],
    v: &[f64],
    num2: &[f64],
    den2: &[f64],
) -> Result<DivergenceReport> {
    let mut term_log = 0.0;
    for i in 0..w.len() {
        if w[i] > SUPPORT_THRESHOLD {
            if !(den[i] > 0.0) {
                return Err(GaitError::InfiniteDivergence { index: i });
            }
            term_log += w[i] * (num[i] / den[i]).ln();
        }
    }
    let mut term_ratio = 0.0;
    // <v, r - 1> stands in for `term_ratio - 1` so identical arguments give
    // exactly zero instead of the rounding of 1 - sum(v)
    let mut excess = 0.0;
    for j in 0..v.len() {
        if v[j] > SUPPORT_THRESHOLD {
            let r = num2[j] / den2[j];
            term_ratio += v[j] * r;
            excess += v[j] * (r - 1.0);
        }
    }
    Ok(DivergenceReport { value: term_log - excess, term_log, term_ratio })
}

fn check_blocks(blocks: &BlockGram, p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<()> {
    if p.len() != blocks.n() {
        return Err(GaitError::DimensionMismatch {
            what: "first distribution length",
            expected: blocks.n(),
            got: p.len(),
        });
    }
    if q.len() != blocks.m() {
        return Err(GaitError::DimensionMismatch {
            what: "second distribution length",
            expected: blocks.m(),
            got: q.len(),
        });
    }
    Ok(())
}

/// `D^K(p || q) = 1 + <p, log(Kp/Kq)> - <q, Kp/Kq>` on a shared space.
///
/// With `K = I` and `q` vanishing on `supp(p)` this returns
/// [`GaitError::InfiniteDivergence`].
pub fn gait_divergence_shared(
    space: &SimilaritySpace,
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
) -> Result<f64> {
    for d in [p, q] {
        if d.len() != space.len() {
            return Err(GaitError::DimensionMismatch {
                what: "distribution length",
                expected: space.len(),
                got: d.len(),
            });
        }
    }
    let kp = space.apply(p.as_vector());
    let kq = space.apply(q.as_vector());
    let r = bregman_terms(p.as_slice(), kp.as_slice(), kq.as_slice(), q.as_slice(), kp.as_slice(), kq.as_slice())?;
    Ok(r.value)
}

/// Divergence between `sum p_i delta_{x_i}` and `sum q_j delta_{y_j}` from
/// the block Gram matrix of the union of supports.
pub fn gait_divergence_empirical(
    blocks: &BlockGram,
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
) -> Result<DivergenceReport> {
    check_blocks(blocks, p, q)?;
    let pr = Profiles::new(blocks, p.as_vector(), q.as_vector());
    bregman_terms(p.as_slice(), pr.a.as_slice(), pr.b.as_slice(), q.as_slice(), pr.c.as_slice(), pr.e.as_slice())
}

/// `(D(p || q), D(q || p))`. The reverse direction swaps block roles on the
/// same four profile products instead of rebuilding anything.
pub fn forward_backward(blocks: &BlockGram, p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<(f64, f64)> {
    check_blocks(blocks, p, q)?;
    let pr = Profiles::new(blocks, p.as_vector(), q.as_vector());
    let fwd =
        bregman_terms(p.as_slice(), pr.a.as_slice(), pr.b.as_slice(), q.as_slice(), pr.c.as_slice(), pr.e.as_slice())?;
    let bwd =
        bregman_terms(q.as_slice(), pr.e.as_slice(), pr.c.as_slice(), p.as_slice(), pr.b.as_slice(), pr.a.as_slice())?;
    Ok((fwd.value, bwd.value))
}

/// Unconstrained partial derivatives of the empirical divergence with
/// respect to `p` and `q`.
pub fn divergence_grad_weights(
    blocks: &BlockGram,
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
) -> Result<(DVector<f64>, DVector<f64>)> {
    check_blocks(blocks, p, q)?;
    grad_weights_raw(blocks, p.as_vector(), q.as_vector())
}

pub(crate) fn grad_weights_raw(
    blocks: &BlockGram,
    p: &DVector<f64>,
    q: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let Profiles { a, b, c, e } = Profiles::new(blocks, p, q);
    if let Some(i) = b.iter().position(|&v| !(v > 0.0)) {
        return Err(GaitError::InfiniteDivergence { index: i });
    }
    let p_over_a = p.component_div(&a);
    let q_over_e = q.component_div(&e);
    // d/dp = log(a/b) + K_xx (p/a) - K_xy (q/e)
    let kxx_pa = &blocks.xx * &p_over_a;
    let kxy_qe = &blocks.xy * &q_over_e;
    let gp = DVector::from_fn(p.len(), |i, _| (a[i] / b[i]).ln() + kxx_pa[i] - kxy_qe[i]);
    // d/dq = -K_yx (p/b) - c/e + K_yy (q c / e^2)
    let p_over_b = p.component_div(&b);
    let kyx_pb = blocks.xy.tr_mul(&p_over_b);
    let w = DVector::from_fn(q.len(), |j, _| q[j] * c[j] / (e[j] * e[j]));
    let kyy_w = &blocks.yy * &w;
    let gq = DVector::from_fn(q.len(), |j, _| -kyx_pb[j] - c[j] / e[j] + kyy_w[j]);
    Ok((gp, gq))
}

/// Gradients of the empirical divergence with respect to atom locations.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomGradients {
    /// `n x d`, row `i` is `dD/dx_i`.
    pub x: Points,
    /// `m x d`, row `j` is `dD/dy_j`.
    pub y: Points,
    /// A nonsmooth kernel was evaluated at coincident atoms.
    pub degenerate: bool,
}

/// Chain rule through `kernel_grad_x` for every Gram entry touching an atom.
pub fn divergence_grad_atoms(x: &EmpiricalMeasure, y: &EmpiricalMeasure, spec: &KernelSpec) -> Result<AtomGradients> {
    let blocks = build_block_gram(&x.atoms, &y.atoms, spec)?;
    atom_grads_with_blocks(&blocks, x, y, spec, true, true)
}

pub(crate) fn atom_grads_with_blocks(
    blocks: &BlockGram,
    x: &EmpiricalMeasure,
    y: &EmpiricalMeasure,
    spec: &KernelSpec,
    want_x: bool,
    want_y: bool,
) -> Result<AtomGradients> {
    let p = x.weights.as_vector();
    let q = y.weights.as_vector();
    let Profiles { a, b, c, e } = Profiles::new(blocks, p, q);
    if let Some(i) = b.iter().position(|&v| !(v > 0.0)) {
        return Err(GaitError::InfiniteDivergence { index: i });
    }
    let (n, m, d) = (x.len(), y.len(), x.dim());
    let mut degenerate = false;
    let mut gx = vec![0.0; n * d];
    let mut gy = vec![0.0; m * d];
    let pa: Vec<f64> = (0..n).map(|i| p[i] / a[i]).collect();
    let pb: Vec<f64> = (0..n).map(|i| p[i] / b[i]).collect();
    let qe: Vec<f64> = (0..m).map(|j| q[j] / e[j]).collect();
    let qce2: Vec<f64> = (0..m).map(|j| q[j] * c[j] / (e[j] * e[j])).collect();

    let mut acc = |out: &mut [f64], coef: f64, g: &crate::kernels::KernelGrad| {
        degenerate |= g.degenerate;
        for (o, gi) in out.iter_mut().zip(&g.grad) {
            *o += coef * gi;
        }
    };

    if want_x {
        for mi in 0..n {
            let xm = x.atoms.row(mi);
            let out = &mut gx[mi * d..(mi + 1) * d];
            for k in 0..n {
                if k == mi {
                    continue;
                }
                let g = spec.grad_x(xm, x.atoms.row(k));
                // (p_m / a_m) p_k + p_m (p_k / a_k)
                acc(out, pa[mi] * p[k] + p[mi] * pa[k], &g);
            }
            for j in 0..m {
                let g = spec.grad_x(xm, y.atoms.row(j));
                // -(p_m / b_m) q_j - p_m q_j / e_j
                acc(out, -pb[mi] * q[j] - p[mi] * qe[j], &g);
            }
        }
    }
    if want_y {
        for l in 0..m {
            let yl = y.atoms.row(l);
            let out = &mut gy[l * d..(l + 1) * d];
            for i in 0..n {
                let g = spec.grad_x(yl, x.atoms.row(i));
                // -q_l p_i / b_i - (q_l / e_l) p_i
                acc(out, -q[l] * pb[i] - qe[l] * p[i], &g);
            }
            for k in 0..m {
                if k == l {
                    continue;
                }
                let g = spec.grad_x(yl, y.atoms.row(k));
                // (q_l c_l / e_l^2) q_k + q_l (q_k c_k / e_k^2)
                acc(out, qce2[l] * q[k] + q[l] * qce2[k], &g);
            }
        }
    }
    Ok(AtomGradients { x: Points::new(d, gx)?, y: Points::new(d, gy)?, degenerate })
}

/// Swap the roles of the two supports.
pub fn transpose_blocks(blocks: &BlockGram) -> BlockGram {
    BlockGram { xx: blocks.yy.clone(), xy: blocks.xy.transpose(), yy: blocks.xx.clone() }
}

/// Kullback-Leibler divergence, `+inf` on unmatched support.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| if qi > 0.0 { pi * (pi / qi).ln() } else { f64::INFINITY })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn dist(p: &[f64]) -> DiscreteDistribution {
        DiscreteDistribution::from_slice(p).unwrap()
    }

    #[test]
    fn zero_at_equal_arguments() {
        let k =
            SimilaritySpace::explicit(DMatrix::from_row_slice(3, 3, &[1.0, 0.7, 0.1, 0.7, 1.0, 0.1, 0.1, 0.1, 1.0]))
                .unwrap();
        let p = dist(&[0.2, 0.5, 0.3]);
        assert_eq!(gait_divergence_shared(&k, &p, &p).unwrap(), 0.0);
    }

    #[test]
    fn identity_gives_kl() {
        let id = SimilaritySpace::identity(2);
        let d = gait_divergence_shared(&id, &dist(&[0.5, 0.5]), &dist(&[0.25, 0.75])).unwrap();
        let expect = 0.5 * 2f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
        assert!((d - expect).abs() < 1e-15);
        assert!((d - 0.143_841_036_225_890_3).abs() < 1e-12);
    }

    #[test]
    fn identity_unmatched_support_is_infinite() {
        let id = SimilaritySpace::identity(2);
        let r = gait_divergence_shared(&id, &dist(&[0.5, 0.5]), &dist(&[1.0, 0.0]));
        assert_eq!(r, Err(GaitError::InfiniteDivergence { index: 1 }));
    }

    #[test]
    fn all_ones_is_zero() {
        let j = SimilaritySpace::all_ones(3);
        let d = gait_divergence_shared(&j, &dist(&[0.1, 0.1, 0.8]), &dist(&[0.6, 0.3, 0.1])).unwrap();
        assert!(d.abs() < 1e-15);
    }

    #[test]
    fn empirical_report_invariant() {
        let x = Points::from_rows(&[[0.0, 0.0], [1.0, 0.5], [2.0, -1.0]]).unwrap();
        let y = Points::from_rows(&[[0.3, 0.1], [1.5, 1.5]]).unwrap();
        let b = build_block_gram(&x, &y, &KernelSpec::exp_metric(1.0)).unwrap();
        let r = gait_divergence_empirical(&b, &dist(&[0.2, 0.3, 0.5]), &dist(&[0.6, 0.4])).unwrap();
        assert_eq!(r.value, 1.0 + r.term_log - r.term_ratio);
        assert!(r.value > 0.0);
        let same = build_block_gram(&x, &x, &KernelSpec::exp_metric(1.0)).unwrap();
        let p = dist(&[0.2, 0.3, 0.5]);
        assert!(gait_divergence_empirical(&same, &p, &p).unwrap().value.abs() < 1e-15);
    }

    #[test]
    fn forward_backward_matches_transposed_blocks() {
        let x = Points::from_rows(&[[0.0, 0.0], [1.0, 0.5], [2.0, -1.0]]).unwrap();
        let y = Points::from_rows(&[[0.3, 0.1], [1.5, 1.5]]).unwrap();
        let b = build_block_gram(&x, &y, &KernelSpec::rbf_sq(0.8)).unwrap();
        let (p, q) = (dist(&[0.2, 0.3, 0.5]), dist(&[0.6, 0.4]));
        let (f, r) = forward_backward(&b, &p, &q).unwrap();
        let f2 = gait_divergence_empirical(&b, &p, &q).unwrap().value;
        let r2 = gait_divergence_empirical(&transpose_blocks(&b), &q, &p).unwrap().value;
        assert_eq!(f, f2);
        assert!((r - r2).abs() < 1e-15);

        let same = BlockGram::shared(&SimilaritySpace::identity(2));
        let (f, r) = forward_backward(&same, &dist(&[0.5, 0.5]), &dist(&[0.25, 0.75])).unwrap();
        assert!((f - kl_divergence(&[0.5, 0.5], &[0.25, 0.75])).abs() < 1e-15);
        assert!((r - kl_divergence(&[0.25, 0.75], &[0.5, 0.5])).abs() < 1e-15);
        assert!((f - r).abs() > 1e-3);
    }

    #[test]
    fn weight_gradient_identity_is_kl_gradient_on_tangent() {
        let b = BlockGram::shared(&SimilaritySpace::identity(3));
        let (p, q) = (dist(&[0.2, 0.3, 0.5]), dist(&[0.4, 0.4, 0.2]));
        let (gp, _) = divergence_grad_weights(&b, &p, &q).unwrap();
        // differs from log(p/q) + 1 by a multiple of the ones vector
        let diff: Vec<f64> = (0..3).map(|i| gp[i] - ((p.as_slice()[i] / q.as_slice()[i]).ln() + 1.0)).collect();
        assert!(diff.iter().all(|v| (v - diff[0]).abs() < 1e-14));
    }

    #[test]
    fn weight_gradient_stationary_at_equal_measures() {
        let x = Points::from_rows(&[[0.0], [0.7], [2.0]]).unwrap();
        let b = build_block_gram(&x, &x, &KernelSpec::rbf_sq(1.0)).unwrap();
        let p = dist(&[0.2, 0.3, 0.5]);
        let (gp, gq) = divergence_grad_weights(&b, &p, &p).unwrap();
        for g in [gp, gq] {
            let mean = g.mean();
            assert!(g.iter().all(|v| (v - mean).abs() < 1e-14));
        }
    }

    #[test]
    fn atom_gradient_single_coincident_atoms() {
        let x = EmpiricalMeasure::uniform(Points::from_rows(&[[0.4, -0.2]]).unwrap()).unwrap();
        let g = divergence_grad_atoms(&x, &x, &KernelSpec::rbf_sq(1.0)).unwrap();
        assert!(g.y.as_slice().iter().all(|v| v.abs() < 1e-15));
        assert!(!g.degenerate);
        let g = divergence_grad_atoms(&x, &x, &KernelSpec::exp_metric(1.0)).unwrap();
        assert!(g.degenerate);
    }
}
