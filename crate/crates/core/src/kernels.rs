//! Similarity kernels, Gram matrices and the separable Gaussian operator for
//! grid measures.
//!
//! Every kernel family here has unit self-similarity and values in `[0, 1]`,
//! so the Gram matrices they induce are valid similarity spaces.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{GaitError, Result};

const EXPLICIT_TOL: f64 = 1e-12;

/// Kernel family and its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `exp(-|x - y|^2 / (2 sigma^2))`
    RbfSq { sigma: f64 },
    /// `exp(-|x - y|_order / sigma)` for a norm of order `>= 1`.
    ExpMetric { sigma: f64, order: f64 },
    /// `1 / (1 + |x - y|^exponent)`
    Polynomial { exponent: f64 },
}

impl KernelSpec {
    pub fn rbf_sq(sigma: f64) -> Self {
        KernelSpec::RbfSq { sigma }
    }

    /// Euclidean exponential kernel, `exp(-|x - y|_2 / sigma)`.
    pub fn exp_metric(sigma: f64) -> Self {
        KernelSpec::ExpMetric { sigma, order: 2.0 }
    }

    pub fn polynomial(exponent: f64) -> Self {
        KernelSpec::Polynomial { exponent }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, name: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(GaitError::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
            }
        };
        match *self {
            KernelSpec::RbfSq { sigma } => positive(sigma, "bandwidth"),
            KernelSpec::ExpMetric { sigma, order } => {
                positive(sigma, "bandwidth")?;
                if !(order.is_finite() && order >= 1.0) {
                    return Err(GaitError::InvalidParameter(format!("norm order must be >= 1, got {order}")));
                }
                Ok(())
            }
            KernelSpec::Polynomial { exponent } => positive(exponent, "exponent"),
        }
    }

    /// Whether the kernel is differentiable at coincident points.
    pub fn is_smooth(&self) -> bool {
        matches!(self, KernelSpec::RbfSq { .. })
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), y.len());
        let k = match *self {
            KernelSpec::RbfSq { sigma } => {
                let r2 = sq_dist(x, y);
                (-r2 / (2.0 * sigma * sigma)).exp()
            }
            KernelSpec::ExpMetric { sigma, order } => (-p_norm_dist(x, y, order) / sigma).exp(),
            KernelSpec::Polynomial { exponent } => 1.0 / (1.0 + sq_dist(x, y).sqrt().powf(exponent)),
        };
        k.clamp(0.0, 1.0)
    }

    /// Gradient of `kappa(x, y)` with respect to `x`.
    ///
    /// Nonsmooth families evaluated at `x == y` return the zero subgradient
    /// with `degenerate` set.
    pub fn grad_x(&self, x: &[f64], y: &[f64]) -> KernelGrad {
        let d = x.len();
        let mut grad = vec![0.0; d];
        let mut degenerate = false;
        match *self {
            KernelSpec::RbfSq { sigma } => {
                let s2 = sigma * sigma;
                let k = (-sq_dist(x, y) / (2.0 * s2)).exp();
                for i in 0..d {
                    grad[i] = -k * (x[i] - y[i]) / s2;
                }
            }
            KernelSpec::ExpMetric { sigma, order } => {
                let r = p_norm_dist(x, y, order);
                if r == 0.0 {
                    degenerate = true;
                } else {
                    let k = (-r / sigma).exp();
                    let rp = r.powf(order - 1.0);
                    for i in 0..d {
                        let v = x[i] - y[i];
                        let dnorm = v.signum() * v.abs().powf(order - 1.0) / rp;
                        grad[i] = if v == 0.0 { 0.0 } else { -k * dnorm / sigma };
                    }
                }
            }
            KernelSpec::Polynomial { exponent } => {
                let r = sq_dist(x, y).sqrt();
                if r == 0.0 {
                    // the gradient is zero for exponent > 1 but undefined below
                    degenerate = exponent <= 1.0;
                } else {
                    let k = 1.0 / (1.0 + r.powf(exponent));
                    let scale = -k * k * exponent * r.powf(exponent - 2.0);
                    for i in 0..d {
                        grad[i] = scale * (x[i] - y[i]);
                    }
                }
            }
        }
        KernelGrad { grad, degenerate }
    }
}

/// Result of [`KernelSpec::grad_x`].
#[derive(Debug, Clone, PartialEq)]
pub struct KernelGrad {
    pub grad: Vec<f64>,
    /// Set when the kernel is not differentiable at the evaluation point.
    pub degenerate: bool,
}

pub fn kernel_grad_x(x: &[f64], y: &[f64], spec: &KernelSpec) -> Result<KernelGrad> {
    spec.validate()?;
    if x.len() != y.len() {
        return Err(GaitError::DimensionMismatch { what: "kernel arguments", expected: x.len(), got: y.len() });
    }
    Ok(spec.grad_x(x, y))
}

fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn p_norm_dist(x: &[f64], y: &[f64], order: f64) -> f64 {
    if order == 2.0 {
        return sq_dist(x, y).sqrt();
    }
    if order == 1.0 {
        return x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum();
    }
    x.iter().zip(y).map(|(a, b)| (a - b).abs().powf(order)).sum::<f64>().powf(1.0 / order)
}

/// Distance of order `order` between two points.
pub fn distance(x: &[f64], y: &[f64], order: f64) -> f64 {
    p_norm_dist(x, y, order)
}

/// A set of `n` points in `R^d`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Points {
    dim: usize,
    data: Vec<f64>,
}

impl Points {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(GaitError::InvalidParameter("point dimension must be >= 1".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(GaitError::DimensionMismatch {
                what: "point buffer length",
                expected: (data.len() / dim + 1) * dim,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(GaitError::NonFinite("point coordinates"));
        }
        Ok(Points { dim, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(1);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(GaitError::DimensionMismatch { what: "point dimension", expected: dim, got: r.len() });
            }
            data.extend_from_slice(r);
        }
        Points::new(dim, data)
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    FromPoints,
    Explicit,
}

/// A finite similarity space: symmetric Gram matrix with unit diagonal and
/// entries in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilaritySpace {
    gram: DMatrix<f64>,
    provenance: Provenance,
}

impl SimilaritySpace {
    /// Validate a user-supplied Gram matrix.
    pub fn explicit(mut gram: DMatrix<f64>) -> Result<Self> {
        let n = gram.nrows();
        if n == 0 {
            return Err(GaitError::InvalidGram("empty matrix".into()));
        }
        if gram.ncols() != n {
            return Err(GaitError::DimensionMismatch { what: "gram matrix columns", expected: n, got: gram.ncols() });
        }
        if gram.iter().any(|v| !v.is_finite()) {
            return Err(GaitError::NonFinite("gram matrix"));
        }
        for i in 0..n {
            if (gram[(i, i)] - 1.0).abs() > EXPLICIT_TOL {
                return Err(GaitError::InvalidGram(format!("diagonal entry ({i},{i}) = {} is not 1", gram[(i, i)])));
            }
            for j in 0..n {
                let v = gram[(i, j)];
                if (v - gram[(j, i)]).abs() > EXPLICIT_TOL {
                    return Err(GaitError::InvalidGram(format!("not symmetric at ({i},{j})")));
                }
                if !(-EXPLICIT_TOL..=1.0 + EXPLICIT_TOL).contains(&v) {
                    return Err(GaitError::InvalidGram(format!("entry ({i},{j}) = {v} outside [0, 1]")));
                }
            }
        }
        for i in 0..n {
            gram[(i, i)] = 1.0;
            for j in 0..i {
                let v = (0.5 * (gram[(i, j)] + gram[(j, i)])).clamp(0.0, 1.0);
                gram[(i, j)] = v;
                gram[(j, i)] = v;
            }
        }
        Ok(SimilaritySpace { gram, provenance: Provenance::Explicit })
    }

    pub fn from_points(points: &Points, spec: &KernelSpec) -> Result<Self> {
        build_gram(points, spec)
    }

    pub fn identity(n: usize) -> Self {
        SimilaritySpace { gram: DMatrix::identity(n, n), provenance: Provenance::Explicit }
    }

    pub fn all_ones(n: usize) -> Self {
        SimilaritySpace { gram: DMatrix::from_element(n, n, 1.0), provenance: Provenance::Explicit }
    }

    pub fn len(&self) -> usize {
        self.gram.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.gram.nrows() == 0
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.gram
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// `K v`
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.gram * v
    }
}

/// Gram matrix of `spec` over the rows of `points`.
pub fn build_gram(points: &Points, spec: &KernelSpec) -> Result<SimilaritySpace> {
    spec.validate()?;
    let n = points.len();
    if n == 0 {
        return Err(GaitError::InvalidParameter("at least one point is required".into()));
    }
    let mut gram = DMatrix::zeros(n, n);
    for i in 0..n {
        gram[(i, i)] = 1.0;
        let xi = points.row(i);
        for j in 0..i {
            let v = spec.eval(xi, points.row(j));
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    Ok(SimilaritySpace { gram, provenance: Provenance::FromPoints })
}

/// Cross-kernel matrix `(K_xy)_ij = kappa(x_i, y_j)`.
pub fn cross_gram(x: &Points, y: &Points, spec: &KernelSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    if x.dim() != y.dim() {
        return Err(GaitError::DimensionMismatch { what: "point dimension", expected: x.dim(), got: y.dim() });
    }
    Ok(DMatrix::from_fn(x.len(), y.len(), |i, j| spec.eval(x.row(i), y.row(j))))
}

/// Partitioned Gram matrix over the union of two supports. `K_yx` is the
/// transpose of `K_xy` and is never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockGram {
    pub xx: DMatrix<f64>,
    pub xy: DMatrix<f64>,
    pub yy: DMatrix<f64>,
}

impl BlockGram {
    pub fn new(xx: DMatrix<f64>, xy: DMatrix<f64>, yy: DMatrix<f64>) -> Result<Self> {
        let n = xx.nrows();
        let m = yy.nrows();
        if xx.ncols() != n || yy.ncols() != m {
            return Err(GaitError::InvalidGram("diagonal blocks must be square".into()));
        }
        if xy.shape() != (n, m) {
            return Err(GaitError::DimensionMismatch { what: "cross block rows", expected: n, got: xy.nrows() });
        }
        Ok(BlockGram { xx, xy, yy })
    }

    /// Both diagonal blocks taken from one space, cross block equal to it.
    pub fn shared(space: &SimilaritySpace) -> Self {
        let k = space.matrix().clone();
        BlockGram { xx: k.clone(), xy: k.clone(), yy: k }
    }

    pub fn n(&self) -> usize {
        self.xx.nrows()
    }

    pub fn m(&self) -> usize {
        self.yy.nrows()
    }
}

pub fn build_block_gram(x: &Points, y: &Points, spec: &KernelSpec) -> Result<BlockGram> {
    let xy = cross_gram(x, y, spec)?;
    let xx = build_gram(x, spec)?.into_matrix();
    let yy = build_gram(y, spec)?.into_matrix();
    Ok(BlockGram { xx, xy, yy })
}

/// A `d x d` grid of nonnegative intensities normalized to unit mass.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMeasure {
    mass: DMatrix<f64>,
}

impl GridMeasure {
    pub fn from_intensities(intensities: DMatrix<f64>) -> Result<Self> {
        if intensities.nrows() != intensities.ncols() {
            return Err(GaitError::DimensionMismatch {
                what: "grid columns",
                expected: intensities.nrows(),
                got: intensities.ncols(),
            });
        }
        if intensities.is_empty() {
            return Err(GaitError::InvalidParameter("empty grid".into()));
        }
        if intensities.iter().any(|v| !v.is_finite()) {
            return Err(GaitError::NonFinite("grid intensities"));
        }
        if intensities.iter().any(|&v| v < 0.0) {
            return Err(GaitError::InvalidParameter("grid intensities must be >= 0".into()));
        }
        let total = intensities.sum();
        if total <= 0.0 {
            return Err(GaitError::InvalidParameter("grid has zero total mass".into()));
        }
        Ok(GridMeasure { mass: intensities / total })
    }

    pub fn side(&self) -> usize {
        self.mass.nrows()
    }

    pub fn mass(&self) -> &DMatrix<f64> {
        &self.mass
    }

    /// Row-major flattening, matching [`pixel_points`].
    pub fn flatten(&self) -> DVector<f64> {
        let d = self.side();
        DVector::from_fn(d * d, |k, _| self.mass[(k / d, k % d)])
    }
}

/// Pixel coordinate along one axis, normalized to `[0, 1]`.
pub fn pixel_coordinate(i: usize, d: usize) -> f64 {
    if d <= 1 {
        0.0
    } else {
        i as f64 / (d - 1) as f64
    }
}

/// The `d^2` pixel centres of a `d x d` grid in row-major order.
pub fn pixel_points(d: usize) -> Points {
    let mut data = Vec::with_capacity(2 * d * d);
    for r in 0..d {
        for c in 0..d {
            data.push(pixel_coordinate(r, d));
            data.push(pixel_coordinate(c, d));
        }
    }
    Points { dim: 2, data }
}

/// Gaussian Gram operator on a `d x d` grid applied as two 1-D passes.
///
/// The 2-D kernel factorizes as `g(r, r') g(c, c')`, so `K vec(P)` equals
/// `vec(G P G)`: two `d x d` matrix products, `O(d^3)` in total.
#[derive(Debug, Clone)]
pub struct SeparableGaussian {
    factor: DMatrix<f64>,
}

impl SeparableGaussian {
    pub fn new(d: usize, sigma: f64) -> Result<Self> {
        KernelSpec::rbf_sq(sigma).validate()?;
        if d == 0 {
            return Err(GaitError::InvalidParameter("grid side must be >= 1".into()));
        }
        let s2 = 2.0 * sigma * sigma;
        let factor = DMatrix::from_fn(d, d, |i, j| {
            let t = pixel_coordinate(i, d) - pixel_coordinate(j, d);
            (-t * t / s2).exp()
        });
        Ok(SeparableGaussian { factor })
    }

    pub fn side(&self) -> usize {
        self.factor.nrows()
    }

    /// The 1-D Gram factor `G`.
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn apply(&self, grid: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let d = self.side();
        if grid.nrows() != d || grid.ncols() != d {
            return Err(GaitError::DimensionMismatch {
                what: "grid side",
                expected: d,
                got: grid.nrows().max(grid.ncols()),
            });
        }
        let rows_done = grid * &self.factor;
        Ok(&self.factor * rows_done)
    }
}

/// `K p` for an image measure under the rbf_sq kernel over normalized pixel
/// coordinates.
pub fn conv_apply(image: &GridMeasure, sigma: f64) -> Result<DMatrix<f64>> {
    SeparableGaussian::new(image.side(), sigma)?.apply(image.mass())
}
