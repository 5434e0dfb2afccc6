//! Joint and conditional entropies, mutual information and the data
//! processing check, all at order 1, over product similarity spaces.
//!
//! Product Grams are never formed: `(K ⊗ Λ) vec(P) = vec(K P Λ)`, and the
//! three-variable case applies one factor per tensor axis.

use nalgebra::DMatrix;

use crate::entropy::SUPPORT_THRESHOLD;
use crate::error::{GaitError, Result};
use crate::kernels::SimilaritySpace;

const MASS_TOL: f64 = 1e-12;

/// Dense row-major tensor (last axis fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if shape.is_empty() || len == 0 {
            return Err(GaitError::InvalidParameter("tensor needs a non-empty shape".into()));
        }
        if data.len() != len {
            return Err(GaitError::DimensionMismatch { what: "tensor entries", expected: len, got: data.len() });
        }
        Ok(Tensor { shape, data })
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let data = (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)])).collect();
        Tensor { shape: vec![m.nrows(), m.ncols()], data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    fn offset(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.shape).fold(0, |acc, (i, s)| acc * s + i)
    }

    /// Sum out every axis not listed in `keep` (which must be increasing).
    pub fn marginal(&self, keep: &[usize]) -> Tensor {
        let shape: Vec<usize> = keep.iter().map(|&a| self.shape[a]).collect();
        let mut out = vec![0.0; shape.iter().product()];
        let mut idx = vec![0; self.shape.len()];
        for &v in &self.data {
            let o = keep.iter().fold(0, |acc, &a| acc * self.shape[a] + idx[a]);
            out[o] += v;
            // odometer increment
            for ax in (0..idx.len()).rev() {
                idx[ax] += 1;
                if idx[ax] < self.shape[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        Tensor { shape, data: out }
    }

    /// Multiply axis `axis` by the symmetric matrix `g`.
    fn apply_axis(&self, axis: usize, g: &DMatrix<f64>) -> Tensor {
        let n = self.shape[axis];
        let outer: usize = self.shape[..axis].iter().product();
        let inner: usize = self.shape[axis + 1..].iter().product();
        let mut out = vec![0.0; self.data.len()];
        for o in 0..outer {
            let base = o * n * inner;
            for i in 0..n {
                let dst = base + i * inner;
                for j in 0..n {
                    let w = g[(i, j)];
                    if w == 0.0 {
                        continue;
                    }
                    let src = base + j * inner;
                    for t in 0..inner {
                        out[dst + t] += w * self.data[src + t];
                    }
                }
            }
        }
        Tensor { shape: self.shape.clone(), data: out }
    }
}

/// Product Gram `G_1 ⊗ ... ⊗ G_k`, applied axis by axis.
#[derive(Debug, Clone, Copy)]
pub struct TensorGram<'a> {
    factors: &'a [&'a SimilaritySpace],
}

impl<'a> TensorGram<'a> {
    pub fn new(factors: &'a [&'a SimilaritySpace]) -> Self {
        TensorGram { factors }
    }

    pub fn shape(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.len()).collect()
    }

    /// One entry of the product Gram between multi-indices `a` and `b`.
    pub fn entry(&self, a: &[usize], b: &[usize]) -> f64 {
        self.factors.iter().zip(a.iter().zip(b)).map(|(f, (&i, &j))| f.matrix()[(i, j)]).product()
    }

    pub fn apply(&self, p: &Tensor) -> Result<Tensor> {
        if p.shape() != self.shape().as_slice() {
            return Err(GaitError::InvalidParameter(format!(
                "tensor shape {:?} does not match Gram shape {:?}",
                p.shape(),
                self.shape()
            )));
        }
        let mut out = p.clone();
        for (axis, f) in self.factors.iter().enumerate() {
            out = out.apply_axis(axis, f.matrix());
        }
        Ok(out)
    }

    /// The full matrix over flattened indices. Refused above 4096 rows.
    pub fn materialize(&self) -> Result<DMatrix<f64>> {
        let shape = self.shape();
        let total: usize = shape.iter().product();
        if total > 4096 {
            return Err(GaitError::InvalidParameter(format!(
                "refusing to materialize a {total} x {total} product Gram"
            )));
        }
        let unflatten = |mut k: usize| {
            let mut idx = vec![0; shape.len()];
            for ax in (0..shape.len()).rev() {
                idx[ax] = k % shape[ax];
                k /= shape[ax];
            }
            idx
        };
        Ok(DMatrix::from_fn(total, total, |r, c| self.entry(&unflatten(r), &unflatten(c))))
    }
}

/// `-sum P log (G P)` over the support of `P`.
pub fn tensor_entropy(p: &Tensor, gram: &TensorGram) -> Result<f64> {
    let gp = gram.apply(p)?;
    Ok(-p
        .as_slice()
        .iter()
        .zip(gp.as_slice())
        .filter(|(&v, _)| v > SUPPORT_THRESHOLD)
        .map(|(&v, &g)| v * g.ln())
        .sum::<f64>())
}

fn check_mass(data: &[f64]) -> Result<()> {
    if let Some(v) = data.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(GaitError::NotADistribution(format!("entry {v} is negative or not finite")));
    }
    let total: f64 = data.iter().sum();
    if (total - 1.0).abs() > MASS_TOL {
        return Err(GaitError::NotADistribution(format!("total mass {total} is not 1")));
    }
    Ok(())
}

fn check_space(space: &SimilaritySpace, len: usize, what: &'static str) -> Result<()> {
    if space.len() != len {
        return Err(GaitError::DimensionMismatch { what, expected: len, got: space.len() });
    }
    Ok(())
}

/// A two-variable joint table with a similarity space on each variable.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    table: DMatrix<f64>,
    space_x: SimilaritySpace,
    space_y: SimilaritySpace,
}

impl JointDistribution {
    pub fn new(table: DMatrix<f64>, space_x: SimilaritySpace, space_y: SimilaritySpace) -> Result<Self> {
        check_mass(table.as_slice())?;
        check_space(&space_x, table.nrows(), "row space size")?;
        check_space(&space_y, table.ncols(), "column space size")?;
        Ok(JointDistribution { table, space_x, space_y })
    }

    pub fn table(&self) -> &DMatrix<f64> {
        &self.table
    }

    pub fn space_x(&self) -> &SimilaritySpace {
        &self.space_x
    }

    pub fn space_y(&self) -> &SimilaritySpace {
        &self.space_y
    }

    pub fn marginal_x(&self) -> Vec<f64> {
        self.table.row_iter().map(|r| r.sum()).collect()
    }

    pub fn marginal_y(&self) -> Vec<f64> {
        self.table.column_iter().map(|c| c.sum()).collect()
    }

    /// `H^K[X]`
    pub fn entropy_x(&self) -> f64 {
        marginal_entropy(&self.space_x, &self.marginal_x())
    }

    /// `H^Λ[Y]`
    pub fn entropy_y(&self) -> f64 {
        marginal_entropy(&self.space_y, &self.marginal_y())
    }
}

fn marginal_entropy(space: &SimilaritySpace, p: &[f64]) -> f64 {
    let t = Tensor { shape: vec![p.len()], data: p.to_vec() };
    tensor_entropy(&t, &TensorGram::new(&[space])).expect("shapes checked at construction")
}

/// `H^{K⊗Λ}[X, Y] = -sum P log (K P Λ)`
pub fn joint_entropy(j: &JointDistribution) -> f64 {
    let kpl = j.space_x.matrix() * &j.table * j.space_y.matrix();
    -j.table.iter().zip(kpl.iter()).filter(|(&p, _)| p > SUPPORT_THRESHOLD).map(|(&p, &g)| p * g.ln()).sum::<f64>()
}

/// `H[X | Y] = H[X, Y] - H[Y]`
pub fn conditional_entropy(j: &JointDistribution) -> f64 {
    joint_entropy(j) - j.entropy_y()
}

/// `I[X; Y] = H[X] + H[Y] - H[X, Y]`
pub fn mutual_information(j: &JointDistribution) -> f64 {
    j.entropy_x() + j.entropy_y() - joint_entropy(j)
}

/// A three-variable joint table with spaces `K`, `Λ`, `Θ` on `X`, `Y`, `Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct Joint3 {
    table: Tensor,
    spaces: [SimilaritySpace; 3],
}

/// Variable labels for [`Joint3`] axes.
pub const X: usize = 0;
pub const Y: usize = 1;
pub const Z: usize = 2;

impl Joint3 {
    pub fn new(table: Tensor, spaces: [SimilaritySpace; 3]) -> Result<Self> {
        if table.shape().len() != 3 {
            return Err(GaitError::InvalidParameter("a three-way table is required".into()));
        }
        check_mass(table.as_slice())?;
        for (ax, s) in spaces.iter().enumerate() {
            check_space(s, table.shape()[ax], "axis space size")?;
        }
        Ok(Joint3 { table, spaces })
    }

    /// The chain `P(x) P(y|x) P(z|y)`; conditional tables are row-stochastic.
    pub fn markov_chain(
        px: &[f64],
        y_given_x: &DMatrix<f64>,
        z_given_y: &DMatrix<f64>,
        spaces: [SimilaritySpace; 3],
    ) -> Result<Self> {
        let (n, m, l) = (px.len(), y_given_x.ncols(), z_given_y.ncols());
        if y_given_x.nrows() != n || z_given_y.nrows() != m {
            return Err(GaitError::InvalidParameter("conditional table shapes do not chain".into()));
        }
        let mut data = Vec::with_capacity(n * m * l);
        for x in 0..n {
            for y in 0..m {
                for z in 0..l {
                    data.push(px[x] * y_given_x[(x, y)] * z_given_y[(y, z)]);
                }
            }
        }
        Joint3::new(Tensor::new(vec![n, m, l], data)?, spaces)
    }

    pub fn table(&self) -> &Tensor {
        &self.table
    }

    /// Joint entropy of the listed variables (increasing axis labels).
    pub fn entropy(&self, vars: &[usize]) -> f64 {
        let p = self.table.marginal(vars);
        let factors: Vec<&SimilaritySpace> = vars.iter().map(|&v| &self.spaces[v]).collect();
        tensor_entropy(&p, &TensorGram::new(&factors)).expect("shapes checked at construction")
    }

    /// `I[A; B] = H[A] + H[B] - H[A, B]` for disjoint variable sets.
    pub fn mutual_information(&self, a: &[usize], b: &[usize]) -> f64 {
        self.entropy(a) + self.entropy(b) - self.entropy(&union(a, b))
    }

    /// `I[A; B | C] = H[A, C] + H[B, C] - H[A, B, C] - H[C]`, i.e.
    /// `H[A|C] + H[B|C] - H[A,B|C]` with every conditional entropy expanded
    /// by the chain rule.
    pub fn conditional_mutual_information(&self, a: &[usize], b: &[usize], c: &[usize]) -> f64 {
        let ac = union(a, c);
        let bc = union(b, c);
        let abc = union(&ac, b);
        self.entropy(&ac) + self.entropy(&bc) - self.entropy(&abc) - self.entropy(c)
    }

    /// Largest deviation from `P(x,y,z) P(y) = P(x,y) P(y,z)`.
    pub fn markov_defect(&self) -> f64 {
        let s = self.table.shape();
        let pxy = self.table.marginal(&[X, Y]);
        let pyz = self.table.marginal(&[Y, Z]);
        let py = self.table.marginal(&[Y]);
        let mut worst: f64 = 0.0;
        for x in 0..s[0] {
            for y in 0..s[1] {
                for z in 0..s[2] {
                    let lhs = self.table.get(&[x, y, z]) * py.get(&[y]);
                    let rhs = pxy.get(&[x, y]) * pyz.get(&[y, z]);
                    worst = worst.max((lhs - rhs).abs());
                }
            }
        }
        worst
    }
}

fn union(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut v: Vec<usize> = a.iter().chain(b).copied().collect();
    v.sort_unstable();
    v.dedup();
    v
}

/// `I[X; Y | Z]` for a three-variable table.
pub fn conditional_mutual_information(j: &Joint3) -> f64 {
    j.conditional_mutual_information(&[X], &[Y], &[Z])
}

/// Both sides of `I[X; Z] <= I[X; Y] + I[X; Z | Y]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpiReport {
    pub i_xz: f64,
    pub i_xy: f64,
    pub i_xz_given_y: f64,
    /// `i_xy + i_xz_given_y - i_xz`
    pub slack: f64,
    pub holds: bool,
}

pub const DPI_TOLERANCE: f64 = 1e-10;
pub const MARKOV_TOLERANCE: f64 = 1e-12;

/// Check the data processing inequality on a Markov chain `X -> Y -> Z`.
pub fn check_dpi(j: &Joint3) -> Result<DpiReport> {
    let defect = j.markov_defect();
    if defect > MARKOV_TOLERANCE {
        return Err(GaitError::NotMarkov(defect));
    }
    let i_xz = j.mutual_information(&[X], &[Z]);
    let i_xy = j.mutual_information(&[X], &[Y]);
    let i_xz_given_y = j.conditional_mutual_information(&[X], &[Z], &[Y]);
    let slack = i_xy + i_xz_given_y - i_xz;
    Ok(DpiReport { i_xz, i_xy, i_xz_given_y, slack, holds: slack >= -DPI_TOLERANCE })
}
