//! Randomized evidence for the concavity of the order-1 entropy: divergence
//! sign search, Hessian spectra on the simplex tangent space, chord checks,
//! and the closed-form parallel-lines divergence.
//!
//! Every trial draws from its own ChaCha stream (`seed`, stream = trial
//! index), so results do not depend on thread count or scheduling.

use std::io::Write;
use std::path::PathBuf;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::divergence::gait_divergence_empirical;
use crate::entropy::{
    entropy_from_profile, entropy_grad_unchecked, neg_entropy_hessian_unchecked, DiscreteDistribution, EntropyOrder,
};
use crate::error::{GaitError, Result};
use crate::kernels::{build_block_gram, KernelSpec, Points, SimilaritySpace};

pub const DIVERGENCE_FLOOR: f64 = -1e-9;
pub const EIGENVALUE_FLOOR: f64 = -1e-8;
pub const SEGMENT_CEILING: f64 = 1e-10;

/// Force a degenerate case into every trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Injection {
    #[default]
    None,
    /// `q = p`
    EqualDistributions,
    /// `K = I`
    IdentityGram,
    /// `K = J`
    AllOnesGram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub trials: usize,
    pub seed: u64,
    pub min_size: usize,
    pub max_size: usize,
    /// Largest ambient dimension for point-based spaces.
    pub max_dim: usize,
    pub injection: Injection,
    /// Counterexample records are appended here as JSON lines.
    pub records_out: Option<PathBuf>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            trials: 1000,
            seed: 0,
            min_size: 2,
            max_size: 11,
            max_dim: 10,
            injection: Injection::None,
            records_out: None,
        }
    }
}

impl SearchConfig {
    pub fn with_trials(mut self, trials: usize) -> Self {
        self.trials = trials;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_injection(mut self, injection: Injection) -> Self {
        self.injection = injection;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(GaitError::InvalidParameter("trials must be >= 1".into()));
        }
        if self.min_size < 2 || self.max_size < self.min_size {
            return Err(GaitError::InvalidParameter(format!(
                "size bounds must satisfy 2 <= min <= max, got {}..={}",
                self.min_size, self.max_size
            )));
        }
        if self.max_dim == 0 {
            return Err(GaitError::InvalidParameter("max_dim must be >= 1".into()));
        }
        Ok(())
    }

    fn rng(&self, trial: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(trial as u64);
        rng
    }

    fn emit(&self, records: &[CounterexampleRecord]) -> Result<()> {
        let Some(path) = &self.records_out else {
            return Ok(());
        };
        let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
        for r in records {
            let line = serde_json::to_string(r).map_err(|e| GaitError::Io(e.to_string()))?;
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Divergence,
    Hessian,
    Segment,
}

/// Everything needed to recompute a suspicious value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleRecord {
    pub check: CheckKind,
    pub seed: u64,
    pub trial: usize,
    pub n: usize,
    /// Row-major `n x n`.
    pub gram: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Option<Vec<f64>>,
    pub theta: Option<f64>,
    pub value: f64,
}

impl CounterexampleRecord {
    pub fn gram_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.gram)
    }
}

/// Recompute the recorded value from the stored inputs.
pub fn replay(record: &CounterexampleRecord) -> Result<f64> {
    let sized = |len: usize| len == record.n;
    if record.n == 0
        || record.n.checked_mul(record.n) != Some(record.gram.len())
        || !sized(record.p.len())
        || record.q.as_ref().is_some_and(|q| !sized(q.len()))
    {
        return Err(GaitError::InvalidParameter("record sizes are inconsistent".into()));
    }
    let k = record.gram_matrix();
    let p = DVector::from_column_slice(&record.p);
    let need_q = || {
        record
            .q
            .as_ref()
            .map(|q| DVector::from_column_slice(q))
            .ok_or_else(|| GaitError::InvalidParameter("record lacks q".into()))
    };
    match record.check {
        CheckKind::Divergence => Ok(raw_divergence(&k, &p, &need_q()?)),
        CheckKind::Hessian => Ok(min_tangent_eigenvalue(&neg_entropy_hessian_unchecked(&k, &p))),
        CheckKind::Segment => {
            let theta = record.theta.ok_or_else(|| GaitError::InvalidParameter("record lacks theta".into()))?;
            Ok(segment_gap(&k, &p, &need_q()?, theta))
        }
    }
}

fn record(
    cfg: &SearchConfig,
    check: CheckKind,
    trial: usize,
    k: &DMatrix<f64>,
    p: &DVector<f64>,
) -> CounterexampleRecord {
    let n = p.len();
    CounterexampleRecord {
        check,
        seed: cfg.seed,
        trial,
        n,
        gram: (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|ij| k[ij]).collect(),
        p: p.as_slice().to_vec(),
        q: None,
        theta: None,
        value: 0.0,
    }
}

/// Dirichlet draw via normalized unit-rate gammas. A zero concentration
/// gives a zero coordinate; an all-zero draw is repeated.
pub fn sample_dirichlet<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> DVector<f64> {
    loop {
        let g: Vec<f64> = alpha
            .iter()
            .map(|&a| if a > 0.0 { Gamma::new(a, 1.0).expect("positive shape").sample(rng) } else { 0.0 })
            .collect();
        let total: f64 = g.iter().sum();
        if total > 0.0 && total.is_finite() {
            return DVector::from_iterator(g.len(), g.into_iter().map(|v| v / total));
        }
    }
}

/// `K = min(1, I + L L^T / n)` with `L_ij = U(0,1)^{gamma_ij}`,
/// `gamma_ij ~ U{0..9}`; the diagonal is reset to exactly 1.
pub fn sample_table_gram<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let l = DMatrix::from_fn(n, n, |_, _| {
        let gamma: i32 = rng.random_range(0..=9);
        let u: f64 = rng.random_range(0.0..1.0);
        u.powi(gamma)
    });
    let mut k = DMatrix::identity(n, n) + &l * l.transpose() / n as f64;
    k.apply(|v| *v = v.min(1.0));
    k.fill_diagonal(1.0);
    k
}

fn raw_divergence(k: &DMatrix<f64>, p: &DVector<f64>, q: &DVector<f64>) -> f64 {
    let kp = k * p;
    let kq = k * q;
    let mut v = 1.0;
    for i in 0..p.len() {
        if p[i] > crate::entropy::SUPPORT_THRESHOLD {
            v += p[i] * (kp[i] / kq[i]).ln();
        }
        if q[i] > crate::entropy::SUPPORT_THRESHOLD {
            v -= q[i] * kp[i] / kq[i];
        }
    }
    v
}

/// Equal-width bins over `[0, 2)` plus negative and overflow counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub negative: u64,
    pub overflow: u64,
}

impl Histogram {
    const BINS: usize = 20;
    const TOP: f64 = 2.0;

    fn empty() -> Self {
        Histogram {
            edges: (0..=Self::BINS).map(|i| Self::TOP * i as f64 / Self::BINS as f64).collect(),
            counts: vec![0; Self::BINS],
            negative: 0,
            overflow: 0,
        }
    }

    fn add(&mut self, v: f64) {
        if v < 0.0 {
            self.negative += 1;
        } else if v >= Self::TOP {
            self.overflow += 1;
        } else {
            let b = ((v / Self::TOP) * Self::BINS as f64) as usize;
            self.counts[b.min(Self::BINS - 1)] += 1;
        }
    }

    pub fn total(&self) -> u64 {
        self.negative + self.overflow + self.counts.iter().sum::<u64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceSearch {
    pub trials: usize,
    pub min_value: f64,
    pub histogram: Histogram,
    pub counterexamples: Vec<CounterexampleRecord>,
}

/// Random search for negative divergence over the random-Gram table scheme.
pub fn random_search_divergence(cfg: &SearchConfig) -> Result<DivergenceSearch> {
    cfg.validate()?;
    let outcomes: Vec<(f64, Option<CounterexampleRecord>)> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = cfg.rng(trial);
            let n = rng.random_range(cfg.min_size..=cfg.max_size);
            let mut k = sample_table_gram(n, &mut rng);
            let alpha: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
            let beta: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
            let p = sample_dirichlet(&alpha, &mut rng);
            let mut q = sample_dirichlet(&beta, &mut rng);
            match cfg.injection {
                Injection::None => {}
                Injection::EqualDistributions => q = p.clone(),
                Injection::IdentityGram => k = DMatrix::identity(n, n),
                Injection::AllOnesGram => k = DMatrix::from_element(n, n, 1.0),
            }
            let value = raw_divergence(&k, &p, &q);
            let hit = (value < DIVERGENCE_FLOOR || !value.is_finite()).then(|| CounterexampleRecord {
                q: Some(q.as_slice().to_vec()),
                value,
                ..record(cfg, CheckKind::Divergence, trial, &k, &p)
            });
            (value, hit)
        })
        .collect();
    let mut histogram = Histogram::empty();
    let mut min_value = f64::INFINITY;
    let mut counterexamples = Vec::new();
    for (v, hit) in outcomes {
        histogram.add(v);
        min_value = min_value.min(v);
        counterexamples.extend(hit);
    }
    cfg.emit(&counterexamples)?;
    Ok(DivergenceSearch { trials: cfg.trials, min_value, histogram, counterexamples })
}

/// Orthonormal basis of `{v : sum v = 0}` (Helmert columns), `n x (n-1)`.
pub fn tangent_basis(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n.saturating_sub(1), |i, k| {
        let k1 = (k + 1) as f64;
        let norm = (k1 * (k1 + 1.0)).sqrt();
        match i.cmp(&(k + 1)) {
            std::cmp::Ordering::Less => 1.0 / norm,
            std::cmp::Ordering::Equal => -k1 / norm,
            std::cmp::Ordering::Greater => 0.0,
        }
    })
}

/// Eigenvalues of `B^T H B` for the tangent basis `B`, ascending. All NaN
/// when `H` has a non-finite entry.
pub fn tangent_spectrum(h: &DMatrix<f64>) -> Vec<f64> {
    let b = tangent_basis(h.nrows());
    let mut t = b.transpose() * h * &b;
    t = (&t + t.transpose()) * 0.5;
    if t.iter().any(|v| !v.is_finite()) {
        return vec![f64::NAN; b.ncols()];
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(t).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

fn min_tangent_eigenvalue(h: &DMatrix<f64>) -> f64 {
    tangent_spectrum(h).first().copied().unwrap_or(f64::INFINITY)
}

/// Random points with `exp(-||x - y||_r / s)` similarities. Returns the
/// Gram matrix.
fn sample_point_gram<R: Rng + ?Sized>(n: usize, max_dim: usize, max_order: f64, rng: &mut R) -> DMatrix<f64> {
    let d = rng.random_range(1..=max_dim);
    let order = rng.random_range(1.0..=max_order);
    let spread = rng.random_range(0.1..3.0);
    let data: Vec<f64> = (0..n * d)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            spread * z
        })
        .collect();
    let pts = Points::new(d, data).expect("finite draws");
    let spec = KernelSpec::ExpMetric { sigma: 1.0, order };
    SimilaritySpace::from_points(&pts, &spec).expect("valid kernel").into_matrix()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HessianSearch {
    pub trials: usize,
    pub min_eigenvalue: f64,
    pub counterexamples: Vec<CounterexampleRecord>,
}

/// Smallest tangent-space eigenvalue of the negative entropy Hessian over
/// random point clouds, norm orders in `[1, 4]` and Dirichlet distributions.
pub fn hessian_spectrum_search(cfg: &SearchConfig) -> Result<HessianSearch> {
    cfg.validate()?;
    let outcomes: Vec<(f64, Option<CounterexampleRecord>)> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = cfg.rng(trial);
            let n = rng.random_range(cfg.min_size..=cfg.max_size);
            let k = match cfg.injection {
                Injection::IdentityGram => DMatrix::identity(n, n),
                Injection::AllOnesGram => DMatrix::from_element(n, n, 1.0),
                _ => sample_point_gram(n, cfg.max_dim, 4.0, &mut rng),
            };
            let alpha: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
            let p = sample_dirichlet(&alpha, &mut rng);
            let value = min_tangent_eigenvalue(&neg_entropy_hessian_unchecked(&k, &p));
            let hit = (value < EIGENVALUE_FLOOR || !value.is_finite())
                .then(|| CounterexampleRecord { value, ..record(cfg, CheckKind::Hessian, trial, &k, &p) });
            (value, hit)
        })
        .collect();
    let mut min_eigenvalue = f64::INFINITY;
    let mut counterexamples = Vec::new();
    for (v, hit) in outcomes {
        min_eigenvalue = min_eigenvalue.min(v);
        counterexamples.extend(hit);
    }
    cfg.emit(&counterexamples)?;
    Ok(HessianSearch { trials: cfg.trials, min_eigenvalue, counterexamples })
}

/// `H[(1-t) q + t p] - H[q] - t <grad H(q), p - q>`; concavity makes this <= 0.
fn segment_gap(k: &DMatrix<f64>, p: &DVector<f64>, q: &DVector<f64>, theta: f64) -> f64 {
    let h = |v: &DVector<f64>| {
        let kv = k * v;
        entropy_from_profile(v.as_slice(), kv.as_slice(), EntropyOrder::SHANNON)
    };
    let mix = q * (1.0 - theta) + p * theta;
    let g = entropy_grad_unchecked(k, q);
    h(&mix) - h(q) - theta * g.dot(&(p - q))
}

/// Largest amount by which the entropy along the chord from `q` to `p`
/// exceeds its tangent line at `q`, over the given `thetas`.
pub fn concavity_segment_check(
    space: &SimilaritySpace,
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    thetas: &[f64],
) -> Result<f64> {
    for d in [p, q] {
        if d.len() != space.len() {
            return Err(GaitError::DimensionMismatch {
                what: "distribution length",
                expected: space.len(),
                got: d.len(),
            });
        }
        if !d.is_interior() {
            return Err(GaitError::NotInterior("segment endpoints"));
        }
    }
    if let Some(t) = thetas.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(GaitError::InvalidParameter(format!("theta {t} is outside [0, 1]")));
    }
    Ok(thetas
        .iter()
        .map(|&t| segment_gap(space.matrix(), p.as_vector(), q.as_vector(), t))
        .fold(f64::NEG_INFINITY, f64::max))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentSearch {
    pub trials: usize,
    pub max_gap: f64,
    pub counterexamples: Vec<CounterexampleRecord>,
}

/// Chord-versus-tangent checks on random positive definite point spaces
/// (norm orders in `[1, 2]`) with interior endpoints and one `theta` each.
pub fn segment_search(cfg: &SearchConfig) -> Result<SegmentSearch> {
    cfg.validate()?;
    let outcomes: Vec<(f64, Option<CounterexampleRecord>)> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = cfg.rng(trial);
            let n = rng.random_range(cfg.min_size..=cfg.max_size);
            let k = match cfg.injection {
                Injection::IdentityGram => DMatrix::identity(n, n),
                Injection::AllOnesGram => DMatrix::from_element(n, n, 1.0),
                _ => sample_point_gram(n, cfg.max_dim, 2.0, &mut rng),
            };
            let interior = |rng: &mut ChaCha8Rng| loop {
                let a: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
                let v = sample_dirichlet(&a, rng);
                if v.iter().all(|&x| x > 0.0) {
                    break v;
                }
            };
            let p = interior(&mut rng);
            let q = if cfg.injection == Injection::EqualDistributions { p.clone() } else { interior(&mut rng) };
            let theta = rng.random_range(0.0..=1.0);
            let value = segment_gap(&k, &p, &q, theta);
            let hit = (value > SEGMENT_CEILING || !value.is_finite()).then(|| CounterexampleRecord {
                q: Some(q.as_slice().to_vec()),
                theta: Some(theta),
                value,
                ..record(cfg, CheckKind::Segment, trial, &k, &p)
            });
            (value, hit)
        })
        .collect();
    let mut max_gap = f64::NEG_INFINITY;
    let mut counterexamples = Vec::new();
    for (v, hit) in outcomes {
        max_gap = max_gap.max(v);
        counterexamples.extend(hit);
    }
    cfg.emit(&counterexamples)?;
    Ok(SegmentSearch { trials: cfg.trials, max_gap, counterexamples })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinesRow {
    pub phi: f64,
    pub numeric: f64,
    pub analytic: f64,
    pub abs_error: f64,
}

/// `phi^2 + 1 - exp(-phi^2)`
pub fn parallel_lines_closed_form(phi: f64) -> f64 {
    phi * phi + 1.0 - (-phi * phi).exp()
}

/// Divergence between uniform measures on the segments `{phi} x [0,1]` and
/// `{0} x [0,1]` under `exp(-||x - y||^2)`, discretized at `n` midpoints,
/// against the closed form.
pub fn parallel_lines_check(phis: &[f64], n: usize) -> Result<Vec<LinesRow>> {
    if n < 100 {
        return Err(GaitError::InvalidParameter(format!("discretization must be >= 100, got {n}")));
    }
    let spec = KernelSpec::rbf_sq(std::f64::consts::FRAC_1_SQRT_2);
    let segment = |x: f64| {
        let data = (0..n).flat_map(|i| [x, (i as f64 + 0.5) / n as f64]).collect();
        Points::new(2, data)
    };
    let w = DiscreteDistribution::uniform(n);
    let base = segment(0.0)?;
    phis.iter()
        .map(|&phi| {
            let blocks = build_block_gram(&segment(phi)?, &base, &spec)?;
            let numeric = gait_divergence_empirical(&blocks, &w, &w)?.value;
            let analytic = parallel_lines_closed_form(phi);
            Ok(LinesRow { phi, numeric, analytic, abs_error: (numeric - analytic).abs() })
        })
        .collect()
}
