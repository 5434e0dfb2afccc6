#![allow(dead_code)]

use gait::entropy::DiscreteDistribution;
use gait::kernels::{KernelSpec, Points, SimilaritySpace};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_points<R: Rng>(n: usize, d: usize, scale: f64, rng: &mut R) -> Points {
    let data = (0..n * d).map(|_| rng.random_range(-scale..scale)).collect();
    Points::new(d, data).unwrap()
}

/// Interior distribution with every entry at least `floor / n`.
pub fn random_interior<R: Rng>(n: usize, floor: f64, rng: &mut R) -> DiscreteDistribution {
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(floor..1.0)).collect();
    DiscreteDistribution::from_weights(DVector::from_vec(w)).unwrap()
}

pub fn random_space<R: Rng>(n: usize, rng: &mut R) -> SimilaritySpace {
    let d = rng.random_range(1..4);
    let pts = random_points(n, d, 1.0, rng);
    let sigma = rng.random_range(0.2..2.0);
    SimilaritySpace::from_points(&pts, &KernelSpec::rbf_sq(sigma)).unwrap()
}

/// `-<p, log Kp>` for any positive vector, straight from the definition.
pub fn oracle_entropy(k: &DMatrix<f64>, p: &DVector<f64>) -> f64 {
    let kp = k * p;
    -(0..p.len()).map(|i| p[i] * kp[i].ln()).sum::<f64>()
}

/// `1 + <p, log(Kxx p / Kxy q)> - <q, Kyx p / Kyy q>` for positive vectors.
pub fn oracle_divergence(
    xx: &DMatrix<f64>,
    xy: &DMatrix<f64>,
    yy: &DMatrix<f64>,
    p: &DVector<f64>,
    q: &DVector<f64>,
) -> f64 {
    let a = xx * p;
    let b = xy * q;
    let c = xy.tr_mul(p);
    let e = yy * q;
    let t1: f64 = (0..p.len()).map(|i| p[i] * (a[i] / b[i]).ln()).sum();
    let t2: f64 = (0..q.len()).map(|j| q[j] * c[j] / e[j]).sum();
    1.0 + t1 - t2
}

pub fn central_diff<F: Fn(&DVector<f64>) -> f64>(f: F, x: &DVector<f64>, h: f64) -> DVector<f64> {
    DVector::from_fn(x.len(), |i, _| {
        let mut up = x.clone();
        let mut dn = x.clone();
        up[i] += h;
        dn[i] -= h;
        (f(&up) - f(&dn)) / (2.0 * h)
    })
}

/// Max-abs difference over the larger of the reference's max-abs and 1.
pub fn rel_err(got: &[f64], want: &[f64]) -> f64 {
    let diff = got.iter().zip(want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let scale = want.iter().map(|v| v.abs()).fold(1.0, f64::max);
    diff / scale
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v.abs()).fold(0.0, f64::max)
}

pub fn dist(v: &[f64]) -> DiscreteDistribution {
    DiscreteDistribution::from_slice(v).unwrap()
}

/// Random nonnegative table normalized to mass 1, with some exact zeros.
pub fn random_table<R: Rng>(n: usize, m: usize, rng: &mut R) -> DMatrix<f64> {
    let t = DMatrix::from_fn(n, m, |_, _| if rng.random_bool(0.15) { 0.0 } else { rng.random_range(0.0..1.0) });
    let s = t.sum();
    if s == 0.0 {
        DMatrix::from_element(n, m, 1.0 / (n * m) as f64)
    } else {
        t / s
    }
}

/// Row-stochastic matrix.
pub fn random_channel<R: Rng>(n: usize, m: usize, rng: &mut R) -> DMatrix<f64> {
    let mut t = DMatrix::from_fn(n, m, |_, _| rng.random_range(0.01..1.0));
    for mut row in t.row_iter_mut() {
        let s = row.sum();
        row /= s;
    }
    t
}

pub fn shannon(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|v| v * v.ln()).sum::<f64>()
}
