mod common;

use std::time::Instant;

use common::*;
use gait::divergence::{forward_backward, gait_divergence_empirical, gait_divergence_shared, kl_divergence};
use gait::entropy::{gait_entropy, DiscreteDistribution, EntropyOrder};
use gait::kernels::{build_block_gram, BlockGram, KernelSpec, Points, SimilaritySpace};
use gait::verify::{sample_dirichlet, sample_table_gram};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

const ORDERS: [EntropyOrder; 6] = [
    EntropyOrder::Finite(0.0),
    EntropyOrder::Finite(0.5),
    EntropyOrder::Finite(1.0),
    EntropyOrder::Finite(2.0),
    EntropyOrder::Finite(5.0),
    EntropyOrder::Infinity,
];

/// Random table-scheme space and a Dirichlet(1) distribution, possibly with zeros.
fn instance(seed: u64, n: usize, sparse: bool) -> (SimilaritySpace, DiscreteDistribution) {
    let mut r = rng(seed);
    let k = SimilaritySpace::explicit(sample_table_gram(n, &mut r)).unwrap();
    let mut w = sample_dirichlet(&vec![1.0; n], &mut r);
    if sparse && n > 1 {
        w[r.random_range(0..n)] = 0.0;
    }
    (k, DiscreteDistribution::from_weights(w).unwrap())
}

fn h(k: &SimilaritySpace, p: &DiscreteDistribution, o: EntropyOrder) -> f64 {
    gait_entropy(k, p, o).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn range_between_zero_and_log_n(seed in any::<u64>(), n in 1usize..12, sparse in any::<bool>(), oi in 0usize..6) {
        let (k, p) = instance(seed, n, sparse);
        let v = h(&k, &p, ORDERS[oi]);
        prop_assert!(v >= -1e-12 && v <= (n as f64).ln() + 1e-12, "H = {}", v);
    }

    #[test]
    fn non_increasing_in_order(seed in any::<u64>(), n in 1usize..12, sparse in any::<bool>()) {
        let (k, p) = instance(seed, n, sparse);
        let vals: Vec<f64> = ORDERS.iter().map(|&o| h(&k, &p, o)).collect();
        for w in vals.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12, "{:?}", vals);
        }
    }

    #[test]
    fn more_similarity_means_less_entropy(seed in any::<u64>(), n in 1usize..10, power in 1.1f64..4.0, oi in 0usize..6) {
        let (k, p) = instance(seed, n, false);
        // entries in [0,1] shrink when raised to a power > 1
        let weaker = SimilaritySpace::explicit(k.matrix().map(|v| v.powf(power))).unwrap();
        prop_assert!(h(&k, &p, ORDERS[oi]) <= h(&weaker, &p, ORDERS[oi]) + 1e-12);
    }

    #[test]
    fn continuous_at_order_one(seed in any::<u64>(), n in 1usize..10, sparse in any::<bool>()) {
        let (k, p) = instance(seed, n, sparse);
        let h1 = h(&k, &p, EntropyOrder::SHANNON);
        for a in [1.0 - 1e-5, 1.0 + 1e-5] {
            prop_assert!((h(&k, &p, EntropyOrder::Finite(a)) - h1).abs() <= 1e-4);
        }
    }

    #[test]
    fn merging_identical_elements(seed in any::<u64>(), n in 2usize..10, oi in 0usize..6) {
        // duplicate element 0 into a new last index and split its mass
        let (k, p) = instance(seed, n, false);
        let km = k.matrix();
        let big = DMatrix::from_fn(n + 1, n + 1, |i, j| km[(i % n, j % n)]);
        let mut w = p.as_slice().to_vec();
        let split = w[0] * 0.3;
        w[0] -= split;
        w.push(split);
        let kb = SimilaritySpace::explicit(big).unwrap();
        let pb = DiscreteDistribution::from_slice(&w).unwrap();
        prop_assert!((h(&k, &p, ORDERS[oi]) - h(&kb, &pb, ORDERS[oi])).abs() < 1e-12);
    }

    #[test]
    fn absent_points_can_be_dropped(seed in any::<u64>(), n in 2usize..10, oi in 0usize..6) {
        let (k, p) = instance(seed, n, false);
        // add an arbitrary point with zero mass
        let mut r = rng(seed ^ 0xabc);
        let extra: Vec<f64> = (0..n).map(|_| r.random_range(0.0..1.0)).collect();
        let km = k.matrix();
        let big = DMatrix::from_fn(n + 1, n + 1, |i, j| match (i == n, j == n) {
            (false, false) => km[(i, j)],
            (true, true) => 1.0,
            (true, false) => extra[j],
            (false, true) => extra[i],
        });
        let mut w = p.as_slice().to_vec();
        w.push(0.0);
        let kb = SimilaritySpace::explicit(big).unwrap();
        let pb = DiscreteDistribution::from_slice(&w).unwrap();
        prop_assert!((h(&k, &p, ORDERS[oi]) - h(&kb, &pb, ORDERS[oi])).abs() < 1e-12);
    }

    #[test]
    fn modular_over_dissimilar_blocks(seed in any::<u64>(), n1 in 1usize..6, n2 in 1usize..6, c in 0.05f64..0.95) {
        let (k1, p1) = instance(seed, n1, false);
        let (k2, p2) = instance(seed.wrapping_add(1), n2, false);
        let n = n1 + n2;
        let k = DMatrix::from_fn(n, n, |i, j| match (i < n1, j < n1) {
            (true, true) => k1.matrix()[(i, j)],
            (false, false) => k2.matrix()[(i - n1, j - n1)],
            _ => 0.0,
        });
        let w: Vec<f64> = p1.as_slice().iter().map(|v| v * c)
            .chain(p2.as_slice().iter().map(|v| v * (1.0 - c)))
            .collect();
        let whole = h(&SimilaritySpace::explicit(k).unwrap(), &DiscreteDistribution::from_slice(&w).unwrap(), EntropyOrder::SHANNON);
        let want = c * h(&k1, &p1, EntropyOrder::SHANNON) + (1.0 - c) * h(&k2, &p2, EntropyOrder::SHANNON)
            - c * c.ln() - (1.0 - c) * (1.0 - c).ln();
        prop_assert!((whole - want).abs() < 1e-12);
    }

    #[test]
    fn divergence_of_identical_arguments_vanishes(seed in any::<u64>(), n in 1usize..12) {
        let (k, p) = instance(seed, n, true);
        prop_assert_eq!(gait_divergence_shared(&k, &p, &p).unwrap(), 0.0);
    }

    #[test]
    fn divergence_convex_in_first_argument(seed in any::<u64>(), n in 2usize..10, lam in 0.0f64..1.0) {
        let mut r = rng(seed);
        let k = SimilaritySpace::explicit(sample_table_gram(n, &mut r)).unwrap();
        let d = |r: &mut _| DiscreteDistribution::from_weights(sample_dirichlet(&vec![1.0; n], r)).unwrap();
        let (p1, p2, q) = (d(&mut r), d(&mut r), d(&mut r));
        let mix = DiscreteDistribution::from_weights(p1.as_vector() * lam + p2.as_vector() * (1.0 - lam)).unwrap();
        let lhs = gait_divergence_shared(&k, &mix, &q).unwrap();
        let rhs = lam * gait_divergence_shared(&k, &p1, &q).unwrap() + (1.0 - lam) * gait_divergence_shared(&k, &p2, &q).unwrap();
        prop_assert!(lhs <= rhs + 1e-10, "{} > {}", lhs, rhs);
    }

    #[test]
    fn identity_kernel_gives_shannon_renyi_and_kl(seed in any::<u64>(), n in 1usize..12, oi in 0usize..6) {
        let mut r = rng(seed);
        let id = SimilaritySpace::identity(n);
        let p = DiscreteDistribution::from_weights(sample_dirichlet(&vec![1.0; n], &mut r)).unwrap();
        let q = DiscreteDistribution::from_weights(sample_dirichlet(&vec![1.0; n], &mut r)).unwrap();
        let want = match ORDERS[oi] {
            EntropyOrder::Finite(a) if (a - 1.0).abs() < 1e-15 => -p.as_slice().iter().map(|v| v * v.ln()).sum::<f64>(),
            EntropyOrder::Finite(a) => p.as_slice().iter().map(|v| v.powf(a)).sum::<f64>().ln() / (1.0 - a),
            EntropyOrder::Infinity => -p.as_slice().iter().cloned().fold(0.0, f64::max).ln(),
        };
        prop_assert!((h(&id, &p, ORDERS[oi]) - want).abs() < 1e-12);
        let kl = kl_divergence(p.as_slice(), q.as_slice());
        prop_assert!((gait_divergence_shared(&id, &p, &q).unwrap() - kl).abs() < 1e-12);
    }

    #[test]
    fn shared_and_block_forms_agree(seed in any::<u64>(), n in 1usize..10) {
        let mut r = rng(seed);
        let k = SimilaritySpace::explicit(sample_table_gram(n, &mut r)).unwrap();
        let p = DiscreteDistribution::from_weights(sample_dirichlet(&vec![1.0; n], &mut r)).unwrap();
        let q = DiscreteDistribution::from_weights(sample_dirichlet(&vec![1.0; n], &mut r)).unwrap();
        let b = BlockGram::shared(&k);
        let (f, bw) = forward_backward(&b, &p, &q).unwrap();
        prop_assert!((f - gait_divergence_shared(&k, &p, &q).unwrap()).abs() < 1e-13);
        prop_assert!((bw - gait_divergence_shared(&k, &q, &p).unwrap()).abs() < 1e-13);
        let rep = gait_divergence_empirical(&b, &p, &q).unwrap();
        prop_assert!((rep.value - (1.0 + rep.term_log - rep.term_ratio)).abs() < 1e-14);
    }
}

#[test]
fn entropy_examples() {
    let id = SimilaritySpace::identity(3);
    let j = SimilaritySpace::all_ones(3);
    let p = dist(&[0.2, 0.3, 0.5]);
    assert!((h(&id, &p, EntropyOrder::Finite(0.0)) - 3f64.ln()).abs() < 1e-15);
    for o in ORDERS {
        assert!(h(&j, &p, o).abs() < 1e-15);
    }
    // zero mass excluded from the support count
    let sparse = dist(&[0.5, 0.0, 0.5]);
    assert!((h(&id, &sparse, EntropyOrder::Finite(0.0)) - 2f64.ln()).abs() < 1e-15);
}

#[test]
fn kl_example_at_identity() {
    let id = SimilaritySpace::identity(2);
    let v = gait_divergence_shared(&id, &dist(&[0.5, 0.5]), &dist(&[0.25, 0.75])).unwrap();
    let want = 0.5 * 2f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
    assert!((v - want).abs() < 1e-15);
    assert!((v - 0.143841036226).abs() < 1e-11);
}

#[test]
fn all_ones_kernel_gives_zero_divergence() {
    let j = SimilaritySpace::all_ones(3);
    assert!(gait_divergence_shared(&j, &dist(&[0.1, 0.1, 0.8]), &dist(&[0.6, 0.2, 0.2])).unwrap().abs() < 1e-15);
}

#[test]
fn identity_divergence_is_asymmetric_like_kl() {
    let id = SimilaritySpace::identity(3);
    let (p, q) = (dist(&[0.7, 0.2, 0.1]), dist(&[0.2, 0.3, 0.5]));
    let (f, b) = forward_backward(&BlockGram::shared(&id), &p, &q).unwrap();
    assert!((f - kl_divergence(p.as_slice(), q.as_slice())).abs() < 1e-14);
    assert!((b - kl_divergence(q.as_slice(), p.as_slice())).abs() < 1e-14);
    assert!((f - b).abs() > 0.01);
}

/// A 1-D Gaussian as density-weighted atoms on `mu + s * [-3, 3]`.
fn gaussian_atoms(mu: f64, s: f64) -> (Points, DiscreteDistribution) {
    let t: Vec<f64> = (0..61).map(|k| -3.0 + 0.1 * k as f64).collect();
    let w = DVector::from_iterator(61, t.iter().map(|v| (-0.5 * v * v).exp()));
    let atoms = Points::new(1, t.iter().map(|v| mu + s * v).collect()).unwrap();
    (atoms, DiscreteDistribution::from_weights(w).unwrap())
}

/// Best (mean, scale) on a grid, fitting either as the first argument
/// (`forward`) or as the second.
fn best_gaussian(target: &Points, tw: &DiscreteDistribution, forward: bool) -> (f64, f64) {
    let spec = KernelSpec::rbf_sq(0.5);
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for mi in 0..=24 {
        let mu = -3.0 + 0.25 * mi as f64;
        for si in 1..=12 {
            let s = 0.25 * si as f64;
            let (g, gw) = gaussian_atoms(mu, s);
            let v = if forward {
                let b = build_block_gram(&g, target, &spec).unwrap();
                gait_divergence_empirical(&b, &gw, tw).unwrap().value
            } else {
                let b = build_block_gram(target, &g, &spec).unwrap();
                gait_divergence_empirical(&b, tw, &gw).unwrap().value
            };
            if v < best.0 {
                best = (v, mu, s);
            }
        }
    }
    (best.1, best.2)
}

#[test]
fn fit_direction_changes_the_gaussian() {
    // modes at -2 and +2, each with spread 0.3
    let (left, lw) = gaussian_atoms(-2.0, 0.3);
    let (right, rw) = gaussian_atoms(2.0, 0.3);
    let mut data = left.as_slice().to_vec();
    data.extend_from_slice(right.as_slice());
    let target = Points::new(1, data).unwrap();
    let w = DVector::from_iterator(122, lw.as_slice().iter().chain(rw.as_slice()).map(|v| v * 0.5));
    let tw = DiscreteDistribution::new(w).unwrap();
    let seek = best_gaussian(&target, &tw, true);
    let cover = best_gaussian(&target, &tw, false);
    assert_ne!(seek, cover);
    // covering spreads over both modes, seeking sits on one
    assert!(cover.1 > seek.1, "seek {seek:?} cover {cover:?}");
    assert!(cover.0.abs() < 0.5);
    assert!(seek.0.abs() > 1.0);
}

#[test]
fn empirical_cost_grows_quadratically() {
    let mut r = rng(11);
    let spec = KernelSpec::rbf_sq(1.0);
    let sizes = [256usize, 512, 1024, 2048];
    let mut times = Vec::new();
    for &s in &sizes {
        let x = random_points(s / 2, 3, 1.0, &mut r);
        let y = random_points(s / 2, 3, 1.0, &mut r);
        let p = DiscreteDistribution::uniform(s / 2);
        let mut best = f64::INFINITY;
        for _ in 0..5 {
            let t = Instant::now();
            let b = build_block_gram(&x, &y, &spec).unwrap();
            let v = gait_divergence_empirical(&b, &p, &p).unwrap();
            std::hint::black_box(v);
            best = best.min(t.elapsed().as_secs_f64());
        }
        times.push(best);
    }
    let slope = loglog_slope(&sizes.map(|s| s as f64), &times);
    assert!((1.8..=2.2).contains(&slope), "slope {slope}, times {times:?}");
}

fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    cov / var
}

#[test]
fn profile_examples() {
    let p = dist(&[0.2, 0.3, 0.5]);
    let id = SimilaritySpace::identity(3);
    let kp = gait::entropy::similarity_profile(&id, &p).unwrap();
    assert_eq!(kp, DVector::from_vec(vec![0.2, 0.3, 0.5]));
    let j = SimilaritySpace::all_ones(3);
    let kp = gait::entropy::similarity_profile(&j, &p).unwrap();
    assert!(kp.iter().all(|v| (v - 1.0).abs() < 1e-15));
}
