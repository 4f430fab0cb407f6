mod common;

use latentage_core::select::wasserstein_1d;
use latentage_core::{component_distances, DistanceMetric};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

/// Minimum mean absolute difference over all matchings of `u` to `v`.
fn min_matching(u: &[f64], v: &[f64]) -> f64 {
    fn permute(k: usize, idx: &mut Vec<usize>, u: &[f64], v: &[f64], best: &mut f64) {
        if k == idx.len() {
            let cost = idx.iter().enumerate().map(|(i, &j)| (u[i] - v[j]).abs()).sum::<f64>();
            *best = best.min(cost / u.len() as f64);
            return;
        }
        for i in k..idx.len() {
            idx.swap(k, i);
            permute(k + 1, idx, u, v, best);
            idx.swap(k, i);
        }
    }
    let mut idx: Vec<usize> = (0..v.len()).collect();
    let mut best = f64::INFINITY;
    permute(0, &mut idx, u, v, &mut best);
    best
}

/// Integral of `|F_u - G_v|` over the real line for two empirical CDFs.
fn cdf_integral(u: &[f64], v: &[f64]) -> f64 {
    let mut points: Vec<f64> = u.iter().chain(v).copied().collect();
    points.sort_by(f64::total_cmp);
    let n = u.len() as f64;
    let cdf = |xs: &[f64], t: f64| xs.iter().filter(|x| **x <= t).count() as f64 / n;
    points
        .windows(2)
        .map(|w| (cdf(u, w[0]) - cdf(v, w[0])).abs() * (w[1] - w[0]))
        .sum()
}

fn sample(r: &mut impl Rng, n: usize) -> Vec<f64> {
    // a coarse grid produces ties
    (0..n)
        .map(|_| {
            if r.random_bool(0.3) {
                f64::from(r.random_range(-3i32..=3))
            } else {
                r.random_range(-5.0..5.0)
            }
        })
        .collect()
}

#[test]
fn matches_brute_force_on_random_pairs() {
    let mut r = common::rng(21);
    for case in 0..1000 {
        let n = r.random_range(1..=12);
        let u = sample(&mut r, n);
        let v = sample(&mut r, n);
        let w = wasserstein_1d(&u, &v);

        let mut su = u.clone();
        let mut sv = v.clone();
        su.sort_by(f64::total_cmp);
        sv.sort_by(f64::total_cmp);
        let sorted = su.iter().zip(&sv).map(|(a, b)| (a - b).abs()).sum::<f64>() / n as f64;
        assert!((w - sorted).abs() <= 1e-12, "case {case}");
        assert!((w - cdf_integral(&u, &v)).abs() <= 1e-12, "case {case}");
        if n <= 4 {
            assert!((w - min_matching(&u, &v)).abs() <= 1e-12, "case {case}");
        }
        assert_eq!(w, wasserstein_1d(&v, &u));
        assert_eq!(wasserstein_1d(&u, &u), 0.0);
    }
}

#[test]
fn exhaustive_permutations_small_n() {
    let mut r = common::rng(22);
    for n in 1..=4 {
        for _ in 0..50 {
            let u = sample(&mut r, n);
            let v = sample(&mut r, n);
            let base = wasserstein_1d(&u, &v);
            assert!((base - min_matching(&u, &v)).abs() <= 1e-12);
            let mut idx: Vec<usize> = (0..n).collect();
            // every row order of v gives the same distance
            for _ in 0..24 {
                idx.shuffle(&mut r);
                let shuffled: Vec<f64> = idx.iter().map(|&i| v[i]).collect();
                assert_eq!(wasserstein_1d(&u, &shuffled), base);
            }
        }
    }
}

#[test]
fn per_component_profile_matches_columns() {
    let mut r = common::rng(23);
    let v = common::gaussian_matrix(&mut r, 9, 6);
    let vs = common::gaussian_matrix(&mut r, 9, 6);
    let p = component_distances(&v, &vs, DistanceMetric::Wasserstein).unwrap();
    for j in 0..6 {
        let a: Vec<f64> = v.column(j).iter().copied().collect();
        let b: Vec<f64> = vs.column(j).iter().copied().collect();
        assert!((p.psi[j] - cdf_integral(&a, &b)).abs() <= 1e-12);
    }
    let mean = p.psi.iter().sum::<f64>() / 6.0;
    assert!((p.mu_psi - mean).abs() <= 1e-12);

    // shuffling the rows of V* leaves the profile unchanged
    let perm = [3usize, 0, 8, 1, 7, 2, 6, 4, 5];
    let shuffled = DMatrix::from_fn(9, 6, |i, j| vs[(perm[i], j)]);
    let q = component_distances(&v, &shuffled, DistanceMetric::Wasserstein).unwrap();
    assert_eq!(p.psi, q.psi);
}
