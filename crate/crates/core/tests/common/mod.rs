#![allow(dead_code)]

use latentage_core::{standardize, LabeledLatentSet, SampleMeta};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut impl Rng, n: usize, d: usize) -> DMatrix<f64> {
    let normal = Normal::new(0.0, 1.0).unwrap();
    DMatrix::from_fn(n, d, |_, _| normal.sample(rng))
}

pub fn unit_vector(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let v: Vec<f64> = (0..d).map(|_| normal.sample(rng)).collect();
    let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / len).collect()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Gaussian latents with `age = 40 + 10 * (w . truth) + noise`.
///
/// Returns the standardized set and the planted direction expressed in
/// standardized coordinates (`truth ⊙ std`, unit length).
pub fn planted_age_set(n: usize, d: usize, noise: f64, seed: u64) -> (LabeledLatentSet, Vec<f64>) {
    let mut r = rng(seed);
    let x = gaussian_matrix(&mut r, n, d);
    let truth = unit_vector(&mut r, d);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let meta: Vec<SampleMeta> = (0..n)
        .map(|i| {
            let proj: f64 = (0..d).map(|j| x[(i, j)] * truth[j]).sum();
            let eps = if noise > 0.0 { noise * normal.sample(&mut r) } else { 0.0 };
            SampleMeta::new(format!("s{i}")).with_age((40.0 + 10.0 * proj + eps).max(0.0))
        })
        .collect();
    let raw = LabeledLatentSet::new(x, meta).unwrap();
    let (std_set, scaler) = standardize(&raw).unwrap();
    let scaled: Vec<f64> = truth.iter().zip(&scaler.std).map(|(t, s)| t * s).collect();
    let len = scaled.iter().map(|x| x * x).sum::<f64>().sqrt();
    (std_set, scaled.into_iter().map(|x| x / len).collect())
}

/// Standardized set whose identity classes differ only along `component`.
///
/// Class means sit at evenly spaced offsets on that axis, so the between-class
/// scatter has rank one; every other component is class-independent noise.
pub fn planted_class_set(
    classes: usize,
    per_class: usize,
    dim: usize,
    component: usize,
    seed: u64,
) -> LabeledLatentSet {
    let mut r = rng(seed);
    let n = classes * per_class;
    let mut x = gaussian_matrix(&mut r, n, dim);
    let mut meta = Vec::with_capacity(n);
    for i in 0..n {
        let c = i / per_class;
        x[(i, component)] += 4.0 * c as f64 - 2.0 * (classes - 1) as f64;
        meta.push(SampleMeta::new(format!("s{i}")).with_identity(format!("id{c}")));
    }
    let raw = LabeledLatentSet::new(x, meta).unwrap();
    standardize(&raw).unwrap().0
}
