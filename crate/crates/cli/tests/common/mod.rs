#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use latentage_core::{save_latents, standardize, LabeledLatentSet, SampleMeta};
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

pub fn latentage(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_latentage"))
        .current_dir(cwd)
        .args(args)
        .output()
        .expect("binary runs")
}

/// Runs and asserts exit 0, returning stdout.
pub fn ok(cwd: &Path, args: &[&str]) -> String {
    let out = latentage(cwd, args);
    assert!(
        out.status.success(),
        "latentage {args:?} failed ({:?}): {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Every file under `dir`, keyed by relative path.
pub fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, acc: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                walk(root, &p, acc);
            } else {
                acc.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    let mut acc = BTreeMap::new();
    walk(dir, dir, &mut acc);
    acc
}

/// Age-labelled training latents, `age = 40 + 10 * (w . truth)`, with 12
/// identities of 10 samples each. Returns the planted direction in
/// standardized coordinates.
pub fn write_training_set(dir: &Path, name: &str, n: usize, d: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    let x = gaussian_matrix(&mut r, n, d);
    let truth = unit_vector(&mut r, d);
    let meta: Vec<SampleMeta> = (0..n)
        .map(|i| {
            let proj: f64 = (0..d).map(|j| x[(i, j)] * truth[j]).sum();
            SampleMeta::new(format!("s{i}"))
                .with_age((40.0 + 10.0 * proj).max(0.0))
                .with_identity(format!("id{}", i % 12))
        })
        .collect();
    let raw = LabeledLatentSet::new(x, meta).unwrap();
    save_latents(&raw, dir.join(format!("{name}_raw.latw"))).unwrap();
    let (std_set, scaler) = standardize(&raw).unwrap();
    save_latents(&std_set, dir.join(format!("{name}.latw"))).unwrap();
    let scaled: Vec<f64> = truth.iter().zip(&scaler.std).map(|(t, s)| t * s).collect();
    let len = scaled.iter().map(|x| x * x).sum::<f64>().sqrt();
    scaled.into_iter().map(|x| x / len).collect()
}

/// Unlabelled identity latents with identity ids only.
pub fn write_identities(path: &Path, n: usize, d: usize, seed: u64) {
    let mut r = rng(seed);
    let x = gaussian_matrix(&mut r, n, d);
    let meta = (0..n)
        .map(|i| SampleMeta::new(format!("w{i}")).with_identity(format!("person{i}")))
        .collect();
    save_latents(&LabeledLatentSet::new(x, meta).unwrap(), path).unwrap();
}

/// Calibration samples with `age = 30 + 2 s` in every one of the nine groups.
pub fn write_linear_samples(path: &Path) {
    let mut text = String::from("group,scalar,estimated_age\n");
    for g in 0..9 {
        for k in -10..=10 {
            let s = k as f64;
            text.push_str(&format!("{g},{s},{}\n", 30.0 + 2.0 * s));
        }
    }
    fs::write(path, text).unwrap();
}

/// Synthetic evaluation records over a few scalar steps and groups.
pub fn write_records(path: &Path, seed: u64) {
    let mut r = rng(seed);
    let mut text = String::from("sample_id,scalar,fr_score,estimated_age,original_age,group\n");
    for (k, s) in [-6.0, -3.0, 0.0, 3.0, 6.0].iter().enumerate() {
        for i in 0..40 {
            let g = 3 + i % 3;
            let orig = 20.0 + (i % 7) as f64 * 5.0;
            let fr = (1.0 - 0.05 * f64::abs(*s) - 0.3 * r.random::<f64>()).clamp(0.0, 1.0);
            let est = orig + 2.0 * s + r.random::<f64>();
            text.push_str(&format!("r{k}_{i},{s},{fr},{est},{orig},{g}\n"));
        }
    }
    fs::write(path, text).unwrap();
}

/// Everything the subcommands need, in `dir`, addressed by relative paths.
pub fn write_fixture(dir: &Path) {
    write_training_set(dir, "train", 240, 8, 11);
    write_identities(&dir.join("ids.latw"), 3, 8, 12);
    write_linear_samples(&dir.join("samples.csv"));
    write_records(&dir.join("records.csv"), 13);
}

/// Reads the f64 rows of a latent file.
pub fn rows(path: &Path) -> DMatrix<f64> {
    latentage_core::load_latents(path).unwrap().vectors().clone()
}

/// Gaussian latents with `age = 40 + 10 * (w . truth) + noise`, standardized,
/// and the planted direction in standardized coordinates.
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
pub fn planted_class_set(classes: usize, per_class: usize, dim: usize, component: usize, seed: u64) -> LabeledLatentSet {
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
