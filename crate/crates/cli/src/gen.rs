//! Batch generation of edited latents at fixed target ages.
//!
//! Every identity latent is moved to each target age with the scalar offset
//! from its group's calibration curve. Each target age gets its own latent
//! file (`age_<t>.latw` plus sidecars); `index.csv` lists the scalar used per
//! identity and target, and `failures.csv` the pairs that could not be solved.
//!
//! `manifest.json` is rewritten after every finished target. A rerun with the
//! same inputs and settings skips targets whose files are present and match
//! the recorded hashes, so an interrupted run resumes where it stopped.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{bail, Context};
use latentage_core::format::{encode_latents, meta_path, scaler_path, write_meta_csv, write_scaler};
use latentage_core::{
    predict_age, scalar_offset, AgeDirection, CalibrationModel, LabeledLatentSet, SampleMeta,
};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::commands::{edit_rows, load_calibration, load_direction, load_phi, load_set, row_major};
use crate::config::{require, PipelineConfig};
use crate::manifest::{hash_file, sha256_hex, FileEntry, Manifest};

pub const DEFAULT_TARGET_AGES: [f64; 10] = [5.0, 15.0, 25.0, 35.0, 45.0, 55.0, 65.0, 75.0, 85.0, 95.0];

#[derive(Serialize)]
struct IndexRow<'a> {
    identity_id: &'a str,
    target_age: f64,
    scalar_used: f64,
    fallback_flag: bool,
}

#[derive(Serialize)]
struct FailureRow<'a> {
    identity_id: &'a str,
    target_age: f64,
    error: String,
}

/// Where an identity sits on the calibration curves.
struct Anchor {
    sample_id: String,
    identity_id: String,
    group: usize,
    /// Labelled age, or the curve's age at `s = 0` when unlabelled.
    original_age: Result<f64, String>,
}

fn anchors(set: &LabeledLatentSet, dir: &AgeDirection, model: &CalibrationModel) -> anyhow::Result<Vec<Anchor>> {
    let rows = row_major(set.vectors());
    let dim = set.dim();
    set.meta()
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let group = match (m.age_group, m.age_years) {
                (Some(g), _) => g,
                (None, Some(age)) => model.scheme.group_of(age)?,
                // unlabelled latents take the group of the age the hyperplane predicts
                (None, None) => {
                    let age = predict_age(dir, &rows[i * dim..(i + 1) * dim])?;
                    model.scheme.group_of(age.max(0.0))?
                }
            };
            let original_age = match m.age_years {
                Some(a) => Ok(a),
                None => model.curve(group).map(|c| c.eval(0.0)).map_err(|e| e.to_string()),
            };
            Ok(Anchor {
                sample_id: m.sample_id.clone(),
                identity_id: m.identity_id.clone().unwrap_or_else(|| m.sample_id.clone()),
                group,
                original_age,
            })
        })
        .collect()
}

// headers are written by hand so that empty tables still have one
fn headerless() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let tmp = tmp_path(path);
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(())
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".tmp");
    PathBuf::from(s)
}

fn file_name(path: &Path) -> PathBuf {
    PathBuf::from(path.file_name().expect("output paths have file names"))
}

fn entry_from_bytes(role: &str, path: &Path, bytes: &[u8]) -> FileEntry {
    FileEntry {
        role: role.into(),
        path: file_name(path),
        bytes: bytes.len() as u64,
        sha256: sha256_hex(bytes),
    }
}

fn entry_from_disk(role: &str, path: &Path) -> anyhow::Result<FileEntry> {
    let (bytes, sha256) = hash_file(path).with_context(|| format!("hashing {}", path.display()))?;
    Ok(FileEntry {
        role: role.into(),
        path: file_name(path),
        bytes,
        sha256,
    })
}

/// Recorded entries for a target, if every file is still on disk unchanged.
fn reusable(previous: &[FileEntry], out: &Path, latw: &Path) -> Option<Vec<FileEntry>> {
    let stem = file_name(latw);
    let stem = stem.to_str()?;
    let recorded: Vec<FileEntry> = previous
        .iter()
        .filter(|e| e.path.to_str().is_some_and(|p| p == stem || p.starts_with(&format!("{stem}."))))
        .cloned()
        .collect();
    if recorded.is_empty() || !recorded.iter().any(|e| e.path.as_os_str() == stem) {
        return None;
    }
    let intact = recorded.iter().all(|e| {
        hash_file(&out.join(&e.path)).is_ok_and(|(bytes, sha)| bytes == e.bytes && sha == e.sha256)
    });
    intact.then_some(recorded)
}

pub fn gen_dataset(cfg: &PipelineConfig, manifest_flag: Option<PathBuf>, stop_after: Option<usize>) -> anyhow::Result<()> {
    let latents = require(&cfg.latents, "latents")?;
    let direction = require(&cfg.direction, "direction")?;
    let calib = require(&cfg.calib, "calib")?;
    let out = require(&cfg.out, "out")?;
    let targets = cfg.target_ages.clone().unwrap_or_else(|| DEFAULT_TARGET_AGES.to_vec());
    if targets.is_empty() || targets.iter().any(|t| !t.is_finite() || *t < 0.0) {
        bail!("target ages must be finite and non-negative");
    }
    let mut names: Vec<String> = targets.iter().map(|t| format!("age_{t}.latw")).collect();
    names.sort();
    names.dedup();
    if names.len() != targets.len() {
        bail!("duplicate target ages in {targets:?}");
    }

    let set = load_set(&latents, cfg.meta.as_deref())?;
    let dir = load_direction(&direction)?;
    let phi = load_phi(cfg.phi.as_deref(), dir.dim())?;
    let model = load_calibration(&calib)?;
    if set.dim() != dir.dim() {
        bail!("latents have dim {}, direction has dim {}", set.dim(), dir.dim());
    }

    let mut m = Manifest::new("gen-dataset", cfg);
    m.param("target_ages", &targets);
    m.param("phi", if cfg.phi.is_some() { "file" } else { "ones" });
    m.param("scheme", &model.scheme.name);
    m.latents_input("latents", &latents)?;
    if let Some(meta) = &cfg.meta {
        m.input("meta", meta)?;
    }
    m.input("direction", &direction)?;
    if let Some(p) = &cfg.phi {
        m.input("phi", p)?;
    }
    m.input("calibration", &calib)?;
    let fingerprint = sha256_hex(
        serde_json::to_string(&json!({ "config": m.config, "params": m.params, "inputs": m.inputs }))?.as_bytes(),
    );
    m.fingerprint = Some(fingerprint.clone());
    m.complete = Some(false);

    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let manifest_path = manifest_flag.unwrap_or_else(|| out.join("manifest.json"));
    let previous: Vec<FileEntry> = fs::read_to_string(&manifest_path)
        .ok()
        .and_then(|text| serde_json::from_str::<Manifest>(&text).ok())
        .filter(|p| p.command == "gen-dataset" && p.fingerprint.as_deref() == Some(fingerprint.as_str()))
        .map(|p| p.outputs)
        .unwrap_or_default();

    let anchors = anchors(&set, &dir, &model)?;
    let dim = set.dim();
    let rows = row_major(set.vectors());
    let mut index = Vec::new();
    let mut failures = Vec::new();
    let mut edit_time = Duration::ZERO;
    let mut edits = 0usize;
    let mut written = 0usize;
    let mut skipped = 0usize;

    for &target in &targets {
        let latw = out.join(format!("age_{target}.latw"));
        let started = Instant::now();
        let offsets: Vec<Result<(f64, bool), String>> = anchors
            .par_iter()
            .map(|a| {
                let original = a.original_age.clone()?;
                scalar_offset(&model, a.group, original, target)
                    .map(|o| (o.delta_s, o.fallback_used()))
                    .map_err(|e| e.to_string())
            })
            .collect();
        let mut kept = Vec::new();
        let mut scalars = Vec::new();
        for (i, (a, off)) in anchors.iter().zip(&offsets).enumerate() {
            match off {
                Ok((s, fallback)) => {
                    kept.push(i);
                    scalars.push(*s);
                    index.push(IndexRow {
                        identity_id: &a.identity_id,
                        target_age: target,
                        scalar_used: *s,
                        fallback_flag: *fallback,
                    });
                }
                Err(e) => failures.push(FailureRow {
                    identity_id: &a.identity_id,
                    target_age: target,
                    error: e.clone(),
                }),
            }
        }
        edit_time += started.elapsed();

        if let Some(entries) = reusable(&previous, &out, &latw) {
            m.outputs.extend(entries);
            skipped += 1;
            continue;
        }

        let started = Instant::now();
        let mut edited = vec![0.0; kept.len() * dim];
        edited
            .par_chunks_mut(dim)
            .zip(kept.par_iter())
            .for_each(|(row, &i)| row.copy_from_slice(&rows[i * dim..(i + 1) * dim]));
        edit_rows(&mut edited, dim, &scalars, &dir, &phi)?;
        edit_time += started.elapsed();
        edits += kept.len();

        let bytes = encode_latents(&DMatrix::from_row_slice(kept.len(), dim, &edited))?;
        let meta: Vec<SampleMeta> = kept
            .iter()
            .map(|&i| {
                let a = &anchors[i];
                SampleMeta::new(format!("{}@{target}", a.sample_id))
                    .with_identity(a.identity_id.clone())
                    .with_age(target)
            })
            .collect();
        write_atomic(&latw, &bytes)?;
        m.outputs.push(entry_from_bytes("latents", &latw, &bytes));
        let mp = meta_path(&latw);
        write_meta_csv(&tmp_path(&mp), &meta)?;
        fs::rename(tmp_path(&mp), &mp)?;
        m.outputs.push(entry_from_disk("latents.meta", &mp)?);
        if let Some(scaler) = set.scaler() {
            let sp = scaler_path(&latw);
            write_scaler(&tmp_path(&sp), scaler)?;
            fs::rename(tmp_path(&sp), &sp)?;
            m.outputs.push(entry_from_disk("latents.scaler", &sp)?);
        }
        write_atomic(&manifest_path, m.to_json().as_bytes())?;
        written += 1;
        if stop_after == Some(written) {
            bail!("stopped after {written} target files; rerun the same command to resume");
        }
    }

    let index_path = out.join("index.csv");
    let mut w = headerless();
    w.write_record(["identity_id", "target_age", "scalar_used", "fallback_flag"])?;
    for row in &index {
        w.serialize(row)?;
    }
    let bytes = w.into_inner()?;
    write_atomic(&index_path, &bytes)?;
    m.outputs.push(entry_from_bytes("index", &index_path, &bytes));

    let failures_path = out.join("failures.csv");
    let mut w = headerless();
    w.write_record(["identity_id", "target_age", "error"])?;
    for row in &failures {
        w.serialize(row)?;
        eprintln!("failed: {} at age {}: {}", row.identity_id, row.target_age, row.error);
    }
    let bytes = w.into_inner()?;
    write_atomic(&failures_path, &bytes)?;
    m.outputs.push(entry_from_bytes("failures", &failures_path, &bytes));

    m.param("rows", index.len());
    m.param("failures", failures.len());
    m.complete = Some(true);
    write_atomic(&manifest_path, m.to_json().as_bytes())?;
    eprintln!(
        "edited {edits} latents in {:.3}s ({written} target files written, {skipped} reused, {} failures)",
        edit_time.as_secs_f64(),
        failures.len()
    );
    Ok(())
}
