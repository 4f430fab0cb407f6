use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use latentage_core::calibrate::{DEFAULT_DEGREE, DEFAULT_SCALAR_RANGE};
use latentage_core::direction::edit_weighted_in_place;
use latentage_core::evaluate::{evaluate_records, CurveSummary};
use latentage_core::format::load_latents_with_meta;
use latentage_core::groups::assign_groups;
use latentage_core::select::{pca_mask_with, ClassLabel, MaskTriple, PcaMaskMode};
use latentage_core::{
    combine_masks, compose_phi, fit_age_direction, fit_group_curves,
    lda_mask, save_latents, scalar_offset, solve_scalar_for_age, standardize, AgeDirection,
    AgeGroupScheme, CalibrationModel, CalibrationSample, ComponentMask, DistanceMetric,
    EditDirection, EvaluationRecord, LabeledLatentSet, PhiWeights,
};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

use crate::config::{require, PipelineConfig};
use crate::manifest::{beside, Manifest};
use crate::Usage;

pub const DEFAULT_VARIANCE_THRESHOLD: f64 = 0.95;
pub const DEFAULT_DISCRIMINABILITY_THRESHOLD: f64 = 0.95;
pub const DEFAULT_CUTOFF: f64 = 0.75;
pub const DEFAULT_SCHEME: &str = "nine";

pub fn read_json<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn load_set(path: &Path, meta: Option<&Path>) -> anyhow::Result<LabeledLatentSet> {
    load_latents_with_meta(path, meta).with_context(|| format!("loading {}", path.display()))
}

pub fn load_direction(path: &Path) -> anyhow::Result<AgeDirection> {
    let dir: AgeDirection = read_json(path)?;
    dir.validate()?;
    Ok(dir)
}

pub fn load_phi(path: Option<&Path>, dim: usize) -> anyhow::Result<PhiWeights> {
    let Some(path) = path else {
        return Ok(PhiWeights::ones(dim));
    };
    let phi: PhiWeights = read_json(path)?;
    phi.validate()?;
    Ok(phi)
}

pub fn load_calibration(path: &Path) -> anyhow::Result<CalibrationModel> {
    let model: CalibrationModel = read_json(path)?;
    model.validate()?;
    Ok(model)
}

fn parse_metric(name: &str) -> anyhow::Result<DistanceMetric> {
    DistanceMetric::parse(name).ok_or_else(|| Usage(format!("unknown metric {name:?}")).into())
}

fn scheme(cfg: &PipelineConfig) -> anyhow::Result<AgeGroupScheme> {
    Ok(AgeGroupScheme::parse(cfg.scheme.as_deref().unwrap_or(DEFAULT_SCHEME))?)
}

/// Writes the manifest to the explicit path, the default path, or stderr.
fn finish(m: &Manifest, explicit: Option<PathBuf>, default: Option<PathBuf>) -> anyhow::Result<()> {
    match explicit.or(default) {
        Some(p) => m.write(&p).with_context(|| format!("writing manifest {}", p.display())),
        None => {
            eprintln!("manifest: {}", serde_json::to_string(m)?);
            Ok(())
        }
    }
}

pub fn standardize_cmd(cfg: &PipelineConfig, manifest: Option<PathBuf>) -> anyhow::Result<()> {
    let latents = require(&cfg.latents, "latents")?;
    let out = require(&cfg.out, "out")?;
    let set = load_set(&latents, cfg.meta.as_deref())?;
    let (std_set, _) = standardize(&set)?;
    save_latents(&std_set, &out)?;

    let mut m = Manifest::new("standardize", cfg);
    m.latents_input("latents", &latents)?;
    if let Some(meta) = &cfg.meta {
        m.input("meta", meta)?;
    }
    m.latents_output("latents", &out)?;
    finish(&m, manifest, Some(beside(&out)))
}

pub fn fit_direction(cfg: &PipelineConfig, manifest: Option<PathBuf>) -> anyhow::Result<()> {
    let latents = require(&cfg.latents, "latents")?;
    let out = require(&cfg.out, "out")?;
    let svr = cfg.svr.resolve();
    let set = load_set(&latents, cfg.meta.as_deref())?;
    let dir = fit_age_direction(&set, &svr)?;
    write_json(&out, &dir)?;

    let mut m = Manifest::new("fit-direction", cfg);
    m.param("svr", svr);
    m.latents_input("latents", &latents)?;
    if let Some(meta) = &cfg.meta {
        m.input("meta", meta)?;
    }
    m.output("direction", &out)?;
    if let Err(e) = dir.ensure_converged() {
        // the direction is still usable; make the shortfall visible
        eprintln!("warning: {e}");
        m.notes.push(e.to_string());
    }
    finish(&m, manifest, Some(beside(&out)))
}

pub fn fit_pca_mask(cfg: &PipelineConfig, manifest: Option<PathBuf>) -> anyhow::Result<()> {
    let latents = require(&cfg.latents, "latents")?;
    let out = require(&cfg.out, "out")?;
    let threshold = cfg.variance_threshold.unwrap_or(DEFAULT_VARIANCE_THRESHOLD);
    let mode = match &cfg.metric {
        Some(name) => PcaMaskMode::Reconstruction(parse_metric(name)?),
        None => PcaMaskMode::RankIndex,
    };
    let set = load_set(&latents, cfg.meta.as_deref())?;
    let mut mask = pca_mask_with(&set, threshold, mode)?;
    mask.thresholds.insert("variance".into(), threshold);
    write_json(&out, &mask)?;

    let mut m = Manifest::new("fit-pca-mask", cfg);
    m.param("variance_threshold", threshold);
    m.param("mode", mode);
    m.latents_input("latents", &latents)?;
    m.output("mask", &out)?;
    finish(&m, manifest, Some(beside(&out)))
}

/// File names written by `fit-lda-masks` inside its output directory.
pub const MASK_FILES: [&str; 5] = ["lda_id.json", "lda_age.json", "age_only.json", "id_only.json", "both.json"];

pub fn fit_lda_masks(cfg: &PipelineConfig, manifest: Option<PathBuf>) -> anyhow::Result<()> {
    let latents = require(&cfg.latents, "latents")?;
    let out = require(&cfg.out, "out")?;
    let threshold = cfg
        .discriminability_threshold
        .unwrap_or(DEFAULT_DISCRIMINABILITY_THRESHOLD);
    let metric = parse_metric(cfg.metric.as_deref().unwrap_or("mse"))?;
    let scheme = scheme(cfg)?;

    let id_set = load_set(&latents, cfg.meta.as_deref())?;
    let age_path = cfg.age_latents.clone().unwrap_or_else(|| latents.clone());
    let mut age_set = if cfg.age_latents.is_some() {
        load_set(&age_path, None)?
    } else {
        id_set.clone()
    };
    if age_set.meta().iter().any(|m| m.age_group.is_none()) {
        age_set = assign_groups(&age_set, &scheme)?;
    }

    let (mut id_mask, id_profile, id_basis) = lda_mask(&id_set, ClassLabel::Identity, threshold, metric)?;
    let (mut age_mask, age_profile, age_basis) = lda_mask(&age_set, ClassLabel::AgeGroup, threshold, metric)?;
    for mask in [&mut id_mask, &mut age_mask] {
        mask.thresholds.insert("discriminability".into(), threshold);
    }
    let MaskTriple { age_only, id_only, both } = combine_masks(&id_mask, &age_mask)?;

    fs::create_dir_all(&out)?;
    let masks: [&ComponentMask; 5] = [&id_mask, &age_mask, &age_only, &id_only, &both];
    for (name, mask) in MASK_FILES.iter().zip(masks) {
        write_json(&out.join(name), mask)?;
    }
    let profiles = json!({
        "identity": { "profile": id_profile, "retained": id_basis.retained, "classes": id_basis.classes, "gamma": id_basis.gamma },
        "age": { "profile": age_profile, "retained": age_basis.retained, "classes": age_basis.classes, "gamma": age_basis.gamma },
    });
    write_json(&out.join("profiles.json"), &profiles)?;

    let mut m = Manifest::new("fit-lda-masks", cfg);
    m.param("discriminability_threshold", threshold);
    m.param("metric", metric);
    m.param("scheme", &scheme.name);
    m.latents_input("latents", &latents)?;
    if cfg.age_latents.is_some() {
        m.latents_input("age_latents", &age_path)?;
    }
    for name in MASK_FILES.iter().chain(&["profiles.json"]) {
        m.output(name.trim_end_matches(".json"), &out.join(name))?;
    }
    finish(&m, manifest, Some(out.join("manifest.json")))
}

pub fn compose_phi_cmd(cfg: &PipelineConfig, manifest: Option<PathBuf>) -> anyhow::Result<()> {
    let masks = require(&cfg.masks, "masks")?;
    let out = require(&cfg.out, "out")?;
    let alpha = cfg.alpha.unwrap_or(1.0);
    let beta = cfg.beta.unwrap_or(1.0);
    let age_only: ComponentMask = read_json(&masks.join("age_only.json"))?;
    let both: ComponentMask = read_json(&masks.join("both.json"))?;
    let mut phi = compose_phi(&age_only, &both, alpha, beta)?;
    for mask in [&age_only, &both] {
        phi.thresholds.extend(mask.thresholds.clone());
    }
    write_json(&out, &phi)?;

    let mut m = Manifest::new("compose-phi", cfg);
    m.param("alpha", alpha);
    m.param("beta", beta);
    m.input("age_only", &masks.join("age_only.json"))?;
    m.input("both", &masks.join("both.json"))?;
    m.output("phi", &out)?;
    finish(&m, manifest, Some(beside(&out)))
}

/// Row-major copy of a matrix.
pub fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

/// Applies `w + phi ⊙ (s_i * lambda_hat)` to each row, in parallel.
pub fn edit_rows(
    rows: &mut [f64],
    dim: usize,
    scalars: &[f64],
    dir: &AgeDirection,
    phi: &PhiWeights,
) -> anyhow::Result<()> {
    rows.par_chunks_mut(dim)
        .zip(scalars.par_iter())
        .try_for_each(|(row, s)| edit_weighted_in_place(row, *s, dir, phi))?;
    Ok(())
}

pub fn edit(cfg: &PipelineConfig, manifest: Option<PathBuf>) -> anyhow::Result<()> {
    let latents = require(&cfg.latents, "latents")?;
    let direction = require(&cfg.direction, "direction")?;
    let scalar = require(&cfg.scalar, "scalar")?;
    let out = require(&cfg.out, "out")?;
    let set = load_set(&latents, cfg.meta.as_deref())?;
    let dir = load_direction(&direction)?;
    let phi = load_phi(cfg.phi.as_deref(), dir.dim())?;
    if set.dim() != dir.dim() {
        bail!("latents have dim {}, direction has dim {}", set.dim(), dir.dim());
    }

    let mut rows = row_major(set.vectors());
    edit_rows(&mut rows, set.dim(), &vec![scalar; set.len()], &dir, &phi)?;
    let edited = LabeledLatentSet::new(
        DMatrix::from_row_slice(set.len(), set.dim(), &rows),
        set.meta().to_vec(),
    )?;
    let edited = match set.scaler() {
        Some(s) => edited.with_scaler(s.clone())?,
        None => edited,
    };
    save_latents(&edited, &out)?;

    let mut m = Manifest::new("edit", cfg);
    m.param("scalar", scalar);
    m.param("phi", if cfg.phi.is_some() { "file" } else { "ones" });
    m.latents_input("latents", &latents)?;
    m.input("direction", &direction)?;
    if let Some(p) = &cfg.phi {
        m.input("phi", p)?;
    }
    m.latents_output("latents", &out)?;
    finish(&m, manifest, Some(beside(&out)))
}

pub fn calibrate(cfg: &PipelineConfig, manifest: Option<PathBuf>) -> anyhow::Result<()> {
    let samples_path = require(&cfg.samples, "samples")?;
    let out = require(&cfg.out, "out")?;
    let scheme = scheme(cfg)?;
    let degree = cfg.degree.unwrap_or(DEFAULT_DEGREE);
    let range = (
        cfg.range_min.unwrap_or(DEFAULT_SCALAR_RANGE.0),
        cfg.range_max.unwrap_or(DEFAULT_SCALAR_RANGE.1),
    );
    let mut rdr = csv::Reader::from_path(&samples_path)
        .with_context(|| format!("reading {}", samples_path.display()))?;
    let samples: Vec<CalibrationSample> = rdr
        .deserialize()
        .collect::<Result<_, _>>()
        .with_context(|| format!("parsing {}", samples_path.display()))?;
    let model = fit_group_curves(&samples, &scheme, degree, range)?;
    write_json(&out, &model)?;

    let mut m = Manifest::new("calibrate", cfg);
    m.param("scheme", &scheme.name);
    m.param("degree", degree);
    m.param("scalar_range", [range.0, range.1]);
    m.input("samples", &samples_path)?;
    m.output("calibration", &out)?;
    finish(&m, manifest, Some(beside(&out)))
}

pub fn solve_scalar(cfg: &PipelineConfig, manifest: Option<PathBuf>) -> anyhow::Result<()> {
    let calib = require(&cfg.calib, "calib")?;
    let to = require(&cfg.to, "to")?;
    let model = load_calibration(&calib)?;
    let group = match (cfg.group, cfg.from) {
        (Some(g), _) => g,
        (None, Some(from)) => model.scheme.group_of(from)?,
        (None, None) => return Err(Usage("solve-scalar needs --group or --from".into()).into()),
    };

    let mut m = Manifest::new("solve-scalar", cfg);
    m.param("group", group);
    m.input("calibration", &calib)?;
    match cfg.from {
        Some(from) => {
            let off = scalar_offset(&model, group, from, to)?;
            println!("delta_s {}", off.delta_s);
            println!("fallback {}", off.fallback_used());
            m.param("result", off);
        }
        None => {
            let sol = solve_scalar_for_age(&model, group, to)?;
            println!("scalar {}", sol.scalar);
            println!("fallback {}", sol.fallback_used);
            m.param("result", sol);
        }
    }
    finish(&m, manifest, None)
}

fn curve_file(c: &CurveSummary) -> String {
    let dir = match c.direction {
        EditDirection::Aging => "aging",
        EditDirection::Deaging => "deaging",
    };
    match c.group {
        Some(g) => format!("curve_g{g}_{dir}.csv"),
        None => format!("curve_pooled_{dir}.csv"),
    }
}

pub fn evaluate(cfg: &PipelineConfig, manifest: Option<PathBuf>) -> anyhow::Result<()> {
    let records_path = require(&cfg.records, "records")?;
    let threshold = require(&cfg.fr_threshold, "threshold")?;
    let out = require(&cfg.out, "out")?;
    let cutoff = cfg.cutoff.unwrap_or(DEFAULT_CUTOFF);
    let pooled = cfg.pooled.unwrap_or(false);
    let mut rdr = csv::Reader::from_path(&records_path)
        .with_context(|| format!("reading {}", records_path.display()))?;
    let records: Vec<EvaluationRecord> = rdr
        .deserialize()
        .collect::<Result<_, _>>()
        .with_context(|| format!("parsing {}", records_path.display()))?;
    let summaries = evaluate_records(&records, threshold, cutoff, pooled)?;

    fs::create_dir_all(&out)?;
    let mut m = Manifest::new("evaluate", cfg);
    m.param("fr_threshold", threshold);
    m.param("cutoff", cutoff);
    m.param("pooled", pooled);
    m.input("records", &records_path)?;
    for c in &summaries {
        let path = out.join(curve_file(c));
        let mut w = csv::Writer::from_path(&path)?;
        for p in &c.curve.points {
            w.serialize(p)?;
        }
        w.flush()?;
        m.output("curve", &path)?;
    }
    let summary_path = out.join("summary.json");
    write_json(
        &summary_path,
        &json!({ "fr_threshold": threshold, "cutoff": cutoff, "pooled": pooled, "curves": summaries }),
    )?;
    m.output("summary", &summary_path)?;
    finish(&m, manifest, Some(out.join("manifest.json")))
}

pub fn inspect(cfg: &PipelineConfig, manifest: Option<PathBuf>) -> anyhow::Result<()> {
    let mut m = Manifest::new("inspect", cfg);
    let mut report = serde_json::Map::new();
    if let Some(p) = &cfg.latents {
        let set = load_set(p, cfg.meta.as_deref())?;
        let ages = set.meta().iter().filter(|m| m.age_years.is_some()).count();
        let identities = set
            .meta()
            .iter()
            .filter_map(|m| m.identity_id.as_deref())
            .collect::<std::collections::BTreeSet<_>>()
            .len();
        report.insert(
            "latents".into(),
            json!({ "n": set.len(), "dim": set.dim(), "standardized": set.is_standardized(),
                    "with_age": ages, "identities": identities }),
        );
        m.latents_input("latents", p)?;
    }
    if let Some(p) = &cfg.direction {
        let dir = load_direction(p)?;
        let norm = dir.lambda_raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        report.insert(
            "direction".into(),
            json!({ "dim": dir.dim(), "bias": dir.bias, "lambda_raw_norm": norm, "train_meta": dir.train_meta }),
        );
        m.input("direction", p)?;
    }
    if let Some(p) = &cfg.calib {
        let model = load_calibration(p)?;
        let groups: Vec<_> = model
            .groups
            .iter()
            .map(|g| json!({ "group": g.group, "label": g.label, "degree": g.degree, "rmse": g.rmse, "p0": g.eval(0.0) }))
            .collect();
        report.insert("calibration".into(), json!({ "scheme": model.scheme.name, "groups": groups }));
        m.input("calibration", p)?;
    }
    if let Some(p) = &cfg.phi {
        let phi: PhiWeights = read_json(p)?;
        phi.validate()?;
        let active = phi.weights.iter().filter(|w| **w != 0.0).count();
        report.insert(
            "phi".into(),
            json!({ "dim": phi.dim(), "active": active, "alpha": phi.alpha, "beta": phi.beta, "sources": phi.sources }),
        );
        m.input("phi", p)?;
    }
    if report.is_empty() {
        return Err(Usage("inspect needs at least one of --latents --direction --calib --phi".into()).into());
    }
    println!("{}", serde_json::to_string_pretty(&report)?);
    finish(&m, manifest, None)
}
