//! Identity-preservation analytics over face-verification and age-estimation outputs.
//!
//! At every scalar step, an edited face counts as verified when its
//! similarity to the original reaches the decision threshold. Among verified
//! faces, the age gain is the estimated age minus the original age label,
//! summarised by its mean and population standard deviation. Sweeping the
//! scalar gives a curve of (verification rate, gain) that is interpolated at a
//! verification-rate cutoff.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no records")]
    EmptyRecords,
    #[error("no verified samples")]
    NoVerifiedSamples,
    #[error("target rate {target} outside the curve's span [{lo}, {hi}]")]
    RateOutOfSpan { target: f64, lo: f64, hi: f64 },
    #[error("{0} flags for {1} records")]
    FlagCountMismatch(usize, usize),
    #[error("a curve needs at least 2 scalars, got {0}")]
    TooFewScalars(usize),
    #[error("scalar {0} appears more than once")]
    DuplicateScalar(f64),
    #[error("invalid record {sample_id:?}: {reason}")]
    InvalidRecord { sample_id: String, reason: String },
}

/// One edited sample: its similarity to the original and its estimated age.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub sample_id: String,
    #[serde(rename = "scalar")]
    pub scalar_s: f64,
    pub fr_score: f64,
    pub estimated_age: f64,
    pub original_age: f64,
    pub group: usize,
}

impl EvaluationRecord {
    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |reason: &str| EvalError::InvalidRecord {
            sample_id: self.sample_id.clone(),
            reason: reason.to_string(),
        };
        for (name, v) in [
            ("scalar", self.scalar_s),
            ("fr_score", self.fr_score),
            ("estimated_age", self.estimated_age),
            ("original_age", self.original_age),
        ] {
            if !v.is_finite() {
                return Err(bad(&format!("{name} is not finite")));
            }
        }
        if !(-1.0..=1.0).contains(&self.fr_score) {
            return Err(bad("fr_score must be a cosine similarity in [-1, 1]"));
        }
        Ok(())
    }
}

/// Converts a cosine distance to the similarity used by verification.
pub fn similarity_from_cosine_distance(distance: f64) -> f64 {
    1.0 - distance
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EditDirection {
    Aging,
    Deaging,
}

impl EditDirection {
    fn admits(self, s: f64) -> bool {
        match self {
            Self::Aging => s >= 0.0,
            Self::Deaging => s <= 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verification {
    pub rate: f64,
    pub flags: Vec<bool>,
}

/// Fraction of records with `fr_score >= threshold`.
pub fn verification_rate(
    records: &[EvaluationRecord],
    threshold: f64,
) -> Result<Verification, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyRecords);
    }
    let flags: Vec<bool> = records.iter().map(|r| r.fr_score >= threshold).collect();
    let verified = flags.iter().filter(|f| **f).count();
    Ok(Verification {
        rate: verified as f64 / records.len() as f64,
        flags,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgeGain {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
    pub direction: EditDirection,
}

/// Mean and population std of `estimated_age - original_age` over verified records.
pub fn age_gain(
    records: &[EvaluationRecord],
    verified: &[bool],
    direction: EditDirection,
) -> Result<AgeGain, EvalError> {
    if records.len() != verified.len() {
        return Err(EvalError::FlagCountMismatch(verified.len(), records.len()));
    }
    let diffs: Vec<f64> = records
        .iter()
        .zip(verified)
        .filter(|(_, v)| **v)
        .map(|(r, _)| r.estimated_age - r.original_age)
        .collect();
    if diffs.is_empty() {
        return Err(EvalError::NoVerifiedSamples);
    }
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n;
    Ok(AgeGain {
        mean,
        std: var.sqrt(),
        count: diffs.len(),
        direction,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainPoint {
    pub scalar: f64,
    pub verified_rate: f64,
    pub gain_mean: f64,
    pub gain_std: f64,
}

/// Verification rate and age gain per scalar, ordered away from the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainCurve {
    pub points: Vec<GainPoint>,
    pub direction: EditDirection,
}

/// Buckets records by scalar step, ascending.
pub fn group_by_scalar(records: &[EvaluationRecord]) -> Vec<(f64, Vec<EvaluationRecord>)> {
    let mut map: BTreeMap<u64, (f64, Vec<EvaluationRecord>)> = BTreeMap::new();
    for r in records {
        // -0.0 and 0.0 share a bucket
        let s = if r.scalar_s == 0.0 { 0.0 } else { r.scalar_s };
        map.entry(s.to_bits()).or_insert_with(|| (s, Vec::new())).1.push(r.clone());
    }
    let mut out: Vec<_> = map.into_values().collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// One curve point per scalar of the given direction (`s >= 0` aging, `s <= 0` de-aging).
pub fn sweep_curve(
    records_by_scalar: &[(f64, Vec<EvaluationRecord>)],
    threshold: f64,
    direction: EditDirection,
) -> Result<GainCurve, EvalError> {
    let mut selected: Vec<&(f64, Vec<EvaluationRecord>)> = records_by_scalar
        .iter()
        .filter(|(s, _)| direction.admits(*s))
        .collect();
    selected.sort_by(|a, b| a.0.abs().total_cmp(&b.0.abs()));
    if let Some(w) = selected.windows(2).find(|w| w[0].0.abs() == w[1].0.abs()) {
        return Err(EvalError::DuplicateScalar(w[1].0));
    }
    if selected.len() < 2 {
        return Err(EvalError::TooFewScalars(selected.len()));
    }
    let points = selected
        .into_iter()
        .map(|(s, records)| {
            let v = verification_rate(records, threshold)?;
            let gain = age_gain(records, &v.flags, direction)?;
            Ok(GainPoint {
                scalar: *s,
                verified_rate: v.rate,
                gain_mean: gain.mean,
                gain_std: gain.std,
            })
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    Ok(GainCurve { points, direction })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainAtRate {
    pub gain_mean: f64,
    pub gain_std: f64,
    /// Scalars of the bracketing points.
    pub bracket: [f64; 2],
}

/// Piecewise-linear age gain at a verification rate.
///
/// When several segments bracket the rate, the one reaching the largest
/// `|scalar|` is used, i.e. the furthest edit that still achieves it.
pub fn gain_at_rate(curve: &GainCurve, target_rate: f64) -> Result<GainAtRate, EvalError> {
    let pts = &curve.points;
    if pts.len() < 2 {
        return Err(EvalError::TooFewScalars(pts.len()));
    }
    let lo = pts.iter().map(|p| p.verified_rate).fold(f64::INFINITY, f64::min);
    let hi = pts.iter().map(|p| p.verified_rate).fold(f64::NEG_INFINITY, f64::max);
    let out_of_span = EvalError::RateOutOfSpan {
        target: target_rate,
        lo,
        hi,
    };
    if !target_rate.is_finite() {
        return Err(out_of_span);
    }
    let reach = |a: &GainPoint, b: &GainPoint| a.scalar.abs().max(b.scalar.abs());
    let bracket = pts
        .windows(2)
        .filter(|w| {
            let (ra, rb) = (w[0].verified_rate, w[1].verified_rate);
            ra.min(rb) <= target_rate && target_rate <= ra.max(rb)
        })
        .max_by(|x, y| reach(&x[0], &x[1]).total_cmp(&reach(&y[0], &y[1])))
        .ok_or(out_of_span)?;
    let (a, b) = (&bracket[0], &bracket[1]);
    let scalars = [a.scalar, b.scalar];
    // prefer the outer knot when both ends hit the rate
    let knot = if b.verified_rate == target_rate {
        Some(b)
    } else if a.verified_rate == target_rate {
        Some(a)
    } else {
        None
    };
    if let Some(k) = knot {
        return Ok(GainAtRate {
            gain_mean: k.gain_mean,
            gain_std: k.gain_std,
            bracket: scalars,
        });
    }
    let t = (target_rate - a.verified_rate) / (b.verified_rate - a.verified_rate);
    let lerp = |u: f64, v: f64| (u + t * (v - u)).clamp(u.min(v), u.max(v));
    Ok(GainAtRate {
        gain_mean: lerp(a.gain_mean, b.gain_mean),
        gain_std: lerp(a.gain_std, b.gain_std),
        bracket: scalars,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSummary {
    /// `None` for curves pooled across groups.
    pub group: Option<usize>,
    pub direction: EditDirection,
    pub curve: GainCurve,
    /// Gain at the cutoff rate, absent when the curve never reaches it.
    pub at_cutoff: Option<GainAtRate>,
}

/// Curves for both directions, per group or pooled.
///
/// Directions with fewer than two scalars are skipped.
pub fn evaluate_records(
    records: &[EvaluationRecord],
    threshold: f64,
    cutoff: f64,
    pooled: bool,
) -> Result<Vec<CurveSummary>, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyRecords);
    }
    for r in records {
        r.validate()?;
    }
    let mut partitions: BTreeMap<Option<usize>, Vec<EvaluationRecord>> = BTreeMap::new();
    for r in records {
        let key = if pooled { None } else { Some(r.group) };
        partitions.entry(key).or_default().push(r.clone());
    }
    let mut out = Vec::new();
    for (group, recs) in partitions {
        let by_scalar = group_by_scalar(&recs);
        for direction in [EditDirection::Aging, EditDirection::Deaging] {
            let count = by_scalar.iter().filter(|(s, _)| direction.admits(*s)).count();
            if count < 2 {
                continue;
            }
            let curve = sweep_curve(&by_scalar, threshold, direction)?;
            let at_cutoff = gain_at_rate(&curve, cutoff).ok();
            out.push(CurveSummary {
                group,
                direction,
                curve,
                at_cutoff,
            });
        }
    }
    Ok(out)
}
