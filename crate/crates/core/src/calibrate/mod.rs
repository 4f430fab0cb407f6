//! Scalar-step calibration against apparent age.
//!
//! For each age group a polynomial `p(s)` maps the scalar step to the mean
//! estimated age of edited faces. Solving `p(s) = age` gives the step that
//! realises an age; the offset between the steps for the desired and the
//! original age is what an edit applies. When the polynomial has no unique
//! root inside the usable scalar range, a straight line fitted to the aging
//! (`s >= 0`) or de-aging (`s <= 0`) side is used instead.

mod poly;

pub use poly::{fit_least_squares, Polynomial};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::groups::AgeGroupScheme;
use poly::FitFailure;

pub const DEFAULT_DEGREE: usize = 3;
pub const MAX_DEGREE: usize = 6;
pub const DEFAULT_SCALAR_RANGE: (f64, f64) = (-30.0, 30.0);

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("group {group}: {distinct} distinct scalars, need {needed}")]
    InsufficientPoints {
        group: usize,
        distinct: usize,
        needed: usize,
    },
    #[error("group {0}: least-squares system is rank deficient")]
    RankDeficientFit(usize),
    #[error("group {0}: no usable root and the fallback line is flat")]
    NoSolution(usize),
    #[error("group {0} is not calibrated")]
    GroupMissing(usize),
    #[error("degree must be in 1..={MAX_DEGREE}, got {0}")]
    InvalidDegree(usize),
    #[error("scalar range must satisfy min < 0 < max, got [{0}, {1}]")]
    InvalidRange(f64, f64),
    #[error("invalid calibration sample: {0}")]
    InvalidSample(String),
    #[error("target age must be finite")]
    InvalidTarget,
}

/// One observation of the mean estimated age at a scalar step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSample {
    pub group: usize,
    #[serde(rename = "scalar")]
    pub scalar_s: f64,
    pub estimated_age: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
}

impl LinearFit {
    fn through(x: &[f64], y: &[f64]) -> Option<Self> {
        let p = fit_least_squares(x, y, 1).ok()?;
        Some(Self {
            intercept: p.coeffs()[0],
            slope: p.coeffs()[1],
        })
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.slope.mul_add(s, self.intercept)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupCurve {
    pub group: usize,
    pub label: String,
    /// Ascending-degree coefficients of `p(s)`.
    pub coeffs: Vec<f64>,
    pub degree: usize,
    pub range: [f64; 2],
    pub rmse: f64,
    pub linear_aging: LinearFit,
    pub linear_deaging: LinearFit,
}

impl GroupCurve {
    pub fn polynomial(&self) -> Polynomial {
        Polynomial::new(self.coeffs.clone())
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.polynomial().eval(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationModel {
    pub scheme: AgeGroupScheme,
    pub groups: Vec<GroupCurve>,
}

impl CalibrationModel {
    pub fn curve(&self, group: usize) -> Result<&GroupCurve, CalibrationError> {
        self.groups
            .iter()
            .find(|g| g.group == group)
            .ok_or(CalibrationError::GroupMissing(group))
    }

    pub fn validate(&self) -> Result<(), CalibrationError> {
        for g in &self.groups {
            if g.coeffs.len() != g.degree + 1 || g.coeffs.iter().any(|c| !c.is_finite()) {
                return Err(CalibrationError::InvalidSample(format!(
                    "group {} has malformed coefficients",
                    g.group
                )));
            }
            if !(g.range[0] < 0.0 && 0.0 < g.range[1]) {
                return Err(CalibrationError::InvalidRange(g.range[0], g.range[1]));
            }
            for l in [g.linear_aging, g.linear_deaging] {
                if !l.slope.is_finite() || !l.intercept.is_finite() {
                    return Err(CalibrationError::InvalidSample(format!(
                        "group {} has a non-finite fallback line",
                        g.group
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Fits one polynomial and two fallback lines per group present in `samples`.
pub fn fit_group_curves(
    samples: &[CalibrationSample],
    scheme: &AgeGroupScheme,
    degree: usize,
    scalar_range: (f64, f64),
) -> Result<CalibrationModel, CalibrationError> {
    if !(1..=MAX_DEGREE).contains(&degree) {
        return Err(CalibrationError::InvalidDegree(degree));
    }
    let (lo, hi) = scalar_range;
    if !(lo.is_finite() && hi.is_finite() && lo < 0.0 && 0.0 < hi) {
        return Err(CalibrationError::InvalidRange(lo, hi));
    }
    let mut by_group: BTreeMap<usize, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for s in samples {
        if !s.scalar_s.is_finite() || !s.estimated_age.is_finite() {
            return Err(CalibrationError::InvalidSample(format!(
                "non-finite value in group {}",
                s.group
            )));
        }
        if s.group >= scheme.len() {
            return Err(CalibrationError::InvalidSample(format!(
                "group {} outside scheme {:?}",
                s.group, scheme.name
            )));
        }
        let e = by_group.entry(s.group).or_default();
        e.0.push(s.scalar_s);
        e.1.push(s.estimated_age);
    }

    let mut groups = Vec::with_capacity(by_group.len());
    for (group, (x, y)) in by_group {
        let poly = fit_least_squares(&x, &y, degree).map_err(|e| match e {
            FitFailure::TooFewDistinct { distinct, needed } => CalibrationError::InsufficientPoints {
                group,
                distinct,
                needed,
            },
            FitFailure::RankDeficient => CalibrationError::RankDeficientFit(group),
        })?;
        let rmse = (x
            .iter()
            .zip(&y)
            .map(|(s, a)| (poly.eval(*s) - a).powi(2))
            .sum::<f64>()
            / x.len() as f64)
            .sqrt();
        let overall = LinearFit::through(&x, &y).ok_or(CalibrationError::RankDeficientFit(group))?;
        let side = |keep: fn(f64) -> bool| {
            let (sx, sy): (Vec<f64>, Vec<f64>) =
                x.iter().zip(&y).filter(|(s, _)| keep(**s)).map(|(s, a)| (*s, *a)).unzip();
            LinearFit::through(&sx, &sy).unwrap_or(overall)
        };
        groups.push(GroupCurve {
            group,
            label: scheme.label(group).unwrap_or_default().to_string(),
            coeffs: poly.coeffs().to_vec(),
            degree,
            range: [lo, hi],
            rmse,
            linear_aging: side(|s| s >= 0.0),
            linear_deaging: side(|s| s <= 0.0),
        });
    }
    Ok(CalibrationModel {
        scheme: scheme.clone(),
        groups,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarSolution {
    pub scalar: f64,
    pub fallback_used: bool,
    /// Distinct real polynomial roots found inside the scalar range.
    pub valid_roots: usize,
}

/// Real roots of `p(s) = target` inside the curve's range, ascending and deduplicated.
pub fn valid_roots(curve: &GroupCurve, target_age: f64) -> Vec<f64> {
    let shifted = curve.polynomial().shifted(target_age);
    let [lo, hi] = curve.range;
    let mut roots: Vec<f64> = shifted
        .roots()
        .into_iter()
        .filter(|z| z.im.abs() <= 1e-8 * (1.0 + z.re.abs()))
        .map(|z| shifted.polish_root(z.re))
        .filter(|s| *s >= lo && *s <= hi)
        .collect();
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-7 * (1.0 + b.abs()));
    roots
}

/// Scalar step at which the group's curve reaches `target_age`.
pub fn solve_scalar_for_age(
    model: &CalibrationModel,
    group: usize,
    target_age: f64,
) -> Result<ScalarSolution, CalibrationError> {
    if !target_age.is_finite() {
        return Err(CalibrationError::InvalidTarget);
    }
    let curve = model.curve(group)?;
    let roots = valid_roots(curve, target_age);
    if roots.len() == 1 {
        return Ok(ScalarSolution {
            scalar: roots[0],
            fallback_used: false,
            valid_roots: 1,
        });
    }
    let line = if target_age >= curve.eval(0.0) {
        curve.linear_aging
    } else {
        curve.linear_deaging
    };
    if line.slope.abs() < 1e-12 {
        return Err(CalibrationError::NoSolution(group));
    }
    let [lo, hi] = curve.range;
    let scalar = ((target_age - line.intercept) / line.slope).clamp(lo, hi);
    Ok(ScalarSolution {
        scalar,
        fallback_used: true,
        valid_roots: roots.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarOffset {
    pub delta_s: f64,
    pub original: ScalarSolution,
    pub desired: ScalarSolution,
}

impl ScalarOffset {
    pub fn fallback_used(&self) -> bool {
        self.original.fallback_used || self.desired.fallback_used
    }
}

/// `s(y_desired) - s(y_original)` on the group's curve.
pub fn scalar_offset(
    model: &CalibrationModel,
    group: usize,
    y_original: f64,
    y_desired: f64,
) -> Result<ScalarOffset, CalibrationError> {
    let original = solve_scalar_for_age(model, group, y_original)?;
    let desired = solve_scalar_for_age(model, group, y_desired)?;
    Ok(ScalarOffset {
        delta_s: desired.scalar - original.scalar,
        original,
        desired,
    })
}
