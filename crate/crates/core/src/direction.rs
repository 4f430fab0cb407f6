//! The linear age direction and latent edits along it.
//!
//! A linear SVR regresses age labels on standardized latents. Its weight
//! vector, normalised to unit length, is the direction along which a latent
//! is moved: `w1 = w0 + s * dir` for the plain edit and
//! `w1 = w0 + phi ⊙ (s * dir)` when per-component weights gate the step.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::latent::{LabeledLatentSet, LatentError, LatentVector};
use crate::linalg::{dot, norm};
use crate::select::PhiWeights;
use crate::svr;

#[derive(Debug, Error)]
pub enum DirectionError {
    #[error("labels carry no age signal (|lambda| below 1e-10)")]
    NoAgeSignal,
    #[error("latent set must be standardized before fitting")]
    NotStandardized,
    #[error("solver stopped after {iterations} sweeps with max violation {max_violation:e}")]
    NonConvergence { iterations: usize, max_violation: f64 },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("invalid SVR configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid direction: {0}")]
    InvalidDirection(String),
    #[error("scalar step must be finite")]
    NonFiniteScalar,
    #[error(transparent)]
    Latent(#[from] LatentError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvrConfig {
    /// Half-width of the insensitive tube, in years.
    pub epsilon: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for SvrConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            c: 1.0,
            max_iterations: 10_000,
            tolerance: 1e-6,
        }
    }
}

impl SvrConfig {
    pub fn validate(&self) -> Result<(), DirectionError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.epsilon) || !positive(self.c) || !positive(self.tolerance) {
            return Err(DirectionError::InvalidConfig(
                "epsilon, C and tolerance must be positive and finite".into(),
            ));
        }
        if self.max_iterations == 0 {
            return Err(DirectionError::InvalidConfig(
                "max_iterations must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub n: usize,
    pub dim: usize,
    pub epsilon: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub iterations: usize,
    pub final_objective: f64,
    pub converged: bool,
    pub max_violation: f64,
}

/// Fitted hyperplane `age = bias + lambda_raw . w` and its unit direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeDirection {
    pub bias: f64,
    pub lambda_raw: Vec<f64>,
    pub lambda_hat: Vec<f64>,
    pub train_meta: TrainMeta,
}

impl AgeDirection {
    /// Builds a direction from hyperplane parameters, normalising `lambda_raw`.
    pub fn from_hyperplane(
        bias: f64,
        lambda_raw: Vec<f64>,
        train_meta: TrainMeta,
    ) -> Result<Self, DirectionError> {
        if !bias.is_finite() || lambda_raw.iter().any(|v| !v.is_finite()) {
            return Err(DirectionError::InvalidDirection(
                "non-finite hyperplane parameters".into(),
            ));
        }
        let len = norm(&lambda_raw);
        if len < 1e-10 {
            return Err(DirectionError::NoAgeSignal);
        }
        let lambda_hat = lambda_raw.iter().map(|v| v / len).collect();
        Ok(Self {
            bias,
            lambda_raw,
            lambda_hat,
            train_meta,
        })
    }

    pub fn dim(&self) -> usize {
        self.lambda_hat.len()
    }

    /// Checks the unit-norm and consistency invariants, e.g. after deserializing.
    pub fn validate(&self) -> Result<(), DirectionError> {
        if self.lambda_raw.len() != self.lambda_hat.len() {
            return Err(DirectionError::InvalidDirection(
                "lambda_raw and lambda_hat differ in length".into(),
            ));
        }
        let len = norm(&self.lambda_raw);
        if !(len > 0.0) || !len.is_finite() {
            return Err(DirectionError::InvalidDirection(
                "lambda_raw must have positive finite norm".into(),
            ));
        }
        if (norm(&self.lambda_hat) - 1.0).abs() > 1e-9 {
            return Err(DirectionError::InvalidDirection(
                "lambda_hat is not a unit vector".into(),
            ));
        }
        let consistent = self
            .lambda_raw
            .iter()
            .zip(&self.lambda_hat)
            .all(|(r, h)| (r / len - h).abs() <= 1e-9);
        if !consistent {
            return Err(DirectionError::InvalidDirection(
                "lambda_hat is not lambda_raw normalised".into(),
            ));
        }
        Ok(())
    }

    /// Turns an unconverged fit into an error.
    pub fn ensure_converged(&self) -> Result<(), DirectionError> {
        if self.train_meta.converged {
            Ok(())
        } else {
            Err(DirectionError::NonConvergence {
                iterations: self.train_meta.iterations,
                max_violation: self.train_meta.max_violation,
            })
        }
    }
}

/// Fits the age hyperplane on a standardized, age-labeled set.
///
/// A fit that exhausts `max_iterations` still returns the direction with
/// `train_meta.converged == false`; see [`AgeDirection::ensure_converged`].
pub fn fit_age_direction(
    set: &LabeledLatentSet,
    cfg: &SvrConfig,
) -> Result<AgeDirection, DirectionError> {
    cfg.validate()?;
    if !set.is_standardized() {
        return Err(DirectionError::NotStandardized);
    }
    if set.len() < 2 {
        return Err(DirectionError::TooFewSamples(set.len()));
    }
    let ages = set.ages()?;
    if ages.iter().all(|a| *a == ages[0]) {
        return Err(DirectionError::NoAgeSignal);
    }
    let params = svr::SvrParams {
        epsilon: cfg.epsilon,
        c: cfg.c,
        tolerance: cfg.tolerance,
        max_iterations: cfg.max_iterations,
    };
    let sol = svr::solve(set.vectors(), &ages, params);
    let final_objective = svr::primal_objective(set.vectors(), &ages, &sol.weights, sol.bias, params);
    let meta = TrainMeta {
        n: set.len(),
        dim: set.dim(),
        epsilon: cfg.epsilon,
        c: cfg.c,
        iterations: sol.iterations,
        final_objective,
        converged: sol.converged,
        max_violation: sol.max_violation,
    };
    AgeDirection::from_hyperplane(sol.bias, sol.weights, meta)
}

fn check_dim(expected: usize, actual: usize) -> Result<(), DirectionError> {
    if expected == actual {
        Ok(())
    } else {
        Err(DirectionError::DimensionMismatch { expected, actual })
    }
}

/// `bias + lambda_raw . w`, in years.
pub fn predict_age(dir: &AgeDirection, w: &[f64]) -> Result<f64, DirectionError> {
    check_dim(dir.dim(), w.len())?;
    Ok(dir.bias + dot(&dir.lambda_raw, w))
}

/// `w0 + s * lambda_hat`, one fused multiply-add per component.
pub fn edit_latent(
    w0: &[f64],
    s: f64,
    dir: &AgeDirection,
) -> Result<LatentVector, DirectionError> {
    check_dim(dir.dim(), w0.len())?;
    if !s.is_finite() {
        return Err(DirectionError::NonFiniteScalar);
    }
    let mut out = w0.to_vec();
    if s != 0.0 {
        for (o, h) in out.iter_mut().zip(&dir.lambda_hat) {
            *o = s.mul_add(*h, *o);
        }
    }
    Ok(LatentVector::new(out)?)
}

/// `w0 + phi ⊙ (s * lambda_hat)`. Components with zero weight are copied unchanged.
pub fn edit_latent_weighted(
    w0: &[f64],
    s: f64,
    dir: &AgeDirection,
    phi: &PhiWeights,
) -> Result<LatentVector, DirectionError> {
    let mut out = w0.to_vec();
    edit_weighted_in_place(&mut out, s, dir, phi)?;
    Ok(LatentVector::new(out)?)
}

/// In-place form of [`edit_latent_weighted`] for batch use.
pub fn edit_weighted_in_place(
    w: &mut [f64],
    s: f64,
    dir: &AgeDirection,
    phi: &PhiWeights,
) -> Result<(), DirectionError> {
    check_dim(dir.dim(), w.len())?;
    check_dim(dir.dim(), phi.weights.len())?;
    if !s.is_finite() {
        return Err(DirectionError::NonFiniteScalar);
    }
    if s == 0.0 {
        return Ok(());
    }
    for ((o, h), f) in w.iter_mut().zip(&dir.lambda_hat).zip(&phi.weights) {
        if *f != 0.0 {
            *o = (f * s).mul_add(*h, *o);
        }
    }
    Ok(())
}
