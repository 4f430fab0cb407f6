//! Per-component standardization.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::latent::{LabeledLatentSet, LatentError};

pub const DEFAULT_STD_EPSILON: f64 = 1e-12;

fn population() -> String {
    "population".to_string()
}

/// Column means and population standard deviations of a latent matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub epsilon: f64,
    #[serde(default = "population")]
    pub std_convention: String,
}

impl Scaler {
    /// Fits statistics over the rows of every matrix in `parts` jointly.
    pub fn fit(parts: &[&DMatrix<f64>], epsilon: f64) -> Result<Self, LatentError> {
        let dim = parts.first().map_or(0, |m| m.ncols());
        if parts.iter().any(|m| m.ncols() != dim) {
            return Err(LatentError::ShapeMismatch(
                "matrices to standardize jointly differ in dimension".into(),
            ));
        }
        let n: usize = parts.iter().map(|m| m.nrows()).sum();
        if n < 2 {
            return Err(LatentError::TooFewSamples(n));
        }
        let nf = n as f64;
        let mut mean = vec![0.0; dim];
        let mut std = vec![0.0; dim];
        for (j, (mu, sd)) in mean.iter_mut().zip(std.iter_mut()).enumerate() {
            let sum: f64 = parts.iter().map(|m| m.column(j).sum()).sum();
            *mu = sum / nf;
            let ss: f64 = parts
                .iter()
                .map(|m| m.column(j).iter().map(|v| (v - *mu) * (v - *mu)).sum::<f64>())
                .sum();
            *sd = (ss / nf).sqrt().max(epsilon);
        }
        Ok(Self {
            mean,
            std,
            epsilon,
            std_convention: population(),
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn validate(&self) -> Result<(), LatentError> {
        if self.mean.len() != self.std.len() {
            return Err(LatentError::InvalidScaler(
                "mean and std lengths differ".into(),
            ));
        }
        if !(self.epsilon > 0.0) {
            return Err(LatentError::InvalidScaler("epsilon must be positive".into()));
        }
        if self.mean.iter().any(|v| !v.is_finite()) {
            return Err(LatentError::InvalidScaler("non-finite mean".into()));
        }
        if self.std.iter().any(|v| !v.is_finite() || *v < self.epsilon) {
            return Err(LatentError::InvalidScaler(
                "std entries must be finite and at least epsilon".into(),
            ));
        }
        Ok(())
    }

    pub fn transform(&self, m: &DMatrix<f64>) -> Result<DMatrix<f64>, LatentError> {
        self.check_dim(m)?;
        Ok(DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
            (m[(i, j)] - self.mean[j]) / self.std[j]
        }))
    }

    pub fn inverse_transform(&self, m: &DMatrix<f64>) -> Result<DMatrix<f64>, LatentError> {
        self.check_dim(m)?;
        Ok(DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
            m[(i, j)].mul_add(self.std[j], self.mean[j])
        }))
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (mu, sd))| (v - mu) / sd)
            .collect()
    }

    pub fn inverse_transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (mu, sd))| v.mul_add(*sd, *mu))
            .collect()
    }

    fn check_dim(&self, m: &DMatrix<f64>) -> Result<(), LatentError> {
        if m.ncols() != self.dim() {
            return Err(LatentError::ShapeMismatch(format!(
                "scaler has dim {}, matrix has {} columns",
                self.dim(),
                m.ncols()
            )));
        }
        Ok(())
    }
}

/// Standardizes a set with its own statistics.
pub fn standardize(set: &LabeledLatentSet) -> Result<(LabeledLatentSet, Scaler), LatentError> {
    let scaler = Scaler::fit(&[set.vectors()], DEFAULT_STD_EPSILON)?;
    let out = apply_scaler(set, &scaler)?;
    Ok((out, scaler))
}

/// Standardizes several sets with statistics pooled over all of them.
pub fn standardize_jointly(
    sets: &[&LabeledLatentSet],
) -> Result<(Vec<LabeledLatentSet>, Scaler), LatentError> {
    let parts: Vec<_> = sets.iter().map(|s| s.vectors()).collect();
    let scaler = Scaler::fit(&parts, DEFAULT_STD_EPSILON)?;
    let out = sets
        .iter()
        .map(|s| apply_scaler(s, &scaler))
        .collect::<Result<_, _>>()?;
    Ok((out, scaler))
}

/// Maps a raw set into the standardized space of an existing scaler.
pub fn apply_scaler(set: &LabeledLatentSet, scaler: &Scaler) -> Result<LabeledLatentSet, LatentError> {
    let v = scaler.transform(set.vectors())?;
    Ok(set.replace_vectors(v, Some(scaler.clone())))
}
