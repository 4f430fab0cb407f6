//! Latent vectors and labeled latent sets.

use std::collections::HashSet;
use std::ops::Deref;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::groups::AgeGroupScheme;
use crate::scaler::Scaler;

#[derive(Debug, Error)]
pub enum LatentError {
    #[error("bad magic bytes, not a latent file")]
    MagicMismatch,
    #[error("unsupported latent file version {0}")]
    UnsupportedVersion(u16),
    #[error("truncated payload: expected {expected} bytes, found {actual}")]
    TruncatedPayload { expected: usize, actual: usize },
    #[error("{extra} unexpected bytes after payload")]
    TrailingBytes { extra: usize },
    #[error("duplicate sample id {0:?}")]
    DuplicateSampleId(String),
    #[error("non-finite value at row {row}, component {col}")]
    NonFiniteValue { row: usize, col: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("metadata has {meta} rows but the latent file has {rows}")]
    MetadataCountMismatch { meta: usize, rows: usize },
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("sample {0:?} has no age label")]
    MissingAge(String),
    #[error("invalid age {age} for sample {sample_id:?}")]
    InvalidAge { sample_id: String, age: f64 },
    #[error("invalid age group scheme: {0}")]
    InvalidScheme(String),
    #[error("age group {group} of sample {sample_id:?} is not valid for the scheme")]
    InvalidGroup { sample_id: String, group: usize },
    #[error("invalid scaler: {0}")]
    InvalidScaler(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// A single point in the generator's latent space.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentVector(Vec<f64>);

impl LatentVector {
    pub fn new(components: Vec<f64>) -> Result<Self, LatentError> {
        if let Some(col) = components.iter().position(|v| !v.is_finite()) {
            return Err(LatentError::NonFiniteValue { row: 0, col });
        }
        Ok(Self(components))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for LatentVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Per-sample labels. Absent fields are written as empty CSV cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub sample_id: String,
    pub age_years: Option<f64>,
    pub identity_id: Option<String>,
    pub age_group: Option<usize>,
}

impl SampleMeta {
    pub fn new(sample_id: impl Into<String>) -> Self {
        Self {
            sample_id: sample_id.into(),
            age_years: None,
            identity_id: None,
            age_group: None,
        }
    }

    pub fn with_age(mut self, age: f64) -> Self {
        self.age_years = Some(age);
        self
    }

    pub fn with_identity(mut self, id: impl Into<String>) -> Self {
        self.identity_id = Some(id.into());
        self
    }

    pub fn with_group(mut self, group: usize) -> Self {
        self.age_group = Some(group);
        self
    }
}

/// An `n x dim` matrix of latents with one metadata entry per row.
///
/// A set is standardized exactly when it carries the [`Scaler`] that produced
/// it, so the flag and the scaler can never disagree.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledLatentSet {
    vectors: DMatrix<f64>,
    meta: Vec<SampleMeta>,
    scaler: Option<Scaler>,
}

impl LabeledLatentSet {
    pub fn new(vectors: DMatrix<f64>, meta: Vec<SampleMeta>) -> Result<Self, LatentError> {
        if vectors.nrows() != meta.len() {
            return Err(LatentError::MetadataCountMismatch {
                meta: meta.len(),
                rows: vectors.nrows(),
            });
        }
        for col in 0..vectors.ncols() {
            for row in 0..vectors.nrows() {
                if !vectors[(row, col)].is_finite() {
                    return Err(LatentError::NonFiniteValue { row, col });
                }
            }
        }
        let mut seen = HashSet::with_capacity(meta.len());
        for m in &meta {
            if !seen.insert(m.sample_id.as_str()) {
                return Err(LatentError::DuplicateSampleId(m.sample_id.clone()));
            }
            if let Some(age) = m.age_years {
                if !age.is_finite() || age < 0.0 {
                    return Err(LatentError::InvalidAge {
                        sample_id: m.sample_id.clone(),
                        age,
                    });
                }
            }
        }
        Ok(Self {
            vectors,
            meta,
            scaler: None,
        })
    }

    /// Builds a set from row vectors; sample ids default to the row index.
    pub fn from_rows(dim: usize, rows: &[Vec<f64>]) -> Result<Self, LatentError> {
        let meta = (0..rows.len()).map(|i| SampleMeta::new(i.to_string())).collect();
        Self::from_rows_with_meta(dim, rows, meta)
    }

    pub fn from_rows_with_meta(
        dim: usize,
        rows: &[Vec<f64>],
        meta: Vec<SampleMeta>,
    ) -> Result<Self, LatentError> {
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != dim) {
            return Err(LatentError::ShapeMismatch(format!(
                "row {i} has {} components, expected {dim}",
                r.len()
            )));
        }
        let vectors = DMatrix::from_fn(rows.len(), dim, |i, j| rows[i][j]);
        Self::new(vectors, meta)
    }

    /// Marks the set as living in the standardized space of `scaler`.
    pub fn with_scaler(mut self, scaler: Scaler) -> Result<Self, LatentError> {
        if scaler.dim() != self.dim() {
            return Err(LatentError::ShapeMismatch(format!(
                "scaler has dim {}, set has dim {}",
                scaler.dim(),
                self.dim()
            )));
        }
        self.scaler = Some(scaler);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn len(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn meta(&self) -> &[SampleMeta] {
        &self.meta
    }

    pub fn scaler(&self) -> Option<&Scaler> {
        self.scaler.as_ref()
    }

    pub fn is_standardized(&self) -> bool {
        self.scaler.is_some()
    }

    pub fn row(&self, i: usize) -> LatentVector {
        LatentVector(self.vectors.row(i).iter().copied().collect())
    }

    pub fn rows(&self) -> impl Iterator<Item = LatentVector> + '_ {
        (0..self.len()).map(|i| self.row(i))
    }

    /// Ages of all samples, failing on the first unlabeled one.
    pub fn ages(&self) -> Result<Vec<f64>, LatentError> {
        self.meta
            .iter()
            .map(|m| {
                m.age_years
                    .ok_or_else(|| LatentError::MissingAge(m.sample_id.clone()))
            })
            .collect()
    }

    /// Checks that every present age group is valid under `scheme`.
    pub fn validate_groups(&self, scheme: &AgeGroupScheme) -> Result<(), LatentError> {
        for m in &self.meta {
            if let Some(group) = m.age_group {
                if group >= scheme.len() {
                    return Err(LatentError::InvalidGroup {
                        sample_id: m.sample_id.clone(),
                        group,
                    });
                }
            }
        }
        Ok(())
    }

    pub(crate) fn replace_vectors(&self, vectors: DMatrix<f64>, scaler: Option<Scaler>) -> Self {
        debug_assert_eq!(vectors.nrows(), self.len());
        Self {
            vectors,
            meta: self.meta.clone(),
            scaler,
        }
    }

    pub(crate) fn replace_meta(&self, meta: Vec<SampleMeta>) -> Self {
        Self {
            vectors: self.vectors.clone(),
            meta,
            scaler: self.scaler.clone(),
        }
    }
}
