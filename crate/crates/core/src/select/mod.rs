//! Latent component selection.
//!
//! Masks mark components relevant to identity or age. They come from a PCA
//! variance cut on identity-labeled latents, or from LDA projection and
//! pseudoinverse reconstruction followed by a per-component distance
//! threshold. Masks are combined with boolean algebra and turned into the
//! per-component edit weights `phi = alpha * age_only + beta * both`.

mod distance;
mod lda;
mod mask;
mod pca;

pub use distance::{component_distances, wasserstein_1d, DistanceMetric, DistanceProfile};
pub use lda::{
    lda_basis, lda_basis_from_labels, lda_mask, reconstruct, reduce_basis, scatter_matrices,
    ClassLabel, LdaBasis, Scatter,
};
pub use mask::{
    combine_masks, compose_phi, threshold_mask, ComponentMask, MaskProvenance, MaskTriple,
    PhiWeights,
};
pub use pca::{
    cumulative_selection, pca_mask, pca_mask_with, pca_select, PcaMaskMode, PcaSelection,
};

use thiserror::Error;

use crate::latent::LatentError;

#[derive(Debug, Error)]
pub enum SelectError {
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("latent set must be standardized")]
    NotStandardized,
    #[error("LDA needs at least two classes")]
    SingleClass,
    #[error("degenerate scatter: {0}")]
    DegenerateScatter(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("shape mismatch: {0:?} vs {1:?}")]
    ShapeMismatch((usize, usize), (usize, usize)),
    #[error("masks overlap at component {0}")]
    OverlappingMasks(usize),
    #[error("threshold {0} outside (0, 1]")]
    InvalidThreshold(f64),
    #[error("invalid weight: {0}")]
    InvalidWeight(String),
    #[error("sample {0:?} has no class label")]
    MissingLabel(String),
    #[error(transparent)]
    Latent(#[from] LatentError),
}

pub(crate) fn check_threshold(t: f64) -> Result<(), SelectError> {
    if t.is_finite() && t > 0.0 && t <= 1.0 {
        Ok(())
    } else {
        Err(SelectError::InvalidThreshold(t))
    }
}
