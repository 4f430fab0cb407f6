use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::distance::{component_distances, DistanceMetric};
use super::mask::{threshold_mask, ComponentMask, MaskProvenance};
use super::{check_threshold, SelectError};
use crate::latent::LabeledLatentSet;
use crate::linalg::{covariance, symmetric_eigen_sorted};

/// How retained principal components become a latent-component mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PcaMaskMode {
    /// Eigen-rank `k` marks latent component `k`.
    RankIndex,
    /// Reconstruct from the retained components and threshold per-component distances.
    Reconstruction(DistanceMetric),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaSelection {
    /// Covariance eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    pub retained: usize,
    pub mask: ComponentMask,
}

/// Number of leading eigenvalues whose cumulative share first reaches `threshold`.
///
/// Negative eigenvalues count as zero. A threshold of 1 keeps every component,
/// including trailing null directions.
pub fn cumulative_selection(eigenvalues_desc: &[f64], threshold: f64) -> usize {
    let n = eigenvalues_desc.len();
    let total: f64 = eigenvalues_desc.iter().map(|e| e.max(0.0)).sum();
    if threshold >= 1.0 || !(total > 0.0) {
        return n;
    }
    let mut acc = 0.0;
    for (k, e) in eigenvalues_desc.iter().enumerate() {
        acc += e.max(0.0);
        if acc / total >= threshold {
            return k + 1;
        }
    }
    n
}

/// PCA selection on a raw matrix; callers are responsible for standardization.
pub fn pca_select(
    v: &DMatrix<f64>,
    variance_threshold: f64,
    mode: PcaMaskMode,
) -> Result<PcaSelection, SelectError> {
    check_threshold(variance_threshold)?;
    if v.nrows() < 2 {
        return Err(SelectError::TooFewSamples(v.nrows()));
    }
    let dim = v.ncols();
    let (eigenvalues, vectors) = symmetric_eigen_sorted(covariance(v));
    let retained = cumulative_selection(&eigenvalues, variance_threshold);
    let mask = match mode {
        PcaMaskMode::RankIndex => ComponentMask::new(
            (0..dim).map(|i| i < retained).collect(),
            MaskProvenance::PcaId,
            None,
        ),
        PcaMaskMode::Reconstruction(metric) => {
            let kept = vectors.columns(0, retained);
            // orthonormal basis: the pseudoinverse is the transpose
            let v_star = (v * kept) * kept.transpose();
            let profile = component_distances(v, &v_star, metric)?;
            threshold_mask(&profile, MaskProvenance::PcaId)
        }
    };
    Ok(PcaSelection {
        eigenvalues,
        retained,
        mask,
    })
}

/// Identity-relevant components of a standardized set by explained variance.
pub fn pca_mask(
    v_id: &LabeledLatentSet,
    variance_threshold: f64,
) -> Result<ComponentMask, SelectError> {
    pca_mask_with(v_id, variance_threshold, PcaMaskMode::RankIndex)
}

pub fn pca_mask_with(
    v_id: &LabeledLatentSet,
    variance_threshold: f64,
    mode: PcaMaskMode,
) -> Result<ComponentMask, SelectError> {
    if !v_id.is_standardized() {
        return Err(SelectError::NotStandardized);
    }
    Ok(pca_select(v_id.vectors(), variance_threshold, mode)?.mask)
}
