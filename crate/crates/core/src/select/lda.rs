use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::distance::{component_distances, DistanceMetric, DistanceProfile};
use super::mask::{threshold_mask, ComponentMask, MaskProvenance};
use super::pca::cumulative_selection;
use super::{check_threshold, SelectError};
use crate::latent::LabeledLatentSet;
use crate::linalg::{pseudo_inverse, sort_eigenpairs, symmetrize};

/// Which metadata field provides the LDA classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassLabel {
    Identity,
    AgeGroup,
}

/// Discriminant basis with a reduced copy and its pseudoinverse.
///
/// Column `k` of `basis` is the unit-norm eigenvector of
/// `(S_w + gamma I)^-1 S_b` with the `k`-th largest eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct LdaBasis {
    pub eigenvalues: Vec<f64>,
    pub basis: DMatrix<f64>,
    pub reduced: DMatrix<f64>,
    pub pseudo_inverse: DMatrix<f64>,
    pub retained: usize,
    pub gamma: f64,
    pub classes: usize,
}

impl LdaBasis {
    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }
}

/// LDA basis of a standardized set using identity or age-group labels.
pub fn lda_basis(set: &LabeledLatentSet, label: ClassLabel) -> Result<LdaBasis, SelectError> {
    if !set.is_standardized() {
        return Err(SelectError::NotStandardized);
    }
    match label {
        ClassLabel::Identity => {
            let labels = set
                .meta()
                .iter()
                .map(|m| {
                    m.identity_id
                        .clone()
                        .ok_or_else(|| SelectError::MissingLabel(m.sample_id.clone()))
                })
                .collect::<Result<Vec<_>, _>>()?;
            lda_basis_from_labels(set.vectors(), &labels)
        }
        ClassLabel::AgeGroup => {
            let labels = set
                .meta()
                .iter()
                .map(|m| {
                    m.age_group
                        .ok_or_else(|| SelectError::MissingLabel(m.sample_id.clone()))
                })
                .collect::<Result<Vec<_>, _>>()?;
            lda_basis_from_labels(set.vectors(), &labels)
        }
    }
}

/// Within-class and between-class scatter of the rows of `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scatter {
    pub within: DMatrix<f64>,
    pub between: DMatrix<f64>,
    pub classes: usize,
}

/// Unnormalised scatter matrices: `S_w = sum_c sum_i (v_i - m_c)(v_i - m_c)^T`,
/// `S_b = sum_c n_c (m_c - m)(m_c - m)^T`.
pub fn scatter_matrices<L: Ord>(v: &DMatrix<f64>, labels: &[L]) -> Result<Scatter, SelectError> {
    let (n, dim) = v.shape();
    if labels.len() != n {
        return Err(SelectError::DimensionMismatch {
            expected: n,
            actual: labels.len(),
        });
    }
    let mut classes: BTreeMap<&L, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        classes.entry(l).or_default().push(i);
    }
    if classes.len() < 2 {
        return Err(SelectError::SingleClass);
    }

    let overall = DVector::from_iterator(dim, v.column_iter().map(|c| c.sum() / n as f64));
    let mut within = DMatrix::zeros(n, dim);
    let mut between = DMatrix::zeros(classes.len(), dim);
    for (k, rows) in classes.values().enumerate() {
        let mut mean = DVector::zeros(dim);
        for &i in rows {
            mean += v.row(i).transpose();
        }
        mean /= rows.len() as f64;
        for &i in rows {
            for j in 0..dim {
                within[(i, j)] = v[(i, j)] - mean[j];
            }
        }
        let w = (rows.len() as f64).sqrt();
        for j in 0..dim {
            between[(k, j)] = w * (mean[j] - overall[j]);
        }
    }
    let mut s_w = within.tr_mul(&within);
    let mut s_b = between.tr_mul(&between);
    symmetrize(&mut s_w);
    symmetrize(&mut s_b);
    Ok(Scatter {
        within: s_w,
        between: s_b,
        classes: classes.len(),
    })
}

/// LDA basis of the rows of `v` under arbitrary class labels.
pub fn lda_basis_from_labels<L: Ord>(v: &DMatrix<f64>, labels: &[L]) -> Result<LdaBasis, SelectError> {
    let dim = v.ncols();
    let Scatter {
        within: s_w,
        between: s_b,
        classes,
    } = scatter_matrices(v, labels)?;

    let trace_w = s_w.trace();
    let trace_b = s_b.trace();
    if !(trace_b > 1e-12 * (trace_w + trace_b)) {
        return Err(SelectError::DegenerateScatter(
            "between-class scatter vanishes (class means coincide)".into(),
        ));
    }
    let mut gamma = 1e-6 * trace_w / dim as f64;
    if gamma <= 0.0 {
        // every class is a single point; shrink relative to the between scatter
        gamma = 1e-6 * trace_b / dim as f64;
    }

    let mut regularized = s_w;
    for i in 0..dim {
        regularized[(i, i)] += gamma;
    }
    let chol = regularized.cholesky().ok_or_else(|| {
        SelectError::DegenerateScatter("regularized within-class scatter is not positive definite".into())
    })?;
    let l = chol.l();
    // C = L^-1 S_b L^-T is symmetric with the same spectrum as (S_w + gamma I)^-1 S_b
    let m = l
        .solve_lower_triangular(&s_b)
        .ok_or_else(|| SelectError::DegenerateScatter("triangular solve failed".into()))?;
    let mut c = l
        .solve_lower_triangular(&m.transpose())
        .ok_or_else(|| SelectError::DegenerateScatter("triangular solve failed".into()))?;
    symmetrize(&mut c);
    let eig = c.symmetric_eigen();
    let mut vectors = l
        .transpose()
        .solve_upper_triangular(&eig.eigenvectors)
        .ok_or_else(|| SelectError::DegenerateScatter("triangular solve failed".into()))?;
    for mut col in vectors.column_iter_mut() {
        let len = col.norm();
        if len > 0.0 {
            col /= len;
        }
    }
    let values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    if values.iter().any(|e| !e.is_finite()) {
        return Err(SelectError::DegenerateScatter("non-finite eigenvalue".into()));
    }
    let (eigenvalues, basis) = sort_eigenpairs(&values, &vectors);
    let pinv = pseudo_inverse(&basis);
    Ok(LdaBasis {
        eigenvalues,
        reduced: basis.clone(),
        basis,
        pseudo_inverse: pinv,
        retained: dim,
        gamma,
        classes,
    })
}

/// Zeroes the basis columns beyond the cumulative-discriminability cut.
pub fn reduce_basis(basis: &LdaBasis, discriminability_threshold: f64) -> Result<LdaBasis, SelectError> {
    check_threshold(discriminability_threshold)?;
    let eigenvalues: Vec<f64> = basis.eigenvalues.iter().map(|e| e.max(0.0)).collect();
    let retained = cumulative_selection(&eigenvalues, discriminability_threshold);
    let mut reduced = basis.basis.clone();
    for k in retained..reduced.ncols() {
        reduced.column_mut(k).fill(0.0);
    }
    let pinv = pseudo_inverse(&reduced);
    Ok(LdaBasis {
        eigenvalues,
        basis: basis.basis.clone(),
        reduced,
        pseudo_inverse: pinv,
        retained,
        gamma: basis.gamma,
        classes: basis.classes,
    })
}

/// `V* = (V · P_reduced) · P_reduced⁺`.
pub fn reconstruct(v: &DMatrix<f64>, basis: &LdaBasis) -> Result<DMatrix<f64>, SelectError> {
    if v.ncols() != basis.dim() {
        return Err(SelectError::DimensionMismatch {
            expected: basis.dim(),
            actual: v.ncols(),
        });
    }
    Ok((v * &basis.reduced) * &basis.pseudo_inverse)
}

/// Component mask of a standardized set from LDA reconstruction distances.
///
/// Identity labels give an identity mask, age-group labels an age mask.
pub fn lda_mask(
    set: &LabeledLatentSet,
    label: ClassLabel,
    discriminability_threshold: f64,
    metric: DistanceMetric,
) -> Result<(ComponentMask, DistanceProfile, LdaBasis), SelectError> {
    let full = lda_basis(set, label)?;
    let basis = reduce_basis(&full, discriminability_threshold)?;
    let v_star = reconstruct(set.vectors(), &basis)?;
    let profile = component_distances(set.vectors(), &v_star, metric)?;
    let provenance = match label {
        ClassLabel::Identity => MaskProvenance::LdaId,
        ClassLabel::AgeGroup => MaskProvenance::LdaAge,
    };
    Ok((threshold_mask(&profile, provenance), profile, basis))
}
