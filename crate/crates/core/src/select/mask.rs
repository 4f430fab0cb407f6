use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::distance::{DistanceMetric, DistanceProfile};
use super::SelectError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MaskProvenance {
    PcaId,
    LdaId,
    LdaAge,
    CombinedAgeOnly,
    CombinedIdOnly,
    CombinedBoth,
}

/// Binary selection over latent components, serialized as 0/1 integers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentMask {
    #[serde(serialize_with = "bits_out", deserialize_with = "bits_in")]
    pub bits: Vec<bool>,
    pub provenance: MaskProvenance,
    pub metric: Option<DistanceMetric>,
    /// Selection thresholds that produced the mask, by name.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub thresholds: BTreeMap<String, f64>,
}

fn bits_out<S: Serializer>(bits: &[bool], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(bits.iter().map(|b| u8::from(*b)))
}

fn bits_in<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<bool>, D::Error> {
    let raw = Vec::<u8>::deserialize(d)?;
    raw.into_iter()
        .map(|b| match b {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(serde::de::Error::custom(format!(
                "mask entries must be 0 or 1, found {other}"
            ))),
        })
        .collect()
}

impl ComponentMask {
    pub fn new(bits: Vec<bool>, provenance: MaskProvenance, metric: Option<DistanceMetric>) -> Self {
        Self {
            bits,
            provenance,
            metric,
            thresholds: BTreeMap::new(),
        }
    }

    pub fn zeros(dim: usize, provenance: MaskProvenance) -> Self {
        Self::new(vec![false; dim], provenance, None)
    }

    pub fn dim(&self) -> usize {
        self.bits.len()
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn indices(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, b)| b.then_some(i))
            .collect()
    }
}

/// Non-negative per-component edit weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiWeights {
    pub weights: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub sources: Vec<MaskProvenance>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub thresholds: BTreeMap<String, f64>,
}

impl PhiWeights {
    /// Equal weights on every component: the unconstrained linear edit.
    pub fn ones(dim: usize) -> Self {
        Self {
            weights: vec![1.0; dim],
            alpha: 1.0,
            beta: 1.0,
            sources: Vec::new(),
            thresholds: BTreeMap::new(),
        }
    }

    pub fn from_weights(weights: Vec<f64>) -> Result<Self, SelectError> {
        let phi = Self {
            weights,
            alpha: 1.0,
            beta: 1.0,
            sources: Vec::new(),
            thresholds: BTreeMap::new(),
        };
        phi.validate()?;
        Ok(phi)
    }

    /// Uses a single mask as weights (e.g. the PCA identity mask).
    pub fn from_mask(mask: &ComponentMask) -> Self {
        Self {
            weights: mask.bits.iter().map(|b| if *b { 1.0 } else { 0.0 }).collect(),
            alpha: 1.0,
            beta: 0.0,
            sources: vec![mask.provenance],
            thresholds: mask.thresholds.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn validate(&self) -> Result<(), SelectError> {
        if let Some(i) = self.weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
            return Err(SelectError::InvalidWeight(format!(
                "component {i} has weight {}",
                self.weights[i]
            )));
        }
        Ok(())
    }
}

/// Selects components by comparing each distance with the profile mean.
///
/// MSE and Wasserstein keep `psi_i < mu`; covariance keeps `psi_i > mu`. Ties
/// are excluded.
pub fn threshold_mask(profile: &DistanceProfile, provenance: MaskProvenance) -> ComponentMask {
    let mu = profile.mu_psi;
    let bits = profile
        .psi
        .iter()
        .map(|&p| match profile.metric {
            DistanceMetric::Mse | DistanceMetric::Wasserstein => p < mu,
            DistanceMetric::Covariance => p > mu,
        })
        .collect();
    ComponentMask::new(bits, provenance, Some(profile.metric))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskTriple {
    pub age_only: ComponentMask,
    pub id_only: ComponentMask,
    pub both: ComponentMask,
}

/// Splits identity and age masks into age-only, identity-only and shared parts.
pub fn combine_masks(
    id_star: &ComponentMask,
    age_star: &ComponentMask,
) -> Result<MaskTriple, SelectError> {
    if id_star.dim() != age_star.dim() {
        return Err(SelectError::DimensionMismatch {
            expected: id_star.dim(),
            actual: age_star.dim(),
        });
    }
    let metric = age_star.metric.or(id_star.metric);
    let pairs = || id_star.bits.iter().zip(&age_star.bits);
    Ok(MaskTriple {
        age_only: ComponentMask::new(
            pairs().map(|(i, a)| *a && !*i).collect(),
            MaskProvenance::CombinedAgeOnly,
            metric,
        ),
        id_only: ComponentMask::new(
            pairs().map(|(i, a)| *i && !*a).collect(),
            MaskProvenance::CombinedIdOnly,
            metric,
        ),
        both: ComponentMask::new(
            pairs().map(|(i, a)| *i && *a).collect(),
            MaskProvenance::CombinedBoth,
            metric,
        ),
    })
}

/// `phi = alpha * age_only + beta * both` over disjoint masks.
pub fn compose_phi(
    age_only: &ComponentMask,
    both: &ComponentMask,
    alpha: f64,
    beta: f64,
) -> Result<PhiWeights, SelectError> {
    if age_only.dim() != both.dim() {
        return Err(SelectError::DimensionMismatch {
            expected: age_only.dim(),
            actual: both.dim(),
        });
    }
    for (name, v) in [("alpha", alpha), ("beta", beta)] {
        if !v.is_finite() || v < 0.0 {
            return Err(SelectError::InvalidWeight(format!(
                "{name} must be finite and non-negative, got {v}"
            )));
        }
    }
    if let Some(i) = age_only
        .bits
        .iter()
        .zip(&both.bits)
        .position(|(a, b)| *a && *b)
    {
        return Err(SelectError::OverlappingMasks(i));
    }
    let weights = age_only
        .bits
        .iter()
        .zip(&both.bits)
        .map(|(a, b)| {
            if *a {
                alpha
            } else if *b {
                beta
            } else {
                0.0
            }
        })
        .collect();
    Ok(PhiWeights {
        weights,
        alpha,
        beta,
        sources: vec![age_only.provenance, both.provenance],
        thresholds: BTreeMap::new(),
    })
}
