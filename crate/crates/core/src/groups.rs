//! Age-group binning.

use serde::{Deserialize, Serialize};

use crate::latent::{LabeledLatentSet, LatentError};

/// Half-open age bins `[lo, hi)` covering `[0, inf)`.
///
/// `k` strictly increasing boundaries define `k + 1` groups; a boundary age
/// belongs to the upper bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeGroupScheme {
    pub name: String,
    pub boundaries: Vec<f64>,
    pub labels: Vec<String>,
}

impl AgeGroupScheme {
    pub fn new(name: impl Into<String>, boundaries: Vec<f64>) -> Result<Self, LatentError> {
        let labels = default_labels(&boundaries);
        Self::with_labels(name, boundaries, labels)
    }

    pub fn with_labels(
        name: impl Into<String>,
        boundaries: Vec<f64>,
        labels: Vec<String>,
    ) -> Result<Self, LatentError> {
        let scheme = Self {
            name: name.into(),
            boundaries,
            labels,
        };
        scheme.validate()?;
        Ok(scheme)
    }

    /// Nine groups: <8, [8,13), [13,18), [18,25), [25,35), [35,45), [45,55), [55,65), >=65.
    pub fn nine() -> Self {
        let labels = ["<8", "8-13", "13-18", "18-25", "25-35", "35-45", "45-55", "55-65", ">65"];
        Self {
            name: "nine".into(),
            boundaries: vec![8.0, 13.0, 18.0, 25.0, 35.0, 45.0, 55.0, 65.0],
            labels: labels.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Four groups: children <18, young adults [18,35), middle aged [35,65), senior >=65.
    pub fn four() -> Self {
        let labels = ["children", "young adults", "middle aged", "senior"];
        Self {
            name: "four".into(),
            boundaries: vec![18.0, 35.0, 65.0],
            labels: labels.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Resolves `nine`, `four`, or a comma-separated boundary list such as `18,35,65`.
    pub fn parse(spec: &str) -> Result<Self, LatentError> {
        match spec.trim().to_ascii_lowercase().as_str() {
            "nine" | "9" => Ok(Self::nine()),
            "four" | "4" => Ok(Self::four()),
            other => {
                let boundaries = other
                    .split(',')
                    .map(|t| {
                        t.trim().parse::<f64>().map_err(|_| {
                            LatentError::InvalidScheme(format!("bad boundary {t:?} in {spec:?}"))
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Self::new(format!("custom:{other}"), boundaries)
            }
        }
    }

    pub fn validate(&self) -> Result<(), LatentError> {
        if self.boundaries.iter().any(|b| !b.is_finite() || *b <= 0.0) {
            return Err(LatentError::InvalidScheme(
                "boundaries must be finite and positive".into(),
            ));
        }
        if self.boundaries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(LatentError::InvalidScheme(
                "boundaries must be strictly increasing".into(),
            ));
        }
        if self.labels.len() != self.boundaries.len() + 1 {
            return Err(LatentError::InvalidScheme(format!(
                "{} labels for {} groups",
                self.labels.len(),
                self.boundaries.len() + 1
            )));
        }
        Ok(())
    }

    /// Number of groups.
    pub fn len(&self) -> usize {
        self.boundaries.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn group_of(&self, age: f64) -> Result<usize, LatentError> {
        if !age.is_finite() || age < 0.0 {
            return Err(LatentError::InvalidAge {
                sample_id: String::new(),
                age,
            });
        }
        Ok(self.boundaries.partition_point(|b| *b <= age))
    }

    pub fn label(&self, group: usize) -> Option<&str> {
        self.labels.get(group).map(String::as_str)
    }

    /// `[lo, hi)` bounds of a group; the last group is unbounded above.
    pub fn bounds(&self, group: usize) -> Option<(f64, f64)> {
        if group >= self.len() {
            return None;
        }
        let lo = if group == 0 { 0.0 } else { self.boundaries[group - 1] };
        let hi = self.boundaries.get(group).copied().unwrap_or(f64::INFINITY);
        Some((lo, hi))
    }
}

fn default_labels(boundaries: &[f64]) -> Vec<String> {
    let mut labels = Vec::with_capacity(boundaries.len() + 1);
    if let Some(first) = boundaries.first() {
        labels.push(format!("<{first}"));
        for w in boundaries.windows(2) {
            labels.push(format!("{}-{}", w[0], w[1]));
        }
        labels.push(format!(">={}", boundaries[boundaries.len() - 1]));
    } else {
        labels.push("all".into());
    }
    labels
}

/// Sets every sample's group from its age label.
pub fn assign_groups(
    set: &LabeledLatentSet,
    scheme: &AgeGroupScheme,
) -> Result<LabeledLatentSet, LatentError> {
    let meta = set
        .meta()
        .iter()
        .map(|m| {
            let age = m
                .age_years
                .ok_or_else(|| LatentError::MissingAge(m.sample_id.clone()))?;
            let group = scheme.group_of(age).map_err(|_| LatentError::InvalidAge {
                sample_id: m.sample_id.clone(),
                age,
            })?;
            Ok(m.clone().with_group(group))
        })
        .collect::<Result<Vec<_>, LatentError>>()?;
    Ok(set.replace_meta(meta))
}

/// Count of samples per group.
pub fn group_histogram(set: &LabeledLatentSet, scheme: &AgeGroupScheme) -> Vec<usize> {
    let mut counts = vec![0; scheme.len()];
    for g in set.meta().iter().filter_map(|m| m.age_group) {
        if let Some(c) = counts.get_mut(g) {
            *c += 1;
        }
    }
    counts
}
