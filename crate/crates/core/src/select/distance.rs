use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SelectError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DistanceMetric {
    Mse,
    Wasserstein,
    Covariance,
}

impl DistanceMetric {
    pub const ALL: [DistanceMetric; 3] = [Self::Mse, Self::Wasserstein, Self::Covariance];

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mse" => Some(Self::Mse),
            "wasserstein" | "w1" => Some(Self::Wasserstein),
            "covariance" | "cov" => Some(Self::Covariance),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Mse => "mse",
            Self::Wasserstein => "wasserstein",
            Self::Covariance => "covariance",
        }
    }
}

/// Per-component distances between latents and their reconstructions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceProfile {
    pub psi: Vec<f64>,
    pub metric: DistanceMetric,
    pub mu_psi: f64,
}

impl DistanceProfile {
    pub fn new(psi: Vec<f64>, metric: DistanceMetric) -> Self {
        let mu_psi = if psi.is_empty() {
            0.0
        } else {
            psi.iter().sum::<f64>() / psi.len() as f64
        };
        Self {
            psi,
            metric,
            mu_psi,
        }
    }
}

/// Empirical 1-D Wasserstein-1 distance between two equal-size samples.
///
/// Both samples are sorted and matched in order, so the result is the mean
/// absolute difference of order statistics.
pub fn wasserstein_1d(u: &[f64], v: &[f64]) -> f64 {
    assert_eq!(u.len(), v.len(), "samples must have equal size");
    if u.is_empty() {
        return 0.0;
    }
    let mut a = u.to_vec();
    let mut b = v.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

fn mse(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / u.len() as f64
}

fn population_covariance(u: &[f64], v: &[f64]) -> f64 {
    let n = u.len() as f64;
    let mu = u.iter().sum::<f64>() / n;
    let mv = v.iter().sum::<f64>() / n;
    u.iter().zip(v).map(|(x, y)| (x - mu) * (y - mv)).sum::<f64>() / n
}

/// Computes `psi_i = metric(V[:, i], V*[:, i])` for every component.
pub fn component_distances(
    v: &DMatrix<f64>,
    v_star: &DMatrix<f64>,
    metric: DistanceMetric,
) -> Result<DistanceProfile, SelectError> {
    if v.shape() != v_star.shape() {
        return Err(SelectError::ShapeMismatch(v.shape(), v_star.shape()));
    }
    if v.nrows() == 0 {
        return Err(SelectError::TooFewSamples(0));
    }
    let psi: Vec<f64> = (0..v.ncols())
        .into_par_iter()
        .map(|j| {
            let a = v.column(j);
            let b = v_star.column(j);
            let (a, b) = (a.as_slice(), b.as_slice());
            match metric {
                DistanceMetric::Mse => mse(a, b),
                DistanceMetric::Wasserstein => wasserstein_1d(a, b),
                DistanceMetric::Covariance => population_covariance(a, b),
            }
        })
        .collect();
    Ok(DistanceProfile::new(psi, metric))
}
