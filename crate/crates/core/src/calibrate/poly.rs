//! Dense real polynomials: least-squares fitting and root finding.

use nalgebra::{Complex, DMatrix, DVector};

/// Coefficients in ascending degree: `c[0] + c[1] s + ... + c[d] s^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitFailure {
    TooFewDistinct { distinct: usize, needed: usize },
    RankDeficient,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty(), "a polynomial needs at least one coefficient");
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc.mul_add(s, *c))
    }

    pub fn derivative(&self) -> Polynomial {
        if self.coeffs.len() == 1 {
            return Polynomial::new(vec![0.0]);
        }
        Polynomial::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| k as f64 * c)
                .collect(),
        )
    }

    /// `self - value`.
    pub fn shifted(&self, value: f64) -> Polynomial {
        let mut c = self.coeffs.clone();
        c[0] -= value;
        Polynomial::new(c)
    }

    /// All complex roots, via the eigenvalues of the companion matrix.
    ///
    /// Leading coefficients that are negligible relative to the largest one
    /// are dropped first, so a numerically lower-degree polynomial is solved
    /// at its true degree.
    pub fn roots(&self) -> Vec<Complex<f64>> {
        let scale = self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        if scale == 0.0 {
            return Vec::new();
        }
        let mut c = self.coeffs.clone();
        while c.len() > 1 && c[c.len() - 1].abs() <= 1e-14 * scale {
            c.pop();
        }
        let d = c.len() - 1;
        match d {
            0 => Vec::new(),
            1 => vec![Complex::new(-c[0] / c[1], 0.0)],
            _ => {
                let lead = c[d];
                let mut comp = DMatrix::<f64>::zeros(d, d);
                for i in 1..d {
                    comp[(i, i - 1)] = 1.0;
                }
                for i in 0..d {
                    comp[(i, d - 1)] = -c[i] / lead;
                }
                comp.complex_eigenvalues().iter().copied().collect()
            }
        }
    }

    /// Newton refinement of an approximate real root; keeps the best iterate.
    pub fn polish_root(&self, s0: f64) -> f64 {
        let dp = self.derivative();
        let mut best = s0;
        let mut best_res = self.eval(s0).abs();
        let mut s = s0;
        for _ in 0..8 {
            let slope = dp.eval(s);
            if slope == 0.0 || !slope.is_finite() {
                break;
            }
            s -= self.eval(s) / slope;
            let res = self.eval(s).abs();
            if res < best_res {
                best = s;
                best_res = res;
            } else {
                break;
            }
        }
        best
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Least-squares polynomial of the given degree through `(x, y)`.
///
/// The abscissae are centred and scaled to `[-1, 1]` before building the
/// Vandermonde system, which is solved by Householder QR; the coefficients are
/// then expanded back to the original variable.
pub fn fit_least_squares(x: &[f64], y: &[f64], degree: usize) -> Result<Polynomial, FitFailure> {
    assert_eq!(x.len(), y.len());
    let mut distinct: Vec<f64> = x.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < degree + 1 {
        return Err(FitFailure::TooFewDistinct {
            distinct: distinct.len(),
            needed: degree + 1,
        });
    }
    let n = x.len();
    let center = x.iter().sum::<f64>() / n as f64;
    let half_width = x.iter().fold(0.0f64, |m, v| m.max((v - center).abs()));
    let cols = degree + 1;
    let a = DMatrix::from_fn(n, cols, |i, k| ((x[i] - center) / half_width).powi(k as i32));
    let qr = a.qr();
    let r = qr.r();
    let max_diag = (0..cols).fold(0.0f64, |m, k| m.max(r[(k, k)].abs()));
    if (0..cols).any(|k| r[(k, k)].abs() <= 1e-12 * max_diag) {
        return Err(FitFailure::RankDeficient);
    }
    let qty = qr.q().transpose() * DVector::from_column_slice(y);
    let t_coeffs = r.solve_upper_triangular(&qty).ok_or(FitFailure::RankDeficient)?;

    // p(s) = sum_k a_k ((s - c) / h)^k
    let mut coeffs = vec![0.0; cols];
    for (k, a_k) in t_coeffs.iter().enumerate() {
        let scaled = a_k / half_width.powi(k as i32);
        for (j, c) in coeffs.iter_mut().enumerate().take(k + 1) {
            *c += scaled * binomial(k, j) * (-center).powi((k - j) as i32);
        }
    }
    Ok(Polynomial::new(coeffs))
}
