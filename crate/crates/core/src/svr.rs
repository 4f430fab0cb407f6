//! Linear epsilon-insensitive SVR trained by dual coordinate descent.
//!
//! The dual is
//!
//! ```text
//! min_beta  1/2 beta' Q beta - y' beta + eps * |beta|_1,   -C <= beta_i <= C
//! ```
//!
//! with `Q = X X'` and primal weights `w = sum_i beta_i x_i`. Every coordinate
//! update is the exact minimiser of the one-dimensional piecewise quadratic,
//! clipped to the box. Samples are swept in index order, so the result is a
//! pure function of the inputs.
//!
//! The intercept is handled by centering the targets at their mean and
//! appending a constant feature of 1, whose weight absorbs the residual
//! offset.

use nalgebra::DMatrix;

use crate::linalg::dot;

#[derive(Debug, Clone, Copy)]
pub(crate) struct SvrParams {
    pub epsilon: f64,
    pub c: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct SvrSolution {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub converged: bool,
    pub max_violation: f64,
}

pub(crate) fn solve(x: &DMatrix<f64>, y: &[f64], p: SvrParams) -> SvrSolution {
    let (n, dim) = x.shape();
    let stride = dim + 1;
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let targets: Vec<f64> = y.iter().map(|v| v - y_mean).collect();

    // row-major copy with the constant feature appended
    let mut rows = vec![0.0; n * stride];
    for i in 0..n {
        for j in 0..dim {
            rows[i * stride + j] = x[(i, j)];
        }
        rows[i * stride + dim] = 1.0;
    }
    let diag: Vec<f64> = rows.chunks_exact(stride).map(|r| dot(r, r)).collect();

    let mut beta = vec![0.0; n];
    let mut w = vec![0.0; stride];
    let mut iterations = 0;
    let mut converged = false;
    let mut max_violation = f64::INFINITY;

    while iterations < p.max_iterations {
        iterations += 1;
        let mut sweep_violation = 0.0f64;
        for i in 0..n {
            let xi = &rows[i * stride..(i + 1) * stride];
            let g = dot(&w, xi) - targets[i];
            let gp = g + p.epsilon;
            let gn = g - p.epsilon;
            let b = beta[i];

            // projected gradient of the piecewise quadratic at beta_i
            let violation = if b == 0.0 {
                (-gp).max(gn).max(0.0)
            } else if b >= p.c {
                gp.max(0.0)
            } else if b <= -p.c {
                (-gn).max(0.0)
            } else if b > 0.0 {
                gp.abs()
            } else {
                gn.abs()
            };
            sweep_violation = sweep_violation.max(violation);

            let h = diag[i];
            let step = if gp < h * b {
                -gp / h
            } else if gn > h * b {
                -gn / h
            } else {
                -b
            };
            let updated = (b + step).clamp(-p.c, p.c);
            let delta = updated - b;
            if delta != 0.0 {
                beta[i] = updated;
                for (wk, xk) in w.iter_mut().zip(xi) {
                    *wk += delta * xk;
                }
            }
        }
        max_violation = sweep_violation;
        if sweep_violation < p.tolerance {
            converged = true;
            break;
        }
    }

    let bias = y_mean + w[dim];
    w.truncate(dim);
    SvrSolution {
        weights: w,
        bias,
        iterations,
        converged,
        max_violation,
    }
}

/// `1/2 |w|^2 + C * sum max(0, |y - b - w.x| - eps)`.
pub(crate) fn primal_objective(x: &DMatrix<f64>, y: &[f64], w: &[f64], b: f64, p: SvrParams) -> f64 {
    let loss: f64 = (0..x.nrows())
        .map(|i| {
            let pred = b + x.row(i).iter().zip(w).map(|(a, c)| a * c).sum::<f64>();
            ((y[i] - pred).abs() - p.epsilon).max(0.0)
        })
        .sum();
    0.5 * dot(w, w) + p.c * loss
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> SvrParams {
        SvrParams {
            epsilon: 0.01,
            c: 10.0,
            tolerance: 1e-8,
            max_iterations: 100_000,
        }
    }

    #[test]
    fn one_dimensional_line() {
        let xs = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let x = DMatrix::from_column_slice(5, 1, &xs);
        let y: Vec<f64> = xs.iter().map(|v| 2.0 * v + 5.0).collect();
        let sol = solve(&x, &y, params());
        assert!(sol.converged);
        assert!((sol.weights[0] - 2.0).abs() < 0.02, "{:?}", sol.weights);
        assert!((sol.bias - 5.0).abs() < 0.02);
        for (xi, yi) in xs.iter().zip(&y) {
            let r = yi - (sol.bias + sol.weights[0] * xi);
            assert!(r.abs() <= 0.01 + 1e-6);
        }
    }

    #[test]
    fn flat_targets_give_zero_weights() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, -1.0, -1.0]);
        let sol = solve(&x, &[4.0, 4.0, 4.0], params());
        assert!(sol.weights.iter().all(|w| *w == 0.0));
        assert_eq!(sol.bias, 4.0);
        assert!(sol.converged);
    }

    #[test]
    fn objective_not_above_perturbations() {
        // the solution must be at least as good as nearby points
        let x = DMatrix::from_row_slice(
            6,
            2,
            &[0.3, -1.2, 1.1, 0.4, -0.7, 0.9, 0.0, 0.1, -1.5, -0.3, 0.8, 0.2],
        );
        let y = [1.0, 3.5, -0.5, 0.7, -2.0, 2.5];
        let p = SvrParams {
            epsilon: 0.1,
            c: 1.0,
            tolerance: 1e-10,
            max_iterations: 200_000,
        };
        let sol = solve(&x, &y, p);
        let f0 = primal_objective(&x, &y, &sol.weights, sol.bias, p);
        // the intercept carries a tiny ridge term, so allow a small slack
        for d in [[1e-3, 0.0], [0.0, 1e-3], [-1e-3, 0.0], [0.0, -1e-3]] {
            let w = [sol.weights[0] + d[0], sol.weights[1] + d[1]];
            assert!(primal_objective(&x, &y, &w, sol.bias, p) >= f0 - 1e-9);
        }
    }
}
