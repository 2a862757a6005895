//! Regularized linear readout: Tikhonov ridge solve, prediction, MSE, and
//! conditioning diagnostics for feature matrices.

use serde::{Deserialize, Serialize};

use crate::features::FeatureMatrix;
use crate::linalg::{cholesky_solve, svd_real};
use crate::{Error, Result};

/// Solved readout weights, one per feature column.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReadoutWeights {
    pub values: Vec<f64>,
    pub lambda_used: f64,
}

/// Ridge solution W = (V^T V + lambda I)^{-1} V^T y.
///
/// Solved by Cholesky on the regularized Gram matrix; when that factorization
/// fails numerically the solve falls back to an SVD route. Both routes target
/// the same minimizer of ||V W - y||^2 + lambda ||W||^2.
pub fn tikhonov_solve(v: &FeatureMatrix, y: &[f64], lambda: f64) -> Result<ReadoutWeights> {
    if lambda <= 0.0 || !lambda.is_finite() {
        return Err(Error::NonPositiveLambda(lambda));
    }
    if v.rows() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} feature rows against {} targets",
            v.rows(),
            y.len()
        )));
    }
    if !v.values().iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite("feature matrix"));
    }
    if !y.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite("regression target"));
    }
    match tikhonov_solve_factorized(v, y, lambda) {
        Some(w) => Ok(w),
        None => Ok(tikhonov_solve_svd(v, y, lambda)),
    }
}

/// Cholesky route; `None` when the factorization fails.
///
/// For wide matrices (more columns than rows) the push-through identity
/// (V^T V + lambda I)^{-1} V^T = V^T (V V^T + lambda I)^{-1} is used, which
/// factorizes the smaller Gram matrix and keeps the system full-rank; the tall
/// case factorizes V^T V + lambda I directly.
pub fn tikhonov_solve_factorized(
    v: &FeatureMatrix,
    y: &[f64],
    lambda: f64,
) -> Option<ReadoutWeights> {
    let values = if v.rows() < v.cols() {
        let gram = outer_gram_regularized(v, lambda);
        let alpha = cholesky_solve(&gram, v.rows(), y)?;
        v.t_mul_vec(&alpha)
    } else {
        let gram = v.gram_regularized(lambda);
        let rhs = v.t_mul_vec(y);
        cholesky_solve(&gram, v.cols(), &rhs)?
    };
    Some(ReadoutWeights {
        values,
        lambda_used: lambda,
    })
}

/// V V^T + lambda I, row-major, rows x rows.
fn outer_gram_regularized(v: &FeatureMatrix, lambda: f64) -> Vec<f64> {
    let m = v.rows();
    let mut g = vec![0.0f64; m * m];
    for i in 0..m {
        let ri = v.row(i);
        for j in i..m {
            let dot: f64 = ri.iter().zip(v.row(j)).map(|(a, b)| a * b).sum();
            g[i * m + j] = dot;
            g[j * m + i] = dot;
        }
        g[i * m + i] += lambda;
    }
    g
}

/// SVD route: W = sum_k s_k/(s_k^2 + lambda) (u_k . y) v_k.
pub fn tikhonov_solve_svd(v: &FeatureMatrix, y: &[f64], lambda: f64) -> ReadoutWeights {
    let (m, n) = (v.rows(), v.cols());
    let svd = svd_real(m, n, v.values());
    let r = svd.rank_dim;
    let mut values = vec![0.0f64; n];
    for k in 0..r {
        let s = svd.s[k];
        if s == 0.0 {
            continue;
        }
        let mut uy = 0.0;
        for (i, &yi) in y.iter().enumerate().take(m) {
            uy += svd.u[i * r + k] * yi;
        }
        let gain = s / (s * s + lambda) * uy;
        for (j, value) in values.iter_mut().enumerate() {
            *value += gain * svd.v[j * r + k];
        }
    }
    ReadoutWeights {
        values,
        lambda_used: lambda,
    }
}

/// Prediction y_hat = V W.
pub fn predict(v: &FeatureMatrix, w: &ReadoutWeights) -> Vec<f64> {
    v.mul_vec(&w.values)
}

/// Mean squared elementwise difference.
pub fn mse(y: &[f64], y_hat: &[f64]) -> f64 {
    assert_eq!(y.len(), y_hat.len(), "mse length mismatch");
    if y.is_empty() {
        return 0.0;
    }
    y.iter()
        .zip(y_hat)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / y.len() as f64
}

/// Numerical rank, condition number, and singular values of a feature matrix.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionReport {
    pub numerical_rank: usize,
    pub condition_number: f64,
    /// Descending.
    pub singular_values: Vec<f64>,
}

/// Rank counts singular values above 1e-10 times the largest.
pub fn condition_diagnostics(v: &FeatureMatrix) -> ConditionReport {
    let svd = svd_real(v.rows(), v.cols(), v.values());
    let s_max = svd.s.first().copied().unwrap_or(0.0);
    let s_min = svd.s.last().copied().unwrap_or(0.0);
    let numerical_rank = svd.s.iter().filter(|&&s| s > 1e-10 * s_max).count();
    let condition_number = if s_min > 0.0 {
        s_max / s_min
    } else {
        f64::INFINITY
    };
    ConditionReport {
        numerical_rank,
        condition_number,
        singular_values: svd.s,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn matrix(rows: Vec<Vec<f64>>) -> FeatureMatrix {
        let cols = rows[0].len();
        let labels = (0..cols).map(|j| format!("c{j}")).collect();
        FeatureMatrix::from_rows(rows, labels).unwrap()
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> FeatureMatrix {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        matrix(
            (0..rows)
                .map(|_| (0..cols).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect(),
        )
    }

    #[test]
    fn identity_design_recovers_target() {
        let n = 5;
        let v = matrix((0..n).map(|i| {
            (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()
        }).collect());
        let y = [0.3, -1.2, 0.0, 2.5, 0.7];
        let w = tikhonov_solve(&v, &y, 1e-12).unwrap();
        for (wk, yk) in w.values.iter().zip(&y) {
            assert!((wk - yk).abs() <= 1e-9 * yk.abs().max(1.0));
        }
    }

    #[test]
    fn heavy_regularization_shrinks_weights() {
        let v = random_matrix(6, 9, 0);
        let y: Vec<f64> = (0..6).map(|i| (i as f64 - 2.5) / 3.0).collect();
        let lambda = 1e9;
        let w = tikhonov_solve(&v, &y, lambda).unwrap();
        let vty = v.t_mul_vec(&y);
        let bound = vty.iter().fold(0.0f64, |m, x| m.max(x.abs())) / lambda * 2.0;
        for wk in &w.values {
            assert!(wk.abs() < bound);
        }
    }

    #[test]
    fn matches_normal_equation_oracle() {
        // Independent oracle: dense inverse of (V^T V + lambda I) by Gaussian
        // elimination, applied to V^T y.
        let v = random_matrix(8, 12, 1);
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let y: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lambda = 1e-6;

        let d = v.cols();
        let mut a = v.gram_regularized(lambda);
        let mut x = v.t_mul_vec(&y);
        // plain Gaussian elimination with partial pivoting
        let mut perm: Vec<usize> = (0..d).collect();
        for col in 0..d {
            let piv = (col..d)
                .max_by(|&i, &j| {
                    a[perm[i] * d + col]
                        .abs()
                        .partial_cmp(&a[perm[j] * d + col].abs())
                        .unwrap()
                })
                .unwrap();
            perm.swap(col, piv);
            let p = perm[col];
            for &r in &perm[col + 1..] {
                let f = a[r * d + col] / a[p * d + col];
                for j in col..d {
                    a[r * d + j] -= f * a[p * d + j];
                }
                x[r] -= f * x[p];
            }
        }
        let mut oracle = vec![0.0; d];
        for col in (0..d).rev() {
            let p = perm[col];
            let mut s = x[p];
            for j in col + 1..d {
                s -= a[p * d + j] * oracle[j];
            }
            oracle[col] = s / a[p * d + col];
        }

        let w = tikhonov_solve(&v, &y, lambda).unwrap();
        for (a, b) in w.values.iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-8 * b.abs().max(1e-8), "{a} vs {b}");
        }
    }

    #[test]
    fn factorized_and_svd_routes_agree() {
        let v = random_matrix(10, 15, 3);
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let y: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
        for lambda in [1e-10, 1e-4, 1.0] {
            let a = tikhonov_solve_factorized(&v, &y, lambda).unwrap();
            let b = tikhonov_solve_svd(&v, &y, lambda);
            let scale = a
                .values
                .iter()
                .fold(0.0f64, |m, x| m.max(x.abs()))
                .max(1e-12);
            for (x, z) in a.values.iter().zip(&b.values) {
                assert!((x - z).abs() < 1e-8 * scale);
            }
        }
    }

    #[test]
    fn stationarity_residual_is_small() {
        let v = random_matrix(12, 20, 5);
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let y: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lambda = 1e-10;
        let w = tikhonov_solve(&v, &y, lambda).unwrap();
        let gram = v.gram_regularized(lambda);
        let vty = v.t_mul_vec(&y);
        let d = v.cols();
        let mut residual = 0.0f64;
        for i in 0..d {
            let mut gw = 0.0;
            for j in 0..d {
                gw += gram[i * d + j] * w.values[j];
            }
            residual = residual.max((gw - vty[i]).abs());
        }
        let rhs_norm = vty.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(residual < 1e-8 * (rhs_norm + 1.0));
    }

    #[test]
    fn weight_norm_monotone_in_lambda() {
        let v = random_matrix(9, 14, 7);
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let y: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut prev = f64::INFINITY;
        for exp in -10..8 {
            let lambda = 10f64.powi(exp);
            let w = tikhonov_solve(&v, &y, lambda).unwrap();
            let norm: f64 = w.values.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(norm <= prev * (1.0 + 1e-12));
            prev = norm;
        }
    }

    #[test]
    fn predict_basics() {
        let v = random_matrix(4, 6, 9);
        let zero = ReadoutWeights {
            values: vec![0.0; 6],
            lambda_used: 1.0,
        };
        assert!(predict(&v, &zero).iter().all(|&x| x == 0.0));

        let eye = matrix(vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ]);
        let w = ReadoutWeights {
            values: vec![0.4, -0.2, 1.1],
            lambda_used: 1.0,
        };
        assert_eq!(predict(&eye, &w), w.values);
    }

    #[test]
    fn underdetermined_fit_reproduces_target() {
        // rank(V) = rows < cols: ridge with tiny lambda fits y to high accuracy
        let v = random_matrix(8, 20, 10);
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let y: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w = tikhonov_solve(&v, &y, 1e-10).unwrap();
        let y_hat = predict(&v, &w);
        assert!(mse(&y, &y_hat) < 1e-12);
    }

    #[test]
    fn mse_basics() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(mse(&[1.0, 0.0], &[0.0, 0.0]), 0.5);
        // permutation invariance
        let a = [0.3, -0.7, 1.1];
        let b = [0.1, 0.2, -0.9];
        let perm_a = [1.1, 0.3, -0.7];
        let perm_b = [-0.9, 0.1, 0.2];
        assert!((mse(&a, &b) - mse(&perm_a, &perm_b)).abs() < 1e-15);
    }

    #[test]
    fn condition_diagnostics_ranks() {
        let eye = matrix(vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ]);
        let rep = condition_diagnostics(&eye);
        assert_eq!(rep.numerical_rank, 3);
        assert!((rep.condition_number - 1.0).abs() < 1e-12);

        // rank-1 outer product
        let u = [1.0, -2.0, 0.5, 3.0];
        let w = [0.2, 0.4, -1.0];
        let outer = matrix(
            u.iter()
                .map(|&ui| w.iter().map(|&wj| ui * wj).collect())
                .collect(),
        );
        assert_eq!(condition_diagnostics(&outer).numerical_rank, 1);

        // random Gaussian-ish 30 x 76: full row rank
        let v = random_matrix(30, 76, 12);
        assert_eq!(condition_diagnostics(&v).numerical_rank, 30);
    }

    #[test]
    fn invalid_inputs_rejected() {
        let v = random_matrix(3, 4, 13);
        assert!(matches!(
            tikhonov_solve(&v, &[1.0, 2.0], 1e-3),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            tikhonov_solve(&v, &[1.0, f64::NAN, 0.0], 1e-3),
            Err(Error::NonFinite(_))
        ));
        assert!(matches!(
            tikhonov_solve(&v, &[1.0, 2.0, 3.0], 0.0),
            Err(Error::NonPositiveLambda(_))
        ));
    }
}
