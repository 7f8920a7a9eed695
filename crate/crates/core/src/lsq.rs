//! Dense linear least squares via SVD, with explicit rank checks.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Singular values below `RANK_TOL * sigma_max` count as zero.
const RANK_TOL: f64 = 1e-10;

/// Result of a least-squares solve.
#[derive(Debug, Clone)]
pub struct LstsqFit {
    pub coefficients: Vec<f64>,
    /// Root-mean-square of the residuals `y - X·beta`.
    pub residual_rms: f64,
}

/// Solves `min ||X·beta - y||²` where `rows` holds the regressor rows of `X`.
///
/// Columns are scaled to unit norm before the decomposition so that the rank
/// test is insensitive to the units of individual regressors.
pub fn solve(rows: &[Vec<f64>], y: &[f64]) -> Result<LstsqFit> {
    let n = rows.len();
    if n == 0 || n != y.len() {
        return Err(Error::fit(format!(
            "need matching non-empty design and response (got {} rows, {} responses)",
            n,
            y.len()
        )));
    }
    let p = rows[0].len();
    if rows.iter().any(|r| r.len() != p) {
        return Err(Error::fit("ragged design matrix"));
    }
    if n < p {
        return Err(Error::fit(format!(
            "{} samples cannot determine {} coefficients",
            n, p
        )));
    }
    if rows.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::fit("non-finite value in fit input"));
    }

    let mut x = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
    let mut scale = vec![1.0; p];
    for (j, s) in scale.iter_mut().enumerate() {
        let norm = x.column(j).norm();
        if norm == 0.0 {
            return Err(Error::fit(format!(
                "regressor column {} is identically zero",
                j
            )));
        }
        *s = norm;
        x.column_mut(j).scale_mut(1.0 / norm);
    }
    let rhs = DVector::from_column_slice(y);

    let svd = x.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    if s_min <= RANK_TOL * s_max {
        return Err(Error::fit(format!(
            "rank-deficient design (condition {:.3e})",
            s_max / s_min.max(f64::MIN_POSITIVE)
        )));
    }
    let beta_scaled = svd
        .solve(&rhs, RANK_TOL * s_max)
        .map_err(|e| Error::fit(e.to_string()))?;

    let residual = &x * &beta_scaled - &rhs;
    let residual_rms = (residual.norm_squared() / n as f64).sqrt();
    let coefficients = beta_scaled.iter().zip(&scale).map(|(b, s)| b / s).collect();
    Ok(LstsqFit {
        coefficients,
        residual_rms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let rows = vec![vec![0.0, 1.0], vec![1.0, 1.0]];
        let fit = solve(&rows, &[0.02, 0.05]).unwrap();
        assert!((fit.coefficients[0] - 0.03).abs() < 1e-14);
        assert!((fit.coefficients[1] - 0.02).abs() < 1e-14);
        assert!(fit.residual_rms < 1e-14);
    }

    #[test]
    fn duplicate_columns_rejected() {
        let rows = vec![vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]];
        assert!(matches!(solve(&rows, &[1.0, 2.0, 3.0]), Err(Error::Fit(_))));
    }

    #[test]
    fn underdetermined_rejected() {
        let rows = vec![vec![1.0, 2.0, 3.0]];
        assert!(solve(&rows, &[1.0]).is_err());
    }
}
