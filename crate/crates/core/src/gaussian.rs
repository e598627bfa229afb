//! Dense Gaussian utilities shared across the crate.
//!
//! Covariances are stored as full symmetric matrices and re-symmetrized as
//! `(P + P')/2` after every operation that can introduce asymmetry. A small
//! diagonal jitter is tried before declaring a matrix non-PSD.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Relative jitter applied before giving up on a Cholesky factorization.
pub const PSD_JITTER: f64 = 1e-9;

/// Relative symmetry tolerance for covariance validation.
pub const SYMMETRY_TOL: f64 = 1e-9;

pub const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Replaces `m` with `(m + m')/2` in place.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    debug_assert_eq!(m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Checks that `m` is symmetric within a relative tolerance.
pub fn check_symmetric(m: &DMatrix<f64>, context: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{context}: {}x{} matrix is not square",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = m.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return Err(Error::NonPsdCovariance(format!(
                    "{context}: asymmetry at ({i},{j}): {} vs {}",
                    m[(i, j)],
                    m[(j, i)]
                )));
            }
        }
    }
    Ok(())
}

/// Checks symmetry and that all eigenvalues are `>= -tol * lambda_max`.
///
/// Eigen decomposition is O(n^3); reserved for constructors and tests, not
/// for the filter hot path.
pub fn check_psd(m: &DMatrix<f64>, context: &str) -> Result<()> {
    check_symmetric(m, context)?;
    if m.nrows() == 0 {
        return Ok(());
    }
    let eigs = m.clone().symmetric_eigenvalues();
    let max = eigs.iter().fold(0.0_f64, |acc, v| acc.max(*v));
    let floor = -PSD_JITTER * max.max(1.0);
    if let Some(min) = eigs.iter().copied().reduce(f64::min) {
        if min < floor {
            return Err(Error::NonPsdCovariance(format!(
                "{context}: eigenvalue {min} below {floor}"
            )));
        }
    }
    Ok(())
}

/// Cholesky factorization with one jitter retry.
///
/// The jitter scale is relative to the largest diagonal entry, so it adapts
/// to the magnitude of the covariance.
pub fn cholesky_with_jitter(m: &DMatrix<f64>, context: &str) -> Result<Cholesky<f64, Dyn>> {
    if let Some(chol) = Cholesky::new(m.clone()) {
        return Ok(chol);
    }
    let scale = (0..m.nrows()).fold(1.0_f64, |acc, i| acc.max(m[(i, i)].abs()));
    let jittered = m + DMatrix::identity(m.nrows(), m.ncols()) * (PSD_JITTER * scale);
    Cholesky::new(jittered).ok_or_else(|| {
        Error::NonPsdCovariance(format!("{context}: Cholesky failed even with jitter"))
    })
}

/// Log-density of a multivariate normal evaluated at `x`.
pub fn mvn_logpdf(x: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<f64> {
    let dim = mean.len();
    if x.len() != dim || cov.nrows() != dim {
        return Err(Error::DimensionMismatch(format!(
            "mvn_logpdf: x has {} entries, mean {}, cov {}x{}",
            x.len(),
            dim,
            cov.nrows(),
            cov.ncols()
        )));
    }
    if dim == 0 {
        return Ok(0.0);
    }
    let chol = cholesky_with_jitter(cov, "mvn_logpdf")?;
    let resid = x - mean;
    let solved = chol.solve(&resid);
    let quad = resid.dot(&solved);
    let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    Ok(-0.5 * (dim as f64 * LN_2PI + log_det + quad))
}

/// Density of a multivariate normal evaluated at `x`.
pub fn mvn_pdf(x: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<f64> {
    Ok(mvn_logpdf(x, mean, cov)?.exp())
}

/// `ln(sum(exp(v)))` guarded against empty input and -inf entries.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// `ln(exp(a) + exp(b))`.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_normal_at_mode() {
        let x = DVector::from_vec(vec![0.0]);
        let mean = DVector::from_vec(vec![0.0]);
        let cov = DMatrix::from_vec(1, 1, vec![1.0]);
        let p = mvn_pdf(&x, &mean, &cov).unwrap();
        assert!((p - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn bivariate_normal_at_mode() {
        let x = DVector::from_vec(vec![1.0, 2.0]);
        let cov = DMatrix::identity(2, 2);
        let p = mvn_pdf(&x, &x.clone(), &cov).unwrap();
        assert!((p - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-12);
    }

    #[test]
    fn rejects_indefinite_matrix() {
        let x = DVector::from_vec(vec![0.0, 0.0]);
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(mvn_pdf(&x, &x.clone(), &cov).is_err());
    }

    #[test]
    fn symmetrize_bounds_drift() {
        let mut m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5 + 1e-13, 0.5, 1.0]);
        symmetrize(&mut m);
        assert_eq!(m[(0, 1)], m[(1, 0)]);
        check_symmetric(&m, "test").unwrap();
    }

    #[test]
    fn log_sum_exp_handles_extremes() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
        let v = log_sum_exp(&[-1000.0, -1000.0]);
        assert!((v - (-1000.0 + 2.0_f64.ln())).abs() < 1e-12);
        assert!((log_add_exp(0.0, 0.0) - 2.0_f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn mvn_integrates_to_one_on_grid() {
        // 1-D normalization check by trapezoid quadrature on a wide grid.
        let mean = DVector::from_vec(vec![0.3]);
        let cov = DMatrix::from_vec(1, 1, vec![2.25]);
        let (lo, hi, n) = (-15.0_f64, 15.0_f64, 20_000usize);
        let h = (hi - lo) / n as f64;
        let mut acc = 0.0;
        for i in 0..=n {
            let x = DVector::from_vec(vec![lo + i as f64 * h]);
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            acc += w * mvn_pdf(&x, &mean, &cov).unwrap();
        }
        assert!((acc * h - 1.0).abs() < 1e-3);
    }
}
