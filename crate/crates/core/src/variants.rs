//! Measurement-update strategies for high-dimensional measurements.
//!
//! Both transformations leave the posterior unchanged while moving the
//! expensive linear algebra to a smaller matrix:
//!
//! * [`qr_compress`] rotates an m-row measurement into at most d rows via a
//!   thin QR factorization of the Jacobian, so the innovation solve shrinks
//!   from m x m to r x r with r <= d. The rotation is lossless when the
//!   measurement noise is white; [`whiten`] reduces the general case to the
//!   white case first.
//! * [`information_form_gain`] evaluates the Kalman gain as
//!   `K = [H'R⁻¹H + (L P⁻ L')⁻¹]⁻¹ H'R⁻¹`, inverting a d x d information
//!   matrix instead of the m x m innovation covariance, at the price of an
//!   extra prior-covariance inversion.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative diagonal threshold below which a QR row is considered
/// rank-deficient and dropped.
const RANK_TOLERANCE: f64 = 1e-10;

/// Condition-number limit above which symmetric matrices are treated as
/// numerically singular.
pub(crate) const CONDITION_LIMIT: f64 = 1e12;

/// A measurement rotated into the row space of its Jacobian.
#[derive(Clone, Debug)]
pub struct CompressedMeasurement {
    /// `T_H`: the r x d upper-triangular compressed Jacobian, r <= d.
    pub jacobian: DMatrix<f64>,
    /// `r_q`: the r-vector compressed residual.
    pub residual: DVector<f64>,
    /// `R_q`: the r x r compressed noise covariance.
    pub noise: DMatrix<f64>,
}

/// Condition number of a symmetric matrix (ratio of extreme absolute
/// eigenvalues; infinite when the smallest is zero).
pub(crate) fn symmetric_condition(m: &DMatrix<f64>) -> f64 {
    let eigs = m.symmetric_eigenvalues();
    let mut max = 0.0f64;
    let mut min = f64::INFINITY;
    for &e in eigs.iter() {
        max = max.max(e.abs());
        min = min.min(e.abs());
    }
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Transforms a measurement with noise covariance `r` into one with unit
/// noise covariance by premultiplying Jacobian and residual with the
/// inverse Cholesky factor of `r`.
pub fn whiten(
    h: &DMatrix<f64>,
    residual: &DVector<f64>,
    r: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if r.nrows() != h.nrows() || r.nrows() != r.ncols() {
        return Err(Error::DimensionMismatch {
            context: "whitening noise covariance",
            expected: h.nrows(),
            actual: r.nrows(),
        });
    }
    let chol = r.clone().cholesky().ok_or(Error::NotPositiveDefinite {
        what: "measurement noise covariance",
    })?;
    let factor = chol.l();
    let wh = factor
        .solve_lower_triangular(h)
        .ok_or(Error::NotPositiveDefinite {
            what: "measurement noise covariance",
        })?;
    let wr = factor
        .solve_lower_triangular(residual)
        .ok_or(Error::NotPositiveDefinite {
            what: "measurement noise covariance",
        })?;
    Ok((wh, wr))
}

/// Compresses an m-row measurement (m >= d) to at most d rows.
///
/// Factors `H = Q1 T_H` with `Q1` having orthonormal columns and returns
/// `(T_H, Q1' residual, Q1' R Q1)`. Substituting these for `(H, residual,
/// R)` in the update equations leaves the posterior unchanged when `R` is a
/// multiple of the identity; whiten first for general `R`. Rows of `T_H`
/// whose diagonal magnitude falls below `1e-10 * |H|_F` are dropped as
/// rank-deficient, along with the matching columns of `Q1`.
pub fn qr_compress(
    h: &DMatrix<f64>,
    residual: &DVector<f64>,
    r: &DMatrix<f64>,
) -> Result<CompressedMeasurement> {
    let (m, d) = h.shape();
    if m < d {
        return Err(Error::Precondition(format!(
            "QR compression needs at least as many measurement rows as state dimensions (got {m} rows, {d} columns)"
        )));
    }
    if residual.len() != m {
        return Err(Error::DimensionMismatch {
            context: "compression residual",
            expected: m,
            actual: residual.len(),
        });
    }
    if r.nrows() != m || r.ncols() != m {
        return Err(Error::DimensionMismatch {
            context: "compression noise covariance",
            expected: m,
            actual: r.nrows(),
        });
    }

    let qr = h.clone().qr();
    let q1 = qr.q(); // m x d, orthonormal columns
    let t = qr.r(); // d x d, upper triangular

    let threshold = RANK_TOLERANCE * h.norm();
    let kept: Vec<usize> = (0..d).filter(|&i| t[(i, i)].abs() > threshold).collect();

    let t_h = DMatrix::from_fn(kept.len(), d, |i, j| t[(kept[i], j)]);
    let q_kept = DMatrix::from_fn(m, kept.len(), |i, j| q1[(i, kept[j])]);
    let compressed_residual = q_kept.transpose() * residual;
    let mut noise = q_kept.transpose() * r * &q_kept;
    // Q1'RQ1 is symmetric up to rounding; keep it exactly so.
    noise = (&noise + noise.transpose()) * 0.5;

    Ok(CompressedMeasurement {
        jacobian: t_h,
        residual: compressed_residual,
        noise,
    })
}

/// Kalman gain in information form:
/// `K = [H'R⁻¹H + (L P⁻ L')⁻¹]⁻¹ H'R⁻¹`.
///
/// Algebraically equal to the innovation-form gain `L P⁻ L' H' S⁻¹`, but
/// the matrix inverted has the state dimension rather than the measurement
/// dimension. Requires the transformed prior `L P⁻ L'` to be invertible.
pub fn information_form_gain(
    h: &DMatrix<f64>,
    l: &DMatrix<f64>,
    p_minus: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let d = p_minus.nrows();
    if h.ncols() != d {
        return Err(Error::DimensionMismatch {
            context: "measurement Jacobian columns",
            expected: d,
            actual: h.ncols(),
        });
    }
    let mut prior = l * p_minus * l.transpose();
    prior = (&prior + prior.transpose()) * 0.5;

    let condition = symmetric_condition(&prior);
    if !condition.is_finite() || condition > CONDITION_LIMIT {
        return Err(Error::SingularPrior { condition });
    }
    let prior_chol = prior.cholesky().ok_or(Error::NotPositiveDefinite {
        what: "transformed prior covariance",
    })?;
    let prior_inverse = prior_chol.inverse();

    let r_chol = r.clone().cholesky().ok_or(Error::NotPositiveDefinite {
        what: "measurement noise covariance",
    })?;
    // B = R⁻¹H, so the gain is [H'B + (LP⁻L')⁻¹]⁻¹ B'.
    let b = r_chol.solve(h);
    let mut information = h.transpose() * &b + prior_inverse;
    information = (&information + information.transpose()) * 0.5;
    let info_chol = information.cholesky().ok_or(Error::NotPositiveDefinite {
        what: "information matrix",
    })?;
    Ok(info_chol.solve(&b.transpose()))
}
