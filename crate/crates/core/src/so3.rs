//! Numerical kernel for 3D rotations: hat/vee, the exponential and
//! logarithm maps, and the right/left Jacobians with their inverses.
//!
//! Rotations are 3x3 orthonormal matrices with determinant +1; tangent
//! vectors are axis-angle 3-vectors in radians. Closed (Rodrigues-style)
//! forms are used for angles at or above [`SMALL_ANGLE`]; below it every
//! coefficient switches to a fourth-order Taylor expansion, keeping the
//! crossover error under 1e-12.
//!
//! The inverse Jacobians contain a `(1 + cos t) / (2 t sin t)` term that is
//! undefined at `t = pi`; [`jr_inv`] and [`jl_inv`] therefore reject angles
//! within [`JR_INV_MARGIN`] of pi.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Angle below which Taylor expansions replace the closed forms.
pub const SMALL_ANGLE: f64 = 1e-4;

/// Margin kept away from the `theta = pi` singularity of the inverse
/// Jacobians.
pub const JR_INV_MARGIN: f64 = 1e-3;

/// Tolerance on orthonormality and determinant for rotation validity.
pub const ROTATION_TOL: f64 = 1e-9;

// Log switches to diagonal axis extraction this close to pi, where the
// antisymmetric part of R no longer determines the axis accurately.
const NEAR_PI: f64 = 1e-4;

/// Skew-symmetric matrix of a 3-vector, so that `hat(a) * b == a.cross(b)`.
#[rustfmt::skip]
pub fn hat(phi: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(
        0.0,    -phi.z,  phi.y,
        phi.z,   0.0,   -phi.x,
       -phi.y,   phi.x,  0.0,
    )
}

/// Inverse of [`hat`]. Does not check that the input is skew-symmetric.
pub fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// Exponential map from axis-angle to rotation matrix.
pub fn exp(phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta_sq = phi.norm_squared();
    let theta = theta_sq.sqrt();
    // R = I + a1 * hat(phi) + a2 * hat(phi)^2
    let (a1, a2) = if theta < SMALL_ANGLE {
        (
            1.0 - theta_sq / 6.0 + theta_sq * theta_sq / 120.0,
            0.5 - theta_sq / 24.0 + theta_sq * theta_sq / 720.0,
        )
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta_sq)
    };
    let k = hat(phi);
    Matrix3::identity() + a1 * k + a2 * (k * k)
}

/// Logarithm map from rotation matrix to axis-angle with `|phi| <= pi`.
///
/// Fails if the input is not a rotation matrix within [`ROTATION_TOL`].
pub fn log(r: &Matrix3<f64>) -> Result<Vector3<f64>> {
    check_rotation(r)?;
    let cos_theta = ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    let theta = cos_theta.acos();
    let w = vee(&(r - r.transpose())); // 2 sin(theta) * axis

    if theta < SMALL_ANGLE {
        let t2 = theta * theta;
        return Ok(w * 0.5 * (1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0));
    }
    if theta < std::f64::consts::PI - NEAR_PI {
        return Ok(w * (theta / (2.0 * theta.sin())));
    }

    // Near pi the antisymmetric part degenerates; recover the axis from the
    // largest diagonal element of R = cos(t) I + (1-cos(t)) n n' + sin(t) [n]x
    // and sharpen the angle through asin, which stays well-conditioned here.
    let one_minus_cos = 1.0 - cos_theta;
    let mut axis_idx = 0;
    for i in 1..3 {
        if r[(i, i)] > r[(axis_idx, axis_idx)] {
            axis_idx = i;
        }
    }
    let mut n = Vector3::zeros();
    n[axis_idx] = ((r[(axis_idx, axis_idx)] - cos_theta) / one_minus_cos)
        .max(0.0)
        .sqrt();
    for j in 0..3 {
        if j != axis_idx {
            n[j] = (r[(axis_idx, j)] + r[(j, axis_idx)]) / (2.0 * one_minus_cos * n[axis_idx]);
        }
    }
    n.normalize_mut();

    let sin_theta = (w.norm() / 2.0).min(1.0);
    let theta = std::f64::consts::PI - sin_theta.asin();

    if w.norm() > 1e-12 {
        if n.dot(&w) < 0.0 {
            n = -n;
        }
    } else {
        // Angle is pi to working precision: +phi and -phi describe the same
        // rotation. Pick the branch whose first nonzero component is positive.
        for i in 0..3 {
            if n[i] != 0.0 {
                if n[i] < 0.0 {
                    n = -n;
                }
                break;
            }
        }
    }
    Ok(n * theta)
}

/// Right Jacobian of the exponential map.
pub fn jr(phi: &Vector3<f64>) -> Matrix3<f64> {
    let (a2, a3) = jr_coefficients(phi.norm());
    let k = hat(phi);
    Matrix3::identity() - a2 * k + a3 * (k * k)
}

/// Left Jacobian; equals the transpose of [`jr`] at the same argument.
pub fn jl(phi: &Vector3<f64>) -> Matrix3<f64> {
    let (a2, a3) = jr_coefficients(phi.norm());
    let k = hat(phi);
    Matrix3::identity() + a2 * k + a3 * (k * k)
}

/// Inverse of the right Jacobian.
///
/// Only defined for `|phi| < pi -` [`JR_INV_MARGIN`]; larger angles report a
/// domain error.
pub fn jr_inv(phi: &Vector3<f64>) -> Result<Matrix3<f64>> {
    let c = jr_inv_coefficient(phi.norm())?;
    let k = hat(phi);
    Ok(Matrix3::identity() + 0.5 * k + c * (k * k))
}

/// Inverse of the left Jacobian; equals `jr_inv(-phi)`.
pub fn jl_inv(phi: &Vector3<f64>) -> Result<Matrix3<f64>> {
    let c = jr_inv_coefficient(phi.norm())?;
    let k = hat(phi);
    Ok(Matrix3::identity() - 0.5 * k + c * (k * k))
}

fn jr_coefficients(theta: f64) -> (f64, f64) {
    let t2 = theta * theta;
    if theta < SMALL_ANGLE {
        (
            0.5 - t2 / 24.0 + t2 * t2 / 720.0,
            1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0,
        )
    } else {
        (
            (1.0 - theta.cos()) / t2,
            (theta - theta.sin()) / (t2 * theta),
        )
    }
}

fn jr_inv_coefficient(theta: f64) -> Result<f64> {
    let limit = std::f64::consts::PI - JR_INV_MARGIN;
    if theta >= limit {
        return Err(Error::JacobianDomain {
            angle: theta,
            limit,
        });
    }
    let t2 = theta * theta;
    if theta < SMALL_ANGLE {
        Ok(1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0)
    } else {
        Ok(1.0 / t2 - (1.0 + theta.cos()) / (2.0 * theta * theta.sin()))
    }
}

/// Checks orthonormality and determinant within [`ROTATION_TOL`].
pub fn check_rotation(r: &Matrix3<f64>) -> Result<()> {
    let orthogonality = (r.transpose() * r - Matrix3::identity()).norm();
    let determinant = r.determinant();
    if orthogonality > ROTATION_TOL || (determinant - 1.0).abs() > ROTATION_TOL {
        return Err(Error::InvalidRotation {
            orthogonality,
            determinant,
        });
    }
    Ok(())
}

/// Nearest rotation matrix in the Frobenius sense, for sanitizing matrices
/// that come from external data.
pub fn project_to_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd of 3x3 requested with vectors");
    let v_t = svd.v_t.expect("svd of 3x3 requested with vectors");
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        // Flip the axis with the smallest singular value.
        let mut u = u;
        for i in 0..3 {
            u[(i, 2)] = -u[(i, 2)];
        }
        r = u * v_t;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_vector(rng: &mut ChaCha8Rng, scale: f64) -> Vector3<f64> {
        Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ) * scale
    }

    // Independent series oracle: exp as a truncated matrix power series.
    fn exp_series(phi: &Vector3<f64>, terms: usize) -> Matrix3<f64> {
        let k = hat(phi);
        let mut sum = Matrix3::identity();
        let mut power = Matrix3::identity();
        let mut factorial = 1.0;
        for n in 1..=terms {
            power *= k;
            factorial *= n as f64;
            sum += power / factorial;
        }
        sum
    }

    // Independent series oracle for the right Jacobian:
    // jr(phi) = sum_n (-hat(phi))^n / (n+1)!
    fn jr_series(phi: &Vector3<f64>, terms: usize) -> Matrix3<f64> {
        let k = -hat(phi);
        let mut sum = Matrix3::zeros();
        let mut power = Matrix3::identity();
        let mut factorial = 1.0; // (n+1)! starting at 1!
        for n in 0..=terms {
            if n > 0 {
                factorial *= (n + 1) as f64;
            }
            sum += power / factorial;
            power *= k;
        }
        sum
    }

    #[test]
    fn hat_matches_cross_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let a = random_vector(&mut rng, 2.0);
            let b = random_vector(&mut rng, 2.0);
            assert_abs_diff_eq!(hat(&a) * b, a.cross(&b), epsilon = 1e-15);
        }
    }

    #[test]
    fn hat_basis_and_zero() {
        assert_eq!(hat(&Vector3::zeros()), Matrix3::zeros());
        let expected = Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0);
        assert_eq!(hat(&Vector3::new(1.0, 0.0, 0.0)), expected);
    }

    #[test]
    fn vee_inverts_hat() {
        let phi = Vector3::new(0.3, -1.2, 0.7);
        assert_eq!(vee(&hat(&phi)), phi);
    }

    #[test]
    fn exp_of_zero_is_identity() {
        assert_eq!(exp(&Vector3::zeros()), Matrix3::identity());
    }

    #[test]
    fn exp_quarter_turn_about_x() {
        let r = exp(&Vector3::new(PI / 2.0, 0.0, 0.0));
        let expected = Matrix3::new(1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0);
        assert_abs_diff_eq!(r, expected, epsilon = 1e-15);
    }

    #[test]
    fn exp_matches_power_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let phi = random_vector(&mut rng, 1.8);
            assert_abs_diff_eq!(exp(&phi), exp_series(&phi, 40), epsilon = 1e-12);
        }
        // also across the small-angle switch
        for scale in [1e-12, 1e-8, 1e-5, 1e-4, 2e-4] {
            let phi = Vector3::new(0.6, -0.3, 0.9).normalize() * scale;
            assert_abs_diff_eq!(exp(&phi), exp_series(&phi, 40), epsilon = 1e-13);
        }
    }

    #[test]
    fn log_of_identity_is_zero() {
        assert_eq!(log(&Matrix3::identity()).unwrap(), Vector3::zeros());
    }

    #[test]
    fn log_exp_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..500 {
            let phi = random_vector(&mut rng, 1.0).normalize() * rng.random_range(0.0..3.1);
            let back = log(&exp(&phi)).unwrap();
            assert_abs_diff_eq!(back, phi, epsilon = 1e-10);
        }
    }

    #[test]
    fn exp_log_round_trip_near_pi() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let axis = random_vector(&mut rng, 1.0).normalize();
            for offset in [1e-3, 1e-5, 1e-7, 1e-9, 1e-12, 0.0] {
                let phi = axis * (PI - offset);
                let r = exp(&phi);
                let r_back = exp(&log(&r).unwrap());
                assert!(
                    (r_back - r).norm() < 1e-8,
                    "round-trip residual {} at offset {}",
                    (r_back - r).norm(),
                    offset
                );
            }
        }
    }

    #[test]
    fn log_at_pi_picks_canonical_branch() {
        // Rotation by pi about -x: axis sign is ambiguous, the canonical
        // output has a non-negative first nonzero component.
        let r = exp(&Vector3::new(-PI, 0.0, 0.0));
        let phi = log(&r).unwrap();
        assert!(phi.x > 0.0);
        assert_abs_diff_eq!(phi.norm(), PI, epsilon = 1e-9);
    }

    #[test]
    fn log_rejects_invalid_matrix() {
        let m = Matrix3::new(1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(matches!(log(&m), Err(Error::InvalidRotation { .. })));
    }

    #[test]
    fn jr_matches_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..200 {
            let phi = random_vector(&mut rng, 1.5);
            assert_abs_diff_eq!(jr(&phi), jr_series(&phi, 30), epsilon = 1e-12);
        }
        // Taylor branch: exact to truncation, which is far below 1e-13 here.
        for scale in [1e-12, 1e-8, 9e-5] {
            let phi = Vector3::new(1.0, 2.0, -2.0).normalize() * scale;
            assert_abs_diff_eq!(jr(&phi), jr_series(&phi, 30), epsilon = 1e-13);
        }
        // Trig branch just above the switch: (1 - cos t)/t^2 cancels about
        // eight digits, so entries are only good to around 1e-12 there.
        for scale in [1e-4, 2e-4, 1e-3] {
            let phi = Vector3::new(1.0, 2.0, -2.0).normalize() * scale;
            assert_abs_diff_eq!(jr(&phi), jr_series(&phi, 30), epsilon = 1e-11);
        }
    }

    #[test]
    fn jacobians_at_zero_are_identity() {
        let zero = Vector3::zeros();
        assert_eq!(jr(&zero), Matrix3::identity());
        assert_eq!(jl(&zero), Matrix3::identity());
        assert_eq!(jr_inv(&zero).unwrap(), Matrix3::identity());
        assert_eq!(jl_inv(&zero).unwrap(), Matrix3::identity());
    }

    #[test]
    fn jr_times_jr_inv_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..500 {
            let phi = random_vector(&mut rng, 1.0).normalize() * rng.random_range(0.0..3.0);
            let product = jr(&phi) * jr_inv(&phi).unwrap();
            assert_abs_diff_eq!(product, Matrix3::identity(), epsilon = 1e-10);
        }
    }

    #[test]
    fn jr_inv_matches_matrix_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..200 {
            let phi = random_vector(&mut rng, 1.0).normalize() * rng.random_range(1e-3..3.0);
            let inv = jr(&phi).try_inverse().unwrap();
            assert_abs_diff_eq!(jr_inv(&phi).unwrap(), inv, epsilon = 1e-9);
        }
    }

    #[test]
    fn jr_inv_domain_guard() {
        let phi = Vector3::new(PI - 1e-4, 0.0, 0.0);
        assert!(matches!(jr_inv(&phi), Err(Error::JacobianDomain { .. })));
        assert!(matches!(jl_inv(&phi), Err(Error::JacobianDomain { .. })));
    }

    #[test]
    fn transpose_and_negation_symmetries() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..200 {
            let phi = random_vector(&mut rng, 1.0).normalize() * rng.random_range(0.0..3.0);
            assert_abs_diff_eq!(jl(&phi), jr(&phi).transpose(), epsilon = 1e-12);
            assert_abs_diff_eq!(jl(&phi), jr(&-phi), epsilon = 1e-12);
            assert_abs_diff_eq!(
                jl_inv(&phi).unwrap(),
                jr_inv(&phi).unwrap().transpose(),
                epsilon = 1e-12
            );
            assert_abs_diff_eq!(
                jl_inv(&phi).unwrap(),
                jr_inv(&-phi).unwrap(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn first_order_expansion_right_jacobian() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..100 {
            let phi = random_vector(&mut rng, 1.0).normalize() * rng.random_range(0.1..2.5);
            let delta = random_vector(&mut rng, 1.0).normalize() * 1e-5;
            let lhs = exp(&(phi + delta));
            let rhs = exp(&phi) * exp(&(jr(&phi) * delta));
            assert!((lhs - rhs).norm() < 1e-8);
        }
    }

    #[test]
    fn project_recovers_perturbed_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..50 {
            let r = exp(&random_vector(&mut rng, 1.0));
            let noisy = r + Matrix3::from_fn(|_, _| rng.random_range(-1e-6..1e-6));
            let projected = project_to_rotation(&noisy);
            check_rotation(&projected).unwrap();
            assert!((projected - r).norm() < 1e-5);
        }
    }
}
