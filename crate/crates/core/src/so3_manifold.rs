//! The two rotation-manifold perturbation conventions and their closed-form
//! filter Jacobians.
//!
//! With the right (body-frame) convention an increment multiplies the
//! estimate from the right, `R (+) d = R Exp(d)`; with the left (world-frame)
//! convention it multiplies from the left, `R (+) d = Exp(d) R`. The
//! propagation Jacobian of gyro-driven dynamics and the update Jacobian of
//! the iterated filter both have closed forms that depend on the convention;
//! the generic filter consumes these through [`crate::manifold::Manifold`],
//! while the functions here double as fast paths and test references.

use nalgebra::{Matrix3, Vector3};

use crate::error::Result;
use crate::so3;

/// Which side the multiplicative increment is applied to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum So3Convention {
    /// `R (+) d = R Exp(d)`; the increment lives in the body frame.
    RightPerturbation,
    /// `R (+) d = Exp(d) R`; the increment lives in the world frame.
    LeftPerturbation,
}

/// Applies a tangent increment to a rotation under the given convention.
pub fn boxplus(r: &Matrix3<f64>, delta: &Vector3<f64>, conv: So3Convention) -> Matrix3<f64> {
    match conv {
        So3Convention::RightPerturbation => r * so3::exp(delta),
        So3Convention::LeftPerturbation => so3::exp(delta) * r,
    }
}

/// Tangent difference between two rotations under the given convention.
///
/// Right: `Log(Rb' Ra)`; left: `Log(Ra Rb')`.
pub fn boxminus(ra: &Matrix3<f64>, rb: &Matrix3<f64>, conv: So3Convention) -> Result<Vector3<f64>> {
    match conv {
        So3Convention::RightPerturbation => so3::log(&(rb.transpose() * ra)),
        So3Convention::LeftPerturbation => so3::log(&(ra * rb.transpose())),
    }
}

/// Closed-form propagation Jacobian of `R_k = R_{k-1} Exp(delta)` where
/// `delta` is the integrated angular rate over the step.
///
/// Right convention: `Exp(-delta)`. Left convention: the identity.
pub fn propagation_jacobian_f(omega_integral: &Vector3<f64>, conv: So3Convention) -> Matrix3<f64> {
    match conv {
        So3Convention::RightPerturbation => so3::exp(&-omega_integral),
        So3Convention::LeftPerturbation => Matrix3::identity(),
    }
}

/// Closed-form update Jacobian at the iterate offset `delta_phi` from the
/// prediction.
///
/// Right convention: `jr_inv(delta_phi)`; left convention: `jl_inv(delta_phi)`.
/// Inherits the inverse-Jacobian domain guard near `|delta_phi| = pi`.
pub fn update_jacobian_j(delta_phi: &Vector3<f64>, conv: So3Convention) -> Result<Matrix3<f64>> {
    match conv {
        So3Convention::RightPerturbation => so3::jr_inv(delta_phi),
        So3Convention::LeftPerturbation => so3::jl_inv(delta_phi),
    }
}

/// Derivative of the exponential map composed with boxminus at `phi`:
/// the Jacobian that relates additive tangent increments to the manifold
/// increment. Right convention: `jr(phi)`; left convention: `jl(phi)`.
pub fn boxplus_jacobian_l(phi: &Vector3<f64>, conv: So3Convention) -> Matrix3<f64> {
    match conv {
        So3Convention::RightPerturbation => so3::jr(phi),
        So3Convention::LeftPerturbation => so3::jl(phi),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const CONVENTIONS: [So3Convention; 2] = [
        So3Convention::RightPerturbation,
        So3Convention::LeftPerturbation,
    ];

    fn random_tangent(rng: &mut ChaCha8Rng, max_norm: f64) -> Vector3<f64> {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        v.normalize() * rng.random_range(0.0..max_norm)
    }

    fn random_rotation(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
        so3::exp(&random_tangent(rng, 3.1))
    }

    #[test]
    fn boxplus_zero_is_identity_increment() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = random_rotation(&mut rng);
        for conv in CONVENTIONS {
            assert_abs_diff_eq!(boxplus(&r, &Vector3::zeros(), conv), r, epsilon = 1e-15);
        }
    }

    #[test]
    fn conventions_coincide_at_identity() {
        let delta = Vector3::new(0.1, 0.0, 0.0);
        let expected = so3::exp(&delta);
        for conv in CONVENTIONS {
            assert_abs_diff_eq!(
                boxplus(&Matrix3::identity(), &delta, conv),
                expected,
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn left_boxplus_equals_right_with_rotated_tangent() {
        // Exp(d) R = R Exp(R' d)
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let r = random_rotation(&mut rng);
            let delta = random_tangent(&mut rng, 2.0);
            let left = boxplus(&r, &delta, So3Convention::LeftPerturbation);
            let right = boxplus(
                &r,
                &(r.transpose() * delta),
                So3Convention::RightPerturbation,
            );
            assert_abs_diff_eq!(left, right, epsilon = 1e-13);
        }
    }

    #[test]
    fn boxminus_of_equal_rotations_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let r = random_rotation(&mut rng);
        for conv in CONVENTIONS {
            assert_abs_diff_eq!(
                boxminus(&r, &r, conv).unwrap(),
                Vector3::zeros(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn boxminus_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let r = random_rotation(&mut rng);
            let delta = random_tangent(&mut rng, 3.1);
            for conv in CONVENTIONS {
                let recovered = boxminus(&boxplus(&r, &delta, conv), &r, conv).unwrap();
                assert_abs_diff_eq!(recovered, delta, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn right_boxminus_of_identity_and_exp_is_negated() {
        let phi = Vector3::new(0.4, -0.2, 0.6);
        let delta = boxminus(
            &Matrix3::identity(),
            &so3::exp(&phi),
            So3Convention::RightPerturbation,
        )
        .unwrap();
        assert_abs_diff_eq!(delta, -phi, epsilon = 1e-12);
    }

    #[test]
    fn boxminus_conventions_related_by_frame_change() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..200 {
            let ra = random_rotation(&mut rng);
            let rb = random_rotation(&mut rng);
            let right = boxminus(&ra, &rb, So3Convention::RightPerturbation).unwrap();
            let left = boxminus(&ra, &rb, So3Convention::LeftPerturbation).unwrap();
            assert_abs_diff_eq!(right, rb.transpose() * left, epsilon = 1e-10);
        }
    }

    #[test]
    fn propagation_jacobian_forms() {
        let delta = Vector3::new(0.2, 0.0, 0.0);
        assert_abs_diff_eq!(
            propagation_jacobian_f(&delta, So3Convention::RightPerturbation),
            so3::exp(&Vector3::new(-0.2, 0.0, 0.0)),
            epsilon = 1e-15
        );
        assert_eq!(
            propagation_jacobian_f(&delta, So3Convention::LeftPerturbation),
            Matrix3::identity()
        );
    }

    #[test]
    fn update_jacobian_at_zero_is_identity() {
        for conv in CONVENTIONS {
            assert_eq!(
                update_jacobian_j(&Vector3::zeros(), conv).unwrap(),
                Matrix3::identity()
            );
        }
    }

    #[test]
    fn left_update_jacobian_is_right_at_negated_argument() {
        let delta_phi = Vector3::new(0.3, -0.1, 0.2);
        let left = update_jacobian_j(&delta_phi, So3Convention::LeftPerturbation).unwrap();
        let right = update_jacobian_j(&-delta_phi, So3Convention::RightPerturbation).unwrap();
        assert_abs_diff_eq!(left, right, epsilon = 1e-14);
    }
}
