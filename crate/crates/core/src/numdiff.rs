//! Numerical Jacobians of maps between manifolds.
//!
//! Central differences through the local coordinates defined by `boxplus`
//! and `boxminus`. These serve two purposes: an independent cross-check of
//! the closed-form Jacobians in tests, and a fallback when a model has no
//! analytic derivative (for example the noise Jacobian of a black-box
//! process model).

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::manifold::{Manifold, Point};

/// Step size giving near-optimal central-difference accuracy for
/// well-scaled problems (truncation and rounding error both around 1e-10).
pub const DEFAULT_STEP: f64 = 1e-6;

/// Jacobian of a manifold-to-manifold map at `at`, in the local coordinates
/// of `domain` at `at` and of `codomain` at `f(at)`.
pub fn jacobian_point_fn<F>(
    domain: &Manifold,
    codomain: &Manifold,
    at: &Point,
    step: f64,
    f: F,
) -> Result<DMatrix<f64>>
where
    F: Fn(&Point) -> Result<Point>,
{
    let center = f(at)?;
    let cols = domain.tangent_dim();
    let rows = codomain.tangent_dim();
    let mut jac = DMatrix::zeros(rows, cols);
    let mut probe = DVector::zeros(cols);
    for j in 0..cols {
        probe[j] = step;
        let plus = codomain.boxminus(&f(&domain.boxplus(at, &probe)?)?, &center)?;
        probe[j] = -step;
        let minus = codomain.boxminus(&f(&domain.boxplus(at, &probe)?)?, &center)?;
        probe[j] = 0.0;
        jac.column_mut(j)
            .copy_from(&((plus - minus) / (2.0 * step)));
    }
    Ok(jac)
}

/// Jacobian of a manifold-to-vector map at `at`, in the local coordinates
/// of `domain` at `at`.
pub fn jacobian_vector_fn<F>(domain: &Manifold, at: &Point, step: f64, f: F) -> Result<DMatrix<f64>>
where
    F: Fn(&Point) -> Result<DVector<f64>>,
{
    let cols = domain.tangent_dim();
    let rows = f(at)?.len();
    let mut jac = DMatrix::zeros(rows, cols);
    let mut probe = DVector::zeros(cols);
    for j in 0..cols {
        probe[j] = step;
        let plus = f(&domain.boxplus(at, &probe)?)?;
        probe[j] = -step;
        let minus = f(&domain.boxplus(at, &probe)?)?;
        probe[j] = 0.0;
        jac.column_mut(j)
            .copy_from(&((plus - minus) / (2.0 * step)));
    }
    Ok(jac)
}

/// Jacobian of a vector-to-manifold map with respect to its vector argument,
/// in the local coordinates of `codomain` at `f(at)`. Used for noise
/// Jacobians, where the argument is a noise vector rather than a state.
pub fn jacobian_param_fn<F>(
    codomain: &Manifold,
    at: &DVector<f64>,
    step: f64,
    f: F,
) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Result<Point>,
{
    let center = f(at)?;
    let cols = at.len();
    let rows = codomain.tangent_dim();
    let mut jac = DMatrix::zeros(rows, cols);
    let mut shifted = at.clone();
    for j in 0..cols {
        shifted[j] = at[j] + step;
        let plus = codomain.boxminus(&f(&shifted)?, &center)?;
        shifted[j] = at[j] - step;
        let minus = codomain.boxminus(&f(&shifted)?, &center)?;
        shifted[j] = at[j];
        jac.column_mut(j)
            .copy_from(&((plus - minus) / (2.0 * step)));
    }
    Ok(jac)
}

/// Numerical version of [`Manifold::update_jacobian`]: differentiates
/// `(iterate (+) d) (-) reference` with respect to `d` at zero.
pub fn update_jacobian(
    manifold: &Manifold,
    iterate: &Point,
    reference: &Point,
    step: f64,
) -> Result<DMatrix<f64>> {
    jacobian_vector_fn(manifold, iterate, step, |x| manifold.boxminus(x, reference))
}

/// Numerical version of [`Manifold::boxplus_jacobian_l`]: differentiates
/// `(base (+) (phi + e)) (-) (base (+) phi)` with respect to `e` at zero.
pub fn boxplus_jacobian_l(
    manifold: &Manifold,
    base: &Point,
    phi: &DVector<f64>,
    step: f64,
) -> Result<DMatrix<f64>> {
    jacobian_param_fn(manifold, phi, step, |v| manifold.boxplus(base, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::so3;
    use approx::assert_abs_diff_eq;
    use nalgebra::Vector3;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_tangent(rng: &mut ChaCha8Rng, dim: usize, max: f64) -> DVector<f64> {
        DVector::from_fn(dim, |_, _| rng.random_range(-max..max))
    }

    #[test]
    fn linear_map_is_recovered_exactly() {
        let domain = Manifold::Euclidean(3);
        let a = DMatrix::from_row_slice(2, 3, &[1.0, -2.0, 0.5, 3.0, 0.0, -1.0]);
        let at = Point::euclidean(DVector::from_vec(vec![0.3, -0.7, 2.0]));
        let f = |x: &Point| Ok(&a * x.as_euclidean().unwrap());
        let jac = jacobian_vector_fn(&domain, &at, DEFAULT_STEP, f).unwrap();
        assert_abs_diff_eq!(jac, a, epsilon = 1e-9);
    }

    #[test]
    fn boxplus_jacobian_matches_rotation_group_jacobian() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for m in [Manifold::so3_right(), Manifold::so3_left()] {
            for _ in 0..20 {
                let base = m.exp(&random_tangent(&mut rng, 3, 1.5)).unwrap();
                let phi = random_tangent(&mut rng, 3, 1.5);
                let fd = boxplus_jacobian_l(&m, &base, &phi, DEFAULT_STEP).unwrap();
                let analytic = m.boxplus_jacobian_l(&phi).unwrap();
                assert_abs_diff_eq!(fd, analytic, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn update_jacobian_matches_closed_form_on_product() {
        let m = Manifold::Product(vec![Manifold::so3_right(), Manifold::Euclidean(2)]);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            let reference = m.exp(&random_tangent(&mut rng, 5, 1.0)).unwrap();
            let iterate = m
                .boxplus(&reference, &random_tangent(&mut rng, 5, 1.0))
                .unwrap();
            let fd = update_jacobian(&m, &iterate, &reference, DEFAULT_STEP).unwrap();
            let analytic = m
                .update_jacobian(&m.boxminus(&iterate, &reference).unwrap())
                .unwrap();
            assert_abs_diff_eq!(fd, analytic, epsilon = 1e-7);
        }
    }

    #[test]
    fn point_fn_jacobian_of_left_translation_is_adjoint() {
        // For f(R) = Q R with the right convention, the Jacobian is the
        // identity; for f(R) = R Q it is Q' (conjugation by the increment).
        let m = Manifold::so3_right();
        let q = so3::exp(&Vector3::new(0.4, -0.3, 0.9));
        let at = Point::rotation(so3::exp(&Vector3::new(-0.2, 0.8, 0.1))).unwrap();

        let left = |x: &Point| Point::rotation(q * x.as_rotation().unwrap());
        let jac = jacobian_point_fn(&m, &m, &at, DEFAULT_STEP, left).unwrap();
        assert_abs_diff_eq!(jac, DMatrix::identity(3, 3), epsilon = 1e-8);

        let right = |x: &Point| Point::rotation(x.as_rotation().unwrap() * q);
        let jac = jacobian_point_fn(&m, &m, &at, DEFAULT_STEP, right).unwrap();
        let qt = q.transpose();
        let expected = DMatrix::from_iterator(3, 3, qt.iter().copied());
        assert_abs_diff_eq!(jac, expected, epsilon = 1e-8);
    }

    #[test]
    fn param_fn_jacobian_of_exp_at_origin_is_identity() {
        let m = Manifold::so3_left();
        let at = DVector::zeros(3);
        let jac = jacobian_param_fn(&m, &at, DEFAULT_STEP, |v| m.exp(v)).unwrap();
        assert_abs_diff_eq!(jac, DMatrix::identity(3, 3), epsilon = 1e-9);
    }
}
