//! State manifolds and points on them.
//!
//! A [`Manifold`] describes the geometry the filter operates on: flat
//! Euclidean space, the rotation group with a chosen perturbation
//! convention, or an ordered product of both. Product manifolds are
//! first-class so that composite states (for example attitude plus gyro
//! bias) work with the same filter code as simple ones.
//!
//! All tangent vectors are plain `DVector<f64>` in the manifold's local
//! coordinates; product manifolds stack the components' tangents in
//! declaration order.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::so3;
use crate::so3_manifold::{self, So3Convention};

/// A differentiable manifold with a retraction (`boxplus`) and its local
/// inverse (`boxminus`).
#[derive(Clone, Debug, PartialEq)]
pub enum Manifold {
    /// Flat space of the given dimension; `boxplus` is vector addition.
    Euclidean(usize),
    /// Rotation matrices with a multiplicative perturbation convention.
    So3(So3Convention),
    /// Ordered product of component manifolds; tangents are stacked.
    Product(Vec<Manifold>),
}

/// A point on a [`Manifold`], mirroring its structure.
#[derive(Clone, Debug, PartialEq)]
pub enum Point {
    /// A point in flat space.
    Euclidean(DVector<f64>),
    /// A rotation matrix. Invariant: orthogonal with determinant +1
    /// (within [`so3::ROTATION_TOL`]) whenever built through the checked
    /// constructors or manifold operations.
    Rotation(Matrix3<f64>),
    /// A point on a product manifold, one entry per component.
    Product(Vec<Point>),
}

impl Point {
    /// Wraps a Euclidean vector.
    pub fn euclidean(v: DVector<f64>) -> Point {
        Point::Euclidean(v)
    }

    /// Wraps a matrix already known to be a rotation, after checking it.
    ///
    /// Use this for data produced outside the crate; operations inside the
    /// crate preserve the rotation invariant and never re-orthonormalize.
    pub fn rotation(r: Matrix3<f64>) -> Result<Point> {
        so3::check_rotation(&r)?;
        Ok(Point::Rotation(r))
    }

    /// Projects an approximate rotation (for example one read from a file)
    /// onto the rotation group and wraps it.
    pub fn rotation_projected(r: &Matrix3<f64>) -> Point {
        Point::Rotation(so3::project_to_rotation(r))
    }

    /// Wraps a list of component points.
    pub fn product(parts: Vec<Point>) -> Point {
        Point::Product(parts)
    }

    /// The Euclidean vector, if this is a Euclidean point.
    pub fn as_euclidean(&self) -> Option<&DVector<f64>> {
        match self {
            Point::Euclidean(v) => Some(v),
            _ => None,
        }
    }

    /// The rotation matrix, if this is a rotation point.
    pub fn as_rotation(&self) -> Option<&Matrix3<f64>> {
        match self {
            Point::Rotation(r) => Some(r),
            _ => None,
        }
    }

    /// The component points, if this is a product point.
    pub fn as_product(&self) -> Option<&[Point]> {
        match self {
            Point::Product(parts) => Some(parts),
            _ => None,
        }
    }

    /// True when every entry of the representation is finite.
    pub fn is_finite(&self) -> bool {
        match self {
            Point::Euclidean(v) => v.iter().all(|x| x.is_finite()),
            Point::Rotation(r) => r.iter().all(|x| x.is_finite()),
            Point::Product(parts) => parts.iter().all(Point::is_finite),
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Point::Euclidean(_) => "Euclidean vector",
            Point::Rotation(_) => "rotation matrix",
            Point::Product(_) => "product point",
        }
    }
}

impl Manifold {
    /// Shorthand for the rotation manifold with the right (body-frame)
    /// perturbation convention.
    pub fn so3_right() -> Manifold {
        Manifold::So3(So3Convention::RightPerturbation)
    }

    /// Shorthand for the rotation manifold with the left (world-frame)
    /// perturbation convention.
    pub fn so3_left() -> Manifold {
        Manifold::So3(So3Convention::LeftPerturbation)
    }

    /// Dimension of the tangent space (and of every tangent vector).
    pub fn tangent_dim(&self) -> usize {
        match self {
            Manifold::Euclidean(d) => *d,
            Manifold::So3(_) => 3,
            Manifold::Product(parts) => parts.iter().map(Manifold::tangent_dim).sum(),
        }
    }

    /// A canonical reference point: the zero vector, the identity rotation,
    /// or the product of component origins.
    pub fn origin(&self) -> Point {
        match self {
            Manifold::Euclidean(d) => Point::Euclidean(DVector::zeros(*d)),
            Manifold::So3(_) => Point::Rotation(Matrix3::identity()),
            Manifold::Product(parts) => {
                Point::Product(parts.iter().map(Manifold::origin).collect())
            }
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Manifold::Euclidean(_) => "Euclidean vector",
            Manifold::So3(_) => "rotation matrix",
            Manifold::Product(_) => "product point",
        }
    }

    /// Checks that `p` structurally matches this manifold and that every
    /// rotation component is a valid rotation matrix.
    pub fn check_point(&self, p: &Point) -> Result<()> {
        match (self, p) {
            (Manifold::Euclidean(d), Point::Euclidean(v)) => {
                if v.len() != *d {
                    return Err(Error::DimensionMismatch {
                        context: "Euclidean point",
                        expected: *d,
                        actual: v.len(),
                    });
                }
                Ok(())
            }
            (Manifold::So3(_), Point::Rotation(r)) => so3::check_rotation(r),
            (Manifold::Product(ms), Point::Product(ps)) => {
                if ms.len() != ps.len() {
                    return Err(Error::DimensionMismatch {
                        context: "product point components",
                        expected: ms.len(),
                        actual: ps.len(),
                    });
                }
                for (m, q) in ms.iter().zip(ps) {
                    m.check_point(q)?;
                }
                Ok(())
            }
            (m, p) => Err(Error::PointMismatch {
                expected: m.kind(),
                found: p.kind(),
            }),
        }
    }

    fn check_tangent(&self, context: &'static str, delta: &DVector<f64>) -> Result<()> {
        if delta.len() != self.tangent_dim() {
            return Err(Error::DimensionMismatch {
                context,
                expected: self.tangent_dim(),
                actual: delta.len(),
            });
        }
        Ok(())
    }

    /// Retraction: moves from `p` along the tangent vector `delta`.
    ///
    /// Euclidean components add; rotation components apply the
    /// multiplicative increment on the side selected by their convention.
    pub fn boxplus(&self, p: &Point, delta: &DVector<f64>) -> Result<Point> {
        self.check_tangent("boxplus tangent", delta)?;
        match (self, p) {
            (Manifold::Euclidean(_), Point::Euclidean(v)) => Ok(Point::Euclidean(v + delta)),
            (Manifold::So3(conv), Point::Rotation(r)) => {
                let d = Vector3::new(delta[0], delta[1], delta[2]);
                Ok(Point::Rotation(so3_manifold::boxplus(r, &d, *conv)))
            }
            (Manifold::Product(ms), Point::Product(ps)) => {
                if ms.len() != ps.len() {
                    return Err(Error::DimensionMismatch {
                        context: "product point components",
                        expected: ms.len(),
                        actual: ps.len(),
                    });
                }
                let mut parts = Vec::with_capacity(ms.len());
                let mut offset = 0;
                for (m, q) in ms.iter().zip(ps) {
                    let d = m.tangent_dim();
                    parts.push(m.boxplus(q, &delta.rows(offset, d).into_owned())?);
                    offset += d;
                }
                Ok(Point::Product(parts))
            }
            (m, p) => Err(Error::PointMismatch {
                expected: m.kind(),
                found: p.kind(),
            }),
        }
    }

    /// Local inverse of [`Manifold::boxplus`]: the tangent vector at `b`
    /// that reaches `a`, so that `b (+) (a (-) b) = a`.
    pub fn boxminus(&self, a: &Point, b: &Point) -> Result<DVector<f64>> {
        match (self, a, b) {
            (Manifold::Euclidean(d), Point::Euclidean(va), Point::Euclidean(vb)) => {
                if va.len() != *d || vb.len() != *d {
                    return Err(Error::DimensionMismatch {
                        context: "boxminus operand",
                        expected: *d,
                        actual: if va.len() != *d { va.len() } else { vb.len() },
                    });
                }
                Ok(va - vb)
            }
            (Manifold::So3(conv), Point::Rotation(ra), Point::Rotation(rb)) => {
                let d = so3_manifold::boxminus(ra, rb, *conv)?;
                Ok(DVector::from_column_slice(d.as_slice()))
            }
            (Manifold::Product(ms), Point::Product(pa), Point::Product(pb)) => {
                if ms.len() != pa.len() || ms.len() != pb.len() {
                    return Err(Error::DimensionMismatch {
                        context: "product point components",
                        expected: ms.len(),
                        actual: if pa.len() != ms.len() {
                            pa.len()
                        } else {
                            pb.len()
                        },
                    });
                }
                let mut delta = DVector::zeros(self.tangent_dim());
                let mut offset = 0;
                for ((m, qa), qb) in ms.iter().zip(pa).zip(pb) {
                    let d = m.tangent_dim();
                    delta.rows_mut(offset, d).copy_from(&m.boxminus(qa, qb)?);
                    offset += d;
                }
                Ok(delta)
            }
            (m, a, b) => Err(Error::PointMismatch {
                expected: m.kind(),
                found: if matches!(
                    (m, a),
                    (Manifold::Euclidean(_), Point::Euclidean(_))
                        | (Manifold::So3(_), Point::Rotation(_))
                        | (Manifold::Product(_), Point::Product(_))
                ) {
                    b.kind()
                } else {
                    a.kind()
                },
            }),
        }
    }

    /// Shorthand for `origin (+) tangent`.
    pub fn exp(&self, tangent: &DVector<f64>) -> Result<Point> {
        self.boxplus(&self.origin(), tangent)
    }

    /// Jacobian of `p (+) phi` with respect to additive changes of `phi`,
    /// expressed in the tangent space at `p (+) phi`. Identity on Euclidean
    /// components; the right or left Jacobian of the rotation group on
    /// rotation components; block diagonal on products.
    ///
    /// This equals the inverse of [`Manifold::update_jacobian`] at the same
    /// argument, in closed form.
    pub fn boxplus_jacobian_l(&self, phi: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_tangent("boxplus Jacobian argument", phi)?;
        let n = self.tangent_dim();
        let mut out = DMatrix::identity(n, n);
        self.fill_boxplus_jacobian_l(phi, &mut out, 0);
        Ok(out)
    }

    fn fill_boxplus_jacobian_l(&self, phi: &DVector<f64>, out: &mut DMatrix<f64>, offset: usize) {
        match self {
            Manifold::Euclidean(_) => {}
            Manifold::So3(conv) => {
                let p = Vector3::new(phi[offset], phi[offset + 1], phi[offset + 2]);
                out.view_mut((offset, offset), (3, 3))
                    .copy_from(&so3_manifold::boxplus_jacobian_l(&p, *conv));
            }
            Manifold::Product(ms) => {
                let mut local = offset;
                for m in ms {
                    m.fill_boxplus_jacobian_l(phi, out, local);
                    local += m.tangent_dim();
                }
            }
        }
    }

    /// Jacobian of the boxminus-to-boxplus change of coordinates at the
    /// tangent offset `delta` — the matrix the iterated update multiplies
    /// the Kalman correction structure by. Identity on Euclidean
    /// components; the inverse right or left Jacobian on rotation
    /// components; block diagonal on products.
    ///
    /// Fails with a domain error when a rotation component's offset angle
    /// is too close to pi for the closed form to be well conditioned.
    pub fn update_jacobian(&self, delta: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_tangent("update Jacobian argument", delta)?;
        let n = self.tangent_dim();
        let mut out = DMatrix::identity(n, n);
        self.fill_update_jacobian(delta, &mut out, 0)?;
        Ok(out)
    }

    fn fill_update_jacobian(
        &self,
        delta: &DVector<f64>,
        out: &mut DMatrix<f64>,
        offset: usize,
    ) -> Result<()> {
        match self {
            Manifold::Euclidean(_) => Ok(()),
            Manifold::So3(conv) => {
                let d = Vector3::new(delta[offset], delta[offset + 1], delta[offset + 2]);
                out.view_mut((offset, offset), (3, 3))
                    .copy_from(&so3_manifold::update_jacobian_j(&d, *conv)?);
                Ok(())
            }
            Manifold::Product(ms) => {
                let mut local = offset;
                for m in ms {
                    m.fill_update_jacobian(delta, out, local)?;
                    local += m.tangent_dim();
                }
                Ok(())
            }
        }
    }
}
