//! The manifold-generic iterated extended Kalman filter.
//!
//! The filter keeps its belief as a [`GaussianState`]: a mean point on a
//! [`Manifold`] plus a covariance over the tangent space at that mean.
//! [`Iekf::propagate`] pushes the belief through a [`ProcessModel`];
//! [`Iekf::iterated_update`] refines it against a [`MeasurementModel`] by
//! re-linearizing the measurement at each iterate (a Gauss-Newton scheme),
//! applying the covariance update once with the final iteration's
//! linearization.
//!
//! Because the mean moves away from the linearization point of the prior
//! during the iteration, each iterate carries a change-of-coordinates
//! matrix `L` (the inverse of the update Jacobian `J`) that maps tangent
//! vectors at the prior into tangent vectors at the iterate. On flat
//! manifolds `J = L = I` and the loop reduces to the classic update.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::manifold::{Manifold, Point};
use crate::variants::{self, symmetric_condition, CONDITION_LIMIT};

/// Mean point and tangent-space covariance — the filter's belief.
#[derive(Clone, Debug)]
pub struct GaussianState {
    /// Mean estimate on the manifold.
    pub mean: Point,
    /// Covariance of the tangent-space error at the mean; symmetric
    /// positive semidefinite, dimension = the manifold's tangent dimension.
    pub covariance: DMatrix<f64>,
}

impl GaussianState {
    /// Bundles a mean and covariance.
    pub fn new(mean: Point, covariance: DMatrix<f64>) -> GaussianState {
        GaussianState { mean, covariance }
    }
}

/// Discrete-time dynamics `x_k = f(x_{k-1}, u_{k-1}, w_{k-1})` with noise
/// `w ~ N(0, Q)` and Jacobians taken at `w = 0` through the manifold's
/// local coordinates.
pub trait ProcessModel {
    /// Evaluates the dynamics.
    fn f(&self, x: &Point, u: &DVector<f64>, w: &DVector<f64>) -> Result<Point>;

    /// d x d Jacobian of `f` with respect to the state, at `(x, u, 0)`.
    fn jacobian_f(&self, x: &Point, u: &DVector<f64>) -> Result<DMatrix<f64>>;

    /// d x q Jacobian of `f` with respect to the noise, at `(x, u, 0)`.
    fn jacobian_g(&self, x: &Point, u: &DVector<f64>) -> Result<DMatrix<f64>>;

    /// q x q process noise covariance (symmetric PSD).
    fn noise_covariance(&self) -> DMatrix<f64>;

    /// Noise dimension q.
    fn noise_dim(&self) -> usize {
        self.noise_covariance().nrows()
    }
}

/// Observation `z = h(x) + n` with additive noise `n ~ N(0, R)`.
pub trait MeasurementModel {
    /// Predicts the measurement at `x`.
    fn h(&self, x: &Point) -> Result<DVector<f64>>;

    /// m x d measurement Jacobian at `x`, through the manifold's local
    /// coordinates.
    fn jacobian_h(&self, x: &Point) -> Result<DMatrix<f64>>;

    /// m x m measurement noise covariance (symmetric positive definite).
    fn noise_covariance(&self) -> DMatrix<f64>;
}

/// Strategy for computing the per-iteration gain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UpdateVariant {
    /// Innovation form: factor the m x m innovation covariance.
    Standard,
    /// Whiten the measurement, QR-compress it to at most d rows, then run
    /// the innovation form on the compressed rows. Falls back to
    /// [`UpdateVariant::Standard`] when the measurement has fewer rows than
    /// the state has dimensions (nothing to compress).
    QrCompressed,
    /// Information form: invert a d x d information matrix instead of the
    /// innovation covariance.
    InformationForm,
}

/// Tuning knobs of the iterated update.
#[derive(Clone, Debug, PartialEq)]
pub struct IekfConfig {
    /// Maximum number of update iterations n (at least 1).
    pub max_iterations: usize,
    /// Termination threshold: the loop exits once an applied increment has
    /// Euclidean norm below this value.
    pub termination_threshold: f64,
    /// Compute the update Jacobian `J` exactly; when false, `J` (and hence
    /// `L`) is approximated by the identity, which is accurate for small
    /// increments.
    pub exact_jacobian: bool,
    /// Gain computation strategy.
    pub update_variant: UpdateVariant,
}

impl Default for IekfConfig {
    fn default() -> IekfConfig {
        IekfConfig {
            max_iterations: 10,
            termination_threshold: 1e-8,
            exact_jacobian: true,
            update_variant: UpdateVariant::Standard,
        }
    }
}

impl IekfConfig {
    /// Checks the invariants (`max_iterations >= 1`, threshold positive).
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::Precondition(
                "max_iterations must be at least 1".into(),
            ));
        }
        // NaN must fail too, so test for the accepted range directly.
        if self.termination_threshold.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::Precondition(
                "termination_threshold must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Diagnostics from one iterated update.
#[derive(Clone, Debug)]
pub struct UpdateReport {
    /// Number of iterations executed (between 1 and `max_iterations`).
    pub iterations_used: usize,
    /// Euclidean norm of each applied increment, in order.
    pub delta_norms: Vec<f64>,
    /// True when the loop exited because an increment fell below the
    /// termination threshold.
    pub converged: bool,
    /// Measurement residual `z - h(x)` evaluated at the returned posterior
    /// mean.
    pub innovation_final: DVector<f64>,
}

/// The iterated extended Kalman filter over a fixed manifold.
///
/// Holds no state between calls; every method is a pure transformation of
/// its inputs, so one instance may serve many filtering timelines.
#[derive(Clone, Debug)]
pub struct Iekf {
    manifold: Manifold,
    config: IekfConfig,
}

impl Iekf {
    /// Builds a filter over `manifold` after validating `config`.
    pub fn new(manifold: Manifold, config: IekfConfig) -> Result<Iekf> {
        config.validate()?;
        Ok(Iekf { manifold, config })
    }

    /// The manifold the filter operates on.
    pub fn manifold(&self) -> &Manifold {
        &self.manifold
    }

    /// The active configuration.
    pub fn config(&self) -> &IekfConfig {
        &self.config
    }

    fn check_state(&self, state: &GaussianState) -> Result<()> {
        self.manifold.check_point(&state.mean)?;
        let d = self.manifold.tangent_dim();
        if state.covariance.nrows() != d || state.covariance.ncols() != d {
            return Err(Error::DimensionMismatch {
                context: "state covariance",
                expected: d,
                actual: state.covariance.nrows(),
            });
        }
        Ok(())
    }

    /// Propagates the belief through the process model: the mean through
    /// the noise-free dynamics, the covariance as `F P F' + G Q G'`
    /// (symmetrized).
    pub fn propagate<P: ProcessModel>(
        &self,
        state: &GaussianState,
        model: &P,
        u: &DVector<f64>,
    ) -> Result<GaussianState> {
        self.check_state(state)?;
        let d = self.manifold.tangent_dim();

        let mean = model.f(&state.mean, u, &DVector::zeros(model.noise_dim()))?;
        if !mean.is_finite() {
            return Err(Error::NonFinite {
                what: "propagated mean",
            });
        }

        let f = model.jacobian_f(&state.mean, u)?;
        if f.nrows() != d || f.ncols() != d {
            return Err(Error::DimensionMismatch {
                context: "process Jacobian F",
                expected: d,
                actual: f.nrows(),
            });
        }
        let g = model.jacobian_g(&state.mean, u)?;
        let q = model.noise_covariance();
        if g.nrows() != d || g.ncols() != q.nrows() {
            return Err(Error::DimensionMismatch {
                context: "noise Jacobian G",
                expected: d,
                actual: g.nrows(),
            });
        }

        let mut covariance = &f * &state.covariance * f.transpose() + &g * q * g.transpose();
        covariance = (&covariance + covariance.transpose()) * 0.5;
        if covariance.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                what: "propagated covariance",
            });
        }
        Ok(GaussianState::new(mean, covariance))
    }

    /// Update Jacobian `J` at the iterate: the derivative of
    /// `(x_iter (+) d) (-) x_prior` with respect to `d`. Identity when the
    /// configuration asks for the identity approximation or when the
    /// manifold is flat.
    pub fn compute_j(&self, x_iter: &Point, x_prior: &Point) -> Result<DMatrix<f64>> {
        let d = self.manifold.tangent_dim();
        if !self.config.exact_jacobian {
            return Ok(DMatrix::identity(d, d));
        }
        let dx = self.manifold.boxminus(x_iter, x_prior)?;
        self.manifold.update_jacobian(&dx)
    }

    /// Runs the iterated measurement update starting from the prior.
    ///
    /// Each iteration linearizes `h` at the current iterate, computes the
    /// gain with the configured [`UpdateVariant`], applies the increment,
    /// and exits once an increment's norm falls below the termination
    /// threshold or the iteration budget is spent. The covariance is
    /// updated once, after the loop, using the final iteration's gain and
    /// linearization. Exhausting the budget is reported through
    /// [`UpdateReport::converged`], not as an error.
    pub fn iterated_update<M: MeasurementModel>(
        &self,
        prior: &GaussianState,
        model: &M,
        z: &DVector<f64>,
    ) -> Result<(GaussianState, UpdateReport)> {
        self.check_state(prior)?;
        let d = self.manifold.tangent_dim();
        let r_full = model.noise_covariance();

        let mut x_iter = prior.mean.clone();
        let mut delta_norms = Vec::new();
        let mut converged = false;
        // Final-iteration quantities for the covariance update.
        let mut last: Option<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> = None;

        for _ in 0..self.config.max_iterations {
            let predicted = model.h(&x_iter)?;
            if predicted.len() != z.len() {
                return Err(Error::DimensionMismatch {
                    context: "measurement",
                    expected: predicted.len(),
                    actual: z.len(),
                });
            }
            let innovation = z - &predicted;
            let h = model.jacobian_h(&x_iter)?;
            if h.nrows() != z.len() || h.ncols() != d {
                return Err(Error::DimensionMismatch {
                    context: "measurement Jacobian H",
                    expected: d,
                    actual: h.ncols(),
                });
            }

            let dx = self.manifold.boxminus(&x_iter, &prior.mean)?;
            let l = if self.config.exact_jacobian && !is_flat(&self.manifold) {
                let j = self.manifold.update_jacobian(&dx)?;
                j.try_inverse().ok_or(Error::Precondition(
                    "update Jacobian is numerically singular".into(),
                ))?
            } else {
                DMatrix::identity(d, d)
            };

            let mut lpl = &l * &prior.covariance * l.transpose();
            lpl = (&lpl + lpl.transpose()) * 0.5;

            // The gain and the measurement quantities it applies to; the
            // QR variant replaces (H, innovation, R) by their compressed
            // images.
            let (gain, h_eff, innov_eff) = match self.config.update_variant {
                UpdateVariant::QrCompressed if z.len() >= d => {
                    let (wh, wi) = variants::whiten(&h, &innovation, &r_full)?;
                    let unit = DMatrix::identity(z.len(), z.len());
                    let c = variants::qr_compress(&wh, &wi, &unit)?;
                    let k = innovation_form_gain(&c.jacobian, &lpl, &c.noise)?;
                    (k, c.jacobian, c.residual)
                }
                UpdateVariant::InformationForm => {
                    let k = variants::information_form_gain(&h, &l, &prior.covariance, &r_full)?;
                    (k, h.clone(), innovation.clone())
                }
                _ => {
                    let k = innovation_form_gain(&h, &lpl, &r_full)?;
                    (k, h.clone(), innovation.clone())
                }
            };

            let ldx = &l * &dx;
            let delta = &gain * (&h_eff * &ldx + &innov_eff) - &ldx;
            if delta.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite {
                    what: "update increment",
                });
            }

            x_iter = self.manifold.boxplus(&x_iter, &delta)?;
            let norm = delta.norm();
            delta_norms.push(norm);
            last = Some((gain, h_eff, lpl));

            if norm < self.config.termination_threshold {
                converged = true;
                break;
            }
        }

        let (gain, h_eff, lpl) = last.expect("at least one iteration runs");
        let mut covariance = (DMatrix::identity(d, d) - &gain * &h_eff) * &lpl;
        covariance = (&covariance + covariance.transpose()) * 0.5;
        if covariance.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                what: "posterior covariance",
            });
        }

        let innovation_final = z - model.h(&x_iter)?;
        let report = UpdateReport {
            iterations_used: delta_norms.len(),
            delta_norms,
            converged,
            innovation_final,
        };
        Ok((GaussianState::new(x_iter, covariance), report))
    }

    /// One full filter step: propagate, then the iterated update.
    pub fn step<P: ProcessModel, M: MeasurementModel>(
        &self,
        state: &GaussianState,
        process: &P,
        u: &DVector<f64>,
        measurement: &M,
        z: &DVector<f64>,
    ) -> Result<(GaussianState, UpdateReport)> {
        let predicted = self.propagate(state, process, u)?;
        self.iterated_update(&predicted, measurement, z)
    }
}

/// Whether every component of the manifold is Euclidean, so that the
/// update Jacobian is the identity exactly and need not be computed.
fn is_flat(manifold: &Manifold) -> bool {
    match manifold {
        Manifold::Euclidean(_) => true,
        Manifold::So3(_) => false,
        Manifold::Product(parts) => parts.iter().all(is_flat),
    }
}

/// Gain `K = P H' S⁻¹` with `S = H P H' + R`, where `P` is the transformed
/// prior covariance. `S` is factored, never inverted explicitly; a
/// condition number above 1e12 is reported as a singular innovation.
fn innovation_form_gain(
    h: &DMatrix<f64>,
    prior: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let mut s = h * prior * h.transpose() + r;
    s = (&s + s.transpose()) * 0.5;
    let condition = symmetric_condition(&s);
    if !condition.is_finite() || condition > CONDITION_LIMIT {
        return Err(Error::SingularInnovation { condition });
    }
    let chol = s.cholesky().ok_or(Error::NotPositiveDefinite {
        what: "innovation covariance",
    })?;
    // K' = S⁻¹ H P (S symmetric), so K = P H' S⁻¹.
    Ok(chol.solve(&(h * prior)).transpose())
}
