//! Iterated extended Kalman filtering for states on differentiable
//! manifolds.

pub mod error;
pub mod filter;
pub mod manifold;
pub mod numdiff;
pub mod sim;
pub mod so3;
pub mod so3_manifold;
pub mod variants;

pub use error::{Error, Result};
pub use filter::{
    GaussianState, Iekf, IekfConfig, MeasurementModel, ProcessModel, UpdateReport, UpdateVariant,
};
pub use manifold::{Manifold, Point};
pub use sim::{OmegaProfile, RunMetrics, ScenarioConfig, ScenarioRun, StepRecord};
pub use so3_manifold::So3Convention;
pub use variants::CompressedMeasurement;
