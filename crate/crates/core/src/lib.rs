//! Lagrangian space-discrete simulation of spherically symmetric compressible
//! Navier-Stokes flow with density-dependent viscosity and a vacuum free
//! boundary, together with an auditor for the a priori estimates of the
//! scheme.

pub mod error;
pub mod estimates;
pub mod integrator;
pub mod model;
pub mod reconstruct;
pub mod scheme;
pub mod study;

pub use error::{Error, Result};
pub use estimates::{audit, EstimateReport, Verdict};
pub use integrator::{run, RunConfig, StepController, TerminationReason, Trajectory};
pub use model::{
    validate_assumptions, DensityProfile, ForceModel, InitialData, PhysicalParameters, Table,
    ValidationReport, VelocityProfile,
};
pub use reconstruct::Snapshot;
pub use scheme::GridState;
