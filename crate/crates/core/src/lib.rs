//! Two-component Camassa–Holm (2CH) and Degasperis–Procesi (2DP) systems as
//! geodesic flows on the semidirect product `Diff(S¹) ⋉ F(S¹)`.
//!
//! The crate is organised bottom-up:
//!
//! * [`spectral`]: periodic Fourier grid, `∂_x`, `A = 1 - ∂_x²`, composition
//!   with circle diffeomorphisms and their inversion.
//! * [`connection`]: Christoffel maps at the identity for CH, DP, 2CH and
//!   2DP, the operator `B`, the Lie bracket and the right-invariant metric.
//! * [`evolution`]: Eulerian RK4 time stepping of the weak Cauchy forms with
//!   blow-up monitoring and conservation diagnostics.
//! * [`flowmap`]: the Lagrangian side. Group elements `(φ, f)`, co-integration
//!   of the flow map, adjoint/coadjoint actions and body-momentum checks.
//! * [`curvature`]: sectional curvature of the 2CH metric, numerically and
//!   in closed form for cosine directions.
//! * [`rigidbody`]: Euler's rigid body on `SO(3)`, the finite-dimensional
//!   counterpart used to calibrate the conservation checks.
//! * [`io`]: CSV formats shared with the command-line driver.
//! * [`verify`]: the self-check suite behind `geoflow verify`.

pub mod connection;
pub mod curvature;
pub mod evolution;
pub mod flowmap;
pub mod io;
mod ode;
pub mod rigidbody;
pub mod spectral;
pub mod verify;

pub use connection::{Model, VelocityPair};
pub use spectral::{Diffeo, Grid, PeriodicField};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch: {left} vs {right} points")]
    GridMismatch { left: usize, right: usize },
    #[error("diffeomorphism has non-positive Jacobian (min {min})")]
    NonPositiveJacobian { min: f64 },
    #[error("diffeomorphism inversion failed: {0}")]
    InversionFailed(String),
    #[error("non-finite value in a Runge-Kutta stage")]
    NonFinite,
    #[error("degenerate plane: Gram determinant {gram:e} is not above {threshold:e}")]
    DegeneratePlane { gram: f64, threshold: f64 },
    #[error("invalid direction: {0}")]
    InvalidDirection(String),
    #[error("curvature assertion failed for modes {modes:?}: {detail}")]
    CurvatureViolation { modes: [u32; 4], detail: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("malformed input: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
