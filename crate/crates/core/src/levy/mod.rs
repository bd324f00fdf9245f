//! The driving Levy process: NIG cumulants, exact increment sampling and a
//! quadrature oracle over the Levy measure.

mod driver;
mod nig;
mod quadrature;

pub use driver::{Cumulant, DriverKind, DriverSchedule, LevyDriverSpec};
pub use nig::{NigDraw, NigParams};
pub use quadrature::{bessel_k1_scaled, gauss_legendre, LevyMeasureQuadrature, QuadratureOptions, QuadratureValue};

use thiserror::Error;

/// A cumulant argument outside the exponential-moment domain.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("cumulant argument {argument} outside the exponential-moment domain [{lower}, {upper}]")]
pub struct DomainError {
    pub argument: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("NIG alpha must be positive and finite, got {0}")]
    Alpha(f64),
    #[error("NIG requires |beta| < alpha, got alpha = {alpha}, beta = {beta}")]
    Beta { alpha: f64, beta: f64 },
    #[error("NIG mu must be finite, got {0}")]
    Mu(f64),
    #[error("NIG delta_bar must be positive and finite, got {0}")]
    DeltaBar(f64),
    #[error("diffusion coefficient must be non-negative, got {0}")]
    Diffusion(f64),
    #[error("exponential-moment bound {bound} must lie in (0, {natural}]")]
    EmBound { bound: f64, natural: f64 },
    #[error("time step must be positive, got {0}")]
    TimeStep(f64),
    #[error("driver schedule needs at least one period")]
    EmptySchedule,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadratureError {
    #[error("quadrature did not stabilise under refinement: {coarse} vs {fine} (tolerance {tolerance})")]
    NotConverged { coarse: f64, fine: f64, tolerance: f64 },
    #[error("quadrature produced a non-finite value")]
    NonFinite,
}
