pub mod drift;
pub mod levy;
pub mod market;
pub mod pricing;
pub mod simulation;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
