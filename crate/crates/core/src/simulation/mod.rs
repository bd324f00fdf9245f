//! Monte Carlo evolution of the log-LIBOR rates under the terminal
//! measure.

mod grid;
mod run;
mod stats;
mod step;

pub use grid::{Segment, SimulationGrid, Step};
pub use run::{
    initial_log_rates, run_simulation, run_with_reference, simulate, unit_shocks, Method, RngPolicy, SimulationOptions, SimulationResult,
    UnitDraws,
};
pub use stats::Moments;
pub use step::{
    evolve_step, evolve_step_euler, evolve_step_frozen, evolve_step_ipc, evolve_step_ipc_ordered, evolve_step_pc,
    evolve_step_picard, evolve_step_picard_ipc, evolve_step_picard_ordered, evolve_step_picard_pc, PathState,
    StepContext, Workspace,
};

use std::fmt;

use thiserror::Error;

use crate::drift::DriftError;
use crate::levy::ParamError;
use crate::pricing::PricingError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulationError {
    #[error("invalid model:\n{0}")]
    InvalidModel(String),
    #[error("grid: {0}")]
    Grid(String),
    #[error(transparent)]
    Drift(#[from] DriftError),
    #[error(transparent)]
    Driver(#[from] ParamError),
    #[error(transparent)]
    Pricing(#[from] PricingError),
    #[error("no methods to simulate")]
    NoMethods,
    #[error("product {product} expires at T_{expiry}, which the grid does not observe")]
    Unobserved { product: String, expiry: usize },
    #[error("{failed} of {units} units failed (first: path {first_unit}, step {step}, rate {rate}: {reason})")]
    TooManyFailures {
        failed: u64,
        units: u64,
        first_unit: u64,
        step: usize,
        rate: usize,
        reason: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Euler,
    Picard,
    Pc,
    Ipc,
    PicardPc,
    /// IPC ordering applied to the Picard approximation.
    PicardIpc,
    /// Frozen drift over whatever steps the grid has; with a long-step grid
    /// this is the single-step frozen approximation.
    FrozenLongStep,
}

impl Scheme {
    pub const ALL: [Scheme; 7] = [
        Scheme::Euler,
        Scheme::Picard,
        Scheme::Pc,
        Scheme::Ipc,
        Scheme::PicardPc,
        Scheme::PicardIpc,
        Scheme::FrozenLongStep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Euler => "euler",
            Scheme::Picard => "picard",
            Scheme::Pc => "pc",
            Scheme::Ipc => "ipc",
            Scheme::PicardPc => "picard-pc",
            Scheme::PicardIpc => "picard-ipc",
            Scheme::FrozenLongStep => "frozen-long-step",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let key = s.to_ascii_lowercase().replace('_', "-");
        Scheme::ALL.into_iter().find(|m| m.name() == key).or(match key.as_str() {
            "picardpc" => Some(Scheme::PicardPc),
            "picardipc" => Some(Scheme::PicardIpc),
            "frozen" | "frozenlongstep" => Some(Scheme::FrozenLongStep),
            _ => None,
        })
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
