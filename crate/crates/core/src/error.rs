use thiserror::Error;

use crate::contributions::ContributionError;
use crate::fem::FemError;
use crate::linalg::SolverError;
use crate::material::TensorError;
use crate::mesh::MeshError;

/// Broad failure class, used to pick a process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Solver,
    Invariant,
    Io,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Contribution(#[from] ContributionError),
    #[error("linear solver failed: {0}")]
    Solver(#[from] SolverError),
    #[error("fixed-point iteration did not converge in {sweeps} sweeps (last increment {increment:.3e})")]
    FixedPointNotConverged { sweeps: usize, increment: f64 },
    #[error("fixed-point iteration stopped contracting at sweep {sweep} (increment {increment:.3e} after {previous:.3e})")]
    FixedPointNotContracting { sweep: usize, increment: f64, previous: f64 },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("step {step} (t = {time:.6e}): {source}")]
    AtStep {
        step: usize,
        time: f64,
        #[source]
        source: Box<SimError>,
    },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl SimError {
    pub fn class(&self) -> ErrorClass {
        match self {
            SimError::Config(_)
            | SimError::Mesh(_)
            | SimError::Fem(_)
            | SimError::Tensor(_)
            | SimError::Contribution(_) => ErrorClass::Config,
            SimError::Solver(_) | SimError::FixedPointNotConverged { .. } | SimError::FixedPointNotContracting { .. } => {
                ErrorClass::Solver
            }
            SimError::Invariant(_) => ErrorClass::Invariant,
            SimError::AtStep { source, .. } => source.class(),
            SimError::Io(_) | SimError::Csv(_) => ErrorClass::Io,
        }
    }

    pub(crate) fn at_step(self, step: usize, time: f64) -> SimError {
        SimError::AtStep { step, time, source: Box::new(self) }
    }
}
