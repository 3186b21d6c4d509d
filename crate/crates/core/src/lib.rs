//! Switched Hegselmann–Krause and Cucker–Smale dynamics, where the sign
//! `α(t) = ±1` alternates between attraction and repulsion, together with
//! numerical certificates for the consensus and flocking estimates.
//!
//! The usual flow: build a [`RunConfig`], [`pipeline::simulate`] it and pass
//! the resulting [`pipeline::Run`] to [`pipeline::certify`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod diagnostics;
pub mod dynamics;
pub mod integrator;
pub mod kernel;
pub mod numfmt;
pub mod oracle;
pub mod pipeline;
pub mod schedule;

use std::path::PathBuf;

use thiserror::Error;

pub use config::RunConfig;
pub use diagnostics::{diameter, DiagnosticsError};
pub use dynamics::{ModelSpec, Points, SystemState};
pub use integrator::{integrate, IntegrateError, Trajectory};
pub use kernel::{InfluenceKernel, KernelError};
pub use schedule::{Model, ScheduleError, SwitchingSchedule};

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Dynamics(#[from] dynamics::DynamicsError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// 2 for a blow-up, 1 for I/O trouble, 3 for anything wrong with the inputs.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Integrate(IntegrateError::NonFiniteState { .. }) => 2,
            Error::Io { .. } => 1,
            _ => 3,
        }
    }
}
