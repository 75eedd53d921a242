//! Correction Function Method (CFM) for embedded perfect-electric-conductor
//! boundaries in 2-D transverse-magnetic Maxwell problems, on top of the
//! second-order Yee scheme and a fourth-order staggered multistep scheme.
//!
//! The crate is organized bottom-up:
//!
//! * [`geometry`]: parametric boundaries and region classification.
//! * [`grid`]: staggered TMz storage and centered difference operators.
//! * [`patches`]: local space-time patches and fictitious interfaces.
//! * [`correction`]: divergence-free bases, functional assembly, SPD solves.
//! * [`schemes`]: CFM-Yee and CFM-4th time stepping.
//! * [`solutions`]: analytic, manufactured and pulsed-wave problems.
//! * [`harness`]: error norms, convergence studies, config and CSV I/O.

pub mod bessel;
pub mod correction;
pub mod geometry;
pub mod grid;
pub mod harness;
pub mod patches;
pub mod quadrature;
pub mod schemes;
pub mod solutions;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("patch {patch} is degenerate: {reason}")]
    PatchDegenerate { patch: usize, reason: String },
    #[error("patch {patch}: correction system is not positive definite")]
    IllPosed { patch: usize },
    #[error("assembly error: {0}")]
    Assembly(String),
    #[error("correction planning error: {0}")]
    Planning(String),
    #[error("initialization error: {0}")]
    Initialization(String),
    #[error("solution blew up at step {step} (t = {time})")]
    BlowUp { step: usize, time: f64 },
    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Process exit code used by the CLI: 2 for configuration problems, 3 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse(_) | Error::Io(_) => 2,
            Error::AtStep { source, .. } => source.exit_code(),
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
