//! Reconstruction of two-mode Gaussian covariance matrices using only local
//! measurements and classical communication.
//!
//! Alice holds mode 1, Bob holds mode 2. Each measures the covariance of
//! their own mode; Bob additionally performs parity and vacuum projections
//! and announces the outcomes, which lets Alice build two conditional
//! covariance blocks (Schur complements of Bob's block). Those blocks pin
//! down the correlation block `C` up to the symmetries discussed in
//! [`reconstruction`].
//!
//! Module map:
//!
//! - [`gaussian`]: covariance data model, physicality, local symplectics,
//!   state generation recipes.
//! - [`conditioning`]: parity/vacuum Schur blocks and the derived quartet.
//! - [`reconstruction`]: correlation solver, degeneracy repair, protocol.
//! - [`fock`]: truncated Fock-space oracle.
//! - [`noise`]: finite-statistics channel and convergence sweeps.
//! - [`cli`]: command-line front end.

pub mod cli;
pub mod conditioning;
mod error;
pub mod fock;
pub mod gaussian;
pub mod noise;
pub mod reconstruction;
mod serde_complex;

pub use error::{Error, Result};
pub use num_complex::Complex64;

pub use conditioning::{DerivedQuartet, SchurBlock, SchurKind, SubensembleMoments};
pub use gaussian::{
    GenerationRecipe, LocalCovariance, LocalSymplectic, Mode, PhysicalityVerdict,
    TwoModeCovariance,
};
pub use reconstruction::{
    run_protocol, DegeneracyDiagnosis, ExactChannel, MeasurementChannel, ProtocolConfig,
    ReconstructionReport, ReconstructionStatus,
};
