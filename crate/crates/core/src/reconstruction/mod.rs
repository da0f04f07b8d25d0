//! Correlation solver, degeneracy repair and the two-party protocol.
//!
//! Two symmetries of the local statistics limit what can be recovered:
//!
//! - `C -> -C` is generated by `exp(i pi N2)`, which commutes with every
//!   local measurement and transform used here. Reports carry a canonical
//!   representative and its sign partner.
//! - The two `acos` branches of the phase solve are mirror images under a
//!   partial transpose of mode 2 combined with a local rotation. Both satisfy
//!   the forward equations exactly. The branch is picked by the uncertainty
//!   relation when only one image is a valid state, otherwise by one extra
//!   probe round in a transformed frame.

mod channel;
mod diagnosis;
mod protocol;
mod report;
mod solver;

pub use channel::{exact_observation, ExactChannel, MeasurementChannel, Observation, RAW_LEN};
pub use diagnosis::{
    classify, diagnose, evidence, is_effectively_real, plan_fix, DegeneracyDiagnosis, DiagnosisEvidence,
    DiagnosisTolerances,
};
pub use protocol::{
    aligned_relative_errors, canonical_sign, distance_mod_sign, moment_distance, relative_moment_errors, run_protocol,
    ProtocolConfig,
};
pub use report::{
    AppliedFix, BranchSelection, FrameKind, Message, MessageKind, Party, ReconstructionReport,
    ReconstructionStatus, SelectionMethod, SolverAttempt,
};
pub use solver::{
    acos_argument, evaluate_a_minus, evaluate_a_plus, forward_quartet, residual, solve_correlations,
    solve_moduli, solve_phases, Branch, CorrelationSolution, PhaseCandidate, SolverTolerances,
};
