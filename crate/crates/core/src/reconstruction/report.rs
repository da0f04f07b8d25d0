use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::diagnosis::{DegeneracyDiagnosis, DiagnosisEvidence};
use super::solver::{Branch, CorrelationSolution};
use crate::conditioning::DerivedQuartet;
use crate::gaussian::{LocalSymplectic, Mode, TwoModeCovariance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReconstructionStatus {
    ExactSuccess,
    NoisySuccess,
    AmbiguousBranch,
    Failed,
}

impl ReconstructionStatus {
    pub fn is_success(self) -> bool {
        matches!(self, Self::ExactSuccess | Self::NoisySuccess)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Party {
    Alice,
    Bob,
}

impl Party {
    /// Holder of `mode` when roles are (not) swapped.
    pub fn holding(mode: Mode, swapped: bool) -> Self {
        match (mode, swapped) {
            (Mode::One, false) | (Mode::Two, true) => Party::Alice,
            _ => Party::Bob,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MessageKind {
    LocalCovariance,
    ParityOutcomeStats,
    VacuumStats,
    ApplyTransformRequest,
    RoleSwapRequest,
}

/// One classical message. Payloads only carry quantities computable from
/// the sender's own mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub from: Party,
    pub kind: MessageKind,
    pub payload: BTreeMap<String, f64>,
}

impl Message {
    pub fn new(from: Party, kind: MessageKind, payload: &[(&str, f64)]) -> Self {
        Self { from, kind, payload: payload.iter().map(|(k, v)| (k.to_string(), *v)).collect() }
    }
}

/// A repair transform, with `mode` the physical mode it acted on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AppliedFix {
    pub diagnosis: DegeneracyDiagnosis,
    pub mode: Mode,
    pub r: f64,
    pub s: f64,
}

impl AppliedFix {
    pub fn transform(&self) -> LocalSymplectic {
        LocalSymplectic::new(self.mode, self.r, self.s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrameKind {
    Main,
    Probe,
}

/// Solver data of one measurement round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverAttempt {
    pub frame: FrameKind,
    pub diagnosis: DegeneracyDiagnosis,
    pub evidence: DiagnosisEvidence,
    pub quartet: DerivedQuartet,
    /// Candidates in the frame they were solved in.
    pub candidates: Vec<CorrelationSolution>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionMethod {
    Coincident,
    Physicality,
    Probe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchSelection {
    pub method: SelectionMethod,
    pub selected: Branch,
    /// Uncertainty-relation margin of each candidate in the original frame.
    pub margins: [f64; 2],
    /// Probe transforms applied on top of the repaired frame, physical modes.
    pub probes: Vec<AppliedFix>,
    /// Mismatch between each candidate's predicted probe statistics and the
    /// measured ones: chi-square summed over probes on noisy channels, max
    /// deviation relative to the diagonal scale on exact ones.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distances: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub status: ReconstructionStatus,
    /// Canonical representative in the original frame: the cross moment of
    /// larger modulus has positive real part.
    pub recovered: Option<TwoModeCovariance>,
    /// `recovered` with `(ms, mc) -> (-ms, -mc)`; no local statistic
    /// distinguishes the two.
    pub sign_partner: Option<TwoModeCovariance>,
    pub diagnoses: Vec<DegeneracyDiagnosis>,
    pub fixes: Vec<AppliedFix>,
    pub roles_swapped: bool,
    pub attempts: Vec<SolverAttempt>,
    pub branch: Option<BranchSelection>,
    /// Both candidates on an ambiguous branch.
    pub alternates: Vec<TwoModeCovariance>,
    pub transcript: Vec<Message>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl ReconstructionReport {
    pub(crate) fn empty() -> Self {
        Self {
            status: ReconstructionStatus::Failed,
            recovered: None,
            sign_partner: None,
            diagnoses: Vec::new(),
            fixes: Vec::new(),
            roles_swapped: false,
            attempts: Vec::new(),
            branch: None,
            alternates: Vec::new(),
            transcript: Vec::new(),
            message: None,
        }
    }

    /// The transforms that took the source from the original to the
    /// repaired frame, in physical modes.
    pub fn fix_transforms(&self) -> Vec<LocalSymplectic> {
        self.fixes.iter().map(AppliedFix::transform).collect()
    }
}
