use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::solver::acos_argument;
use crate::conditioning::{correlation_invariant, DerivedQuartet, SchurBlock};
use crate::gaussian::{LocalCovariance, LocalSymplectic, Mode};
use crate::{Error, Result};

/// Which solver precondition a state violates, and hence which repair it
/// needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DegeneracyDiagnosis {
    Uncorrelated,
    M2Zero,
    OneOfMsMcZero,
    SinZero,
    APlusZero,
    Generic,
}

impl DegeneracyDiagnosis {
    pub fn is_degenerate(self) -> bool {
        !matches!(self, Self::Uncorrelated | Self::Generic)
    }
}

/// Thresholds for the degeneracy tests: `eps_zero` is relative to each
/// test's natural scale, the remaining fields are absolute floors added on
/// top (zero on exact channels, a multiple of the propagated standard error
/// on noisy ones).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisTolerances {
    pub eps_zero: f64,
    pub block: f64,
    pub m2: f64,
    pub one_zero: f64,
    pub x: f64,
    pub a_plus: f64,
}

impl DiagnosisTolerances {
    pub fn exact(eps_zero: f64) -> Self {
        Self { eps_zero, block: 0.0, m2: 0.0, one_zero: 0.0, x: 0.0, a_plus: 0.0 }
    }
}

/// The scalars the diagnosis is computed from, kept for the report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisEvidence {
    pub block_deviation: f64,
    pub m2_abs: f64,
    pub i3: f64,
    pub sum_of_squares: f64,
    pub x: Option<f64>,
    pub a_plus: f64,
}

pub fn evidence(
    v1: &LocalCovariance,
    v2: &LocalCovariance,
    gamma_block: &SchurBlock,
    pi_block: &SchurBlock,
    quartet: &DerivedQuartet,
) -> DiagnosisEvidence {
    let block_deviation = (v1.n - gamma_block.diag)
        .abs()
        .max((v1.m - gamma_block.offdiag).norm())
        .max((v1.n - pi_block.diag).abs())
        .max((v1.m - pi_block.offdiag).norm());
    let s = quartet.sum_of_squares();
    DiagnosisEvidence {
        block_deviation,
        m2_abs: v2.m.norm(),
        i3: correlation_invariant(v1, v2, gamma_block),
        sum_of_squares: s,
        x: acos_argument(quartet, v2.n, v2.m),
        a_plus: v2.m.norm() * s - 2.0 * v2.n * quartet.product().norm(),
    }
}

/// Checks run in order: no correlations, `m2 = 0`, one of `ms`, `mc` zero,
/// then the sine test on the solved phases, which is split into SinZero and
/// the `A+ = 0` loophole.
pub fn diagnose(
    v1: &LocalCovariance,
    v2: &LocalCovariance,
    gamma_block: &SchurBlock,
    pi_block: &SchurBlock,
    quartet: &DerivedQuartet,
    tol: &DiagnosisTolerances,
) -> DegeneracyDiagnosis {
    classify(&evidence(v1, v2, gamma_block, pi_block, quartet), v1, v2, tol)
}

pub fn classify(
    e: &DiagnosisEvidence,
    v1: &LocalCovariance,
    v2: &LocalCovariance,
    tol: &DiagnosisTolerances,
) -> DegeneracyDiagnosis {
    use DegeneracyDiagnosis::*;
    if e.block_deviation <= tol.eps_zero * v1.n + tol.block {
        return Uncorrelated;
    }
    if e.m2_abs <= tol.eps_zero * v2.n + tol.m2 {
        return M2Zero;
    }
    if (e.sum_of_squares - e.i3).abs() <= tol.eps_zero * e.sum_of_squares.abs() + tol.one_zero {
        return OneOfMsMcZero;
    }
    let Some(x) = e.x else {
        return OneOfMsMcZero;
    };
    if 1.0 - x.abs() <= tol.eps_zero + tol.x {
        let scale = e.m2_abs * e.sum_of_squares.abs();
        if x > 0.0 && e.a_plus.abs() <= tol.eps_zero * scale + tol.a_plus {
            return APlusZero;
        }
        return SinZero;
    }
    Generic
}

/// Repair transform for a degenerate diagnosis. `m2_is_real` selects the
/// rotated variant where a pure squeeze would keep every moment real.
pub fn plan_fix(d: DegeneracyDiagnosis, m2_is_real: bool, r_fix: f64, s_fix: f64) -> Result<LocalSymplectic> {
    use DegeneracyDiagnosis::*;
    match d {
        M2Zero | OneOfMsMcZero => Ok(LocalSymplectic::new(Mode::Two, r_fix, 0.0)),
        SinZero if m2_is_real => Ok(LocalSymplectic::new(Mode::Two, r_fix, s_fix)),
        SinZero => Ok(LocalSymplectic::new(Mode::Two, r_fix, 0.0)),
        APlusZero => Ok(LocalSymplectic::new(Mode::One, r_fix, if m2_is_real { s_fix } else { 0.0 })),
        Uncorrelated | Generic => Err(Error::ContractViolation(format!("no repair defined for {d:?}"))),
    }
}

pub fn is_effectively_real(z: Complex64, rel: f64, abs: f64) -> bool {
    z.im.abs() <= rel * z.norm() + abs
}
