use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::DegeneracyDiagnosis;
use crate::conditioning::DerivedQuartet;
use crate::{Error, Result};

/// Sign of `acos(x)` in `theta_s - theta_c = +-acos(x) - theta_2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }

    pub fn other(self) -> Self {
        match self {
            Branch::Plus => Branch::Minus,
            Branch::Minus => Branch::Plus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseCandidate {
    pub branch: Branch,
    pub theta_c: f64,
    pub theta_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSolution {
    #[serde(with = "crate::serde_complex")]
    pub ms: Complex64,
    #[serde(with = "crate::serde_complex")]
    pub mc: Complex64,
    pub branch: Branch,
    /// Max relative residual of the four forward equations.
    pub residual: f64,
}

/// Solver tolerances. `clamp` is the admissible excursion of the acos
/// argument beyond `[-1, 1]`, `negative` the admissible negative squared
/// modulus relative to `|mc|^2 + |ms|^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverTolerances {
    pub zero: f64,
    pub clamp: f64,
    pub negative: f64,
}

impl Default for SolverTolerances {
    fn default() -> Self {
        Self { zero: 1e-8, clamp: 1e-7, negative: 1e-8 }
    }
}

/// `x = (alpha n2 - gamma (n2 + 1/2)) / |m2 (beta - delta)|`, which equals
/// `cos(theta_2 + theta_s - theta_c)`. `None` when the denominator vanishes.
pub fn acos_argument(q: &DerivedQuartet, n2: f64, m2: Complex64) -> Option<f64> {
    let den = (m2 * q.product()).norm();
    if den == 0.0 || !den.is_finite() {
        return None;
    }
    Some((q.alpha * n2 - q.gamma * (n2 + 0.5)) / den)
}

/// `z = m2 ms mc^*` and `D = |mc|^2 - |ms|^2` as far as the quartet fixes
/// them: `Re z` is the acos numerator, `Im(delta p^*) = D Im z` with
/// `p = beta - delta`, `|z| = |m2 p|` and `|D| = sqrt(S^2 - 4|p|^2)`. The
/// magnitudes `|Im z|` and `|D|` come from whichever of the two square roots
/// is better conditioned; the other follows from the product.
#[derive(Debug, Clone, Copy)]
struct Geometry {
    re_z: f64,
    /// `|Im z|`.
    im_z: f64,
    /// `D` on the branch with `Im z >= 0`.
    d_plus: f64,
}

fn geometry(q: &DerivedQuartet, n2: f64, m2: Complex64) -> Geometry {
    let p = q.product();
    let sum = q.sum_of_squares();
    let abs_z = (m2 * p).norm();
    let re_z = q.alpha * n2 - q.gamma * (n2 + 0.5);
    let j = (q.delta * p.conj()).im;
    let t = ((abs_z - re_z) * (abs_z + re_z)).max(0.0).sqrt();
    let d = ((sum - 2.0 * p.norm()) * (sum + 2.0 * p.norm())).max(0.0).sqrt();
    // relative errors scale as 1 / sin^2 and 1 / (D / S)^2 respectively
    if t * sum >= d * abs_z {
        Geometry { re_z, im_z: t, d_plus: if t > 0.0 { j / t } else { 0.0 } }
    } else {
        Geometry { re_z, im_z: j.abs() / d, d_plus: d.copysign(j) }
    }
}

/// Both phase pairs consistent with `theta_s + theta_c = Arg(beta - delta)`
/// and `theta_s - theta_c = +-acos(x) - theta_2`.
pub fn solve_phases(
    q: &DerivedQuartet,
    n2: f64,
    m2: Complex64,
    tol: &SolverTolerances,
) -> Result<[PhaseCandidate; 2]> {
    if m2.norm() <= tol.zero * n2 {
        return Err(Error::Degenerate(DegeneracyDiagnosis::M2Zero));
    }
    let p = q.product();
    if p.norm() <= tol.zero * q.sum_of_squares().max(0.0) || p.norm() == 0.0 {
        return Err(Error::Degenerate(DegeneracyDiagnosis::OneOfMsMcZero));
    }
    let x = acos_argument(q, n2, m2).ok_or(Error::Degenerate(DegeneracyDiagnosis::OneOfMsMcZero))?;
    if !x.is_finite() || x.abs() > 1.0 + tol.clamp {
        return Err(Error::InconsistentStatistics(format!("acos argument {x} outside [-1, 1]")));
    }
    let g = geometry(q, n2, m2);
    let sum = p.arg();
    let theta2 = m2.arg();
    Ok([Branch::Plus, Branch::Minus].map(|branch| {
        // atan2 form of +-acos(x)
        let diff = (branch.sign() * g.im_z).atan2(g.re_z) - theta2;
        PhaseCandidate { branch, theta_s: 0.5 * (sum + diff), theta_c: 0.5 * (sum - diff) }
    }))
}

/// `(|mc|, |ms|)` from the sum `S = 2(alpha - gamma)` and the difference
/// `D = |mc|^2 - |ms|^2`, whose sign follows the branch of the phases.
pub fn solve_moduli(
    q: &DerivedQuartet,
    n2: f64,
    m2: Complex64,
    theta_c: f64,
    theta_s: f64,
    tol: &SolverTolerances,
) -> Result<(f64, f64)> {
    let sin = (m2.arg() - theta_c + theta_s).sin();
    // |sin|^2 ~ 2 (1 - |x|), matching the SinZero test on x
    if sin.abs() <= (2.0 * tol.zero).sqrt() || m2.norm() == 0.0 {
        return Err(Error::Degenerate(DegeneracyDiagnosis::SinZero));
    }
    let sum = q.sum_of_squares();
    let d_plus = geometry(q, n2, m2).d_plus;
    let diff = if sin > 0.0 { d_plus } else { -d_plus };
    let mc2 = 0.5 * (sum + diff);
    let ms2 = 0.5 * (sum - diff);
    let floor = -tol.negative * sum.abs().max(f64::MIN_POSITIVE);
    if mc2 < floor || ms2 < floor {
        return Err(Error::InconsistentStatistics(format!(
            "negative squared modulus (|mc|^2 = {mc2:e}, |ms|^2 = {ms2:e})"
        )));
    }
    Ok((mc2.max(0.0).sqrt(), ms2.max(0.0).sqrt()))
}

/// Forward evaluation of the quartet from known correlations:
/// `gamma = n2 S - 2 Re(m2 ms mc*)`, `delta = 2 n2 ms mc - m2* mc^2 - m2 ms^2`,
/// and `alpha`, `beta` likewise with `n2 -> n2 + 1/2`.
pub fn forward_quartet(n2: f64, m2: Complex64, ms: Complex64, mc: Complex64) -> DerivedQuartet {
    let s = ms.norm_sqr() + mc.norm_sqr();
    let cross = 2.0 * (m2 * ms * mc.conj()).re;
    let anomalous = m2.conj() * mc * mc + m2 * ms * ms;
    let prod = ms * mc;
    DerivedQuartet {
        gamma: n2 * s - cross,
        delta: prod * (2.0 * n2) - anomalous,
        alpha: (n2 + 0.5) * s - cross,
        beta: prod * (2.0 * n2 + 1.0) - anomalous,
    }
}

/// Max deviation between the measured quartet and the forward evaluation,
/// relative to the quartet's magnitude.
pub fn residual(q: &DerivedQuartet, n2: f64, m2: Complex64, ms: Complex64, mc: Complex64) -> f64 {
    let f = forward_quartet(n2, m2, ms, mc);
    let scale = q.scale().max(f.scale()).max(f64::MIN_POSITIVE);
    let dev = (q.gamma - f.gamma)
        .abs()
        .max((q.delta - f.delta).norm())
        .max((q.alpha - f.alpha).abs())
        .max((q.beta - f.beta).norm());
    dev / scale
}

/// Solves for both branch candidates.
pub fn solve_correlations(
    q: &DerivedQuartet,
    n2: f64,
    m2: Complex64,
    tol: &SolverTolerances,
) -> Result<[CorrelationSolution; 2]> {
    let phases = solve_phases(q, n2, m2, tol)?;
    let mut out = Vec::with_capacity(2);
    for p in phases {
        let (mc_abs, ms_abs) = solve_moduli(q, n2, m2, p.theta_c, p.theta_s, tol)?;
        let ms = Complex64::from_polar(ms_abs, p.theta_s);
        let mc = Complex64::from_polar(mc_abs, p.theta_c);
        out.push(CorrelationSolution { ms, mc, branch: p.branch, residual: residual(q, n2, m2, ms, mc) });
    }
    Ok([out[0], out[1]])
}

/// `A+ = |m2| (|mc|^2 + |ms|^2) - 2 n2 |mc ms|`.
pub fn evaluate_a_plus(n2: f64, m2: Complex64, ms_abs: f64, mc_abs: f64) -> f64 {
    m2.norm() * (mc_abs * mc_abs + ms_abs * ms_abs) - 2.0 * n2 * mc_abs * ms_abs
}

/// `A- = |m2| (|mc|^2 + |ms|^2) + 2 n2 |mc ms|`.
pub fn evaluate_a_minus(n2: f64, m2: Complex64, ms_abs: f64, mc_abs: f64) -> f64 {
    m2.norm() * (mc_abs * mc_abs + ms_abs * ms_abs) + 2.0 * n2 * mc_abs * ms_abs
}
