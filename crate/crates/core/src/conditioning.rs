//! Parity- and vacuum-conditioned covariance blocks of mode 1 and the
//! scalar quartet `(gamma, delta, alpha, beta)` that feeds the correlation
//! solver.
//!
//! Conditioning mode 2 on its photon-number parity and taking the weighted
//! difference of Alice's even and odd groups yields a Gaussian operator with
//! covariance `Gamma1 = V1 - C V2^-1 C^dag`. Conditioning on the vacuum
//! outcome yields a Gaussian state with covariance
//! `Pi1 = V1 - C (V2 + I/2)^-1 C^dag`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::gaussian::{LocalCovariance, TwoModeCovariance, EPS_PSD};
use crate::{Error, Result};

/// Invertibility guard on `det V2`.
pub const EPS_DET: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchurKind {
    Parity,
    Vacuum,
}

/// A conditional 2x2 block `[[diag, offdiag], [offdiag*, diag]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchurBlock {
    pub diag: f64,
    #[serde(with = "crate::serde_complex")]
    pub offdiag: Complex64,
    pub kind: SchurKind,
}

impl SchurBlock {
    pub fn new(diag: f64, offdiag: Complex64, kind: SchurKind) -> Self {
        Self { diag, offdiag, kind }
    }

    pub fn as_local(&self) -> LocalCovariance {
        LocalCovariance::new(self.diag, self.offdiag)
    }

    /// The block invariant for its kind: a physical single-mode covariance
    /// for the vacuum block, positive semidefinite for the parity block.
    pub fn satisfies_invariant(&self) -> bool {
        match self.kind {
            SchurKind::Vacuum => self.as_local().is_physical(),
            SchurKind::Parity => self.diag * self.diag >= self.offdiag.norm_sqr() - EPS_PSD,
        }
    }
}

/// Mode-1 statistics of one group of copies selected by Bob's outcome:
/// the fraction of copies in the group and the normalized symmetric moments
/// `<a^dag a> + 1/2` and `-<a^2>` within it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubensembleMoments {
    pub probability: f64,
    pub diag: f64,
    #[serde(with = "crate::serde_complex")]
    pub offdiag: Complex64,
}

impl SubensembleMoments {
    pub fn new(probability: f64, diag: f64, offdiag: Complex64) -> Self {
        Self { probability, diag, offdiag }
    }

    /// An outcome that never occurred.
    pub fn absent() -> Self {
        Self::new(0.0, 0.0, Complex64::new(0.0, 0.0))
    }

    /// Moments weighted by the group probability, i.e. traces against the
    /// unnormalized conditional operator.
    pub fn weighted(&self) -> (f64, Complex64) {
        (self.probability * self.diag, self.offdiag * self.probability)
    }
}

/// Alice's even and odd groups after Bob's parity announcements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParityStatistics {
    pub even: SubensembleMoments,
    pub odd: SubensembleMoments,
}

/// `V1 - C M^-1 C^dag` for `M = [[n, m], [m*, n]]`, with the 2x2 inverse in
/// closed form.
fn schur_with(v: &TwoModeCovariance, n: f64, m: Complex64, kind: SchurKind) -> Result<SchurBlock> {
    let det = n * n - m.norm_sqr();
    if det <= EPS_DET {
        return Err(Error::DegenerateBlock { det });
    }
    let (ms, mc) = (v.ms, v.mc);
    // W = C adj(M), adj(M) = [[n, -m], [-m*, n]]
    let w11 = ms * n - mc * m.conj();
    let w12 = -ms * m + mc * n;
    // (W C^dag) first row, C^dag = [[ms*, mc], [mc*, ms]]
    let k11 = w11 * ms.conj() + w12 * mc.conj();
    let k12 = w11 * mc + w12 * ms;
    Ok(SchurBlock::new(v.n1 - k11.re / det, v.m1 - k12 / det, kind))
}

/// `Gamma1 = V1 - C V2^-1 C^dag`.
pub fn schur_parity(v: &TwoModeCovariance) -> Result<SchurBlock> {
    schur_with(v, v.n2, v.m2, SchurKind::Parity)
}

/// `Pi1 = V1 - C (V2 + I/2)^-1 C^dag`.
pub fn schur_vacuum(v: &TwoModeCovariance) -> Result<SchurBlock> {
    schur_with(v, v.n2 + 0.5, v.m2, SchurKind::Vacuum)
}

/// Builds `Gamma1` from Alice's even/odd group statistics:
/// `eta1 = 2 sqrt(det V2) (<.>_e - <.>_o)` with unnormalized traces.
pub fn conditional_moments_from_subensembles(
    even: &SubensembleMoments,
    odd: &SubensembleMoments,
    det_v2: f64,
) -> Result<SchurBlock> {
    if !(det_v2 >= 0.0) {
        return Err(Error::InvalidInput(format!("det V2 must be non-negative, got {det_v2}")));
    }
    let pref = 2.0 * det_v2.sqrt();
    let (de, oe) = even.weighted();
    let (dodd, oodd) = odd.weighted();
    Ok(SchurBlock::new(pref * (de - dodd), (oe - oodd) * pref, SchurKind::Parity))
}

/// Closed-form even/odd group statistics of a Gaussian state.
///
/// With `Pi = (-1)^N2`, `Tr2[P_e rho] = (rho1 + Tr2[Pi rho]) / 2` and
/// `Tr2[Pi rho] = sigma1 / (2 sqrt(det V2))`, where `sigma1` has unit trace
/// and covariance `Gamma1`.
pub fn parity_statistics(v: &TwoModeCovariance) -> Result<ParityStatistics> {
    let gamma = schur_parity(v)?;
    let scale = 1.0 / (2.0 * v.v2().det().sqrt());
    let group = |sign: f64| {
        let p = 0.5 * (1.0 + sign * scale);
        if p <= 0.0 {
            return SubensembleMoments::absent();
        }
        let diag = 0.5 * (v.n1 + sign * scale * gamma.diag);
        let off = (v.m1 + gamma.offdiag * (sign * scale)) * 0.5;
        SubensembleMoments::new(p, diag / p, off / p)
    };
    Ok(ParityStatistics { even: group(1.0), odd: group(-1.0) })
}

/// Closed-form vacuum-outcome statistics: probability `1/sqrt(det(V2 + I/2))`
/// and the moments of `Pi1`.
pub fn vacuum_statistics(v: &TwoModeCovariance) -> Result<SubensembleMoments> {
    let pi = schur_vacuum(v)?;
    let shifted = LocalCovariance::new(v.n2 + 0.5, v.m2).det();
    Ok(SubensembleMoments::new(1.0 / shifted.sqrt(), pi.diag, pi.offdiag))
}

/// Scalars feeding the correlation solver, all locally computable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedQuartet {
    pub gamma: f64,
    #[serde(with = "crate::serde_complex")]
    pub delta: Complex64,
    pub alpha: f64,
    #[serde(with = "crate::serde_complex")]
    pub beta: Complex64,
}

impl DerivedQuartet {
    pub fn is_finite(&self) -> bool {
        [self.gamma, self.delta.re, self.delta.im, self.alpha, self.beta.re, self.beta.im]
            .iter()
            .all(|x| x.is_finite())
    }

    /// `|ms mc|` and `ms mc` equal `beta - delta`.
    pub fn product(&self) -> Complex64 {
        self.beta - self.delta
    }

    /// `|mc|^2 + |ms|^2 = 2 (alpha - gamma)`.
    pub fn sum_of_squares(&self) -> f64 {
        2.0 * (self.alpha - self.gamma)
    }

    pub fn scale(&self) -> f64 {
        self.gamma.abs().max(self.delta.norm()).max(self.alpha.abs()).max(self.beta.norm())
    }
}

/// `gamma = (n1 - eta1) det V2`, `delta = (m1 - mu1) det V2`,
/// `alpha = (n1 - xi1) det(V2 + I/2)`, `beta = (m1 - nu1) det(V2 + I/2)`.
pub fn derived_quartet(
    v1: &LocalCovariance,
    v2: &LocalCovariance,
    gamma_block: &SchurBlock,
    pi_block: &SchurBlock,
) -> Result<DerivedQuartet> {
    if gamma_block.kind != SchurKind::Parity || pi_block.kind != SchurKind::Vacuum {
        return Err(Error::ContractViolation(format!(
            "expected (parity, vacuum) blocks, got ({:?}, {:?})",
            gamma_block.kind, pi_block.kind
        )));
    }
    let d = v2.det();
    let dv = LocalCovariance::new(v2.n + 0.5, v2.m).det();
    Ok(DerivedQuartet {
        gamma: (v1.n - gamma_block.diag) * d,
        delta: (v1.m - gamma_block.offdiag) * d,
        alpha: (v1.n - pi_block.diag) * dv,
        beta: (v1.m - pi_block.offdiag) * dv,
    })
}

/// `|I3| = sqrt(det V2 det(V1 - Gamma1))`, which equals `|det C|`.
pub fn correlation_invariant(v1: &LocalCovariance, v2: &LocalCovariance, gamma_block: &SchurBlock) -> f64 {
    let diff = LocalCovariance::new(v1.n - gamma_block.diag, v1.m - gamma_block.offdiag);
    (v2.det() * diff.det()).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::Matrix2;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sample() -> TwoModeCovariance {
        TwoModeCovariance::new(1.4, 1.1, c(0.2, -0.3), c(0.1, 0.25), c(-0.2, 0.15), c(0.35, 0.1))
    }

    /// Dense block algebra with nalgebra's general inverse.
    fn dense_schur(v: &TwoModeCovariance, shift: f64) -> LocalCovariance {
        let m = v.v2().matrix() + Matrix2::identity() * c(shift, 0.0);
        let cb = v.correlation_block();
        LocalCovariance::from_matrix(&(v.v1().matrix() - cb * m.try_inverse().unwrap() * cb.adjoint()))
    }

    #[test]
    fn uncorrelated_blocks_equal_v1() {
        let v = sample().with_correlations(c(0.0, 0.0), c(0.0, 0.0));
        for b in [schur_parity(&v).unwrap(), schur_vacuum(&v).unwrap()] {
            assert_eq!(b.diag, v.n1);
            assert_eq!(b.offdiag, v.m1);
        }
    }

    #[test]
    fn closed_form_matches_dense_inverse() {
        let v = sample();
        let g = schur_parity(&v).unwrap();
        let p = schur_vacuum(&v).unwrap();
        let gd = dense_schur(&v, 0.0);
        let pd = dense_schur(&v, 0.5);
        assert_abs_diff_eq!(g.diag, gd.n, epsilon = 1e-12);
        assert_abs_diff_eq!((g.offdiag - gd.m).norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.diag, pd.n, epsilon = 1e-12);
        assert_abs_diff_eq!((p.offdiag - pd.m).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn tmsv_closed_forms() {
        let v = TwoModeCovariance::two_mode_squeezed_vacuum(0.5);
        let g = schur_parity(&v).unwrap();
        assert_abs_diff_eq!(g.diag, 1.0 / (2.0 * 1f64.cosh()), epsilon = 1e-12);
        assert_abs_diff_eq!(g.offdiag.norm(), 0.0, epsilon = 1e-15);
        for r in [0.1, 0.5, 1.3] {
            let p = schur_vacuum(&TwoModeCovariance::two_mode_squeezed_vacuum(r)).unwrap();
            assert_abs_diff_eq!(p.diag, 0.5, epsilon = 1e-12);
            assert_abs_diff_eq!(p.offdiag.norm(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn singular_mode_two_block_is_rejected() {
        let mut v = sample();
        v.n2 = 0.3;
        v.m2 = c(0.3, 0.0);
        assert!(matches!(schur_parity(&v), Err(Error::DegenerateBlock { .. })));
        assert!(schur_vacuum(&v).is_ok());
    }

    #[test]
    fn subensemble_constructor() {
        let same = SubensembleMoments::new(0.5, 0.8, c(0.1, 0.2));
        let b = conditional_moments_from_subensembles(&same, &same, 0.7).unwrap();
        assert_eq!(b.diag, 0.0);
        assert_eq!(b.offdiag, c(0.0, 0.0));

        let even = SubensembleMoments::new(1.0, 0.5, c(0.0, 0.0));
        let b = conditional_moments_from_subensembles(&even, &SubensembleMoments::absent(), 0.25).unwrap();
        assert_abs_diff_eq!(b.diag, 0.5, epsilon = 1e-15);
        assert_eq!(b.offdiag, c(0.0, 0.0));

        assert!(matches!(
            conditional_moments_from_subensembles(&even, &even, -0.1),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn closed_form_group_statistics_rebuild_gamma() {
        let v = sample();
        let stats = parity_statistics(&v).unwrap();
        assert_abs_diff_eq!(stats.even.probability + stats.odd.probability, 1.0, epsilon = 1e-15);
        let g = conditional_moments_from_subensembles(&stats.even, &stats.odd, v.v2().det()).unwrap();
        let direct = schur_parity(&v).unwrap();
        assert_abs_diff_eq!(g.diag, direct.diag, epsilon = 1e-12);
        assert_abs_diff_eq!((g.offdiag - direct.offdiag).norm(), 0.0, epsilon = 1e-12);

        let vac = parity_statistics(&TwoModeCovariance::vacuum()).unwrap();
        assert_abs_diff_eq!(vac.even.probability, 1.0, epsilon = 1e-15);
        assert_eq!(vac.odd, SubensembleMoments::absent());
    }

    #[test]
    fn zero_correlation_quartet_vanishes() {
        let v = sample().with_correlations(c(0.0, 0.0), c(0.0, 0.0));
        let q = derived_quartet(&v.v1(), &v.v2(), &schur_parity(&v).unwrap(), &schur_vacuum(&v).unwrap()).unwrap();
        assert_eq!(q.gamma, 0.0);
        assert_eq!(q.delta, c(0.0, 0.0));
        assert_eq!(q.alpha, 0.0);
        assert_eq!(q.beta, c(0.0, 0.0));
    }

    #[test]
    fn tmsv_quartet_values() {
        // independent closed-form evaluation with n = cosh(1)/2, |mc| = sinh(1)/2
        let v = TwoModeCovariance::two_mode_squeezed_vacuum(0.5);
        let q = derived_quartet(&v.v1(), &v.v2(), &schur_parity(&v).unwrap(), &schur_vacuum(&v).unwrap()).unwrap();
        let n = 1f64.cosh() / 2.0;
        let gamma = (n - 1.0 / (2.0 * 1f64.cosh())) * n * n;
        let alpha = (n - 0.5) * (n + 0.5) * (n + 0.5);
        assert_abs_diff_eq!(q.gamma, gamma, epsilon = 1e-12);
        assert_abs_diff_eq!(q.alpha, alpha, epsilon = 1e-12);
        assert!(q.gamma > 0.0 && q.alpha > 0.0);
        assert_abs_diff_eq!(q.delta.norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(q.beta.norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn wrong_block_kinds_are_a_contract_violation() {
        let v = sample();
        let g = schur_parity(&v).unwrap();
        assert!(matches!(derived_quartet(&v.v1(), &v.v2(), &g, &g), Err(Error::ContractViolation(_))));
    }

    #[test]
    fn invariant_matches_correlation_determinant() {
        let v = sample();
        let i3 = correlation_invariant(&v.v1(), &v.v2(), &schur_parity(&v).unwrap());
        assert_abs_diff_eq!(i3, v.correlation_det().abs(), epsilon = 1e-12);
    }
}
