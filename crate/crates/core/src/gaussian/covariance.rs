use nalgebra::{Matrix2, Matrix4, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Absolute eigenvalue tolerance for the positivity tests.
pub const EPS_PSD: f64 = 1e-9;

/// Which party's mode an object refers to. Mode 1 belongs to Alice, mode 2
/// to Bob.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Mode {
    One,
    Two,
}

impl Mode {
    pub fn index(self) -> u8 {
        match self {
            Mode::One => 1,
            Mode::Two => 2,
        }
    }

    pub fn other(self) -> Mode {
        match self {
            Mode::One => Mode::Two,
            Mode::Two => Mode::One,
        }
    }
}

impl TryFrom<u8> for Mode {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Mode::One),
            2 => Ok(Mode::Two),
            other => Err(format!("mode must be 1 or 2, got {other}")),
        }
    }
}

impl From<Mode> for u8 {
    fn from(m: Mode) -> u8 {
        m.index()
    }
}

/// The 2x2 block `[[n, m], [m*, n]]` describing one mode on its own.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalCovariance {
    pub n: f64,
    #[serde(with = "crate::serde_complex")]
    pub m: Complex64,
}

impl LocalCovariance {
    pub fn new(n: f64, m: Complex64) -> Self {
        Self { n, m }
    }

    pub fn vacuum() -> Self {
        Self::new(0.5, Complex64::new(0.0, 0.0))
    }

    pub fn det(&self) -> f64 {
        self.n * self.n - self.m.norm_sqr()
    }

    /// `n >= 1/2` and `n^2 - |m|^2 >= 1/4`, up to `EPS_PSD`.
    pub fn is_physical(&self) -> bool {
        self.n >= 0.5 - EPS_PSD && self.det() >= 0.25 - EPS_PSD
    }

    pub fn matrix(&self) -> Matrix2<Complex64> {
        Matrix2::new(
            Complex64::new(self.n, 0.0),
            self.m,
            self.m.conj(),
            Complex64::new(self.n, 0.0),
        )
    }

    /// Reads the block back from a matrix that is Hermitian up to rounding;
    /// mirrored entries are averaged.
    pub fn from_matrix(b: &Matrix2<Complex64>) -> Self {
        Self {
            n: 0.5 * (b[(0, 0)].re + b[(1, 1)].re),
            m: 0.5 * (b[(0, 1)] + b[(1, 0)].conj()),
        }
    }
}

/// Covariance matrix of a zero-mean two-mode Gaussian state, stored as its
/// six independent moments. The 4x4 matrix in the `(a1, a1^dag, a2, a2^dag)`
/// ordering is
///
/// ```text
/// [ n1   m1   ms   mc  ]
/// [ m1*  n1   mc*  ms* ]
/// [ ms*  mc   n2   m2  ]
/// [ mc*  ms   m2*  n2  ]
/// ```
///
/// With `V_ij = (-1)^(i+j) <v_i v_j^dag + v_j^dag v_i> / 2` this means
/// `n = <a^dag a> + 1/2`, `m = -<a^2>`, `ms = <a1 a2^dag>`, `mc = -<a1 a2>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoModeCovariance {
    pub n1: f64,
    pub n2: f64,
    #[serde(with = "crate::serde_complex")]
    pub m1: Complex64,
    #[serde(with = "crate::serde_complex")]
    pub m2: Complex64,
    #[serde(with = "crate::serde_complex")]
    pub ms: Complex64,
    #[serde(with = "crate::serde_complex")]
    pub mc: Complex64,
}

impl TwoModeCovariance {
    pub fn new(
        n1: f64,
        n2: f64,
        m1: Complex64,
        m2: Complex64,
        ms: Complex64,
        mc: Complex64,
    ) -> Self {
        Self { n1, n2, m1, m2, ms, mc }
    }

    pub fn vacuum() -> Self {
        Self::product(LocalCovariance::vacuum(), LocalCovariance::vacuum())
    }

    pub fn product(v1: LocalCovariance, v2: LocalCovariance) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        Self::new(v1.n, v2.n, v1.m, v2.m, zero, zero)
    }

    /// Two-mode squeezed vacuum generated by `a1 -> a1 cosh r + a2^dag sinh r`.
    pub fn two_mode_squeezed_vacuum(r: f64) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        let n = 0.5 * (2.0 * r).cosh();
        Self::new(n, n, zero, zero, zero, Complex64::new(-0.5 * (2.0 * r).sinh(), 0.0))
    }

    pub fn local(&self, mode: Mode) -> LocalCovariance {
        match mode {
            Mode::One => LocalCovariance::new(self.n1, self.m1),
            Mode::Two => LocalCovariance::new(self.n2, self.m2),
        }
    }

    pub fn v1(&self) -> LocalCovariance {
        self.local(Mode::One)
    }

    pub fn v2(&self) -> LocalCovariance {
        self.local(Mode::Two)
    }

    pub fn from_blocks(v1: LocalCovariance, v2: LocalCovariance, ms: Complex64, mc: Complex64) -> Self {
        Self::new(v1.n, v2.n, v1.m, v2.m, ms, mc)
    }

    pub fn with_correlations(&self, ms: Complex64, mc: Complex64) -> Self {
        Self { ms, mc, ..*self }
    }

    /// `C = [[ms, mc], [mc*, ms*]]`.
    pub fn correlation_block(&self) -> Matrix2<Complex64> {
        Matrix2::new(self.ms, self.mc, self.mc.conj(), self.ms.conj())
    }

    /// Reads `(ms, mc)` from a correlation block, averaging mirrored entries.
    pub fn correlations_from_block(c: &Matrix2<Complex64>) -> (Complex64, Complex64) {
        (
            0.5 * (c[(0, 0)] + c[(1, 1)].conj()),
            0.5 * (c[(0, 1)] + c[(1, 0)].conj()),
        )
    }

    /// `det C = |ms|^2 - |mc|^2`, real for this block structure.
    pub fn correlation_det(&self) -> f64 {
        self.ms.norm_sqr() - self.mc.norm_sqr()
    }

    /// The state with `C -> -C`, i.e. mode 2 rotated by pi.
    pub fn sign_partner(&self) -> Self {
        self.with_correlations(-self.ms, -self.mc)
    }

    /// The state with the two modes relabelled.
    pub fn swapped(&self) -> Self {
        Self::new(self.n2, self.n1, self.m2, self.m1, self.ms.conj(), self.mc)
    }

    pub fn is_uncorrelated(&self) -> bool {
        self.ms == Complex64::new(0.0, 0.0) && self.mc == Complex64::new(0.0, 0.0)
    }

    pub fn is_finite(&self) -> bool {
        [self.n1, self.n2, self.m1.re, self.m1.im, self.m2.re, self.m2.im]
            .iter()
            .chain([self.ms.re, self.ms.im, self.mc.re, self.mc.im].iter())
            .all(|x| x.is_finite())
    }

    pub fn matrix(&self) -> Matrix4<Complex64> {
        let re = |x: f64| Complex64::new(x, 0.0);
        let (n1, n2, m1, m2, ms, mc) = (self.n1, self.n2, self.m1, self.m2, self.ms, self.mc);
        Matrix4::new(
            re(n1), m1, ms, mc,
            m1.conj(), re(n1), mc.conj(), ms.conj(),
            ms.conj(), mc, re(n2), m2,
            mc.conj(), ms, m2.conj(), re(n2),
        )
    }

    /// Inverse of [`matrix`](Self::matrix) for matrices that are Hermitian
    /// and structured up to rounding.
    pub fn from_matrix(v: &Matrix4<Complex64>) -> Self {
        let v1 = LocalCovariance::from_matrix(&v.fixed_view::<2, 2>(0, 0).into_owned());
        let v2 = LocalCovariance::from_matrix(&v.fixed_view::<2, 2>(2, 2).into_owned());
        let upper = v.fixed_view::<2, 2>(0, 2).into_owned();
        let lower = v.fixed_view::<2, 2>(2, 0).into_owned().adjoint();
        let (ms, mc) = Self::correlations_from_block(&((upper + lower) * Complex64::new(0.5, 0.0)));
        Self::from_blocks(v1, v2, ms, mc)
    }

    /// Six moments as a flat array `[n1, n2, m1, m2, ms, mc]`.
    pub fn moments(&self) -> [Complex64; 6] {
        [
            Complex64::new(self.n1, 0.0),
            Complex64::new(self.n2, 0.0),
            self.m1,
            self.m2,
            self.ms,
            self.mc,
        ]
    }
}

/// `E = diag(1, -1, 1, -1)`.
pub fn symplectic_form() -> Matrix4<Complex64> {
    Matrix4::from_diagonal(&Vector4::new(1.0, -1.0, 1.0, -1.0).map(|x| Complex64::new(x, 0.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhysicalityVerdict {
    Physical,
    PositiveButUnphysical,
    NotPositive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalityReport {
    pub verdict: PhysicalityVerdict,
    pub min_eig_v: f64,
    pub min_eig_uncertainty: f64,
}

impl PhysicalityReport {
    pub fn is_physical(&self) -> bool {
        self.verdict == PhysicalityVerdict::Physical
    }
}

fn min_eigenvalue(m: Matrix4<Complex64>) -> f64 {
    m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

/// Smallest eigenvalue of `V + E/2`.
pub fn uncertainty_margin(v: &TwoModeCovariance) -> f64 {
    min_eigenvalue(v.matrix() + symplectic_form() * Complex64::new(0.5, 0.0))
}

/// Eigenvalue tests of `V >= 0` and `V + E/2 >= 0`.
pub fn validate_physicality(v: &TwoModeCovariance) -> Result<PhysicalityReport> {
    if !v.is_finite() {
        return Err(Error::InvalidInput("covariance has non-finite entries".into()));
    }
    let min_eig_v = min_eigenvalue(v.matrix());
    let min_eig_uncertainty = uncertainty_margin(v);
    let verdict = if min_eig_v < -EPS_PSD {
        PhysicalityVerdict::NotPositive
    } else if min_eig_uncertainty < -EPS_PSD {
        PhysicalityVerdict::PositiveButUnphysical
    } else {
        PhysicalityVerdict::Physical
    };
    Ok(PhysicalityReport { verdict, min_eig_v, min_eig_uncertainty })
}

/// `C(z) = exp(-z^dag V z / 2)` with `z = (z1, z1*, z2, z2*)^T`.
pub fn characteristic_function(v: &TwoModeCovariance, z1: Complex64, z2: Complex64) -> Complex64 {
    let z = Vector4::new(z1, z1.conj(), z2, z2.conj());
    let quad = (z.adjoint() * v.matrix() * z)[(0, 0)];
    (-0.5 * quad).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn vacuum_is_physical_and_saturates() {
        let r = validate_physicality(&TwoModeCovariance::vacuum()).unwrap();
        assert_eq!(r.verdict, PhysicalityVerdict::Physical);
        assert_abs_diff_eq!(r.min_eig_uncertainty, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn over_correlated_vacuum_is_not_physical() {
        let v = TwoModeCovariance::vacuum().with_correlations(c(0.0, 0.0), c(0.5, 0.0));
        let r = validate_physicality(&v).unwrap();
        assert_ne!(r.verdict, PhysicalityVerdict::Physical);
        // V itself has eigenvalues {0, 0, 1, 1}; the uncertainty test fails.
        assert_eq!(r.verdict, PhysicalityVerdict::PositiveButUnphysical);
        assert!(r.min_eig_uncertainty < -0.1);
    }

    #[test]
    fn sub_vacuum_diagonal_is_positive_but_unphysical() {
        let z = c(0.0, 0.0);
        let v = TwoModeCovariance::new(0.4, 0.4, z, z, z, z);
        let r = validate_physicality(&v).unwrap();
        assert_eq!(r.verdict, PhysicalityVerdict::PositiveButUnphysical);
        assert_abs_diff_eq!(r.min_eig_v, 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(r.min_eig_uncertainty, -0.1, epsilon = 1e-12);
    }

    #[test]
    fn negative_diagonal_is_not_positive() {
        let z = c(0.0, 0.0);
        let v = TwoModeCovariance::new(-1.0, 0.5, z, z, z, z);
        assert_eq!(validate_physicality(&v).unwrap().verdict, PhysicalityVerdict::NotPositive);
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let mut v = TwoModeCovariance::vacuum();
        v.m2 = c(f64::NAN, 0.0);
        assert!(matches!(validate_physicality(&v), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn assembled_matrix_is_hermitian() {
        let v = TwoModeCovariance::new(1.3, 0.9, c(0.1, -0.2), c(0.3, 0.05), c(-0.2, 0.1), c(0.15, 0.4));
        let m = v.matrix();
        assert_eq!(m, m.adjoint());
        assert_eq!(TwoModeCovariance::from_matrix(&m), v);
    }

    #[test]
    fn characteristic_function_values() {
        let v = TwoModeCovariance::new(1.3, 0.9, c(0.1, -0.2), c(0.3, 0.05), c(-0.2, 0.1), c(0.15, 0.4));
        assert_eq!(characteristic_function(&v, c(0.0, 0.0), c(0.0, 0.0)), c(1.0, 0.0));

        let vac = characteristic_function(&TwoModeCovariance::vacuum(), c(1.0, 0.0), c(0.0, 0.0));
        assert_abs_diff_eq!(vac.re, (-0.5f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(vac.im, 0.0, epsilon = 1e-15);

        let p = TwoModeCovariance::product(
            LocalCovariance::new(1.2, c(0.3, 0.4)),
            LocalCovariance::new(0.8, c(-0.2, 0.1)),
        );
        let (z1, z2) = (c(0.3, -0.7), c(-0.5, 0.2));
        let joint = characteristic_function(&p, z1, z2);
        let split = characteristic_function(&p, z1, c(0.0, 0.0))
            * characteristic_function(&p, c(0.0, 0.0), z2);
        assert_abs_diff_eq!((joint - split).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn swap_is_an_involution() {
        let v = TwoModeCovariance::new(1.3, 0.9, c(0.1, -0.2), c(0.3, 0.05), c(-0.2, 0.1), c(0.15, 0.4));
        assert_eq!(v.swapped().swapped(), v);
        // Swapping is a permutation of the 4x4 matrix, so the spectrum is kept.
        let a = v.matrix().symmetric_eigenvalues();
        let b = v.swapped().matrix().symmetric_eigenvalues();
        let mut a: Vec<f64> = a.iter().copied().collect();
        let mut b: Vec<f64> = b.iter().copied().collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }
}
