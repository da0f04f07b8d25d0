use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{LocalCovariance, Mode, TwoModeCovariance};

/// Local squeeze `r` and quadrature rotation `s` on one mode, acting on the
/// covariance as `V -> S V S^dag` with
///
/// ```text
/// S = [ e^{-is} cosh r    sinh r        ]
///     [ sinh r            e^{is} cosh r ]
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalSymplectic {
    pub mode: Mode,
    pub r: f64,
    pub s: f64,
}

impl LocalSymplectic {
    pub fn new(mode: Mode, r: f64, s: f64) -> Self {
        Self { mode, r, s }
    }

    pub fn identity(mode: Mode) -> Self {
        Self::new(mode, 0.0, 0.0)
    }

    pub fn matrix(&self) -> Matrix2<Complex64> {
        let (ch, sh) = (self.r.cosh(), self.r.sinh());
        let ph = Complex64::from_polar(1.0, self.s);
        Matrix2::new(
            ph.conj() * ch,
            Complex64::new(sh, 0.0),
            Complex64::new(sh, 0.0),
            ph * ch,
        )
    }

    /// Closed-form inverse `[[e^{is} cosh r, -sinh r], [-sinh r, e^{-is} cosh r]]`.
    pub fn inverse_matrix(&self) -> Matrix2<Complex64> {
        let (ch, sh) = (self.r.cosh(), self.r.sinh());
        let ph = Complex64::from_polar(1.0, self.s);
        Matrix2::new(
            ph * ch,
            Complex64::new(-sh, 0.0),
            Complex64::new(-sh, 0.0),
            ph.conj() * ch,
        )
    }

    /// The inverse transform; its matrix equals [`inverse_matrix`](Self::inverse_matrix).
    pub fn inverse(&self) -> Self {
        Self::new(self.mode, -self.r, -self.s)
    }

    /// The transform embedded in the full two-mode space.
    pub fn matrix4(&self) -> Matrix4<Complex64> {
        embed(self.mode, &self.matrix())
    }
}

pub(crate) fn embed(mode: Mode, block: &Matrix2<Complex64>) -> Matrix4<Complex64> {
    let mut out = Matrix4::identity();
    let off = match mode {
        Mode::One => 0,
        Mode::Two => 2,
    };
    out.fixed_view_mut::<2, 2>(off, off).copy_from(block);
    out
}

/// `V~_j = S V_j S^dag` on the targeted mode and `C~ = S_1 C S_2^dag`.
pub fn apply_local_symplectic(v: &TwoModeCovariance, t: &LocalSymplectic) -> TwoModeCovariance {
    let s = t.matrix();
    let c = v.correlation_block();
    let (v1, v2, c_new) = match t.mode {
        Mode::One => (
            LocalCovariance::from_matrix(&(s * v.v1().matrix() * s.adjoint())),
            v.v2(),
            s * c,
        ),
        Mode::Two => (
            v.v1(),
            LocalCovariance::from_matrix(&(s * v.v2().matrix() * s.adjoint())),
            c * s.adjoint(),
        ),
    };
    let (ms, mc) = TwoModeCovariance::correlations_from_block(&c_new);
    TwoModeCovariance::from_blocks(v1, v2, ms, mc)
}

pub fn invert_local_symplectic(t: &LocalSymplectic) -> LocalSymplectic {
    t.inverse()
}

/// Applies a sequence of transforms in order.
pub fn apply_all(v: &TwoModeCovariance, ts: &[LocalSymplectic]) -> TwoModeCovariance {
    ts.iter().fold(*v, |acc, t| apply_local_symplectic(&acc, t))
}

/// Undoes a sequence of transforms previously applied with [`apply_all`].
pub fn undo_all(v: &TwoModeCovariance, ts: &[LocalSymplectic]) -> TwoModeCovariance {
    ts.iter().rev().fold(*v, |acc, t| apply_local_symplectic(&acc, &t.inverse()))
}
