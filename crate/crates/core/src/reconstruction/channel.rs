use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::conditioning::{parity_statistics, vacuum_statistics, ParityStatistics, SubensembleMoments};
use crate::gaussian::{apply_local_symplectic, LocalCovariance, LocalSymplectic, TwoModeCovariance};
use crate::Result;

/// Number of scalars in [`Observation::to_raw`].
pub const RAW_LEN: usize = 18;

/// One round of locally available statistics in the current frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub v1: LocalCovariance,
    pub v2: LocalCovariance,
    pub parity: ParityStatistics,
    pub vacuum: SubensembleMoments,
    /// Standard errors of the scalars of [`to_raw`](Self::to_raw), absent on
    /// exact channels.
    pub sigma: Option<[f64; RAW_LEN]>,
}

fn push_local(out: &mut Vec<f64>, v: &LocalCovariance) {
    out.extend([v.n, v.m.re, v.m.im]);
}

fn push_group(out: &mut Vec<f64>, g: &SubensembleMoments) {
    out.extend([g.probability, g.diag, g.offdiag.re, g.offdiag.im]);
}

impl Observation {
    /// `[n1, m1, n2, m2, even (p, n, m), odd (p, n, m), vacuum (p, n, m)]`
    /// with complex entries split into re, im.
    pub fn to_raw(&self) -> [f64; RAW_LEN] {
        let mut out = Vec::with_capacity(RAW_LEN);
        push_local(&mut out, &self.v1);
        push_local(&mut out, &self.v2);
        push_group(&mut out, &self.parity.even);
        push_group(&mut out, &self.parity.odd);
        push_group(&mut out, &self.vacuum);
        out.try_into().expect("raw layout")
    }

    pub fn from_raw(raw: &[f64; RAW_LEN], sigma: Option<[f64; RAW_LEN]>) -> Self {
        let c = |i: usize| Complex64::new(raw[i], raw[i + 1]);
        let group = |i: usize| SubensembleMoments::new(raw[i], raw[i + 1], c(i + 2));
        Self {
            v1: LocalCovariance::new(raw[0], c(1)),
            v2: LocalCovariance::new(raw[3], c(4)),
            parity: ParityStatistics { even: group(6), odd: group(10) },
            vacuum: group(14),
            sigma,
        }
    }
}

/// The source of copies together with the local measurement devices.
///
/// Implementations hold the hidden state; the protocol only sees
/// [`Observation`]s and requests local transforms on the source.
pub trait MeasurementChannel {
    fn observe(&mut self) -> Result<Observation>;

    /// Applies a local transform to every subsequent copy.
    fn apply_transform(&mut self, t: &LocalSymplectic) -> Result<()>;

    /// Exchanges which party performs the projective measurements.
    fn swap_roles(&mut self) -> Result<()>;

    fn is_exact(&self) -> bool;
}

impl<C: MeasurementChannel + ?Sized> MeasurementChannel for &mut C {
    fn observe(&mut self) -> Result<Observation> {
        (**self).observe()
    }
    fn apply_transform(&mut self, t: &LocalSymplectic) -> Result<()> {
        (**self).apply_transform(t)
    }
    fn swap_roles(&mut self) -> Result<()> {
        (**self).swap_roles()
    }
    fn is_exact(&self) -> bool {
        (**self).is_exact()
    }
}

/// Exact statistics of a Gaussian state from the closed-form conditional
/// moments.
#[derive(Debug, Clone)]
pub struct ExactChannel {
    truth: TwoModeCovariance,
    current: TwoModeCovariance,
}

impl ExactChannel {
    pub fn new(truth: TwoModeCovariance) -> Self {
        Self { truth, current: truth }
    }

    pub fn truth(&self) -> &TwoModeCovariance {
        &self.truth
    }

    /// The state in the current (transformed, possibly role-swapped) frame.
    pub fn current(&self) -> &TwoModeCovariance {
        &self.current
    }
}

pub fn exact_observation(v: &TwoModeCovariance) -> Result<Observation> {
    Ok(Observation {
        v1: v.v1(),
        v2: v.v2(),
        parity: parity_statistics(v)?,
        vacuum: vacuum_statistics(v)?,
        sigma: None,
    })
}

impl MeasurementChannel for ExactChannel {
    fn observe(&mut self) -> Result<Observation> {
        exact_observation(&self.current)
    }

    fn apply_transform(&mut self, t: &LocalSymplectic) -> Result<()> {
        self.current = apply_local_symplectic(&self.current, t);
        Ok(())
    }

    fn swap_roles(&mut self) -> Result<()> {
        self.current = self.current.swapped();
        Ok(())
    }

    fn is_exact(&self) -> bool {
        true
    }
}
