use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::symplectic::embed;
use super::{LocalCovariance, LocalSymplectic, Mode, TwoModeCovariance};
use crate::{Error, Result};

/// One elementary Gaussian operation of a generation circuit.
///
/// The two-mode squeeze follows `a1 -> a1 cosh r + a2^dag sinh r`,
/// `a2 -> a2 cosh r + a1^dag sinh r`. A rotation by `phi` maps `a -> e^{i phi} a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OpRecord", into = "OpRecord")]
pub enum ElementaryOp {
    Squeeze(LocalSymplectic),
    Rotation { mode: Mode, phi: f64 },
    TwoModeSqueeze { r: f64 },
}

impl ElementaryOp {
    pub fn symplectic(&self) -> Matrix4<Complex64> {
        match *self {
            ElementaryOp::Squeeze(t) => t.matrix4(),
            ElementaryOp::Rotation { mode, phi } => {
                let ph = Complex64::from_polar(1.0, phi);
                embed(mode, &Matrix2::new(ph, Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), ph.conj()))
            }
            ElementaryOp::TwoModeSqueeze { r } => {
                let ch = Complex64::new(r.cosh(), 0.0);
                let sh = Complex64::new(-r.sinh(), 0.0);
                let z = Complex64::new(0.0, 0.0);
                Matrix4::new(
                    ch, z, z, sh,
                    z, ch, sh, z,
                    z, sh, ch, z,
                    sh, z, z, ch,
                )
            }
        }
    }

    pub fn squeeze_magnitude(&self) -> f64 {
        match *self {
            ElementaryOp::Squeeze(t) => t.r.abs(),
            ElementaryOp::Rotation { .. } => 0.0,
            ElementaryOp::TwoModeSqueeze { r } => r.abs(),
        }
    }

    /// Same operation with its squeezing parameter multiplied by `k`.
    pub fn with_squeeze_scaled(&self, k: f64) -> Self {
        match *self {
            ElementaryOp::Squeeze(t) => ElementaryOp::Squeeze(LocalSymplectic::new(t.mode, t.r * k, t.s)),
            ElementaryOp::Rotation { .. } => *self,
            ElementaryOp::TwoModeSqueeze { r } => ElementaryOp::TwoModeSqueeze { r: r * k },
        }
    }
}

/// JSON layout `{"kind": "sq"|"rot"|"tms", "mode": 1|2|null, "r": f, "s": f}`.
/// Rotations carry their angle in `s`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct OpRecord {
    kind: String,
    mode: Option<u8>,
    r: f64,
    s: f64,
}

impl From<ElementaryOp> for OpRecord {
    fn from(op: ElementaryOp) -> Self {
        match op {
            ElementaryOp::Squeeze(t) => OpRecord { kind: "sq".into(), mode: Some(t.mode.index()), r: t.r, s: t.s },
            ElementaryOp::Rotation { mode, phi } => {
                OpRecord { kind: "rot".into(), mode: Some(mode.index()), r: 0.0, s: phi }
            }
            ElementaryOp::TwoModeSqueeze { r } => OpRecord { kind: "tms".into(), mode: None, r, s: 0.0 },
        }
    }
}

impl TryFrom<OpRecord> for ElementaryOp {
    type Error = String;

    fn try_from(rec: OpRecord) -> std::result::Result<Self, String> {
        let mode = || -> std::result::Result<Mode, String> {
            rec.mode.ok_or_else(|| format!("op '{}' needs a mode", rec.kind)).and_then(Mode::try_from)
        };
        match rec.kind.as_str() {
            "sq" => Ok(ElementaryOp::Squeeze(LocalSymplectic::new(mode()?, rec.r, rec.s))),
            "rot" => Ok(ElementaryOp::Rotation { mode: mode()?, phi: rec.s }),
            "tms" => Ok(ElementaryOp::TwoModeSqueeze { r: rec.r }),
            other => Err(format!("unknown op kind '{other}'")),
        }
    }
}

/// Thermal inputs followed by a short Gaussian circuit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecipe {
    pub thermal: [f64; 2],
    pub ops: Vec<ElementaryOp>,
}

impl GenerationRecipe {
    pub fn new(thermal: [f64; 2], ops: Vec<ElementaryOp>) -> Self {
        Self { thermal, ops }
    }

    pub fn two_mode_squeezed_vacuum(r: f64) -> Self {
        Self::new([0.0, 0.0], vec![ElementaryOp::TwoModeSqueeze { r }])
    }

    pub fn validate(&self) -> Result<()> {
        if self.thermal.iter().any(|n| !n.is_finite() || *n < 0.0) {
            return Err(Error::InvalidInput(format!("thermal occupations must be >= 0, got {:?}", self.thermal)));
        }
        Ok(())
    }

    pub fn input_covariance(&self) -> TwoModeCovariance {
        let zero = Complex64::new(0.0, 0.0);
        TwoModeCovariance::product(
            LocalCovariance::new(self.thermal[0] + 0.5, zero),
            LocalCovariance::new(self.thermal[1] + 0.5, zero),
        )
    }

    /// Product `S_k ... S_1` of all operations.
    pub fn symplectic(&self) -> Matrix4<Complex64> {
        self.ops.iter().fold(Matrix4::identity(), |acc, op| op.symplectic() * acc)
    }

    /// Covariance produced by the circuit: `S V_th S^dag`.
    pub fn covariance(&self) -> TwoModeCovariance {
        let s = self.symplectic();
        TwoModeCovariance::from_matrix(&(s * self.input_covariance().matrix() * s.adjoint()))
    }

    pub fn total_squeezing(&self) -> f64 {
        self.ops.iter().map(ElementaryOp::squeeze_magnitude).sum()
    }

    pub fn max_thermal(&self) -> f64 {
        self.thermal[0].max(self.thermal[1])
    }

    pub fn count_two_mode(&self) -> usize {
        self.ops.iter().filter(|op| matches!(op, ElementaryOp::TwoModeSqueeze { .. })).count()
    }

    /// Same circuit followed by extra local transforms.
    pub fn followed_by(&self, extra: &[LocalSymplectic]) -> Self {
        let mut ops = self.ops.clone();
        ops.extend(extra.iter().map(|t| ElementaryOp::Squeeze(*t)));
        Self::new(self.thermal, ops)
    }
}

/// Structural class of generated states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateFamily {
    /// Up to four random operations, with or without a two-mode squeeze.
    Random,
    /// Locally squeezed thermal modes, `C = 0`.
    Product,
    /// A single two-mode squeeze on vacuum.
    Tmsv,
    /// Correlated with `m2 = 0`.
    M2Zero,
    /// Correlated with `m2 != 0` and `ms = 0`.
    OneZero,
    /// All moments real and nonzero, so `sin(th2 - thc + ths) = 0`.
    SinZero,
    /// No structural degeneracy.
    Generic,
}

impl std::str::FromStr for StateFamily {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| format!("unknown state family '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub max_thermal: f64,
    pub max_squeeze: f64,
    pub correlated: bool,
    pub family: StateFamily,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self { max_thermal: 3.0, max_squeeze: 1.5, correlated: true, family: StateFamily::Random }
    }
}

impl GenerationParams {
    pub fn family(family: StateFamily) -> Self {
        Self { family, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=3.0).contains(&self.max_thermal) || !(0.0..=1.5).contains(&self.max_squeeze) {
            return Err(Error::InvalidInput(format!(
                "generation bounds out of range (max_thermal in [0, 3], max_squeeze in [0, 1.5]): {self:?}"
            )));
        }
        Ok(())
    }
}

fn squeeze_value<R: Rng>(rng: &mut R, max: f64) -> f64 {
    // bounded away from zero so required squeezes are never accidentally trivial
    let mag = rng.random_range(0.1..=1.0) * max;
    if rng.random_bool(0.5) { mag } else { -mag }
}

fn angle<R: Rng>(rng: &mut R) -> f64 {
    rng.random_range(0.0..2.0 * PI)
}

fn random_local<R: Rng>(rng: &mut R, max_squeeze: f64) -> ElementaryOp {
    let mode = if rng.random_bool(0.5) { Mode::One } else { Mode::Two };
    if rng.random_bool(0.7) {
        ElementaryOp::Squeeze(LocalSymplectic::new(mode, rng.random_range(-max_squeeze..=max_squeeze), angle(rng)))
    } else {
        ElementaryOp::Rotation { mode, phi: angle(rng) }
    }
}

/// Draws a recipe of the requested family. `max_squeeze` bounds the total
/// squeezing of the circuit; draws exceeding it are scaled down uniformly,
/// which keeps every structural relation of the family.
pub fn generate_recipe<R: Rng>(rng: &mut R, params: &GenerationParams) -> GenerationRecipe {
    let recipe = draw_recipe(rng, params);
    let total = recipe.total_squeezing();
    if total <= params.max_squeeze {
        return recipe;
    }
    let k = params.max_squeeze / total;
    GenerationRecipe::new(recipe.thermal, recipe.ops.iter().map(|op| op.with_squeeze_scaled(k)).collect())
}

fn draw_recipe<R: Rng>(rng: &mut R, params: &GenerationParams) -> GenerationRecipe {
    let (nt, rmax) = (params.max_thermal, params.max_squeeze);
    let mut thermal = || rng.random_range(0.0..=nt);
    let th = [thermal(), thermal()];
    use ElementaryOp::*;
    let sq = |mode, r, s| Squeeze(LocalSymplectic::new(mode, r, s));
    match params.family {
        StateFamily::Random => {
            let count = rng.random_range(1..=4usize);
            let mut ops: Vec<ElementaryOp> = (0..count).map(|_| random_local(rng, rmax)).collect();
            if params.correlated {
                let at = rng.random_range(0..count);
                ops[at] = TwoModeSqueeze { r: squeeze_value(rng, rmax) };
            }
            GenerationRecipe::new(th, ops)
        }
        StateFamily::Product => GenerationRecipe::new(
            th,
            vec![
                sq(Mode::One, rng.random_range(-rmax..=rmax), angle(rng)),
                sq(Mode::Two, rng.random_range(-rmax..=rmax), angle(rng)),
            ],
        ),
        StateFamily::Tmsv => GenerationRecipe::two_mode_squeezed_vacuum(squeeze_value(rng, rmax)),
        StateFamily::M2Zero => GenerationRecipe::new(
            th,
            vec![
                TwoModeSqueeze { r: squeeze_value(rng, rmax) },
                sq(Mode::One, squeeze_value(rng, rmax), angle(rng)),
                Rotation { mode: Mode::Two, phi: angle(rng) },
            ],
        ),
        StateFamily::OneZero => {
            // m1 = -m2^* before the two-mode squeeze makes ms vanish after it
            let n = th[0];
            let (r, s2) = (squeeze_value(rng, rmax), angle(rng));
            GenerationRecipe::new(
                [n, n],
                vec![
                    sq(Mode::Two, r, s2),
                    sq(Mode::One, r, PI - s2),
                    TwoModeSqueeze { r: squeeze_value(rng, rmax) },
                    Rotation { mode: Mode::Two, phi: angle(rng) },
                ],
            )
        }
        StateFamily::SinZero => GenerationRecipe::new(
            th,
            vec![
                TwoModeSqueeze { r: squeeze_value(rng, rmax) },
                sq(Mode::Two, squeeze_value(rng, rmax), 0.0),
                sq(Mode::One, squeeze_value(rng, rmax), 0.0),
            ],
        ),
        StateFamily::Generic => GenerationRecipe::new(
            th,
            vec![
                sq(Mode::One, squeeze_value(rng, rmax), angle(rng)),
                sq(Mode::Two, squeeze_value(rng, rmax), angle(rng)),
                TwoModeSqueeze { r: squeeze_value(rng, rmax) },
                Rotation { mode: Mode::One, phi: angle(rng) },
            ],
        ),
    }
}

/// Seeded state generation; returns the covariance with the recipe that
/// produces it.
pub fn generate_random_state(seed: u64, params: &GenerationParams) -> Result<(TwoModeCovariance, GenerationRecipe)> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let recipe = generate_recipe(&mut rng, params);
    Ok((recipe.covariance(), recipe))
}
