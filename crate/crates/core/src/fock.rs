//! Truncated Fock-space oracle.
//!
//! Builds the density matrix of a recipe state by replaying its circuit as
//! matrix exponentials of the quadratic generators, then applies the parity
//! and vacuum projections on mode 2 literally. Used to cross-check the
//! Schur-complement formulas through an independent path.
//!
//! Basis index of `|n1, n2>` is `n1 * cutoff + n2`. Density matrices are
//! stored row-major.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::conditioning::{ParityStatistics, SubensembleMoments};
use crate::gaussian::{ElementaryOp, GenerationRecipe, LocalCovariance, LocalSymplectic, Mode, TwoModeCovariance};
use crate::reconstruction::{MeasurementChannel, Observation, RAW_LEN};
use crate::{Error, Result};

/// Admissible trace deficit of a built state.
pub const EPS_TR: f64 = 1e-8;
/// Smallest vacuum probability for which the conditioned moments are
/// reported.
pub const P_MIN: f64 = 1e-6;
/// Extra levels per mode used when exponentiating generators, so that the
/// truncated propagator leaks weight out of the kept space instead of
/// reflecting it.
const PAD: usize = 12;
/// Squared modulus below which propagator entries are dropped; the dropped
/// entries are rounding noise on exact zeros of the parity selection rule.
const NEGLIGIBLE: f64 = 1e-32;
/// Trace deficit targeted by the automatic cutoff; moment errors run about
/// two orders of magnitude above it.
pub const TAIL_TARGET: f64 = 1e-10;
pub const MAX_CUTOFF: usize = 64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `max(12, ceil(8 (n_max + sinh^2(r_total) + 1)))`.
pub fn cutoff_rule(recipe: &GenerationRecipe) -> usize {
    let r = recipe.total_squeezing();
    let est = 8.0 * (recipe.max_thermal() + r.sinh().powi(2) + 1.0);
    (est.ceil() as usize).max(12)
}

/// Index tables for the ladder monomials used by the moment evaluations.
/// Each table maps a basis index `i` to `(j, c)` with `X |i> = c |j>`.
#[derive(Debug)]
pub struct FockBasis {
    pub cutoff: usize,
    a1: Vec<Option<(usize, f64)>>,
    a2: Vec<Option<(usize, f64)>>,
    a1a1: Vec<Option<(usize, f64)>>,
    a2a2: Vec<Option<(usize, f64)>>,
    a1a2: Vec<Option<(usize, f64)>>,
    a1a2dag: Vec<Option<(usize, f64)>>,
}

impl FockBasis {
    fn new(cutoff: usize) -> Self {
        let c = cutoff;
        let table = |f: &dyn Fn(usize, usize) -> Option<(usize, usize, f64)>| -> Vec<Option<(usize, f64)>> {
            (0..c * c)
                .map(|i| f(i / c, i % c).filter(|&(m1, m2, _)| m1 < c && m2 < c).map(|(m1, m2, x)| (m1 * c + m2, x)))
                .collect()
        };
        let lower = |n: usize| (n > 0).then(|| (n - 1, (n as f64).sqrt()));
        Self {
            cutoff,
            a1: table(&|n1, n2| lower(n1).map(|(m, x)| (m, n2, x))),
            a2: table(&|n1, n2| lower(n2).map(|(m, x)| (n1, m, x))),
            a1a1: table(&|n1, n2| (n1 >= 2).then(|| (n1 - 2, n2, ((n1 * (n1 - 1)) as f64).sqrt()))),
            a2a2: table(&|n1, n2| (n2 >= 2).then(|| (n1, n2 - 2, ((n2 * (n2 - 1)) as f64).sqrt()))),
            a1a2: table(&|n1, n2| (n1 >= 1 && n2 >= 1).then(|| (n1 - 1, n2 - 1, ((n1 * n2) as f64).sqrt()))),
            a1a2dag: table(&|n1, n2| (n1 >= 1).then(|| (n1 - 1, n2 + 1, ((n1 * (n2 + 1)) as f64).sqrt()))),
        }
    }

    pub fn dim(&self) -> usize {
        self.cutoff * self.cutoff
    }
}

fn basis_cache() -> &'static Mutex<HashMap<usize, Arc<FockBasis>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<FockBasis>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Shared operator tables for `cutoff`, built on first use.
pub fn basis(cutoff: usize) -> Arc<FockBasis> {
    let mut cache = basis_cache().lock().expect("basis cache poisoned");
    cache.entry(cutoff).or_insert_with(|| Arc::new(FockBasis::new(cutoff))).clone()
}

/// A two-mode operator in the truncated tensor basis, row-major.
#[derive(Debug, Clone)]
pub struct FockOperator {
    pub cutoff: usize,
    pub data: Vec<Complex64>,
}

/// Unitary restricted to the kept space, as sparse rows.
struct SparseRows {
    rows: Vec<Vec<(usize, Complex64)>>,
}

impl FockOperator {
    fn zeros(cutoff: usize) -> Self {
        Self { cutoff, data: vec![ZERO; cutoff.pow(4)] }
    }

    pub fn dim(&self) -> usize {
        self.cutoff * self.cutoff
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.dim() + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.get(i, i).re).sum()
    }

    pub fn max_hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let d = self.dim();
        let m = DMatrix::from_fn(d, d, |i, j| 0.5 * (self.get(i, j) + self.get(j, i).conj()));
        m.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    fn adjoint(&self) -> Self {
        let d = self.dim();
        let mut out = Self::zeros(self.cutoff);
        for i in 0..d {
            for j in 0..d {
                out.data[j * d + i] = self.data[i * d + j].conj();
            }
        }
        out
    }

    fn left_multiply(&self, u: &SparseRows) -> Self {
        let d = self.dim();
        let mut out = Self::zeros(self.cutoff);
        for (i, row) in u.rows.iter().enumerate() {
            let dst = &mut out.data[i * d..(i + 1) * d];
            for &(j, c) in row {
                let src = &self.data[j * d..(j + 1) * d];
                for (o, s) in dst.iter_mut().zip(src) {
                    *o += c * s;
                }
            }
        }
        out
    }

    /// `U rho U^dag = (U (U rho)^dag)^dag`.
    fn conjugate_by(&self, u: &SparseRows) -> Self {
        self.left_multiply(u).adjoint().left_multiply(u).adjoint()
    }

    /// Exchanges the two modes.
    pub fn swapped(&self) -> Self {
        let c = self.cutoff;
        let d = self.dim();
        let perm = |i: usize| (i % c) * c + i / c;
        let mut out = Self::zeros(c);
        for i in 0..d {
            for j in 0..d {
                out.data[perm(i) * d + perm(j)] = self.data[i * d + j];
            }
        }
        out
    }

    fn expect(&self, table: &[Option<(usize, f64)>]) -> Complex64 {
        table
            .iter()
            .enumerate()
            .filter_map(|(i, e)| e.map(|(j, x)| self.get(i, j) * x))
            .sum()
    }

    fn mean_number(&self, mode: Mode) -> f64 {
        let c = self.cutoff;
        (0..self.dim())
            .map(|i| {
                let n = if mode == Mode::One { i / c } else { i % c };
                n as f64 * self.get(i, i).re
            })
            .sum()
    }
}

/// `exp(G)` for anti-Hermitian `G`, through the eigendecomposition of the
/// Hermitian matrix `iG`.
fn expm_anti_hermitian(g: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let h = g.map(|x| x * Complex64::new(0.0, 1.0));
    let h = (&h + h.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let phases = eig.eigenvalues.map(|l| Complex64::from_polar(1.0, -l));
    let q = &eig.eigenvectors;
    q * DMatrix::from_diagonal(&phases) * q.adjoint()
}

/// Single-mode propagator for `a -> e^{-is} cosh r a - sinh r a^dag` as a
/// `c x c` block, exponentiated in `c + PAD` levels:
/// `U = S(zeta) R(-s)` with `zeta = r e^{-is}`,
/// `S(zeta) = exp((zeta* a^2 - zeta a^dag^2) / 2)`, `R(theta) = exp(i theta N)`.
fn local_squeeze_block(c: usize, r: f64, s: f64) -> DMatrix<Complex64> {
    let w = c + PAD;
    let zeta = Complex64::from_polar(r, -s);
    let mut g = DMatrix::from_element(w, w, ZERO);
    for n in 2..w {
        let x = ((n * (n - 1)) as f64).sqrt();
        // <n-2| a^2 |n> and <n| a^dag^2 |n-2>
        g[(n - 2, n)] += zeta.conj() * (0.5 * x);
        g[(n, n - 2)] -= zeta * (0.5 * x);
    }
    let sq = expm_anti_hermitian(&g);
    DMatrix::from_fn(c, c, |i, j| sq[(i, j)] * Complex64::from_polar(1.0, -s * j as f64))
}

fn embed_local(c: usize, mode: Mode, block: &DMatrix<Complex64>) -> SparseRows {
    let rows = (0..c * c)
        .map(|i| {
            let (n1, n2) = (i / c, i % c);
            (0..c)
                .map(|k| match mode {
                    Mode::One => (k * c + n2, block[(n1, k)]),
                    Mode::Two => (n1 * c + k, block[(n2, k)]),
                })
                .filter(|&(_, x)| x.norm_sqr() > NEGLIGIBLE)
                .collect()
        })
        .collect();
    SparseRows { rows }
}

fn rotation_rows(c: usize, mode: Mode, phi: f64) -> SparseRows {
    let rows = (0..c * c)
        .map(|i| {
            let n = if mode == Mode::One { i / c } else { i % c };
            vec![(i, Complex64::from_polar(1.0, phi * n as f64))]
        })
        .collect();
    SparseRows { rows }
}

/// `exp(r (a1^dag a2^dag - a1 a2))`, which conserves `n1 - n2`; each sector
/// is exponentiated separately in the padded space.
fn two_mode_squeeze_rows(c: usize, r: f64) -> SparseRows {
    let w = c + PAD;
    let mut rows: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); c * c];
    for k in -(w as isize - 1)..(w as isize) {
        // sector states |n + k0, n + k1> with n1 - n2 = k
        let (b1, b2) = if k >= 0 { (k as usize, 0) } else { (0, (-k) as usize) };
        let len = w - b1.max(b2);
        let mut g = DMatrix::from_element(len, len, ZERO);
        for t in 0..len - 1 {
            let x = (((b1 + t + 1) * (b2 + t + 1)) as f64).sqrt() * r;
            // a1^dag a2^dag raises t -> t + 1
            g[(t + 1, t)] += Complex64::new(x, 0.0);
            g[(t, t + 1)] -= Complex64::new(x, 0.0);
        }
        let u = expm_anti_hermitian(&g);
        let kept: Vec<usize> = (0..len).filter(|&t| b1 + t < c && b2 + t < c).collect();
        for &ti in &kept {
            let i = (b1 + ti) * c + (b2 + ti);
            rows[i] = kept.iter().map(|&tj| ((b1 + tj) * c + (b2 + tj), u[(ti, tj)])).collect();
        }
    }
    SparseRows { rows }
}

fn op_rows(c: usize, op: &ElementaryOp) -> SparseRows {
    match *op {
        ElementaryOp::Squeeze(t) => embed_local(c, t.mode, &local_squeeze_block(c, t.r, t.s)),
        ElementaryOp::Rotation { mode, phi } => rotation_rows(c, mode, phi),
        ElementaryOp::TwoModeSqueeze { r } => two_mode_squeeze_rows(c, r),
    }
}

fn thermal_weights(nbar: f64, c: usize) -> Vec<f64> {
    let q = nbar / (nbar + 1.0);
    (0..c).map(|n| q.powi(n as i32) / (nbar + 1.0)).collect()
}

fn evolve(recipe: &GenerationRecipe, c: usize) -> FockOperator {
    let mut rho = FockOperator::zeros(c);
    let (w1, w2) = (thermal_weights(recipe.thermal[0], c), thermal_weights(recipe.thermal[1], c));
    let d = c * c;
    for n1 in 0..c {
        for n2 in 0..c {
            let i = n1 * c + n2;
            rho.data[i * d + i] = Complex64::new(w1[n1] * w2[n2], 0.0);
        }
    }
    for op in &recipe.ops {
        rho = rho.conjugate_by(&op_rows(c, op));
    }
    rho
}

/// Density matrix of the recipe state at `cutoff`, checked against the
/// trace-deficit tail bound [`EPS_TR`].
pub fn build_state(recipe: &GenerationRecipe, cutoff: usize) -> Result<FockOperator> {
    recipe.validate()?;
    if cutoff < 2 {
        return Err(Error::InvalidInput(format!("cutoff must be >= 2, got {cutoff}")));
    }
    let rho = evolve(recipe, cutoff);
    let tail = 1.0 - rho.trace();
    if !(tail <= EPS_TR) {
        return Err(Error::TailTooLarge { tail, cutoff });
    }
    Ok(rho)
}

/// Per-level decay ratio of the photon-number marginals near the cutoff,
/// from pair sums so that parity-alternating populations do not matter.
fn tail_ratio(rho: &FockOperator) -> Option<f64> {
    let c = rho.cutoff;
    if c < 6 {
        return None;
    }
    let mut p = [vec![0.0; c], vec![0.0; c]];
    for i in 0..c * c {
        let x = rho.get(i, i).re;
        p[0][i / c] += x;
        p[1][i % c] += x;
    }
    p.iter()
        .map(|m| ((m[c - 2] + m[c - 1]) / (m[c - 6] + m[c - 5])).sqrt().sqrt())
        .filter(|q| q.is_finite())
        .reduce(f64::max)
        .filter(|q| *q > 0.0 && *q < 1.0)
}

/// Builds at `cutoff` when given. Otherwise starts at [`cutoff_rule`] and
/// grows the cutoff in steps of 4 until the trace deficit is below
/// [`TAIL_TARGET`]; several steps are taken at once when the geometric
/// decay of the marginals predicts them.
pub fn build_state_auto(recipe: &GenerationRecipe, cutoff: Option<usize>) -> Result<FockOperator> {
    if let Some(c) = cutoff {
        return build_state(recipe, c);
    }
    recipe.validate()?;
    let mut c = cutoff_rule(recipe).min(MAX_CUTOFF);
    loop {
        let rho = evolve(recipe, c);
        let tail = 1.0 - rho.trace();
        if tail <= TAIL_TARGET {
            return Ok(rho);
        }
        if c + 4 > MAX_CUTOFF {
            return build_state(recipe, c);
        }
        let steps = match tail_ratio(&rho) {
            Some(q) if tail > 0.0 => ((TAIL_TARGET / tail).ln() / q.ln() / 4.0).ceil().max(1.0),
            _ => 1.0,
        };
        c = (c + 4 * steps as usize).min(MAX_CUTOFF - (MAX_CUTOFF - c) % 4);
    }
}

/// The cutoff [`build_state_auto`] settles on.
pub fn auto_cutoff(recipe: &GenerationRecipe) -> Result<usize> {
    build_state_auto(recipe, None).map(|rho| rho.cutoff)
}

/// First moments `(<a1>, <a2>)`, normalized by the trace.
pub fn first_moments(rho: &FockOperator) -> (Complex64, Complex64) {
    let b = basis(rho.cutoff);
    let t = rho.trace();
    (rho.expect(&b.a1) / t, rho.expect(&b.a2) / t)
}

/// Second moments in the symmetric convention, normalized by the trace.
pub fn moments_of(rho: &FockOperator) -> TwoModeCovariance {
    let b = basis(rho.cutoff);
    let t = rho.trace();
    TwoModeCovariance::new(
        rho.mean_number(Mode::One) / t + 0.5,
        rho.mean_number(Mode::Two) / t + 0.5,
        -rho.expect(&b.a1a1) / t,
        -rho.expect(&b.a2a2) / t,
        rho.expect(&b.a1a2dag) / t,
        -rho.expect(&b.a1a2) / t,
    )
}

/// Partial trace over mode 2 restricted to the mode-2 levels in `keep`.
fn reduced_mode1(rho: &FockOperator, keep: impl Fn(usize) -> bool) -> DMatrix<Complex64> {
    let c = rho.cutoff;
    let mut out = DMatrix::from_element(c, c, ZERO);
    for n2 in (0..c).filter(|&n| keep(n)) {
        for a in 0..c {
            for b in 0..c {
                out[(a, b)] += rho.get(a * c + n2, b * c + n2);
            }
        }
    }
    out
}

/// Unnormalized `(Tr, Tr[. a^dag a], Tr[. a^2])` of a mode-1 operator.
fn single_mode_traces(m: &DMatrix<Complex64>) -> (f64, f64, Complex64) {
    let c = m.nrows();
    let tr = (0..c).map(|n| m[(n, n)].re).sum();
    let num = (0..c).map(|n| n as f64 * m[(n, n)].re).sum();
    // Tr[m a^2] = sum_n m[n, n-2] <n-2|a^2|n>
    let aa = (2..c).map(|n| m[(n, n - 2)] * ((n * (n - 1)) as f64).sqrt()).sum();
    (tr, num, aa)
}

fn group(m: &DMatrix<Complex64>, total: f64) -> Option<SubensembleMoments> {
    let (tr, num, aa) = single_mode_traces(m);
    let p = tr / total;
    (tr > 0.0 && p > 1e-300).then(|| SubensembleMoments::new(p, num / tr + 0.5, -aa / tr))
}

/// Even and odd mode-1 groups after a parity measurement on mode 2. A group
/// with zero probability is `None`.
pub fn parity_conditioned_moments(rho: &FockOperator) -> (Option<SubensembleMoments>, Option<SubensembleMoments>) {
    let total = rho.trace();
    let even = reduced_mode1(rho, |n| n % 2 == 0);
    let odd = reduced_mode1(rho, |n| n % 2 == 1);
    (group(&even, total), group(&odd, total))
}

/// Mode-1 moments conditioned on the vacuum outcome on mode 2.
pub fn vacuum_conditioned_moments(rho: &FockOperator) -> Result<SubensembleMoments> {
    let total = rho.trace();
    let vac = reduced_mode1(rho, |n| n == 0);
    match group(&vac, total) {
        Some(g) if g.probability >= P_MIN => Ok(g),
        other => Err(Error::UnreliableConditioning { probability: other.map_or(0.0, |g| g.probability) }),
    }
}

/// Deviation of `sigma1 = 2 sqrt(det V2) (rho1^e - rho1^o)` from a
/// unit-trace operator with covariance `Gamma1`: the max over the trace
/// error and the two second-moment errors.
pub fn sigma_identity_check(rho: &FockOperator, v: &TwoModeCovariance) -> Result<f64> {
    let gamma = crate::conditioning::schur_parity(v)?;
    let total = rho.trace();
    let diff = reduced_mode1(rho, |n| n % 2 == 0) - reduced_mode1(rho, |n| n % 2 == 1);
    let pref = 2.0 * v.v2().det().sqrt() / total;
    let (tr, num, aa) = single_mode_traces(&diff);
    let (tr, num, aa) = (tr * pref, num * pref, aa * pref);
    let eta = num + 0.5 * tr;
    let mu = -aa;
    Ok((tr - 1.0).abs().max((eta - gamma.diag).abs()).max((mu - gamma.offdiag).norm()))
}

/// Observation assembled from a density matrix.
pub fn observation_of(rho: &FockOperator) -> Result<Observation> {
    let v = moments_of(rho);
    let (even, odd) = parity_conditioned_moments(rho);
    Ok(Observation {
        v1: v.v1(),
        v2: v.v2(),
        parity: ParityStatistics {
            even: even.unwrap_or_else(SubensembleMoments::absent),
            odd: odd.unwrap_or_else(SubensembleMoments::absent),
        },
        vacuum: vacuum_conditioned_moments(rho)?,
        sigma: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FockChannelConfig {
    /// Fixed cutoff; the rule is applied to the current circuit when absent.
    pub cutoff: Option<usize>,
    /// Standard error attached to every statistic, covering truncation.
    pub sigma: f64,
}

impl Default for FockChannelConfig {
    fn default() -> Self {
        Self { cutoff: None, sigma: 1e-7 }
    }
}

/// Channel whose statistics come from the Fock-space density matrix of the
/// recipe state. Transform requests extend the circuit.
#[derive(Debug, Clone)]
pub struct FockChannel {
    recipe: GenerationRecipe,
    extra: Vec<LocalSymplectic>,
    swapped: bool,
    config: FockChannelConfig,
}

impl FockChannel {
    pub fn new(recipe: GenerationRecipe, config: FockChannelConfig) -> Self {
        Self { recipe, extra: Vec::new(), swapped: false, config }
    }

    pub fn current_recipe(&self) -> GenerationRecipe {
        self.recipe.followed_by(&self.extra)
    }
}

impl MeasurementChannel for FockChannel {
    fn observe(&mut self) -> Result<Observation> {
        let rho = build_state_auto(&self.current_recipe(), self.config.cutoff)?;
        let rho = if self.swapped { rho.swapped() } else { rho };
        let mut obs = observation_of(&rho)?;
        obs.sigma = Some([self.config.sigma; RAW_LEN]);
        Ok(obs)
    }

    fn apply_transform(&mut self, t: &LocalSymplectic) -> Result<()> {
        let mode = if self.swapped { t.mode.other() } else { t.mode };
        self.extra.push(LocalSymplectic::new(mode, t.r, t.s));
        Ok(())
    }

    fn swap_roles(&mut self) -> Result<()> {
        self.swapped = !self.swapped;
        Ok(())
    }

    fn is_exact(&self) -> bool {
        false
    }
}

/// Max elementwise deviations between oracle and formula paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleDeviation {
    pub cutoff: usize,
    pub covariance: f64,
    pub gamma: f64,
    pub pi: f64,
    pub sigma_identity: f64,
    pub i3_identity: f64,
    pub first_moments: f64,
}

impl OracleDeviation {
    pub fn max(&self) -> f64 {
        [self.covariance, self.gamma, self.pi, self.sigma_identity, self.i3_identity, self.first_moments]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

fn local_deviation(a: &LocalCovariance, diag: f64, off: Complex64) -> f64 {
    (a.n - diag).abs().max((a.m - off).norm())
}

/// Compares the oracle's conditional moments with the closed forms for the
/// recipe state.
pub fn oracle_check(recipe: &GenerationRecipe, cutoff: Option<usize>) -> Result<OracleDeviation> {
    oracle_deviation(&build_state_auto(recipe, cutoff)?, &recipe.covariance())
}

/// [`oracle_check`] on a state already built for the covariance `v`.
pub fn oracle_deviation(rho: &FockOperator, v: &TwoModeCovariance) -> Result<OracleDeviation> {
    let cutoff = rho.cutoff;
    let v = *v;
    let fock_v = moments_of(rho);
    let covariance = fock_v
        .moments()
        .iter()
        .zip(v.moments().iter())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);

    let (even, odd) = parity_conditioned_moments(rho);
    let gamma_oracle = crate::conditioning::conditional_moments_from_subensembles(
        &even.unwrap_or_else(SubensembleMoments::absent),
        &odd.unwrap_or_else(SubensembleMoments::absent),
        v.v2().det(),
    )?;
    let gamma = crate::conditioning::schur_parity(&v)?;
    let pi = crate::conditioning::schur_vacuum(&v)?;
    let vac = vacuum_conditioned_moments(rho)?;
    let i3_oracle = crate::conditioning::correlation_invariant(&v.v1(), &v.v2(), &gamma_oracle);
    let (f1, f2) = first_moments(rho);
    Ok(OracleDeviation {
        cutoff,
        covariance,
        gamma: local_deviation(&gamma.as_local(), gamma_oracle.diag, gamma_oracle.offdiag),
        pi: local_deviation(&pi.as_local(), vac.diag, vac.offdiag),
        sigma_identity: sigma_identity_check(rho, &v)?,
        i3_identity: (i3_oracle - v.correlation_det().abs()).abs(),
        first_moments: f1.norm().max(f2.norm()),
    })
}
