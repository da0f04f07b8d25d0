//! Finite-statistics channel and convergence sweeps.
//!
//! Local moments are estimated from sampled homodyne quadratures (the
//! marginals are Gaussian, so sampling is exact). Conditioned subensemble
//! moments get zero-mean Gaussian noise of standard deviation
//! `c * max(|x|, 1/2) / sqrt(N)` per real scalar; the parity-conditioned
//! states are not Gaussian and are not sampled shot by shot.

use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditioning::SubensembleMoments;
use crate::gaussian::{apply_local_symplectic, LocalCovariance, LocalSymplectic, TwoModeCovariance};
use crate::reconstruction::{
    aligned_relative_errors, exact_observation, run_protocol, MeasurementChannel, Observation, ProtocolConfig,
    ReconstructionStatus, RAW_LEN,
};
use crate::{Error, Result};

/// Sample count standing for the infinite-statistics limit.
pub const SAMPLES_EXACT: u64 = u64::MAX;

pub const MIN_SAMPLES: u64 = 10;

/// Lower bound of the perturbation scale of a moment.
pub const SCALE_FLOOR: f64 = 0.5;

/// Local oscillator phases of the quadrature estimator, equal sample split.
pub const LO_PHASES: [f64; 3] = [0.0, std::f64::consts::FRAC_PI_4, std::f64::consts::FRAC_PI_2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMode {
    /// Every moment, local ones included, is perturbed analytically.
    AnalyticPerturbation,
    /// Local moments from sampled quadratures, conditioned moments perturbed.
    QuadratureSampling,
}

impl std::str::FromStr for NoiseMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| format!("unknown noise mode '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoisyChannelConfig {
    pub samples_local: u64,
    pub samples_parity: u64,
    pub samples_vacuum: u64,
    pub seed: u64,
    pub mode: NoiseMode,
    /// The constant `c` of the analytic perturbation.
    pub noise_scale: f64,
}

impl Default for NoisyChannelConfig {
    fn default() -> Self {
        Self {
            samples_local: 100_000,
            samples_parity: 100_000,
            samples_vacuum: 100_000,
            seed: 0,
            mode: NoiseMode::AnalyticPerturbation,
            noise_scale: 1.0,
        }
    }
}

impl NoisyChannelConfig {
    /// All three counts set to `n`.
    pub fn uniform(n: u64, seed: u64) -> Self {
        Self { samples_local: n, samples_parity: n, samples_vacuum: n, seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, n) in
            [("samples_local", self.samples_local), ("samples_parity", self.samples_parity), ("samples_vacuum", self.samples_vacuum)]
        {
            check_samples(name, n)?;
        }
        if !(self.noise_scale.is_finite() && self.noise_scale >= 0.0) {
            return Err(Error::InvalidInput(format!("noise_scale must be finite and >= 0, got {}", self.noise_scale)));
        }
        Ok(())
    }
}

fn check_samples(name: &str, n: u64) -> Result<()> {
    if n < MIN_SAMPLES {
        return Err(Error::InvalidInput(format!("{name} must be >= {MIN_SAMPLES}, got {n}")));
    }
    Ok(())
}

/// Standard deviation of the analytic perturbation of a scalar of magnitude
/// `x` estimated from `n` copies.
pub fn perturbation_sigma(x: f64, n: u64, c: f64) -> f64 {
    if n == SAMPLES_EXACT {
        return 0.0;
    }
    c * x.abs().max(SCALE_FLOOR) / (n as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalEstimate {
    pub estimate: LocalCovariance,
    /// Standard errors of `(n, Re m, Im m)`.
    pub sigma: [f64; 3],
    /// Set when the estimate violates `n >= 1/2`; the estimate is kept.
    pub warning: Option<String>,
}

/// Quadrature variance `n + Re(m e^{-2i theta})` at local oscillator phase `theta`.
pub fn quadrature_variance(v: &LocalCovariance, theta: f64) -> f64 {
    v.n + (v.m * Complex64::from_polar(1.0, -2.0 * theta)).re
}

/// Homodyne estimate of a local covariance from `n` copies split evenly
/// over [`LO_PHASES`]. Variances are estimated as mean squares (the
/// quadrature mean is zero) and inverted via
/// `n = (v0 + v90) / 2`, `Re m = (v0 - v90) / 2`, `Im m = v45 - n`.
pub fn estimate_local_covariance<R: Rng + ?Sized>(v: &LocalCovariance, n: u64, rng: &mut R) -> Result<LocalEstimate> {
    if n == SAMPLES_EXACT {
        return Ok(LocalEstimate { estimate: *v, sigma: [0.0; 3], warning: None });
    }
    check_samples("samples", n)?;
    let per_phase = n / LO_PHASES.len() as u64;
    let mut est = [0.0; 3];
    let mut sd = [0.0; 3];
    for (k, theta) in LO_PHASES.iter().enumerate() {
        let var = quadrature_variance(v, *theta);
        if !(var > 0.0) {
            return Err(Error::InvalidInput(format!("quadrature variance {var} at phase {theta} is not positive")));
        }
        let normal = Normal::new(0.0, var.sqrt()).expect("positive variance");
        let sum: f64 = (0..per_phase).map(|_| normal.sample(rng).powi(2)).sum();
        est[k] = sum / per_phase as f64;
        // variance of a mean of squares of a zero-mean Gaussian: 2 var^2 / k
        sd[k] = est[k] * (2.0 / per_phase as f64).sqrt();
    }
    let [v0, v45, v90] = est;
    let n_hat = 0.5 * (v0 + v90);
    let estimate = LocalCovariance::new(n_hat, Complex64::new(0.5 * (v0 - v90), v45 - n_hat));
    let half = 0.5 * (sd[0].powi(2) + sd[2].powi(2)).sqrt();
    let sigma = [half, half, (sd[1].powi(2) + half * half).sqrt()];
    let warning = (n_hat < 0.5).then(|| format!("estimated n = {n_hat} is below 1/2"));
    Ok(LocalEstimate { estimate, sigma, warning })
}

fn perturb<R: Rng + ?Sized>(x: f64, n: u64, c: f64, rng: &mut R) -> (f64, f64) {
    let s = perturbation_sigma(x, n, c);
    if s == 0.0 {
        return (x, 0.0);
    }
    (x + s * rng.sample::<f64, _>(rand_distr::StandardNormal), s)
}

/// Analytic perturbation of one subensemble's `(p, n, Re m, Im m)`; returns
/// the noisy moments and their standard errors.
pub fn perturb_conditioned_moments<R: Rng + ?Sized>(
    g: &SubensembleMoments,
    n: u64,
    c: f64,
    rng: &mut R,
) -> (SubensembleMoments, [f64; 4]) {
    let (p, sp) = perturb(g.probability, n, c, rng);
    let (d, sd) = perturb(g.diag, n, c, rng);
    let (re, sre) = perturb(g.offdiag.re, n, c, rng);
    let (im, sim) = perturb(g.offdiag.im, n, c, rng);
    (SubensembleMoments::new(p, d, Complex64::new(re, im)), [sp, sd, sre, sim])
}

/// Channel returning finite-statistics estimates of every locally measured
/// quantity. Each observation draws fresh noise from a seeded stream.
#[derive(Debug, Clone)]
pub struct NoisyChannel {
    truth: TwoModeCovariance,
    current: TwoModeCovariance,
    cfg: NoisyChannelConfig,
    rng: ChaCha8Rng,
    warnings: Vec<String>,
}

impl NoisyChannel {
    pub fn new(truth: TwoModeCovariance, cfg: NoisyChannelConfig) -> Result<Self> {
        cfg.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        Ok(Self { truth, current: truth, cfg, rng, warnings: Vec::new() })
    }

    pub fn truth(&self) -> &TwoModeCovariance {
        &self.truth
    }

    pub fn config(&self) -> &NoisyChannelConfig {
        &self.cfg
    }

    /// Physicality warnings raised by local estimates so far.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    fn local(&mut self, v: &LocalCovariance) -> Result<(LocalCovariance, [f64; 3])> {
        let c = self.cfg.noise_scale;
        let n = self.cfg.samples_local;
        match self.cfg.mode {
            NoiseMode::QuadratureSampling => {
                let e = estimate_local_covariance(v, n, &mut self.rng)?;
                if let Some(w) = e.warning {
                    self.warnings.push(w);
                }
                Ok((e.estimate, e.sigma))
            }
            NoiseMode::AnalyticPerturbation => {
                let (d, sd) = perturb(v.n, n, c, &mut self.rng);
                let (re, sre) = perturb(v.m.re, n, c, &mut self.rng);
                let (im, sim) = perturb(v.m.im, n, c, &mut self.rng);
                Ok((LocalCovariance::new(d, Complex64::new(re, im)), [sd, sre, sim]))
            }
        }
    }
}

impl MeasurementChannel for NoisyChannel {
    fn observe(&mut self) -> Result<Observation> {
        let exact = exact_observation(&self.current)?;
        let c = self.cfg.noise_scale;
        let (v1, s1) = self.local(&exact.v1)?;
        let (v2, s2) = self.local(&exact.v2)?;
        let (even, se) = perturb_conditioned_moments(&exact.parity.even, self.cfg.samples_parity, c, &mut self.rng);
        let (odd, so) = perturb_conditioned_moments(&exact.parity.odd, self.cfg.samples_parity, c, &mut self.rng);
        let (vacuum, sv) = perturb_conditioned_moments(&exact.vacuum, self.cfg.samples_vacuum, c, &mut self.rng);
        let sigma: [f64; RAW_LEN] =
            [s1.as_slice(), &s2, &se, &so, &sv].concat().try_into().expect("raw layout");
        let mut obs = exact;
        obs.v1 = v1;
        obs.v2 = v2;
        obs.parity.even = even;
        obs.parity.odd = odd;
        obs.vacuum = vacuum;
        obs.sigma = Some(sigma);
        Ok(obs)
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
        false
    }
}

/// Per-trial seed: word `2 * trial` of the ChaCha8 stream `n` keyed by `master`.
pub fn trial_seed(master: u64, n: u64, trial: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(n);
    rng.set_word_pos(2 * trial as u128);
    rng.next_u64()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    /// Sample counts; [`SAMPLES_EXACT`] runs the exact channel.
    pub grid: Vec<u64>,
    pub trials: usize,
    pub seed: u64,
    pub mode: NoiseMode,
    pub noise_scale: f64,
    pub protocol: ProtocolConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            grid: vec![1_000, 10_000, 100_000, 1_000_000],
            trials: 50,
            seed: 0,
            mode: NoiseMode::AnalyticPerturbation,
            noise_scale: 1.0,
            protocol: ProtocolConfig::default(),
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() || self.trials == 0 {
            return Err(Error::InvalidInput("sweep needs a non-empty grid and at least one trial".into()));
        }
        for n in &self.grid {
            if *n != SAMPLES_EXACT {
                check_samples("grid point", *n)?;
            }
        }
        self.protocol.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: u64,
    pub trial: usize,
    /// Gauge-aligned relative errors of `n1, n2, m1, m2, ms, mc`; NaN when
    /// nothing was recovered.
    pub errors: [f64; 6],
    pub err_max: f64,
    pub status: ReconstructionStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub n: u64,
    pub trials: usize,
    pub failures: usize,
    pub failure_rate: f64,
    /// Quartiles of `err_max` over successful trials; NaN when none succeeded.
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub points: Vec<SweepPoint>,
    /// Least-squares slope of `log10 median` against `log10 N` over the
    /// finite grid points; absent with fewer than two usable points.
    pub slope: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub summary: SweepSummary,
}

/// Runs one reconstruction; exact channel at the sentinel.
pub fn run_trial(truth: &TwoModeCovariance, n: u64, seed: u64, cfg: &SweepConfig) -> Result<SweepRow> {
    let report = if n == SAMPLES_EXACT {
        run_protocol(&mut crate::reconstruction::ExactChannel::new(*truth), &cfg.protocol)
    } else {
        let noisy = NoisyChannelConfig { mode: cfg.mode, noise_scale: cfg.noise_scale, ..NoisyChannelConfig::uniform(n, seed) };
        run_protocol(&mut NoisyChannel::new(*truth, noisy)?, &cfg.protocol)
    };
    let (errors, err_max) = match (report.status.is_success(), report.recovered) {
        (true, Some(v)) => {
            let e = aligned_relative_errors(&v, truth);
            (e, e.iter().cloned().fold(0.0, f64::max))
        }
        _ => ([f64::NAN; 6], f64::NAN),
    };
    Ok(SweepRow { n, trial: 0, errors, err_max, status: report.status })
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Least-squares slope of `y` against `x`; `None` with fewer than two points
/// or no spread in `x`.
pub fn fit_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub fn summarize(rows: &[SweepRow], grid: &[u64]) -> SweepSummary {
    let points: Vec<SweepPoint> = grid
        .iter()
        .map(|&n| {
            let at: Vec<&SweepRow> = rows.iter().filter(|r| r.n == n).collect();
            let mut ok: Vec<f64> = at.iter().filter(|r| r.status.is_success()).map(|r| r.err_max).collect();
            ok.sort_by(f64::total_cmp);
            let failures = at.len() - ok.len();
            SweepPoint {
                n,
                trials: at.len(),
                failures,
                failure_rate: if at.is_empty() { 0.0 } else { failures as f64 / at.len() as f64 },
                median: quantile(&ok, 0.5),
                q1: quantile(&ok, 0.25),
                q3: quantile(&ok, 0.75),
            }
        })
        .collect();
    let fit: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.n != SAMPLES_EXACT && p.median.is_finite() && p.median > 0.0)
        .map(|p| ((p.n as f64).log10(), p.median.log10()))
        .collect();
    SweepSummary { slope: fit_slope(&fit), points }
}

/// Reconstruction error against sample count. Trials run in parallel; rows
/// come back ordered by grid point, then trial.
pub fn convergence_sweep(truth: &TwoModeCovariance, cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let jobs: Vec<(u64, usize)> = cfg.grid.iter().flat_map(|&n| (0..cfg.trials).map(move |t| (n, t))).collect();
    let rows = jobs
        .par_iter()
        .map(|&(n, trial)| {
            let row = run_trial(truth, n, trial_seed(cfg.seed, n, trial), cfg)?;
            Ok(SweepRow { trial, ..row })
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(&rows, &cfg.grid);
    Ok(SweepResult { rows, summary })
}

pub const CSV_HEADER: [&str; 10] =
    ["N", "trial", "err_n1", "err_n2", "err_m1", "err_m2", "err_ms", "err_mc", "err_max", "status"];

fn status_label(s: ReconstructionStatus) -> String {
    serde_json::to_value(s).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

/// Writes rows as CSV; the exact sentinel prints as `inf`.
pub fn write_csv<W: std::io::Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in rows {
        let n = if r.n == SAMPLES_EXACT { "inf".to_string() } else { r.n.to_string() };
        let mut rec = vec![n, r.trial.to_string()];
        rec.extend(r.errors.iter().chain(std::iter::once(&r.err_max)).map(|e| format!("{e:e}")));
        rec.push(status_label(r.status));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vacuum_quadratures_have_variance_half() {
        let v = LocalCovariance::new(0.5, Complex64::new(0.0, 0.0));
        for theta in [0.0, 0.3, 1.1, 2.9] {
            assert_eq!(quadrature_variance(&v, theta), 0.5);
        }
    }

    #[test]
    fn exact_sentinel_is_noiseless() {
        let v = LocalCovariance::new(1.3, Complex64::new(0.2, -0.4));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let e = estimate_local_covariance(&v, SAMPLES_EXACT, &mut rng).unwrap();
        assert_eq!(e.estimate, v);
        assert_eq!(e.sigma, [0.0; 3]);
        let g = SubensembleMoments::new(0.6, 1.2, Complex64::new(0.1, 0.2));
        assert_eq!(perturb_conditioned_moments(&g, SAMPLES_EXACT, 1.0, &mut rng).0, g);
    }

    #[test]
    fn estimator_inverts_three_phases() {
        let v = LocalCovariance::new(1.3, Complex64::new(0.2, -0.4));
        let [v0, v45, v90] = LO_PHASES.map(|t| quadrature_variance(&v, t));
        assert!((0.5 * (v0 + v90) - v.n).abs() < 1e-15);
        assert!((0.5 * (v0 - v90) - v.m.re).abs() < 1e-15);
        assert!((v45 - v.n - v.m.im).abs() < 1e-15);
    }

    #[test]
    fn too_few_samples_rejected() {
        let v = LocalCovariance::new(0.5, Complex64::new(0.0, 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(estimate_local_covariance(&v, 9, &mut rng).is_err());
        assert!(NoisyChannelConfig::uniform(9, 0).validate().is_err());
    }

    #[test]
    fn trial_seeds_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for n in [1_000u64, 10_000] {
            for t in 0..100 {
                assert!(seen.insert(trial_seed(7, n, t)));
            }
        }
        assert_eq!(trial_seed(7, 1_000, 3), trial_seed(7, 1_000, 3));
    }

    #[test]
    fn quantiles_and_slope() {
        let data = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&data, 0.5), 3.0);
        assert_eq!(quantile(&data, 0.25), 2.0);
        let pts = [(3.0, -1.5), (4.0, -2.0), (5.0, -2.5)];
        assert!((fit_slope(&pts).unwrap() + 0.5).abs() < 1e-15);
        assert_eq!(fit_slope(&pts[..1]), None);
    }
}
