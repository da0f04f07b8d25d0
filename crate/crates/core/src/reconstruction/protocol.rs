use serde::{Deserialize, Serialize};

use super::channel::{exact_observation, MeasurementChannel, Observation, RAW_LEN};
use super::diagnosis::{classify, evidence, is_effectively_real, plan_fix, DegeneracyDiagnosis, DiagnosisEvidence, DiagnosisTolerances};
use super::report::{
    AppliedFix, BranchSelection, FrameKind, Message, MessageKind, Party, ReconstructionReport,
    ReconstructionStatus, SelectionMethod, SolverAttempt,
};
use super::solver::{solve_correlations, CorrelationSolution, SolverTolerances};
use crate::conditioning::{conditional_moments_from_subensembles, derived_quartet, DerivedQuartet, SchurBlock, SchurKind};
use crate::gaussian::{apply_local_symplectic, uncertainty_margin, LocalSymplectic, Mode, TwoModeCovariance, EPS_PSD};
use crate::{Error, Result};

/// `m2` counts as real for fix planning when `|Im m2| <= REAL_M2_LEVER |m2|`;
/// an `s = 0` squeeze lifts SinZero only in proportion to the phase of `m2`.
const REAL_M2_LEVER: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolConfig {
    pub r_fix: f64,
    pub s_fix: f64,
    pub max_fix_rounds: usize,
    pub eps_zero: f64,
    pub eps_clamp: f64,
    pub eps_solve: f64,
    pub eps_tie: f64,
    /// Multiple of the propagated standard error used as a noise floor.
    pub k_sigma: f64,
    /// Resolve SinZero by exchanging the parties' roles when `m1 != m2`.
    pub role_swap: bool,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            r_fix: 0.5,
            s_fix: std::f64::consts::FRAC_PI_4,
            max_fix_rounds: 4,
            eps_zero: 1e-8,
            eps_clamp: 1e-7,
            eps_solve: 1e-8,
            eps_tie: 1e-9,
            k_sigma: 3.0,
            role_swap: false,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.eps_zero, self.eps_clamp, self.eps_solve, self.eps_tie, self.k_sigma];
        if !(self.r_fix.is_finite() && self.r_fix != 0.0 && self.s_fix.is_finite()) {
            return Err(Error::InvalidInput(format!("repair parameters must be finite with r_fix != 0, got ({}, {})", self.r_fix, self.s_fix)));
        }
        if self.s_fix.sin() == 0.0 {
            return Err(Error::InvalidInput("s_fix must not be a multiple of pi".into()));
        }
        if positive.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidInput("tolerances must be finite and non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
enum FrameStep {
    Transform(LocalSymplectic),
    Swap,
}

/// Transforms between the original frame and the frame the source is
/// currently in.
#[derive(Debug, Clone, Default)]
struct Frame {
    steps: Vec<FrameStep>,
    swapped: bool,
}

impl Frame {
    fn push_transform(&mut self, t: LocalSymplectic) {
        self.steps.push(FrameStep::Transform(t));
    }

    fn push_swap(&mut self) {
        self.steps.push(FrameStep::Swap);
        self.swapped = !self.swapped;
    }

    fn to_current(&self, v: &TwoModeCovariance) -> TwoModeCovariance {
        self.steps.iter().fold(*v, |acc, step| match step {
            FrameStep::Transform(t) => apply_local_symplectic(&acc, t),
            FrameStep::Swap => acc.swapped(),
        })
    }

    fn to_original(&self, v: &TwoModeCovariance) -> TwoModeCovariance {
        self.steps.iter().rev().fold(*v, |acc, step| match step {
            FrameStep::Transform(t) => apply_local_symplectic(&acc, &t.inverse()),
            FrameStep::Swap => acc.swapped(),
        })
    }

    fn physical(&self, mode: Mode) -> Mode {
        if self.swapped {
            mode.other()
        } else {
            mode
        }
    }

    fn holder(&self, mode: Mode) -> Party {
        Party::holding(mode, self.swapped)
    }
}

/// Everything Alice computes from one round of statistics.
#[derive(Debug, Clone)]
struct Analysis {
    obs: Observation,
    quartet: DerivedQuartet,
    evidence: DiagnosisEvidence,
    diagnosis: DegeneracyDiagnosis,
    solver_tol: SolverTolerances,
    m2_imag_floor: f64,
}

fn blocks(obs: &Observation) -> Result<(SchurBlock, SchurBlock, DerivedQuartet)> {
    let gamma = conditional_moments_from_subensembles(&obs.parity.even, &obs.parity.odd, obs.v2.det())?;
    let pi = SchurBlock::new(obs.vacuum.diag, obs.vacuum.offdiag, SchurKind::Vacuum);
    let quartet = derived_quartet(&obs.v1, &obs.v2, &gamma, &pi)?;
    Ok((gamma, pi, quartet))
}

/// First-order standard errors of `f` from the observation's raw standard
/// errors, by one-sided differences with step equal to each standard error.
/// Perturbations where `f` fails are skipped.
fn propagate<const K: usize>(obs: &Observation, f: impl Fn(&Observation) -> Option<[f64; K]>) -> [f64; K] {
    let mut var = [0.0; K];
    let Some(sigma) = obs.sigma else {
        return var;
    };
    let Some(base) = f(obs) else {
        return var;
    };
    let raw = obs.to_raw();
    for i in 0..RAW_LEN {
        if sigma[i] <= 0.0 {
            continue;
        }
        let mut shifted = raw;
        shifted[i] += sigma[i];
        if let Some(y) = f(&Observation::from_raw(&shifted, None)) {
            for k in 0..K {
                let d = y[k] - base[k];
                if d.is_finite() {
                    var[k] += d * d;
                }
            }
        }
    }
    var.map(f64::sqrt)
}

fn evidence_vector(obs: &Observation) -> Option<[f64; 11]> {
    let (g, p, q) = blocks(obs).ok()?;
    let e = evidence(&obs.v1, &obs.v2, &g, &p, &q);
    let dg = obs.v1.m - g.offdiag;
    let dp = obs.v1.m - p.offdiag;
    Some([
        obs.v1.n - g.diag,
        dg.re,
        dg.im,
        obs.v1.n - p.diag,
        dp.re,
        dp.im,
        e.m2_abs,
        e.sum_of_squares - e.i3,
        e.x.unwrap_or(0.0),
        e.a_plus,
        obs.v2.m.im,
    ])
}

fn analyze(obs: Observation, cfg: &ProtocolConfig) -> Result<Analysis> {
    let (gamma, pi, quartet) = blocks(&obs)?;
    let ev = evidence(&obs.v1, &obs.v2, &gamma, &pi, &quartet);
    let s = propagate(&obs, evidence_vector).map(|x| cfg.k_sigma * x);
    let tol = DiagnosisTolerances {
        eps_zero: cfg.eps_zero,
        block: s[..6].iter().cloned().fold(0.0, f64::max),
        m2: s[6],
        one_zero: s[7],
        x: s[8],
        a_plus: s[9],
    };
    let diagnosis = classify(&ev, &obs.v1, &obs.v2, &tol);
    let solver_tol = SolverTolerances {
        zero: cfg.eps_zero,
        clamp: cfg.eps_clamp + s[8],
        negative: if obs.sigma.is_some() { f64::INFINITY } else { cfg.eps_solve },
    };
    Ok(Analysis { obs, quartet, evidence: ev, diagnosis, solver_tol, m2_imag_floor: s[10] })
}

fn record_observation(report: &mut ReconstructionReport, frame: &Frame, obs: &Observation) {
    for (mode, v) in [(Mode::One, &obs.v1), (Mode::Two, &obs.v2)] {
        report.transcript.push(Message::new(
            frame.holder(mode),
            MessageKind::LocalCovariance,
            &[("mode", frame.physical(mode).index() as f64), ("n", v.n), ("m_re", v.m.re), ("m_im", v.m.im)],
        ));
    }
    let bob = frame.holder(Mode::Two);
    report.transcript.push(Message::new(
        bob,
        MessageKind::ParityOutcomeStats,
        &[("p_even", obs.parity.even.probability), ("p_odd", obs.parity.odd.probability)],
    ));
    report.transcript.push(Message::new(bob, MessageKind::VacuumStats, &[("p_vacuum", obs.vacuum.probability)]));
}

fn request_transform<C: MeasurementChannel + ?Sized>(
    channel: &mut C,
    report: &mut ReconstructionReport,
    frame: &mut Frame,
    t: LocalSymplectic,
) -> Result<AppliedFix> {
    let physical = frame.physical(t.mode);
    report.transcript.push(Message::new(
        frame.holder(Mode::One),
        MessageKind::ApplyTransformRequest,
        &[("mode", physical.index() as f64), ("r", t.r), ("s", t.s)],
    ));
    channel.apply_transform(&t)?;
    frame.push_transform(t);
    Ok(AppliedFix { diagnosis: DegeneracyDiagnosis::Generic, mode: physical, r: t.r, s: t.s })
}

fn observe<C: MeasurementChannel + ?Sized>(
    channel: &mut C,
    report: &mut ReconstructionReport,
    frame: &Frame,
    cfg: &ProtocolConfig,
) -> Result<Analysis> {
    let obs = channel.observe()?;
    record_observation(report, frame, &obs);
    analyze(obs, cfg)
}

fn attempt(a: &Analysis, kind: FrameKind, candidates: Vec<CorrelationSolution>, error: Option<String>) -> SolverAttempt {
    SolverAttempt {
        frame: kind,
        diagnosis: a.diagnosis,
        evidence: a.evidence,
        quartet: a.quartet,
        candidates,
        error,
    }
}

/// Solves in the current frame and maps both candidates to the original
/// frame.
fn candidates_in_original(a: &Analysis, obs: &Observation, frame: &Frame) -> Result<([CorrelationSolution; 2], [TwoModeCovariance; 2])> {
    let (_, _, q) = blocks(obs)?;
    let sols = solve_correlations(&q, obs.v2.n, obs.v2.m, &a.solver_tol)?;
    let orig = sols.map(|s| frame.to_original(&TwoModeCovariance::from_blocks(obs.v1, obs.v2, s.ms, s.mc)));
    Ok((sols, orig))
}

fn flatten_cross(vs: &[TwoModeCovariance; 2]) -> [f64; 8] {
    [vs[0].ms.re, vs[0].ms.im, vs[0].mc.re, vs[0].mc.im, vs[1].ms.re, vs[1].ms.im, vs[1].mc.re, vs[1].mc.im]
}

/// Largest absolute deviation over the six moments.
pub fn moment_distance(a: &TwoModeCovariance, b: &TwoModeCovariance) -> f64 {
    a.moments().iter().zip(b.moments().iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// [`moment_distance`] minimized over the sign of the correlation block.
pub fn distance_mod_sign(a: &TwoModeCovariance, b: &TwoModeCovariance) -> f64 {
    moment_distance(a, b).min(moment_distance(a, &b.sign_partner()))
}

/// Relative error of each of `n1, n2, m1, m2, ms, mc`, measured against
/// `max(|truth|, 1/2)` so that vanishing moments are compared on the vacuum
/// scale.
pub fn relative_moment_errors(est: &TwoModeCovariance, truth: &TwoModeCovariance) -> [f64; 6] {
    let (a, b) = (est.moments(), truth.moments());
    std::array::from_fn(|k| (a[k] - b[k]).norm() / b[k].norm().max(0.5))
}

/// [`relative_moment_errors`] for whichever sign representative of `est`
/// is closer to `truth` in the max norm.
pub fn aligned_relative_errors(est: &TwoModeCovariance, truth: &TwoModeCovariance) -> [f64; 6] {
    let max = |e: &[f64; 6]| e.iter().cloned().fold(0.0, f64::max);
    let a = relative_moment_errors(est, truth);
    let b = relative_moment_errors(&est.sign_partner(), truth);
    if max(&b) < max(&a) {
        b
    } else {
        a
    }
}

/// Representative of `{V, sign partner}` whose larger cross moment has
/// positive real part (positive imaginary part when purely imaginary).
pub fn canonical_sign(v: &TwoModeCovariance) -> TwoModeCovariance {
    let lead = if v.mc.norm() >= v.ms.norm() { v.mc } else { v.ms };
    let flip = if lead.re.abs() <= 1e-12 * lead.norm() { lead.im < 0.0 } else { lead.re < 0.0 };
    if flip {
        v.sign_partner()
    } else {
        *v
    }
}

fn probe_plan(cfg: &ProtocolConfig) -> [LocalSymplectic; 3] {
    [
        LocalSymplectic::new(Mode::Two, cfg.r_fix, cfg.s_fix),
        LocalSymplectic::new(Mode::Two, cfg.r_fix, -0.5 * cfg.s_fix),
        LocalSymplectic::new(Mode::One, cfg.r_fix, cfg.s_fix),
    ]
}

enum Selection {
    Chosen(usize, BranchSelection),
    Ambiguous(BranchSelection),
}

fn select_branch<C: MeasurementChannel + ?Sized>(
    channel: &mut C,
    report: &mut ReconstructionReport,
    frame: &mut Frame,
    main: &Analysis,
    sols: &[CorrelationSolution; 2],
    orig: &[TwoModeCovariance; 2],
    cfg: &ProtocolConfig,
) -> Result<Selection> {
    let scale = orig[0].n1.max(orig[0].n2);
    let frame_copy = frame.clone();
    let sigma = propagate(&main.obs, |o| {
        let a = analyze(*o, cfg).ok()?;
        candidates_in_original(&a, o, &frame_copy).ok().map(|(_, v)| flatten_cross(&v))
    });
    let sol_sigma = sigma.iter().cloned().fold(0.0, f64::max);
    let tie_tol = (cfg.eps_tie * scale).max(2.0 * cfg.k_sigma * sol_sigma);
    let phys_tol = EPS_PSD * scale + 2.0 * cfg.k_sigma * sol_sigma;
    let margins = [uncertainty_margin(&orig[0]), uncertainty_margin(&orig[1])];
    let mut sel = BranchSelection {
        method: SelectionMethod::Coincident,
        selected: sols[0].branch,
        margins,
        probes: Vec::new(),
        distances: None,
    };

    if distance_mod_sign(&orig[0], &orig[1]) <= tie_tol {
        let i = if sols[1].residual < sols[0].residual { 1 } else { 0 };
        sel.selected = sols[i].branch;
        return Ok(Selection::Chosen(i, sel));
    }

    let physical: Vec<usize> = (0..2).filter(|&i| margins[i] >= -phys_tol).collect();
    if physical.len() == 1 {
        let i = physical[0];
        sel.method = SelectionMethod::Physicality;
        sel.selected = sols[i].branch;
        return Ok(Selection::Chosen(i, sel));
    }

    // Mirror candidates agree on every statistic of the current frame but
    // not after a further local squeeze: each candidate predicts the probe
    // frame's statistics and the better prediction wins. Mismatches
    // accumulate over probes until they separate.
    sel.method = SelectionMethod::Probe;
    let mut mismatch = [0.0; 2];
    for t in probe_plan(cfg) {
        let mut fix = request_transform(channel, report, frame, t)?;
        fix.diagnosis = main.diagnosis;
        sel.probes.push(fix);
        let obs = channel.observe()?;
        record_observation(report, frame, &obs);
        if let Ok(a) = analyze(obs, cfg) {
            report.attempts.push(attempt(&a, FrameKind::Probe, Vec::new(), None));
        }
        for i in 0..2 {
            let predicted = exact_observation(&frame.to_current(&orig[i]))?;
            let m = prediction_mismatch(&predicted, &obs, scale);
            mismatch[i] = if obs.sigma.is_some() { mismatch[i] + m } else { f64::max(mismatch[i], m) };
        }
        sel.distances = Some(mismatch);
        let (best, second) = if mismatch[0] <= mismatch[1] { (0, 1) } else { (1, 0) };
        let separated = if obs.sigma.is_some() {
            mismatch[second] - mismatch[best] >= cfg.k_sigma * cfg.k_sigma
        } else {
            mismatch[second] >= (2.0 * mismatch[best]).max(cfg.eps_tie)
        };
        if separated {
            sel.selected = sols[best].branch;
            return Ok(Selection::Chosen(best, sel));
        }
    }
    Ok(Selection::Ambiguous(sel))
}

/// Disagreement between predicted and measured statistics: chi-square over
/// the raw scalars when standard errors are available, otherwise the
/// largest absolute deviation.
fn prediction_mismatch(predicted: &Observation, measured: &Observation, scale: f64) -> f64 {
    let (p, m) = (predicted.to_raw(), measured.to_raw());
    match measured.sigma {
        Some(sigma) => (0..RAW_LEN)
            .filter(|&k| sigma[k] > 0.0)
            .map(|k| ((p[k] - m[k]) / sigma[k]).powi(2))
            .sum(),
        None => (0..RAW_LEN).map(|k| (p[k] - m[k]).abs()).fold(0.0, f64::max) / scale.max(f64::MIN_POSITIVE),
    }
}

/// Runs the full protocol against `channel`. Errors raised along the way
/// end up as a failed report with the error message.
pub fn run_protocol<C: MeasurementChannel + ?Sized>(channel: &mut C, config: &ProtocolConfig) -> ReconstructionReport {
    let mut report = ReconstructionReport::empty();
    if let Err(e) = config.validate().and_then(|_| run(channel, config, &mut report)) {
        report.status = ReconstructionStatus::Failed;
        report.recovered = None;
        report.sign_partner = None;
        report.message = Some(e.to_string());
    }
    report
}

fn run<C: MeasurementChannel + ?Sized>(channel: &mut C, cfg: &ProtocolConfig, report: &mut ReconstructionReport) -> Result<()> {
    let mut frame = Frame::default();
    let success = if channel.is_exact() { ReconstructionStatus::ExactSuccess } else { ReconstructionStatus::NoisySuccess };
    let mut rounds = 0;
    let mut first: Option<Observation> = None;

    let main = loop {
        let a = observe(channel, report, &frame, cfg)?;
        let original = *first.get_or_insert(a.obs);
        report.diagnoses.push(a.diagnosis);
        match a.diagnosis {
            DegeneracyDiagnosis::Generic => break a,
            DegeneracyDiagnosis::Uncorrelated => {
                report.attempts.push(attempt(&a, FrameKind::Main, Vec::new(), None));
                let zero = num_complex::Complex64::new(0.0, 0.0);
                let v = TwoModeCovariance::from_blocks(original.v1, original.v2, zero, zero);
                report.recovered = Some(v);
                report.sign_partner = Some(v);
                report.status = success;
                return Ok(());
            }
            d => {
                report.attempts.push(attempt(&a, FrameKind::Main, Vec::new(), None));
                if rounds >= cfg.max_fix_rounds {
                    if !channel.is_exact() && d != DegeneracyDiagnosis::M2Zero {
                        // within noise of a degeneracy, not necessarily on it
                        report.message = Some(format!("fix rounds exhausted, solved in the last frame despite {d:?}"));
                        report.attempts.pop();
                        break a;
                    }
                    report.message = Some(format!("fix rounds exhausted, last diagnosis {d:?}"));
                    report.status = ReconstructionStatus::Failed;
                    return Ok(());
                }
                rounds += 1;
                let v1 = a.obs.v1;
                let v2 = a.obs.v2;
                let distinct = (v1.m - v2.m).norm() > cfg.eps_zero * v1.n.max(v2.n) + a.m2_imag_floor;
                if d == DegeneracyDiagnosis::SinZero && cfg.role_swap && !frame.swapped && distinct {
                    report.transcript.push(Message::new(frame.holder(Mode::One), MessageKind::RoleSwapRequest, &[]));
                    channel.swap_roles()?;
                    frame.push_swap();
                    report.roles_swapped = true;
                    continue;
                }
                let real = is_effectively_real(v2.m, REAL_M2_LEVER, a.m2_imag_floor);
                let mut t = plan_fix(d, real, cfg.r_fix, cfg.s_fix)?;
                // a repeated diagnosis moves the next fix to the other mode
                // (phase degeneracies) or to the other squeezing axis
                let repeats = report.fixes.iter().rev().take_while(|f| f.diagnosis == d).count();
                if repeats % 2 == 1 {
                    t = match d {
                        DegeneracyDiagnosis::SinZero | DegeneracyDiagnosis::APlusZero => {
                            LocalSymplectic::new(t.mode.other(), t.r, cfg.s_fix)
                        }
                        _ => LocalSymplectic::new(t.mode, t.r, if t.s == 0.0 { cfg.s_fix } else { 0.0 }),
                    };
                }
                let mut fix = request_transform(channel, report, &mut frame, t)?;
                fix.diagnosis = d;
                report.fixes.push(fix);
            }
        }
    };

    let original = first.expect("at least one observation");
    let (sols, orig) = match candidates_in_original(&main, &main.obs, &frame) {
        Ok(x) => x,
        Err(e) => {
            report.attempts.push(attempt(&main, FrameKind::Main, Vec::new(), Some(e.to_string())));
            return Err(e);
        }
    };
    report.attempts.push(attempt(&main, FrameKind::Main, sols.to_vec(), None));
    // local blocks as measured in the original frame
    let orig = orig.map(|v| TwoModeCovariance::from_blocks(original.v1, original.v2, v.ms, v.mc));

    let selection = select_branch(channel, report, &mut frame, &main, &sols, &orig, cfg)?;
    match selection {
        Selection::Chosen(i, sel) => {
            report.branch = Some(sel);
            if channel.is_exact() && sols[i].residual >= cfg.eps_solve {
                report.status = ReconstructionStatus::Failed;
                report.message = Some(format!("solver residual {:e} above tolerance", sols[i].residual));
                report.alternates = orig.map(|v| canonical_sign(&v)).to_vec();
                return Ok(());
            }
            let v = canonical_sign(&orig[i]);
            report.recovered = Some(v);
            report.sign_partner = Some(v.sign_partner());
            report.status = success;
        }
        Selection::Ambiguous(sel) => {
            report.branch = Some(sel);
            report.alternates = orig.map(|v| canonical_sign(&v)).to_vec();
            report.status = ReconstructionStatus::AmbiguousBranch;
        }
    }
    Ok(())
}
