use std::fs;
use std::path::Path;
use std::process::Command;

use locc_gauss::cli::{run, Cli, ReconstructOutcome, RunConfig, RunReport, StateFile, SweepOutcome, VERSION};
use locc_gauss::gaussian::ElementaryOp;
use locc_gauss::{Complex64, ReconstructionStatus, TwoModeCovariance};
use serde_json::Value;

fn run_args(args: &[&str]) -> i32 {
    run(std::iter::once("locc-gauss").chain(args.iter().copied()))
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn write_state(dir: &Path, name: &str, v: TwoModeCovariance) -> String {
    let p = path(dir, name);
    let file = StateFile { state: v, recipe: None, seed: None, family: None };
    fs::write(&p, serde_json::to_string(&file).unwrap()).unwrap();
    p
}

fn gen(dir: &Path, extra: &[&str]) -> Vec<StateFile> {
    let out = path(dir, "gen");
    let mut args = vec!["gen", "--out", out.as_str()];
    args.extend_from_slice(extra);
    assert_eq!(run_args(&args), 0);
    let mut files: Vec<_> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_string_lossy().starts_with("state_"))
        .collect();
    files.sort();
    files.iter().map(|p| serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()).collect()
}

#[test]
fn gen_uncorrelated_gives_block_diagonal_state() {
    let dir = tempfile::tempdir().unwrap();
    let files = gen(dir.path(), &["--count", "1", "--uncorrelated"]);
    assert_eq!(files.len(), 1);
    assert!(files[0].state.is_uncorrelated());
}

#[test]
fn gen_is_deterministic_and_physical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let fa = gen(a.path(), &["--count", "100", "--seed", "4"]);
    let fb = gen(b.path(), &["--count", "100", "--seed", "4"]);
    assert_eq!(fa.len(), 100);
    assert_eq!(fa, fb);
    for f in &fa {
        assert!(locc_gauss::gaussian::validate_physicality(&f.state).unwrap().is_physical());
    }
}

#[test]
fn gen_tmsv_recipe_has_one_two_mode_squeeze() {
    let dir = tempfile::tempdir().unwrap();
    let files = gen(dir.path(), &["--count", "3", "--family", "tmsv"]);
    for f in files {
        let ops = &f.recipe.unwrap().ops;
        assert_eq!(ops.len(), 1);
        assert!(matches!(ops[0], ElementaryOp::TwoModeSqueeze { .. }));
    }
}

fn read_report(p: &str) -> RunReport<ReconstructOutcome> {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn reconstruct_generic_exact() {
    let dir = tempfile::tempdir().unwrap();
    let files = gen(dir.path(), &["--count", "1", "--family", "generic", "--seed", "2"]);
    let input = write_state(dir.path(), "s.json", files[0].state);
    let out = path(dir.path(), "r.json");
    assert_eq!(run_args(&["reconstruct", &input, "--out", &out]), 0);
    let r = read_report(&out);
    assert_eq!(r.version, VERSION);
    assert_eq!(r.result.report.status, ReconstructionStatus::ExactSuccess);
    assert!(r.result.error_vs_input.unwrap() < 1e-9);
}

#[test]
fn reconstruct_tmsv_lists_its_fixes() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_state(dir.path(), "tmsv.json", TwoModeCovariance::two_mode_squeezed_vacuum(0.5));
    let out = path(dir.path(), "r.json");
    assert_eq!(run_args(&["reconstruct", &input, "--out", &out]), 0);
    let r = read_report(&out);
    let fixes = &r.result.report.fixes;
    assert!(!fixes.is_empty() && fixes.len() <= 2);
    assert_eq!(fixes[0].diagnosis, locc_gauss::DegeneracyDiagnosis::M2Zero);
}

#[test]
fn failure_still_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_state(dir.path(), "tmsv.json", TwoModeCovariance::two_mode_squeezed_vacuum(0.5));
    let out = path(dir.path(), "r.json");
    assert_eq!(run_args(&["reconstruct", &input, "--max-fix-rounds", "0", "--out", &out]), 3);
    let r = read_report(&out);
    assert_eq!(r.exit_code, 3);
    assert_eq!(r.result.report.status, ReconstructionStatus::Failed);
    assert!(r.result.report.message.is_some());
}

#[test]
fn unphysical_state_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let z = Complex64::new(0.0, 0.0);
    let bad = TwoModeCovariance::vacuum().with_correlations(z, Complex64::new(0.5, 0.0));
    let input = write_state(dir.path(), "bad.json", bad);
    let out = path(dir.path(), "r.json");
    let status = Command::new(env!("CARGO_BIN_EXE_locc-gauss")).args(["reconstruct", &input, "--out", &out]).output().unwrap();
    assert_eq!(status.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&status.stderr).contains("not physical"));
    assert!(!Path::new(&out).exists());
}

#[test]
fn binary_reports_to_stdout_without_out() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_state(dir.path(), "v.json", TwoModeCovariance::vacuum());
    let o = Command::new(env!("CARGO_BIN_EXE_locc-gauss")).args(["reconstruct", &input]).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["result"]["report"]["status"], "exact-success");
    assert_eq!(v["config"]["channel"]["kind"], "exact");
}

#[test]
fn oracle_passes_on_corpus_states() {
    let dir = tempfile::tempdir().unwrap();
    for family in ["product", "tmsv", "generic"] {
        let sub = dir.path().join(family);
        fs::create_dir_all(&sub).unwrap();
        gen(&sub, &["--count", "1", "--family", family, "--max-thermal", "0.5", "--max-squeeze", "0.6"]);
        let input = path(&sub, "gen/state_0000.json");
        let out = path(&sub, "oracle.json");
        assert_eq!(run_args(&["oracle", &input, "--out", &out]), 0, "{family}");
        let v: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
        assert!(v["result"]["max_deviation"].as_f64().unwrap() < 1e-6);
    }
}

#[test]
fn oracle_needs_a_recipe() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_state(dir.path(), "v.json", TwoModeCovariance::vacuum());
    assert_eq!(run_args(&["oracle", &input]), 1);
}

#[test]
fn sweep_at_the_exact_sentinel() {
    let dir = tempfile::tempdir().unwrap();
    let files = gen(dir.path(), &["--count", "1", "--family", "generic"]);
    let input = write_state(dir.path(), "s.json", files[0].state);
    let csv = path(dir.path(), "sweep.csv");
    assert_eq!(run_args(&["sweep", &input, "--grid", "inf", "--trials", "3", "--out", &csv]), 0);
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("N,trial,err_n1"));
    assert_eq!(text.lines().count(), 4);
    let summary: RunReport<SweepOutcome> =
        serde_json::from_str(&fs::read_to_string(path(dir.path(), "sweep.summary.json")).unwrap()).unwrap();
    assert_eq!(summary.result.summary.slope, None);
    let p = &summary.result.summary.points[0];
    assert_eq!(p.failures, 0);
    assert!(p.q3 < 1e-9);
}

#[test]
fn sweep_csv_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_state(dir.path(), "t.json", TwoModeCovariance::two_mode_squeezed_vacuum(0.5));
    let csv = path(dir.path(), "sweep.csv");
    let args = ["sweep", &input, "--grid", "1e3,1e5", "--trials", "6", "--seed", "8", "--out", &csv];
    assert_eq!(run_args(&args), 0);
    let first = fs::read(&csv).unwrap();
    assert_eq!(run_args(&args), 0);
    assert_eq!(fs::read(&csv).unwrap(), first);
}

#[test]
fn run_config_round_trips_through_json() {
    use clap::Parser;
    let cli = Cli::try_parse_from([
        "locc-gauss", "sweep", "x.json", "--grid", "1e3,inf", "--noise-mode", "quadrature-sampling", "--s-fix", "0.3",
        "--channel", "noisy", "--n-vac", "500",
    ])
    .unwrap();
    let cfg = RunConfig::from_cli(&cli).unwrap();
    let back: RunConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
    assert_eq!(back, cfg);
}
