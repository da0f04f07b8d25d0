//! Command-line front end: `gen`, `reconstruct`, `oracle`, `sweep`.
//!
//! Exit codes: 0 success, 1 invalid input, 2 ambiguous branch, 3 failure
//! (reconstruction failed or an oracle deviation above tolerance).

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::fock::{oracle_check, FockChannel, FockChannelConfig, OracleDeviation};
use crate::gaussian::{generate_random_state, validate_physicality, GenerationParams, GenerationRecipe, PhysicalityVerdict, StateFamily, TwoModeCovariance};
use crate::noise::{convergence_sweep, write_csv, NoiseMode, NoisyChannel, NoisyChannelConfig, SweepConfig, SweepSummary, SAMPLES_EXACT};
use crate::reconstruction::{aligned_relative_errors, run_protocol, ExactChannel, ProtocolConfig, ReconstructionReport, ReconstructionStatus};
use crate::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_AMBIGUOUS: i32 = 2;
pub const EXIT_FAILURE: i32 = 3;

pub const DEFAULT_ORACLE_TOL: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "locc-gauss", version, about = "Local reconstruction of two-mode Gaussian covariance matrices")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = ChannelKind::Exact)]
    pub channel: ChannelKind,
    /// Copies per local homodyne moment (noisy channel).
    #[arg(long = "n-loc", global = true, value_parser = parse_count)]
    pub n_loc: Option<u64>,
    /// Copies per parity-conditioned moment (noisy channel).
    #[arg(long = "n-par", global = true, value_parser = parse_count)]
    pub n_par: Option<u64>,
    /// Copies per vacuum-conditioned moment (noisy channel).
    #[arg(long = "n-vac", global = true, value_parser = parse_count)]
    pub n_vac: Option<u64>,
    #[arg(long = "noise-mode", global = true)]
    pub noise_mode: Option<NoiseMode>,
    #[arg(long = "r-fix", global = true, allow_negative_numbers = true)]
    pub r_fix: Option<f64>,
    #[arg(long = "s-fix", global = true, allow_negative_numbers = true)]
    pub s_fix: Option<f64>,
    #[arg(long = "max-fix-rounds", global = true)]
    pub max_fix_rounds: Option<usize>,
    /// Fixed Fock cutoff instead of the automatic rule.
    #[arg(long, global = true)]
    pub cutoff: Option<usize>,
    /// Output path: a directory for `gen`, the CSV for `sweep`, the report
    /// JSON otherwise (stdout when absent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Zero tolerance of the protocol; acceptance tolerance for `oracle`.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate seeded physical states with their recipes.
    Gen {
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value = "random")]
        family: StateFamily,
        #[arg(long = "max-thermal", default_value_t = 3.0)]
        max_thermal: f64,
        #[arg(long = "max-squeeze", default_value_t = 1.5)]
        max_squeeze: f64,
        /// Block-diagonal states only.
        #[arg(long)]
        uncorrelated: bool,
    },
    /// Run the protocol on a state file.
    Reconstruct { input: PathBuf },
    /// Compare Fock-space conditional moments with the closed forms.
    Oracle { input: PathBuf },
    /// Error against sample count; writes a CSV and a summary JSON.
    Sweep {
        input: PathBuf,
        /// Comma-separated sample counts; `inf` is the exact channel.
        #[arg(long, value_delimiter = ',', value_parser = parse_count, default_value = "1e3,1e4,1e5,1e6")]
        grid: Vec<u64>,
        #[arg(long, default_value_t = 50)]
        trials: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ChannelKind {
    Exact,
    Fock,
    Noisy,
}

/// Sample count in integer or float notation (`100000`, `1e5`), or `inf`.
pub fn parse_count(s: &str) -> std::result::Result<u64, String> {
    if s.eq_ignore_ascii_case("inf") {
        return Ok(SAMPLES_EXACT);
    }
    if let Ok(n) = s.parse::<u64>() {
        return Ok(n);
    }
    match s.parse::<f64>() {
        Ok(x) if x.is_finite() && x >= 0.0 && x.fract() == 0.0 && x < u64::MAX as f64 => Ok(x as u64),
        _ => Err(format!("not a sample count: '{s}'")),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum CommandConfig {
    Gen { count: usize, params: GenerationParams, out: PathBuf },
    Reconstruct { input: PathBuf, out: Option<PathBuf> },
    Oracle { input: PathBuf, out: Option<PathBuf> },
    Sweep { input: PathBuf, grid: Vec<u64>, trials: usize, out: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub kind: ChannelKind,
    pub noisy: NoisyChannelConfig,
    pub fock: FockChannelConfig,
}

/// Fully resolved settings of one invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: CommandConfig,
    pub seed: u64,
    pub channel: ChannelConfig,
    pub protocol: ProtocolConfig,
    pub oracle_tol: f64,
}

impl RunConfig {
    pub fn from_cli(cli: &Cli) -> Result<Self> {
        let c = &cli.common;
        let mut protocol = ProtocolConfig::default();
        if let Some(r) = c.r_fix {
            protocol.r_fix = r;
        }
        if let Some(s) = c.s_fix {
            protocol.s_fix = s;
        }
        if let Some(k) = c.max_fix_rounds {
            protocol.max_fix_rounds = k;
        }
        let mut oracle_tol = DEFAULT_ORACLE_TOL;
        if let Some(t) = c.tol {
            match cli.command {
                Command::Oracle { .. } => oracle_tol = t,
                _ => protocol.eps_zero = t,
            }
        }
        let defaults = NoisyChannelConfig::default();
        let noisy = NoisyChannelConfig {
            samples_local: c.n_loc.unwrap_or(defaults.samples_local),
            samples_parity: c.n_par.unwrap_or(defaults.samples_parity),
            samples_vacuum: c.n_vac.unwrap_or(defaults.samples_vacuum),
            seed: c.seed,
            mode: c.noise_mode.unwrap_or(defaults.mode),
            noise_scale: defaults.noise_scale,
        };
        let fock = FockChannelConfig { cutoff: c.cutoff, ..FockChannelConfig::default() };
        let command = match &cli.command {
            Command::Gen { count, family, max_thermal, max_squeeze, uncorrelated } => CommandConfig::Gen {
                count: *count,
                params: GenerationParams {
                    max_thermal: *max_thermal,
                    max_squeeze: *max_squeeze,
                    correlated: !uncorrelated,
                    family: *family,
                },
                out: c.out.clone().unwrap_or_else(|| PathBuf::from(".")),
            },
            Command::Reconstruct { input } => CommandConfig::Reconstruct { input: input.clone(), out: c.out.clone() },
            Command::Oracle { input } => CommandConfig::Oracle { input: input.clone(), out: c.out.clone() },
            Command::Sweep { input, grid, trials } => CommandConfig::Sweep {
                input: input.clone(),
                grid: grid.clone(),
                trials: *trials,
                out: c.out.clone().unwrap_or_else(|| PathBuf::from("sweep.csv")),
            },
        };
        let cfg = Self { command, seed: c.seed, channel: ChannelConfig { kind: c.channel, noisy, fock }, protocol, oracle_tol };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.protocol.validate()?;
        if !(self.oracle_tol.is_finite() && self.oracle_tol > 0.0) {
            return Err(Error::InvalidInput(format!("oracle tolerance must be > 0, got {}", self.oracle_tol)));
        }
        match &self.command {
            CommandConfig::Gen { params, .. } => params.validate()?,
            CommandConfig::Sweep { .. } => self.sweep_config().validate()?,
            CommandConfig::Reconstruct { .. } if self.channel.kind == ChannelKind::Noisy => self.channel.noisy.validate()?,
            _ => {}
        }
        Ok(())
    }

    fn sweep_config(&self) -> SweepConfig {
        let (grid, trials) = match &self.command {
            CommandConfig::Sweep { grid, trials, .. } => (grid.clone(), *trials),
            _ => (Vec::new(), 0),
        };
        SweepConfig {
            grid,
            trials,
            seed: self.seed,
            mode: self.channel.noisy.mode,
            noise_scale: self.channel.noisy.noise_scale,
            protocol: self.protocol.clone(),
        }
    }
}

/// Input format of `reconstruct`, `oracle` and `sweep`; output of `gen`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFile {
    pub state: TwoModeCovariance,
    /// Needed by the Fock channel and the oracle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recipe: Option<GenerationRecipe>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<StateFamily>,
}

impl StateFile {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
        let file: Self = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidInput(format!("malformed state file {}: {e}", path.display())))?;
        let verdict = validate_physicality(&file.state)?.verdict;
        if verdict != PhysicalityVerdict::Physical {
            return Err(Error::InvalidInput(format!("state in {} is not physical ({verdict:?})", path.display())));
        }
        if let Some(recipe) = &file.recipe {
            recipe.validate()?;
        }
        Ok(file)
    }

    fn recipe(&self) -> Result<&GenerationRecipe> {
        self.recipe.as_ref().ok_or_else(|| Error::InvalidInput("state file has no recipe".into()))
    }
}

/// Envelope of every JSON output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport<T> {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    pub exit_code: i32,
    pub result: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenManifest {
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructOutcome {
    pub report: ReconstructionReport,
    /// Max relative moment error against the state file, minimised over the
    /// sign partner.
    pub error_vs_input: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleOutcome {
    pub deviation: OracleDeviation,
    pub max_deviation: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub csv: PathBuf,
    pub summary: SweepSummary,
}

fn envelope<T>(config: &RunConfig, exit_code: i32, result: T) -> RunReport<T> {
    RunReport { tool: "locc-gauss".into(), version: VERSION.into(), config: config.clone(), exit_code, result }
}

fn write_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(path, text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

pub fn exit_code(status: ReconstructionStatus) -> i32 {
    match status {
        ReconstructionStatus::ExactSuccess | ReconstructionStatus::NoisySuccess => EXIT_OK,
        ReconstructionStatus::AmbiguousBranch => EXIT_AMBIGUOUS,
        ReconstructionStatus::Failed => EXIT_FAILURE,
    }
}

/// `<out without extension>.summary.json`.
pub fn summary_path(csv: &Path) -> PathBuf {
    csv.with_extension("summary.json")
}

fn cmd_gen(cfg: &RunConfig, count: usize, params: &GenerationParams, out: &Path) -> Result<i32> {
    fs::create_dir_all(out)?;
    let mut files = Vec::with_capacity(count);
    for i in 0..count {
        let seed = cfg.seed.wrapping_add(i as u64);
        let (state, recipe) = generate_random_state(seed, params)?;
        let verdict = validate_physicality(&state)?.verdict;
        if verdict != PhysicalityVerdict::Physical {
            return Err(Error::ContractViolation(format!("generated state {i} is {verdict:?}")));
        }
        let path = out.join(format!("state_{i:04}.json"));
        write_json(Some(&path), &StateFile { state, recipe: Some(recipe), seed: Some(seed), family: Some(params.family) })?;
        files.push(path);
    }
    write_json(Some(&out.join("manifest.json")), &envelope(cfg, EXIT_OK, GenManifest { files }))?;
    Ok(EXIT_OK)
}

fn cmd_reconstruct(cfg: &RunConfig, input: &Path, out: Option<&Path>) -> Result<i32> {
    let file = StateFile::read(input)?;
    let report = match cfg.channel.kind {
        ChannelKind::Exact => run_protocol(&mut ExactChannel::new(file.state), &cfg.protocol),
        ChannelKind::Fock => run_protocol(&mut FockChannel::new(file.recipe()?.clone(), cfg.channel.fock), &cfg.protocol),
        ChannelKind::Noisy => run_protocol(&mut NoisyChannel::new(file.state, cfg.channel.noisy.clone())?, &cfg.protocol),
    };
    let code = exit_code(report.status);
    let error_vs_input = report
        .recovered
        .filter(|_| report.status.is_success())
        .map(|v| aligned_relative_errors(&v, &file.state).into_iter().fold(0.0, f64::max));
    write_json(out, &envelope(cfg, code, ReconstructOutcome { report, error_vs_input }))?;
    Ok(code)
}

fn cmd_oracle(cfg: &RunConfig, input: &Path, out: Option<&Path>) -> Result<i32> {
    let file = StateFile::read(input)?;
    let deviation = oracle_check(file.recipe()?, cfg.channel.fock.cutoff)?;
    let max_deviation = deviation.max();
    let pass = max_deviation < cfg.oracle_tol;
    let code = if pass { EXIT_OK } else { EXIT_FAILURE };
    eprintln!(
        "cutoff {}: gamma {:.3e} pi {:.3e} sigma {:.3e} i3 {:.3e} (tol {:.1e}) {}",
        deviation.cutoff,
        deviation.gamma,
        deviation.pi,
        deviation.sigma_identity,
        deviation.i3_identity,
        cfg.oracle_tol,
        if pass { "ok" } else { "exceeded" }
    );
    write_json(out, &envelope(cfg, code, OracleOutcome { deviation, max_deviation, pass }))?;
    Ok(code)
}

fn cmd_sweep(cfg: &RunConfig, input: &Path, out: &Path) -> Result<i32> {
    let file = StateFile::read(input)?;
    let result = convergence_sweep(&file.state, &cfg.sweep_config())?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_csv(&result.rows, fs::File::create(out)?)?;
    let outcome = SweepOutcome { csv: out.to_path_buf(), summary: result.summary };
    write_json(Some(&summary_path(out)), &envelope(cfg, EXIT_OK, outcome))?;
    Ok(EXIT_OK)
}

pub fn execute(cfg: &RunConfig) -> Result<i32> {
    match &cfg.command {
        CommandConfig::Gen { count, params, out } => cmd_gen(cfg, *count, params, out),
        CommandConfig::Reconstruct { input, out } => cmd_reconstruct(cfg, input, out.as_deref()),
        CommandConfig::Oracle { input, out } => cmd_oracle(cfg, input, out.as_deref()),
        CommandConfig::Sweep { input, out, .. } => cmd_sweep(cfg, input, out),
    }
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    match RunConfig::from_cli(&cli).and_then(|cfg| execute(&cfg)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidInput(_) | Error::Json(_) => EXIT_INVALID,
                _ => EXIT_FAILURE,
            }
        }
    }
}
