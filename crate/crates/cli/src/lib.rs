//! Scenario runner for the `polyred` command line tool.
//!
//! `run` parses a config, executes the scenario and writes three artifacts
//! into the output directory: `<scenario>.csv`, `diagnostics.json` and
//! `manifest.toml`. The manifest is itself a valid config that reproduces the
//! run. Exit codes: 0 success, 1 a bound was violated, 2 usage or schema error,
//! 3 numerical or I/O failure.

pub mod config;
pub mod scenarios;
pub mod suites;

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use config::{ConfigError, ScenarioConfig, ScenarioKind, SuiteName};
use scenarios::{run_scenario, ScenarioOutput};
use suites::CheckRow;

/// Environment variable that overrides the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "POLYRED_OUTPUT_DIR";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}:{source}")]
    Schema { path: String, source: ConfigError },
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: io::Error },
    #[error("unknown {what} `{name}` (expected one of: {expected})")]
    Unknown { what: &'static str, name: String, expected: String },
    #[error("numerical failure: {0}")]
    Numerical(#[from] polyred_core::Error),
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: io::Error },
    #[error("{failed} of {total} checks failed")]
    Bounds { failed: usize, total: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Bounds { .. } => 1,
            CliError::Schema { .. } | CliError::Read { .. } | CliError::Unknown { .. } => 2,
            CliError::Numerical(_) | CliError::Write { .. } => 3,
        }
    }
}

/// Paths and results of a completed run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub dir: PathBuf,
    pub csv: PathBuf,
    pub diagnostics: PathBuf,
    pub manifest: PathBuf,
    pub verdict: Option<String>,
    pub checks: Vec<CheckRow>,
}

impl RunReport {
    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.pass).count()
    }
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, CliError> {
    let src = fs::read_to_string(path).map_err(|source| CliError::Read { path: path.display().to_string(), source })?;
    ScenarioConfig::parse(&src).map_err(|source| CliError::Schema { path: path.display().to_string(), source })
}

/// Output directory: the environment override, then the config, then `out/<scenario>`.
pub fn output_dir(cfg: &ScenarioConfig) -> PathBuf {
    match std::env::var(OUTPUT_DIR_ENV) {
        Ok(d) if !d.is_empty() => PathBuf::from(d),
        _ => cfg.output.dir.clone().map(PathBuf::from).unwrap_or_else(|| Path::new("out").join(cfg.scenario.name())),
    }
}

/// The config with every derived value filled in, so that re-running it
/// reproduces the run exactly.
pub fn resolve(cfg: &ScenarioConfig, dir: &Path) -> Result<ScenarioConfig, CliError> {
    let mut out = cfg.clone();
    out.output.dir = Some(dir.display().to_string());
    if cfg.scenario == ScenarioKind::Strand {
        out.numerics.dt = Some(scenarios::strand_params(cfg)?.dt());
        out.numerics.cfl_fraction = None;
    }
    Ok(out)
}

fn write(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Write { path: path.display().to_string(), source })
}

pub fn render_csv(out: &ScenarioOutput) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let wrap = |e: csv::Error| CliError::Write { path: "csv buffer".into(), source: io::Error::other(e) };
    w.write_record(&out.header).map_err(wrap)?;
    for row in &out.rows {
        w.write_record(row.iter().map(|c| c.render())).map_err(wrap)?;
    }
    w.into_inner().map_err(|e| CliError::Write { path: "csv buffer".into(), source: io::Error::other(e.to_string()) })
}

/// Executes a validated config and writes its artifacts.
pub fn execute(cfg: &ScenarioConfig, source: &str) -> Result<RunReport, CliError> {
    let dir = output_dir(cfg);
    let resolved = resolve(cfg, &dir)?;
    let out = run_scenario(&resolved)?;
    fs::create_dir_all(&dir).map_err(|source| CliError::Write { path: dir.display().to_string(), source })?;

    let csv = dir.join(format!("{}.csv", cfg.scenario.name()));
    write(&csv, &render_csv(&out)?)?;

    let diagnostics = dir.join("diagnostics.json");
    let json = serde_json::json!({
        "scenario": cfg.scenario.name(),
        "seed": cfg.seed,
        "passed": out.passed(),
        "verdict": out.verdict,
        "checks": out.checks,
        "details": out.diagnostics,
    });
    write(&diagnostics, serde_json::to_string_pretty(&json).expect("json").as_bytes())?;

    let manifest = dir.join("manifest.toml");
    let text = format!(
        "# polyred {} run manifest\n# source: {source}\n# artifacts: {}, diagnostics.json\n{}",
        env!("CARGO_PKG_VERSION"),
        csv.file_name().and_then(|s| s.to_str()).unwrap_or(""),
        resolved.to_toml()
    );
    write(&manifest, text.as_bytes())?;

    Ok(RunReport { dir, csv, diagnostics, manifest, verdict: out.verdict, checks: out.checks })
}

/// `polyred run <config>`.
pub fn run(path: &Path) -> Result<RunReport, CliError> {
    let cfg = load_config(path)?;
    execute(&cfg, &path.display().to_string())
}

/// `polyred check <suite>`.
pub fn check(suite: &str, seed: u64, samples: usize) -> Result<Vec<CheckRow>, CliError> {
    let s = SuiteName::parse(suite).ok_or_else(|| CliError::Unknown {
        what: "suite",
        name: suite.to_string(),
        expected: SuiteName::ALL.map(|s| s.name()).join(", "),
    })?;
    Ok(suites::run_suite(s, seed, samples)?)
}

/// Reference configs shipped with the repository.
pub fn reference_config(kind: ScenarioKind) -> &'static str {
    match kind {
        ScenarioKind::HeavyTop => include_str!("../../../configs/heavy_top.toml"),
        ScenarioKind::Strand => include_str!("../../../configs/strand.toml"),
        ScenarioKind::S1Example => include_str!("../../../configs/s1.toml"),
        ScenarioKind::Affine => include_str!("../../../configs/affine.toml"),
        ScenarioKind::Checks => include_str!("../../../configs/checks.toml"),
    }
}

fn summary(kind: ScenarioKind) -> &'static str {
    match kind {
        ScenarioKind::HeavyTop => {
            "Heavy top on (so(3)* x S^2): RK4 integration of the reduced equations, conservation of h, <mu, Gamma> \
             and |Gamma|^2, the reduced-equation residual along the trajectory, the invariance check of the \
             unreduced Hamiltonian, and reconstruction of R(t) by parallel transport."
        }
        ScenarioKind::Strand => {
            "Rigid strand in 1+1 dimensions: method-of-lines evolution of (mu^s, mu^t, Gamma) from manufactured flat \
             data, residuals of the reduced field equations, curvature of the connection, propagation of the \
             constraint residual and reconstruction of R(s, t)."
        }
        ScenarioKind::S1Example => {
            "Abelian example over S^1: monodromy and periodic family of the reduced equations, and the holonomy \
             2 pi mu0 that obstructs reconstruction when mu0 is nonzero."
        }
        ScenarioKind::Affine => {
            "Affine rigid body on (so(3) x| R^3)* x R^3: RK4 integration, conservation of h and |mu_bar| with \
             mu_bar = mu - s x omega, and the transport residual of mu_bar."
        }
        ScenarioKind::Checks => "Runs the named verification suites and writes their measured values against the pinned bounds.",
    }
}

/// `polyred describe <scenario>`.
pub fn describe(name: &str) -> Result<String, CliError> {
    let kind = ScenarioKind::parse(name).ok_or_else(|| CliError::Unknown {
        what: "scenario",
        name: name.to_string(),
        expected: ScenarioKind::ALL.map(|s| s.name()).join(", "),
    })?;
    let tols: Vec<String> = kind.default_tolerances().iter().map(|(n, v)| format!("{n} = {v:e}")).collect();
    Ok(format!(
        "{}\n\n{}\n\ndefault tolerances: {}\n\nreference config:\n\n{}",
        kind.name(),
        summary(kind),
        if tols.is_empty() { "none".to_string() } else { tols.join(", ") },
        reference_config(kind)
    ))
}
