//! Scenario configuration: schema, parsing and validation.
//!
//! A config is a TOML document with the top-level keys `scenario` and `seed`,
//! the tables `[numerics]` and `[output]`, and exactly one physics table named
//! after the scenario. See `configs/schema.md` for the full schema.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    HeavyTop,
    Strand,
    S1Example,
    Affine,
    Checks,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 5] = [Self::HeavyTop, Self::Strand, Self::S1Example, Self::Affine, Self::Checks];

    pub fn name(self) -> &'static str {
        match self {
            Self::HeavyTop => "heavy_top",
            Self::Strand => "strand",
            Self::S1Example => "s1_example",
            Self::Affine => "affine",
            Self::Checks => "checks",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Tolerance names accepted by the scenario and their defaults.
    pub fn default_tolerances(self) -> &'static [(&'static str, f64)] {
        match self {
            Self::HeavyTop => &[("drift", 1e-6), ("residual", 1e-6), ("reconstruction", 1e-5)],
            Self::Strand => &[("curvature", 1e-4), ("propagation", 10.0), ("reconstruction", 1e-3)],
            Self::S1Example => &[("holonomy", 1e-8), ("monodromy", 1e-8)],
            Self::Affine => &[("drift", 1e-8), ("energy", 1e-6), ("residual", 1e-6)],
            Self::Checks => &[],
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteName {
    Algebra,
    ZDerivative,
    BracketEquivalence,
    Invariance,
    Convergence,
}

impl SuiteName {
    pub const ALL: [SuiteName; 5] = [Self::Algebra, Self::ZDerivative, Self::BracketEquivalence, Self::Invariance, Self::Convergence];

    pub fn name(self) -> &'static str {
        match self {
            Self::Algebra => "algebra",
            Self::ZDerivative => "z_derivative",
            Self::BracketEquivalence => "bracket_equivalence",
            Self::Invariance => "invariance",
            Self::Convergence => "convergence",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    pub seed: u64,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub output: Output,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heavy_top: Option<HeavyTopConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strand: Option<StrandConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s1_example: Option<S1Config>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub affine: Option<AffineConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checks: Option<ChecksConfig>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numerics {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_n: Option<usize>,
    /// Strand only: `dt` as a fraction of the stability limit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cfl_fraction: Option<f64>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    /// Write every `stride`-th sample.
    #[serde(default = "one")]
    pub stride: usize,
}

fn one() -> usize {
    1
}

impl Default for Output {
    fn default() -> Self {
        Self { dir: None, stride: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeavyTopConfig {
    /// Principal moments of inertia.
    pub inertia: [f64; 3],
    pub mg: f64,
    pub chi: [f64; 3],
    pub mu0: [f64; 3],
    /// Normalised before use.
    pub gamma0: [f64; 3],
    #[serde(default = "default_invariance_samples")]
    pub invariance_samples: usize,
}

fn default_invariance_samples() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrandConfig {
    pub inertia_i: [f64; 3],
    pub inertia_j: [f64; 3],
    pub mg: f64,
    pub chi: [f64; 3],
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct S1Config {
    pub mu0: f64,
    /// Samples per loop for the holonomy line integral.
    #[serde(default = "default_loop_samples")]
    pub loop_samples: usize,
}

fn default_loop_samples() -> usize {
    400
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    Gravity,
    Harmonic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineConfig {
    pub inertia: [f64; 3],
    pub mass_inv: [f64; 3],
    pub potential: PotentialKind,
    /// Gravity strength, `V = g s̄3`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
    /// Harmonic stiffness, `V = ½ Σ k_i s̄_i²`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stiffness: Option<[f64; 3]>,
    pub mu0: [f64; 3],
    pub omega0: [f64; 3],
    pub s0: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksConfig {
    pub suites: Vec<SuiteName>,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_samples() -> usize {
    100
}

/// A schema violation, located at a line of the source document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn line_of_offset(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].matches('\n').count() + 1
}

fn find(src: &str, table: &str, key: &str) -> (Option<usize>, Option<usize>) {
    let mut current = String::new();
    let mut header = None;
    for (i, raw) in src.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.starts_with('[') && line.ends_with(']') {
            current = line.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            if current == table {
                header = Some(i + 1);
            }
            continue;
        }
        if current == table {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim().trim_matches('"') == key {
                    return (Some(i + 1), header);
                }
            }
        }
    }
    (None, header)
}

/// Line of `key` inside `[table]` (top level when `table` is empty). Falls
/// back to the table header, then to the parent key of a dotted table, then
/// to line 1.
pub fn locate(src: &str, table: &str, key: &str) -> usize {
    match find(src, table, key) {
        (Some(l), _) | (None, Some(l)) => l,
        (None, None) => match table.rsplit_once('.') {
            Some((parent, last)) => locate(src, parent, last),
            None => 1,
        },
    }
}

struct Checker<'a> {
    src: &'a str,
}

impl Checker<'_> {
    fn fail<T>(&self, table: &str, key: &str, msg: impl Into<String>) -> Result<T, ConfigError> {
        Err(ConfigError { line: locate(self.src, table, key), message: msg.into() })
    }

    fn positive(&self, table: &str, key: &str, v: f64) -> Result<(), ConfigError> {
        if v.is_finite() && v > 0.0 {
            Ok(())
        } else {
            self.fail(table, key, format!("`{key}` must be a positive finite number, got {v}"))
        }
    }

    fn finite(&self, table: &str, key: &str, v: &[f64]) -> Result<(), ConfigError> {
        if v.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            self.fail(table, key, format!("`{key}` must be finite"))
        }
    }

    fn positive_vec(&self, table: &str, key: &str, v: &[f64; 3]) -> Result<(), ConfigError> {
        if v.iter().all(|x| x.is_finite() && *x > 0.0) {
            Ok(())
        } else {
            self.fail(table, key, format!("`{key}` entries must be positive, got {v:?}"))
        }
    }

    fn required<T: Copy>(&self, table: &str, key: &str, v: Option<T>, scenario: ScenarioKind) -> Result<T, ConfigError> {
        match v {
            Some(x) => Ok(x),
            None => self.fail(table, key, format!("`{table}.{key}` is required for scenario `{scenario}`")),
        }
    }

    fn absent<T>(&self, table: &str, key: &str, v: &Option<T>, scenario: ScenarioKind) -> Result<(), ConfigError> {
        match v {
            None => Ok(()),
            Some(_) => self.fail(table, key, format!("`{table}.{key}` is not used by scenario `{scenario}`")),
        }
    }
}

impl ScenarioConfig {
    /// Parses and validates `src`, filling in default tolerances.
    pub fn parse(src: &str) -> Result<Self, ConfigError> {
        let mut cfg: ScenarioConfig = toml::from_str(src).map_err(|e| ConfigError {
            line: e.span().map(|s| line_of_offset(src, s.start)).unwrap_or(1),
            message: e.message().trim().to_string(),
        })?;
        cfg.validate(src)?;
        Ok(cfg)
    }

    fn validate(&mut self, src: &str) -> Result<(), ConfigError> {
        let ck = Checker { src };
        let kind = self.scenario;
        let present = [
            (ScenarioKind::HeavyTop, self.heavy_top.is_some()),
            (ScenarioKind::Strand, self.strand.is_some()),
            (ScenarioKind::S1Example, self.s1_example.is_some()),
            (ScenarioKind::Affine, self.affine.is_some()),
            (ScenarioKind::Checks, self.checks.is_some()),
        ];
        for (k, is) in present {
            if k == kind && !is {
                return ck.fail("", "scenario", format!("scenario `{kind}` requires a `[{kind}]` table"));
            }
            if k != kind && is {
                return Err(ConfigError { line: locate(src, k.name(), ""), message: format!("table `[{k}]` does not belong to scenario `{kind}`") });
            }
        }

        let n = &mut self.numerics;
        let allowed = kind.default_tolerances();
        for (name, v) in &n.tolerances {
            if !allowed.iter().any(|(a, _)| a == name) {
                let names: Vec<&str> = allowed.iter().map(|(a, _)| *a).collect();
                return ck.fail("numerics.tolerances", name, format!("unknown tolerance `{name}` for scenario `{kind}` (expected one of {names:?})"));
            }
            ck.positive("numerics.tolerances", name, *v)?;
        }
        for (name, v) in allowed {
            n.tolerances.entry(name.to_string()).or_insert(*v);
        }
        if let Some(dt) = n.dt {
            ck.positive("numerics", "dt", dt)?;
        }
        if let Some(t) = n.t_final {
            ck.positive("numerics", "t_final", t)?;
        }
        if let Some(f) = n.cfl_fraction {
            ck.positive("numerics", "cfl_fraction", f)?;
        }
        if self.output.stride == 0 {
            return ck.fail("output", "stride", "`stride` must be at least 1");
        }

        match kind {
            ScenarioKind::HeavyTop => {
                let p = self.heavy_top.as_ref().expect("checked");
                let t = "heavy_top";
                ck.positive_vec(t, "inertia", &p.inertia)?;
                ck.finite(t, "mg", &[p.mg])?;
                ck.finite(t, "chi", &p.chi)?;
                ck.finite(t, "mu0", &p.mu0)?;
                ck.finite(t, "gamma0", &p.gamma0)?;
                if p.gamma0.iter().map(|x| x * x).sum::<f64>() == 0.0 {
                    return ck.fail(t, "gamma0", "`gamma0` must be nonzero");
                }
                if p.invariance_samples == 0 {
                    return ck.fail(t, "invariance_samples", "`invariance_samples` must be at least 1");
                }
                self.require_time_stepping(&ck)?;
            }
            ScenarioKind::Strand => {
                let p = self.strand.as_ref().expect("checked");
                let t = "strand";
                ck.positive_vec(t, "inertia_i", &p.inertia_i)?;
                ck.positive_vec(t, "inertia_j", &p.inertia_j)?;
                ck.finite(t, "mg", &[p.mg])?;
                ck.finite(t, "chi", &p.chi)?;
                ck.positive(t, "length", p.length)?;
                let n = &self.numerics;
                let g = ck.required("numerics", "grid_n", n.grid_n, kind)?;
                if g < polyred_core::strand_pde::MIN_GRID {
                    return ck.fail("numerics", "grid_n", format!("`grid_n` must be at least {}", polyred_core::strand_pde::MIN_GRID));
                }
                ck.required("numerics", "t_final", n.t_final, kind)?;
                if n.dt.is_some() && n.cfl_fraction.is_some() {
                    return ck.fail("numerics", "cfl_fraction", "give either `dt` or `cfl_fraction`, not both");
                }
            }
            ScenarioKind::S1Example => {
                let p = self.s1_example.as_ref().expect("checked");
                ck.finite("s1_example", "mu0", &[p.mu0])?;
                if p.loop_samples < 2 {
                    return ck.fail("s1_example", "loop_samples", "`loop_samples` must be at least 2");
                }
                self.require_time_stepping(&ck)?;
            }
            ScenarioKind::Affine => {
                let p = self.affine.as_ref().expect("checked");
                let t = "affine";
                ck.positive_vec(t, "inertia", &p.inertia)?;
                ck.positive_vec(t, "mass_inv", &p.mass_inv)?;
                ck.finite(t, "mu0", &p.mu0)?;
                ck.finite(t, "omega0", &p.omega0)?;
                ck.finite(t, "s0", &p.s0)?;
                match p.potential {
                    PotentialKind::Gravity => {
                        let g = ck.required(t, "g", p.g, kind)?;
                        ck.finite(t, "g", &[g])?;
                        ck.absent(t, "stiffness", &p.stiffness, kind)?;
                    }
                    PotentialKind::Harmonic => {
                        let k = ck.required(t, "stiffness", p.stiffness, kind)?;
                        ck.finite(t, "stiffness", &k)?;
                        ck.absent(t, "g", &p.g, kind)?;
                    }
                }
                self.require_time_stepping(&ck)?;
            }
            ScenarioKind::Checks => {
                let p = self.checks.as_ref().expect("checked");
                if p.suites.is_empty() {
                    return ck.fail("checks", "suites", "`suites` must name at least one suite");
                }
                if p.samples == 0 {
                    return ck.fail("checks", "samples", "`samples` must be at least 1");
                }
            }
        }
        Ok(())
    }

    fn require_time_stepping(&self, ck: &Checker) -> Result<(), ConfigError> {
        let n = &self.numerics;
        ck.required("numerics", "dt", n.dt, self.scenario)?;
        ck.required("numerics", "t_final", n.t_final, self.scenario)?;
        ck.absent("numerics", "grid_n", &n.grid_n, self.scenario)?;
        ck.absent("numerics", "cfl_fraction", &n.cfl_fraction, self.scenario)
    }

    pub fn tolerance(&self, name: &str) -> f64 {
        *self.numerics.tolerances.get(name).unwrap_or_else(|| panic!("tolerance `{name}` is filled in by validation"))
    }

    /// Number of steps of size `dt` covering `t_final`, rounded to nearest.
    pub fn steps(&self) -> usize {
        let (dt, t) = (self.numerics.dt.unwrap_or(1.0), self.numerics.t_final.unwrap_or(0.0));
        (t / dt).round().max(1.0) as usize
    }

    /// The resolved config as TOML, loadable by [`ScenarioConfig::parse`].
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEAVY: &str = r#"
scenario = "heavy_top"
seed = 3

[numerics]
dt = 1e-3
t_final = 1.0

[heavy_top]
inertia = [1.0, 2.0, 3.0]
mg = 1.0
chi = [0.0, 0.0, 1.0]
mu0 = [0.5, 0.8, -0.2]
gamma0 = [0.3, 0.0, 1.0]
"#;

    #[test]
    fn parses_and_fills_defaults() {
        let cfg = ScenarioConfig::parse(HEAVY).unwrap();
        assert_eq!(cfg.scenario, ScenarioKind::HeavyTop);
        assert_eq!(cfg.tolerance("drift"), 1e-6);
        assert_eq!(cfg.steps(), 1000);
        assert_eq!(ScenarioConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn errors_carry_lines() {
        let bad = HEAVY.replace("dt = 1e-3", "dt = -1e-3");
        assert_eq!(ScenarioConfig::parse(&bad).unwrap_err().line, 6);
        let bad = HEAVY.replace("mg = 1.0", "mg = \"heavy\"");
        assert_eq!(ScenarioConfig::parse(&bad).unwrap_err().line, 11);
        let bad = HEAVY.replace("mg = 1.0", "mg = 1.0\nmass = 2.0");
        let e = ScenarioConfig::parse(&bad).unwrap_err();
        assert!(e.line == 12 && e.message.contains("mass"), "{e}");
        let bad = HEAVY.replace("t_final = 1.0", "t_final = 1.0\ntolerances = { drift = 1e-6, speed = 2.0 }");
        let e = ScenarioConfig::parse(&bad).unwrap_err();
        assert!(e.message.contains("speed"), "{e}");
        let bad = HEAVY.replace("[heavy_top]", "[strand]");
        assert!(ScenarioConfig::parse(&bad).is_err());
        let e = ScenarioConfig::parse("scenario = \"pendulum\"\nseed = 1\n").unwrap_err();
        assert_eq!(e.line, 1);
    }

    #[test]
    fn locate_finds_keys_in_tables() {
        assert_eq!(locate(HEAVY, "numerics", "t_final"), 7);
        assert_eq!(locate(HEAVY, "", "seed"), 3);
        assert_eq!(locate(HEAVY, "heavy_top", "nope"), 9);
    }
}
