//! Experiment manifests: a TOML file with `model`, `truncation`,
//! `return_set`, `bounds` and `output` sections.

use std::path::{Path, PathBuf};

use ktrunc_core::bounds::{Stochasticity, ROUNDING_ULPS};
use ktrunc_core::lyapunov::Envelope;
use ktrunc_core::pipeline::Options;
use ktrunc_core::state::DEFAULT_STATE_CAP;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, CliError, Result};

/// Environment variable that overrides `output.dir`.
pub const OUTPUT_DIR_ENV: &str = "KTRUNC_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub model: ModelConfig,
    pub truncation: TruncationConfig,
    #[serde(default)]
    pub return_set: ReturnSetConfig,
    #[serde(default)]
    pub bounds: BoundsConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    tag = "name",
    content = "params",
    rename_all = "snake_case",
    deny_unknown_fields
)]
pub enum ModelConfig {
    Gm1(Gm1Params),
    Toggle(ToggleParams),
    Matrix(MatrixParams),
}

impl ModelConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ModelConfig::Gm1(_) => "gm1",
            ModelConfig::Toggle(_) => "toggle",
            ModelConfig::Matrix(_) => "matrix",
        }
    }
}

/// G/M/1 queue with exponential service rate `mu` and interarrival times
/// uniform on `[0, b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gm1Params {
    #[serde(default = "one")]
    pub mu: f64,
    #[serde(default = "default_b")]
    pub b: f64,
    #[serde(default = "default_c")]
    pub c1: f64,
    #[serde(default = "default_c")]
    pub c2: f64,
    /// Constant added to `g2` off zero; `"auto"` picks the smallest offset
    /// certifying `K = {0}`.
    #[serde(default)]
    pub g2_offset: Option<Offset>,
    /// Scale of `g3 = c3 x⁴` for the moment certificate printed by `verify`.
    #[serde(default)]
    pub moment_c3: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Offset {
    Value(f64),
    Named(String),
}

/// Symmetric toggle switch with production rate `lambda` and decay `mu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToggleParams {
    pub lambda: f64,
    #[serde(default = "one")]
    pub mu: f64,
    /// Skip the check `r ≥ λ` off `K`. Both benchmark rewards need it.
    #[serde(default = "yes")]
    pub skip_rate_check: bool,
    #[serde(default)]
    pub moment: Option<ToggleMoment>,
}

/// `g3 = alpha g1` with `w = c3 (x1 + x2)²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToggleMoment {
    pub alpha: f64,
    pub c3: f64,
}

/// A finite chain given by dense rows, with optional Lyapunov data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixParams {
    pub rows: Vec<Vec<f64>>,
    /// Envelope reward; defaults to `1`.
    #[serde(default)]
    pub r: Option<Vec<f64>>,
    /// Lyapunov functions; default to `0`.
    #[serde(default)]
    pub g1: Option<Vec<f64>>,
    #[serde(default)]
    pub g2: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationKind {
    /// `A = {0, …, size}` for one-dimensional models.
    Range,
    /// `A = {x1 + x2 ≤ size}` for the toggle switch.
    Simplex,
    /// Every state of a finite model.
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationConfig {
    pub kind: TruncationKind,
    /// Size used by `run`; `sweep` uses `schedule` instead.
    #[serde(default)]
    pub size: Option<u32>,
    #[serde(default)]
    pub schedule: Option<Vec<u32>>,
    #[serde(default = "default_cap")]
    pub cap: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReturnSetMode {
    /// States of the core where a drift inequality fails.
    #[default]
    Lyapunov,
    /// The states listed in `states`.
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReturnSetConfig {
    #[serde(default)]
    pub mode: ReturnSetMode,
    /// Coordinates of each state, e.g. `[[0], [1]]` or `[[3, 0]]`.
    #[serde(default)]
    pub states: Vec<Vec<u32>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardName {
    /// The Lyapunov reward `r`.
    R,
    /// The constant `1`.
    E,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    #[serde(default = "default_methods")]
    pub methods: Vec<Stochasticity>,
    #[serde(default = "default_rewards")]
    pub rewards: Vec<RewardName>,
    #[serde(default = "default_tv")]
    pub tv: Vec<Envelope>,
    #[serde(default)]
    pub exit_approximation: bool,
    #[serde(default)]
    pub conditioned: bool,
    #[serde(default = "default_ulps")]
    pub rounding_ulps: f64,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self {
            methods: default_methods(),
            rewards: default_rewards(),
            tv: default_tv(),
            exit_approximation: false,
            conditioned: false,
            rounding_ulps: ROUNDING_ULPS,
        }
    }
}

impl BoundsConfig {
    pub fn options(&self) -> Options {
        Options {
            methods: self.methods.clone(),
            tv_envelopes: self.tv.clone(),
            exit_approximation: self.exit_approximation,
            conditioned: self.conditioned,
            rounding_ulps: self.rounding_ulps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_report")]
    pub report: String,
    #[serde(default = "default_certificate")]
    pub certificate: String,
    #[serde(default = "default_sweep")]
    pub sweep: String,
    #[serde(default = "default_verify")]
    pub verify: String,
    /// Include the approximate distribution in the report.
    #[serde(default = "yes")]
    pub distribution: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            report: default_report(),
            certificate: default_certificate(),
            sweep: default_sweep(),
            verify: default_verify(),
            distribution: true,
        }
    }
}

impl OutputConfig {
    /// Output directory, with the environment override applied.
    pub fn resolved_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(d) if !d.is_empty() => PathBuf::from(d),
            _ => self.dir.clone(),
        }
    }
}

fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_b() -> f64 {
    2.01
}
fn default_c() -> f64 {
    300.0
}
fn default_cap() -> usize {
    DEFAULT_STATE_CAP
}
fn default_methods() -> Vec<Stochasticity> {
    vec![Stochasticity::RowNormalized]
}
fn default_rewards() -> Vec<RewardName> {
    vec![RewardName::R, RewardName::E]
}
fn default_tv() -> Vec<Envelope> {
    vec![Envelope::Reward, Envelope::Unit]
}
fn default_ulps() -> f64 {
    ROUNDING_ULPS
}
fn default_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_report() -> String {
    "report.json".into()
}
fn default_certificate() -> String {
    "certificate.json".into()
}
fn default_sweep() -> String {
    "sweep.csv".into()
}
fn default_verify() -> String {
    "verify.json".into()
}

impl Config {
    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg = Self::parse(&text)?;
        Ok((cfg, text))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks that do not need the model built.
    pub fn validate(&self) -> Result<()> {
        let dim = match &self.model {
            ModelConfig::Toggle(_) => 2,
            _ => 1,
        };
        let kind_ok = matches!(
            (&self.model, self.truncation.kind),
            (ModelConfig::Gm1(_), TruncationKind::Range)
                | (ModelConfig::Toggle(_), TruncationKind::Simplex)
                | (
                    ModelConfig::Matrix(_),
                    TruncationKind::Range | TruncationKind::All
                )
        );
        if !kind_ok {
            return Err(config_err(format!(
                "truncation kind {:?} does not apply to model {}",
                self.truncation.kind,
                self.model.name()
            )));
        }
        if self.truncation.kind != TruncationKind::All
            && self.truncation.size.is_none()
            && self.truncation.schedule.is_none()
        {
            return Err(config_err("truncation needs `size` or `schedule`"));
        }
        if let Some(s) = &self.truncation.schedule {
            if s.windows(2).any(|w| w[0] >= w[1]) {
                return Err(config_err(
                    "truncation.schedule must be strictly increasing",
                ));
            }
        }
        match self.return_set.mode {
            ReturnSetMode::Explicit => {
                if self.return_set.states.is_empty() {
                    return Err(config_err("explicit return set has no states"));
                }
                if let Some(s) = self.return_set.states.iter().find(|s| s.len() != dim) {
                    return Err(config_err(format!(
                        "return-set state {s:?} should have {dim} coordinate(s)"
                    )));
                }
            }
            ReturnSetMode::Lyapunov => {
                if !self.return_set.states.is_empty() {
                    return Err(config_err(
                        "return_set.states is only used with mode = \"explicit\"",
                    ));
                }
            }
        }
        let b = &self.bounds;
        if b.methods.is_empty() {
            return Err(config_err("bounds.methods is empty"));
        }
        if !(b.rounding_ulps.is_finite() && b.rounding_ulps >= 0.0) {
            return Err(config_err(
                "bounds.rounding_ulps must be finite and nonnegative",
            ));
        }
        if let ModelConfig::Gm1(p) = &self.model {
            if let Some(Offset::Named(s)) = &p.g2_offset {
                if s != "auto" {
                    return Err(config_err(format!(
                        "g2_offset must be a number or \"auto\", got {s:?}"
                    )));
                }
            }
        }
        if let ModelConfig::Matrix(p) = &self.model {
            let n = p.rows.len();
            if n == 0 || p.rows.iter().any(|r| r.len() != n) {
                return Err(config_err("matrix rows must form a nonempty square matrix"));
            }
            for (name, v) in [("r", &p.r), ("g1", &p.g1), ("g2", &p.g2)] {
                if v.as_ref().is_some_and(|v| v.len() != n) {
                    return Err(config_err(format!("matrix {name} must have {n} entries")));
                }
            }
        }
        Ok(())
    }

    /// Sizes used by `sweep`.
    pub fn schedule(&self) -> Result<&[u32]> {
        match &self.truncation.schedule {
            Some(s) if !s.is_empty() => Ok(s),
            Some(_) => Err(config_err("truncation.schedule is empty")),
            None => Err(config_err("sweep needs truncation.schedule")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GM1: &str = r#"
[model]
name = "gm1"
params = { mu = 1.0, b = 2.01 }

[truncation]
kind = "range"
size = 10000
"#;

    #[test]
    fn parses_minimal_gm1() {
        let c = Config::parse(GM1).unwrap();
        assert_eq!(c.model.name(), "gm1");
        assert_eq!(c.truncation.size, Some(10000));
        assert_eq!(c.return_set.mode, ReturnSetMode::Lyapunov);
        assert_eq!(c.bounds.methods, vec![Stochasticity::RowNormalized]);
        assert_eq!(c.output.dir, PathBuf::from("out"));
    }

    #[test]
    fn rejects_unknown_fields_and_mismatched_kinds() {
        assert!(Config::parse(&GM1.replace("b = 2.01", "b = 2.01, z = 1")).is_err());
        assert!(Config::parse(&GM1.replace("\"range\"", "\"simplex\"")).is_err());
        assert!(Config::parse(&GM1.replace("size = 10000", "")).is_err());
    }

    #[test]
    fn schedule_must_increase() {
        let text = GM1.replace("size = 10000", "schedule = [10, 5]");
        assert!(Config::parse(&text).is_err());
        let text = GM1.replace("size = 10000", "schedule = []");
        assert!(Config::parse(&text).unwrap().schedule().is_err());
    }

    #[test]
    fn explicit_states_need_matching_dimension() {
        let text = format!("{GM1}\n[return_set]\nmode = \"explicit\"\nstates = [[0, 1]]\n");
        assert!(Config::parse(&text).is_err());
        let text = format!("{GM1}\n[return_set]\nmode = \"explicit\"\nstates = [[0], [1]]\n");
        assert_eq!(Config::parse(&text).unwrap().return_set.states.len(), 2);
    }

    #[test]
    fn g2_offset_accepts_auto_only() {
        let auto = GM1.replace("b = 2.01", "b = 2.01, g2_offset = \"auto\"");
        assert!(Config::parse(&auto).is_ok());
        let bad = GM1.replace("b = 2.01", "b = 2.01, g2_offset = \"large\"");
        assert!(Config::parse(&bad).is_err());
    }
}
