//! On-disk formats: the run report, the certificate file, the verification
//! report and the sweep table. `docs/formats.md` and
//! `docs/report.schema.json` describe them.

use std::path::Path;

use ktrunc_core::bounds::Stochasticity;
use ktrunc_core::lyapunov::{Envelope, LyapunovCertificate, MomentCertificate};
use ktrunc_core::pipeline::{Analysis, BoundReport, TvReport};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::{Config, ModelConfig, TruncationKind};
use crate::error::{CliError, Result};
use crate::problem::{Coords, Outcome};

pub const REPORT_SCHEMA: &str = "ktrunc-report/1";
pub const CERTIFICATE_SCHEMA: &str = "ktrunc-certificate/1";
pub const VERIFY_SCHEMA: &str = "ktrunc-verify/1";

pub fn version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// A distribution over `A` as a sparse coordinate list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseDistribution {
    pub label: String,
    pub states: Vec<Vec<u32>>,
    pub values: Vec<f64>,
}

impl SparseDistribution {
    pub fn new<S: Coords>(label: impl Into<String>, states: &[S], pi: &[f64]) -> Self {
        let (states, values) = states
            .iter()
            .zip(pi)
            .filter(|(_, v)| **v != 0.0)
            .map(|(x, v)| (x.coords(), *v))
            .unzip();
        Self {
            label: label.into(),
            states,
            values,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationSummary {
    pub kind: TruncationKind,
    pub size: Option<u32>,
    pub a_size: usize,
    pub k_size: usize,
    pub a_prime_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateSummary {
    pub sha256: String,
    pub n1: u64,
    pub n2: u64,
    pub checked: usize,
    pub worst_margin_g1: Option<f64>,
    pub worst_margin_g2: Option<f64>,
    pub verified: bool,
    pub reward_verified: bool,
    pub reward_violations: usize,
}

/// Wall-clock seconds per stage. The only nondeterministic part of a report.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub return_set: f64,
    pub enumerate: f64,
    pub certify: f64,
    pub g_build: f64,
    pub stochasticize: f64,
    pub tau: f64,
    pub bounds: f64,
    pub analysis_total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub version: String,
    pub config_sha256: String,
    pub model: ModelConfig,
    pub truncation: TruncationSummary,
    pub return_set: Vec<Vec<u32>>,
    pub certificate: CertificateSummary,
    pub deleted_state: Vec<u32>,
    pub min_row_sum: f64,
    pub max_deficit: f64,
    pub bounds: Vec<BoundReport>,
    pub tv: Vec<TvReport>,
    pub approximations: Vec<SparseDistribution>,
    pub exit_approximation: Option<SparseDistribution>,
    pub conditioned: Option<SparseDistribution>,
    pub timings: StageTimings,
}

/// The certificate evaluated on a truncation, with the states it refers to,
/// so a bound run can be replayed without re-verifying drift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateFile {
    pub schema: String,
    pub version: String,
    pub model: ModelConfig,
    pub return_set: Vec<Vec<u32>>,
    pub states: Vec<Vec<u32>>,
    pub certificate: LyapunovCertificate,
}

impl CertificateFile {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }
}

fn label(m: Stochasticity) -> &'static str {
    match m {
        Stochasticity::RowNormalized => "row_normalized",
        Stochasticity::Perron => "perron",
    }
}

pub fn stage_timings(out: &Outcome<impl Coords>, return_set: f64) -> StageTimings {
    let t = &out.analysis.timings;
    StageTimings {
        return_set,
        enumerate: out.setup.enumerate,
        certify: out.setup.certify,
        g_build: t.g_build,
        stochasticize: t.stochasticize,
        tau: t.tau,
        bounds: t.bounds,
        analysis_total: t.total,
    }
}

/// Assembles the certificate file and the report for one outcome.
pub fn build_report<S: Coords>(
    cfg: &Config,
    config_text: &str,
    size: Option<u32>,
    out: &Outcome<S>,
    return_set_time: f64,
) -> (CertificateFile, Report) {
    let t = &out.truncation;
    let states = t.space.states();
    let k: Vec<Vec<u32>> = out.k.iter().map(Coords::coords).collect();
    let cert_file = CertificateFile {
        schema: CERTIFICATE_SCHEMA.into(),
        version: version().into(),
        model: cfg.model.clone(),
        return_set: k.clone(),
        states: states.iter().map(Coords::coords).collect(),
        certificate: out.certificate.clone(),
    };
    let c = &out.certificate;
    let a: &Analysis = &out.analysis;
    let approximations = if cfg.output.distribution {
        a.distributions
            .iter()
            .map(|d| SparseDistribution::new(label(d.stochasticity), states, &d.pi))
            .collect()
    } else {
        Vec::new()
    };
    let report = Report {
        schema: REPORT_SCHEMA.into(),
        version: version().into(),
        config_sha256: sha256_hex(config_text.as_bytes()),
        model: cfg.model.clone(),
        truncation: TruncationSummary {
            kind: cfg.truncation.kind,
            size,
            a_size: t.len(),
            k_size: t.k_size(),
            a_prime_size: t.len() - t.k_size(),
        },
        return_set: k,
        certificate: CertificateSummary {
            sha256: sha256_hex(cert_file.to_json().as_bytes()),
            n1: c.n1,
            n2: c.n2,
            checked: c.checked,
            worst_margin_g1: c.worst_margin_g1,
            worst_margin_g2: c.worst_margin_g2,
            verified: c.verified,
            reward_verified: c.reward_verified,
            reward_violations: c.reward_violations,
        },
        deleted_state: t.space.state_of(a.deleted_state).coords(),
        min_row_sum: a.min_row_sum,
        max_deficit: a.max_deficit,
        bounds: a.bounds.clone(),
        tv: a.tv.clone(),
        approximations,
        exit_approximation: a
            .exit
            .as_ref()
            .map(|pi| SparseDistribution::new("exit", states, pi)),
        conditioned: a
            .conditioned
            .as_ref()
            .map(|pi| SparseDistribution::new("conditioned", states, pi)),
        timings: stage_timings(out, return_set_time),
    };
    (cert_file, report)
}

/// Output of `verify`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub schema: String,
    pub version: String,
    pub config_sha256: String,
    pub model: ModelConfig,
    pub constants: Value,
    pub return_set: Vec<Vec<u32>>,
    pub checked: usize,
    pub g1: DriftSummary,
    pub g2: DriftSummary,
    pub moment: Option<MomentCertificate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftSummary {
    pub verified: bool,
    /// `None` when no state was checked.
    pub worst_margin: Option<f64>,
    pub worst_state: Option<Vec<u32>>,
    /// Violating states and their margins.
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub state: Vec<u32>,
    pub margin: f64,
}

/// Column layout of the sweep table for the configured methods.
pub struct SweepTable {
    methods: Vec<Stochasticity>,
    rewards: Vec<String>,
    envelopes: Vec<Envelope>,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    /// Numeric columns that must shrink (`-1`) or grow (`+1`) along the sweep.
    pub monotone: Vec<(usize, i8)>,
    values: Vec<Vec<f64>>,
}

fn env_label(e: Envelope) -> &'static str {
    match e {
        Envelope::Reward => "r",
        Envelope::Unit => "e",
    }
}

impl SweepTable {
    pub fn new(cfg: &Config) -> Self {
        let methods = cfg.bounds.methods.clone();
        let rewards: Vec<String> = cfg
            .bounds
            .rewards
            .iter()
            .map(|r| match r {
                crate::config::RewardName::R => "r".to_string(),
                crate::config::RewardName::E => "e".to_string(),
            })
            .collect();
        let envelopes = cfg.bounds.tv.clone();
        let mut header: Vec<String> = ["size", "a_size", "k_size", "min_row_sum", "max_deficit"]
            .map(String::from)
            .to_vec();
        let mut monotone = Vec::new();
        for m in &methods {
            let m = label(*m);
            for r in &rewards {
                monotone.push((header.len(), 1));
                header.push(format!("{m}_{r}_lower"));
                monotone.push((header.len(), -1));
                header.push(format!("{m}_{r}_upper"));
                header.push(format!("{m}_{r}_approx"));
            }
            for e in &envelopes {
                monotone.push((header.len(), -1));
                header.push(format!("{m}_tv_{}", env_label(*e)));
                header.push(format!("{m}_tv_{}_exact", env_label(*e)));
            }
        }
        for t in [
            "t_return_set",
            "t_enumerate",
            "t_certify",
            "t_g_build",
            "t_stochasticize",
            "t_tau",
            "t_bounds",
            "t_analysis",
        ] {
            header.push(t.into());
        }
        Self {
            methods,
            rewards,
            envelopes,
            header,
            rows: Vec::new(),
            monotone,
            values: Vec::new(),
        }
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn push<S: Coords>(&mut self, size: u32, out: &Outcome<S>, return_set_time: f64) {
        let a = &out.analysis;
        let mut v: Vec<f64> = vec![
            size as f64,
            a.a_size as f64,
            a.k_size as f64,
            a.min_row_sum,
            a.max_deficit,
        ];
        for m in &self.methods {
            for r in &self.rewards {
                match a.bound(r, *m) {
                    Some(b) => v.extend([b.lower, b.upper, b.approx]),
                    None => v.extend([f64::NAN; 3]),
                }
            }
            for e in &self.envelopes {
                match a
                    .tv
                    .iter()
                    .find(|t| t.envelope == *e && t.stochasticity == *m)
                {
                    Some(t) => v.extend([t.bound, t.bound_exact]),
                    None => v.extend([f64::NAN; 2]),
                }
            }
        }
        let t = stage_timings(out, return_set_time);
        v.extend([
            t.return_set,
            t.enumerate,
            t.certify,
            t.g_build,
            t.stochasticize,
            t.tau,
            t.bounds,
            t.analysis_total,
        ]);
        let mut row: Vec<String> = v.iter().map(|x| format!("{x:e}")).collect();
        row[0] = size.to_string();
        row[1] = a.a_size.to_string();
        row[2] = a.k_size.to_string();
        self.rows.push(row);
        self.values.push(v);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// First monotonicity violation beyond a relative slack `slack · max(1, |x|)`.
    pub fn check_monotone(&self, slack: f64) -> Result<()> {
        for &(col, dir) in &self.monotone {
            for (i, w) in self.values.windows(2).enumerate() {
                let (a, b) = (w[0][col], w[1][col]);
                if a.is_nan() || b.is_nan() {
                    continue;
                }
                let tol = slack * a.abs().max(1.0);
                let bad = if dir < 0 { b > a + tol } else { b < a - tol };
                if bad {
                    return Err(CliError::NotMonotone {
                        column: self.header[col].clone(),
                        detail: format!("row {} has {a:e}, row {} has {b:e}", i + 1, i + 2),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let werr = |e: csv::Error| CliError::Write {
            path: path.to_path_buf(),
            source: std::io::Error::other(e),
        };
        let mut w = csv::Writer::from_path(path).map_err(werr)?;
        w.write_record(&self.header).map_err(werr)?;
        for r in &self.rows {
            w.write_record(r).map_err(werr)?;
        }
        w.flush().map_err(|source| CliError::Write {
            path: path.to_path_buf(),
            source,
        })
    }
}
