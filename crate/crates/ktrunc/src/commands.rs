//! The `run`, `verify` and `sweep` subcommands.

use std::path::{Path, PathBuf};
use std::time::Instant;

use ktrunc_core::lyapunov::{verify_drift, DriftReport, Lyapunov};

use crate::config::Config;
use crate::error::{CliError, Result};
use crate::problem::{run_size, Coords, Instance};
use crate::report::{
    build_report, sha256_hex, version, DriftSummary, SweepTable, VerifyReport, Violation,
    VERIFY_SCHEMA,
};
use crate::with_instance;

/// Relative slack for the sweep monotonicity check.
pub const MONOTONE_SLACK: f64 = 1e-12;

/// Violations printed to the terminal by `verify`; the JSON keeps all.
const SHOWN_VIOLATIONS: usize = 10;

/// Paths written by a command.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Written {
    pub files: Vec<PathBuf>,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn output_dir(cfg: &Config) -> Result<PathBuf> {
    let dir = cfg.output.resolved_dir();
    std::fs::create_dir_all(&dir).map_err(|source| CliError::Write {
        path: dir.clone(),
        source,
    })?;
    Ok(dir)
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

/// Builds the truncation from the config, analyzes it and writes the report
/// and certificate. Nothing is written unless every stage succeeds.
pub fn run(cfg: &Config, config_text: &str) -> Result<Written> {
    let size = run_size(cfg)?;
    with_instance!(cfg, inst => run_with(&inst, cfg, config_text, size))
}

fn run_with<L>(inst: &Instance<L>, cfg: &Config, text: &str, size: Option<u32>) -> Result<Written>
where
    L: Lyapunov,
    L::State: Coords,
{
    let start = Instant::now();
    let k = inst.return_set(cfg)?;
    let t_k = start.elapsed().as_secs_f64();
    let out = inst.solve(cfg, size, &k)?;
    let (cert, report) = build_report(cfg, text, size, &out, t_k);
    for tv in &report.tv {
        println!(
            "tv_bound[{:?}, {:?}] = {:e} (exact-arithmetic {:e})",
            tv.envelope, tv.stochasticity, tv.bound, tv.bound_exact
        );
    }
    for b in &report.bounds {
        println!(
            "pi({}) in [{:.15e}, {:.15e}] ({:?}, {:?}), approx {:.15e}",
            b.reward, b.lower, b.upper, b.method, b.stochasticity, b.approx
        );
    }
    let dir = output_dir(cfg)?;
    let cert_path = dir.join(&cfg.output.certificate);
    let report_path = dir.join(&cfg.output.report);
    write_file(&cert_path, &cert.to_json())?;
    write_file(&report_path, &to_json(&report))?;
    println!("wrote {}", report_path.display());
    Ok(Written {
        files: vec![cert_path, report_path],
    })
}

/// Constructs `K`, checks both drift inequalities on the core and reports
/// the analytic constants. Fails with an assumption error on any violation.
pub fn verify(cfg: &Config, config_text: &str) -> Result<Written> {
    with_instance!(cfg, inst => verify_with(&inst, cfg, config_text))
}

fn summarize<S: Coords>(d: &DriftReport<S>) -> DriftSummary {
    DriftSummary {
        verified: d.is_verified(),
        worst_margin: d.worst_state.as_ref().map(|_| d.worst_margin),
        worst_state: d.worst_state.as_ref().map(Coords::coords),
        violations: d
            .violations
            .iter()
            .map(|(x, m)| Violation {
                state: x.coords(),
                margin: *m,
            })
            .collect(),
    }
}

fn verify_with<L>(inst: &Instance<L>, cfg: &Config, text: &str) -> Result<Written>
where
    L: Lyapunov,
    L::State: Coords,
{
    let k = inst.return_set(cfg)?;
    let m = &inst.model;
    let in_k = |x: &L::State| k.binary_search(x).is_ok();
    let d1 = verify_drift(m, &|x| m.g1(x), &|x| m.r(x), &in_k, m.core(), 0.0)?;
    let d2 = verify_drift(m, &|x| m.g2(x), &|x| m.unit(x), &in_k, m.core(), 0.0)?;
    let moment = inst.moment.as_ref().map(|f| f()).transpose()?;

    if let Some(obj) = inst.constants.as_object() {
        for (name, v) in obj {
            println!("{name}={v}");
        }
    }
    println!("|K|={}", k.len());
    if let Some(mc) = &moment {
        println!("n3={}", mc.n3);
        println!("moment_c={:e}", mc.c);
    }
    let report = VerifyReport {
        schema: VERIFY_SCHEMA.into(),
        version: version().into(),
        config_sha256: sha256_hex(text.as_bytes()),
        model: cfg.model.clone(),
        constants: inst.constants.clone(),
        return_set: k.iter().map(Coords::coords).collect(),
        checked: d1.checked,
        g1: summarize(&d1),
        g2: summarize(&d2),
        moment,
    };
    for (name, d) in [("g1", &report.g1), ("g2", &report.g2)] {
        if d.verified {
            println!("{name} drift verified on {} states", report.checked);
            continue;
        }
        println!("{name} drift violated at {} state(s):", d.violations.len());
        for v in d.violations.iter().take(SHOWN_VIOLATIONS) {
            println!("  {:?} margin {:e}", v.state, v.margin);
        }
        if d.violations.len() > SHOWN_VIOLATIONS {
            println!("  ... and {} more", d.violations.len() - SHOWN_VIOLATIONS);
        }
    }
    let dir = output_dir(cfg)?;
    let path = dir.join(&cfg.output.verify);
    write_file(&path, &to_json(&report))?;
    if !(report.g1.verified && report.g2.verified) {
        let count = report.g1.violations.len() + report.g2.violations.len();
        return Err(CliError::Verification(format!(
            "{count} violation(s); see {}",
            path.display()
        )));
    }
    Ok(Written { files: vec![path] })
}

/// Runs the analysis for every size of the schedule and writes one CSV row
/// per size. Bounds must tighten along the schedule.
pub fn sweep(cfg: &Config, _config_text: &str) -> Result<Written> {
    let schedule = cfg.schedule()?.to_vec();
    with_instance!(cfg, inst => sweep_with(&inst, cfg, &schedule))
}

fn sweep_with<L>(inst: &Instance<L>, cfg: &Config, schedule: &[u32]) -> Result<Written>
where
    L: Lyapunov,
    L::State: Coords,
{
    let start = Instant::now();
    let k = inst.return_set(cfg)?;
    let t_k = start.elapsed().as_secs_f64();
    let mut table = SweepTable::new(cfg);
    for &size in schedule {
        let out = inst.solve(cfg, Some(size), &k)?;
        log::info!("size {size}: |A| = {}", out.truncation.len());
        table.push(size, &out, t_k);
    }
    let dir = output_dir(cfg)?;
    let path = dir.join(&cfg.output.sweep);
    table.write(&path)?;
    println!("wrote {} ({} rows)", path.display(), table.len());
    table.check_monotone(MONOTONE_SLACK)?;
    Ok(Written { files: vec![path] })
}
