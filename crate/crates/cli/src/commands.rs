use std::io::Write;
use std::path::{Path, PathBuf};

use hardylab_core::instance::{
    check_crucial_with, scenario, AdmissibilityReport, Verdict, PRESET_NAMES, SCENARIO_NAMES,
};
use hardylab_core::report::{emit_csv, emit_json, to_canonical_json, QuadStats, RunRecord};
use hardylab_core::sharpness::{scan, ScanResult};
use hardylab_core::verify::{batch_verify, sampling_window, BatchSummary, Inequality, Witness};
use hardylab_core::{InstanceError, SpaceError, VerifyError};
use serde::Serialize;

use crate::config::{Config, ConfigError};

/// Process exit status; the numeric values are a stable contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    Math = 1,
    Usage = 2,
    Indeterminate = 3,
}

impl Exit {
    pub fn code(self) -> i32 {
        self as i32
    }

    /// The more severe of two outcomes: math failure, then usage, then
    /// indeterminate, then success.
    pub fn worst(self, other: Exit) -> Exit {
        let rank = |e: Exit| match e {
            Exit::Ok => 0,
            Exit::Indeterminate => 1,
            Exit::Usage => 2,
            Exit::Math => 3,
        };
        if rank(other) > rank(self) {
            other
        } else {
            self
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write {path}: {msg}")]
    Output { path: PathBuf, msg: String },
}

impl CommandError {
    pub fn exit(&self) -> Exit {
        match self {
            // An exponent outside the admissible class is a mathematical
            // failure of the instance, not a malformed config.
            CommandError::Config(ConfigError::Instance(InstanceError::Space(
                SpaceError::ExponentOutOfRange { .. } | SpaceError::IntegrabilityProbeFailed { .. },
            ))) => Exit::Math,
            _ => Exit::Usage,
        }
    }
}

/// Write `bytes` to `dir/name` through a temporary file and rename.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, CommandError> {
    let path = dir.join(name);
    let fail = |e: &dyn std::fmt::Display| CommandError::Output {
        path: path.clone(),
        msg: e.to_string(),
    };
    std::fs::create_dir_all(dir).map_err(|e| fail(&e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| fail(&e))?;
    tmp.write_all(bytes).map_err(|e| fail(&e))?;
    tmp.as_file().sync_all().map_err(|e| fail(&e))?;
    tmp.persist(&path).map_err(|e| fail(&e))?;
    Ok(path)
}

fn write_record(
    cfg: &Config,
    dir: &Path,
    name: &str,
    operation: &str,
    instance: &hardylab_core::instance::HardyInstance,
    result: &impl Serialize,
    evaluations: usize,
) -> Result<(), CommandError> {
    let fail = |e: &dyn std::fmt::Display| CommandError::Output {
        path: dir.join(name),
        msg: e.to_string(),
    };
    let hash = cfg.hash().map_err(|e| fail(&e))?;
    let q = cfg.quad_options();
    let stats = QuadStats {
        evaluations,
        rel_tol: q.rel_tol,
        abs_tol: q.abs_tol,
    };
    let record = RunRecord::new(
        operation,
        hash,
        Some(instance.descriptor.clone()),
        result,
        stats,
    )
    .map_err(|e| fail(&e))?;
    let bytes = emit_json(&record).map_err(|e| fail(&e))?;
    let path = write_atomic(dir, name, &bytes)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn describe(v: &Verdict) -> String {
    match v {
        Verdict::Holds { margin } => format!("holds (min {margin:.6e})"),
        Verdict::Violated { x, value } => format!("VIOLATED at x = {x:.9e}, value {value:.6e}"),
        Verdict::Indeterminate { reason } => format!("indeterminate: {reason}"),
    }
}

#[derive(Serialize)]
struct CheckOutcome<'a> {
    admissibility: &'a AdmissibilityReport,
    admissible: bool,
}

pub fn cmd_check(cfg: &Config, out: &Path) -> Result<Exit, CommandError> {
    let preset = cfg.build_instance()?;
    let inst = &preset.instance;
    let report = check_crucial_with(inst, preset.condition.as_ref(), cfg.check.grid);
    println!("instance {} on {}", preset.name, inst.domain);
    println!(
        "  p in [{:.6}, {:.6}]{}",
        report.p_minus,
        report.p_plus,
        if report.degenerate_infimum {
            " (infimum 1 approached)"
        } else {
            ""
        }
    );
    for c in report.conditions() {
        println!("  {:<20} {}", c.name, describe(&c.verdict));
    }
    let outcome = CheckOutcome {
        admissibility: &report,
        admissible: report.admissible(),
    };
    write_record(cfg, out, "check.json", "check", inst, &outcome, 0)?;

    let (a, b) = sampling_window(&inst.domain);
    let (mu1, mu2) = inst.measures();
    let weight = inst.caccioppoli_weight();
    let rows: Vec<Vec<f64>> = (0..100)
        .map(|i| {
            let x = a + (b - a) * (i as f64 + 0.5) / 100.0;
            vec![
                x,
                mu1.density_at(x),
                mu2.density_at(x),
                weight.density_at(x),
                inst.u.eval(x).unwrap_or(f64::NAN),
            ]
        })
        .collect();
    let path = write_atomic(
        out,
        "weights.csv",
        &emit_csv(&["x", "mu1", "mu2", "caccioppoli_weight", "u"], &rows),
    )?;
    println!("wrote {}", path.display());

    Ok(if report.any_violated() {
        Exit::Math
    } else if report.admissible() {
        Exit::Ok
    } else {
        Exit::Indeterminate
    })
}

#[derive(Serialize)]
struct VerifyOutcome {
    caccioppoli: BatchSummary,
    hardy: BatchSummary,
}

fn print_summary(s: &BatchSummary) {
    println!(
        "  {:<12} {} cases: {} pass, {} fail, {} indeterminate, {} errors ({} retried), worst margin {}",
        s.inequality.as_str(),
        s.count,
        s.pass,
        s.fail,
        s.indeterminate,
        s.errors,
        s.retried,
        s.worst_margin.map_or("n/a".into(), |m| format!("{m:.6e}")),
    );
}

pub fn cmd_verify(cfg: &Config, out: &Path) -> Result<Exit, CommandError> {
    let preset = cfg.build_instance()?;
    let inst = &preset.instance;
    let opts = cfg.quad_options();
    let v = &cfg.verification;
    println!(
        "verifying {} on {} ({} test functions per inequality, seed {})",
        preset.name, inst.domain, v.count, v.seed
    );
    let run = |which: Inequality, family| batch_verify(inst, which, family, v.count, v.seed, &opts);
    let (caccioppoli, hardy) = match (
        run(Inequality::Caccioppoli, v.family.caccioppoli()),
        run(Inequality::Hardy, v.family.hardy()),
    ) {
        (Ok(c), Ok(h)) => (c, h),
        (Err(VerifyError::Inadmissible(names)), _) | (_, Err(VerifyError::Inadmissible(names))) => {
            eprintln!("refused: instance is not admissible ({names} violated)");
            return Ok(Exit::Math);
        }
        (Err(e), _) | (_, Err(e)) => {
            eprintln!("verification failed: {e}");
            return Ok(Exit::Math);
        }
    };
    print_summary(&caccioppoli);
    print_summary(&hardy);
    let evaluations = caccioppoli.evaluations + hardy.evaluations;
    let witnesses: Vec<&Witness> = caccioppoli
        .witnesses
        .iter()
        .chain(&hardy.witnesses)
        .collect();
    if !witnesses.is_empty() {
        let fail = |e: &dyn std::fmt::Display| CommandError::Output {
            path: out.join("witnesses.json"),
            msg: e.to_string(),
        };
        let json = to_canonical_json(&witnesses).map_err(|e| fail(&e))?;
        let mut bytes = serde_json::to_vec_pretty(&json).map_err(|e| fail(&e))?;
        bytes.push(b'\n');
        let path = write_atomic(out, "witnesses.json", &bytes)?;
        println!("wrote {}", path.display());
    }
    let mut exit = Exit::Ok;
    for s in [&caccioppoli, &hardy] {
        if s.fail > 0 {
            exit = exit.worst(Exit::Math);
        } else if (s.indeterminate + s.errors) * 10 > s.count {
            exit = exit.worst(Exit::Indeterminate);
        }
    }
    let outcome = VerifyOutcome { caccioppoli, hardy };
    write_record(
        cfg,
        out,
        "verify.json",
        "verify",
        inst,
        &outcome,
        evaluations,
    )?;
    Ok(exit)
}

pub fn cmd_scan(cfg: &Config, out: &Path) -> Result<Exit, CommandError> {
    let preset = cfg.build_instance()?;
    let inst = &preset.instance;
    let report = check_crucial_with(inst, preset.condition.as_ref(), cfg.check.grid);
    if report.any_violated() {
        for c in report.conditions().iter().filter(|c| c.verdict.violated()) {
            eprintln!("refused: {} {}", c.name, describe(&c.verdict));
        }
        return Ok(Exit::Math);
    }
    let spec = cfg.scan_spec();
    let result: ScanResult =
        scan(inst, &spec, cfg.scan.budget, &cfg.quad_options()).map_err(ConfigError::Invalid)?;
    println!(
        "scan {:?} over {} evaluations: best ratio {:.10} (relative error {:.1e}){}",
        result.family,
        result.evaluations,
        result.best_ratio,
        result.best_relative_error,
        if result.converged {
            ""
        } else {
            ", not converged"
        },
    );
    for (k, v) in &result.best_params {
        println!("  {k} = {v:.9e}");
    }
    let mut header: Vec<&str> = vec!["restart", "evaluation"];
    header.extend(result.param_names.iter().map(String::as_str));
    header.extend(["ratio", "best_so_far"]);
    let rows: Vec<Vec<f64>> = result
        .trace
        .iter()
        .map(|r| {
            let mut row = vec![r.restart as f64, r.evaluation as f64];
            row.extend(&r.params);
            row.extend([r.ratio, r.best_so_far]);
            row
        })
        .collect();
    let path = write_atomic(out, "scan-trace.csv", &emit_csv(&header, &rows))?;
    println!("wrote {}", path.display());
    let vacuous = !result.best_ratio.is_finite();
    write_record(cfg, out, "scan.json", "scan", inst, &result, 0)?;
    if vacuous {
        eprintln!("vacuous instance: no evaluated test function has a positive left-hand side");
        return Ok(Exit::Math);
    }
    Ok(Exit::Ok)
}

/// Scenarios for which the sharpness scan is part of reproduction.
const SCANNED: [&str; 1] = ["constp-hardy"];

pub fn cmd_reproduce(cfg: Config, name: &str, out: &Path) -> Result<Exit, CommandError> {
    let cfg = cfg.with_scenario(name)?;
    let dir = out.join(name);
    println!("== {name}: check");
    let mut exit = cmd_check(&cfg, &dir)?;
    if exit == Exit::Math {
        println!("== {name}: FAILED at check");
        return Ok(exit);
    }
    println!("== {name}: verify");
    exit = exit.worst(cmd_verify(&cfg, &dir)?);
    if SCANNED.contains(&name) {
        println!("== {name}: scan");
        exit = exit.worst(cmd_scan(&cfg, &dir)?);
    }
    println!(
        "== {name}: {}",
        if exit == Exit::Ok { "ok" } else { "FAILED" }
    );
    Ok(exit)
}

pub fn cmd_list_presets() -> Exit {
    println!("presets: {}", PRESET_NAMES.join(", "));
    println!("scenarios:");
    for name in SCENARIO_NAMES {
        let (base, p) = scenario(name).expect("listed scenario");
        let show = |v: Option<f64>| v.map_or("-".into(), |v| v.to_string());
        let consts: Vec<String> = p
            .constants
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        println!(
            "  {name:<16} preset {base:<6} p = {}, sigma = {}, beta = {}, I = ({}, {}){}{}",
            p.p.as_deref().unwrap_or("-"),
            p.sigma.as_deref().unwrap_or("derived"),
            show(p.beta),
            show(p.lo),
            show(p.hi),
            if consts.is_empty() { "" } else { ", " },
            consts.join(", "),
        );
    }
    Exit::Ok
}
