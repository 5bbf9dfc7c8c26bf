use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn hardylab(args: &[&str], config: Option<&str>) -> (Output, TempDir) {
    let dir = TempDir::new().unwrap();
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_hardylab"));
    for (k, _) in std::env::vars().filter(|(k, _)| k.starts_with("HARDYLAB_")) {
        cmd.env_remove(k);
    }
    if let Some(text) = config {
        let path = dir.path().join("run.toml");
        std::fs::write(&path, text).unwrap();
        cmd.arg("--config").arg(path);
    }
    let out = cmd
        .args(args)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    (out, dir)
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn text(o: &Output) -> String {
    format!(
        "{}{}",
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    )
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn reproduce(name: &str) -> (Output, TempDir) {
    let (o, dir) = hardylab(&["reproduce", name], None);
    println!("{}", text(&o));
    (o, dir)
}

#[test]
fn reproduce_cor51() {
    let (o, dir) = reproduce("cor51");
    assert_eq!(code(&o), 0);
    let v = read_json(&dir.path().join("out/cor51/verify.json"));
    assert_eq!(v["result"]["caccioppoli"]["pass"], 50);
    assert_eq!(v["result"]["hardy"]["fail"], 0);
    let first = v["result"]["hardy"]["worst_margin"]["hex"]
        .as_str()
        .unwrap();
    assert!(first.starts_with("0x"), "{first}");
}

#[test]
fn reproduce_cor53() {
    assert_eq!(code(&reproduce("cor53").0), 0);
}

#[test]
fn reproduce_cor54() {
    assert_eq!(code(&reproduce("cor54").0), 0);
}

/// With σ ≡ 0 the sufficient condition reduces to −d/(|x|+1)² < 0, so this
/// scenario is refuted at the check stage.
#[test]
fn reproduce_cor55_triple1_is_refuted() {
    let (o, _dir) = reproduce("cor55-triple1");
    assert_eq!(code(&o), 1);
    assert!(text(&o).contains("VIOLATED at x ="));
}

#[test]
fn reproduce_cor55_triple2() {
    assert_eq!(code(&reproduce("cor55-triple2").0), 0);
}

#[test]
fn reproduce_cor55_triple3() {
    assert_eq!(code(&reproduce("cor55-triple3").0), 0);
}

#[test]
fn reproduce_cor64_linear() {
    assert_eq!(code(&reproduce("cor64-linear").0), 0);
}

#[test]
fn reproduce_cor64_inverse() {
    assert_eq!(code(&reproduce("cor64-inverse").0), 0);
}

#[test]
fn reproduce_cor64_rational() {
    assert_eq!(code(&reproduce("cor64-rational").0), 0);
}

#[test]
fn reproduce_constp_hardy() {
    let (o, dir) = reproduce("constp-hardy");
    assert_eq!(code(&o), 0);
    let s = read_json(&dir.path().join("out/constp-hardy/scan.json"));
    let best = s["result"]["best_ratio"]["dec"].as_f64().unwrap();
    assert!((1.0..=1.10).contains(&best), "{best}");
    let csv = std::fs::read_to_string(dir.path().join("out/constp-hardy/scan-trace.csv")).unwrap();
    assert_eq!(
        csv.lines().count(),
        1 + s["result"]["evaluations"].as_u64().unwrap() as usize
    );
}

#[test]
fn reproduce_unknown_scenario_is_usage_error() {
    assert_eq!(code(&reproduce("cor99").0), 2);
}

#[test]
fn check_cor55_with_zero_sigma_reports_witness() {
    let cfg = "[instance]\npreset = \"cor55\"\np = \"1 + d/(abs(x) + 1)\"\nsigma = 0\nbeta = 1\nlo = -5\nhi = 5\n[instance.constants]\nd = 1\n";
    let (o, _d) = hardylab(&["check"], Some(cfg));
    assert_eq!(code(&o), 1, "{}", text(&o));
}

#[test]
fn check_lowered_sigma_fails_with_witness() {
    for (scenario, bound) in [
        ("cor55-triple2", "(x + 1)*exp(x) - 1"),
        ("cor55-triple3", "exp(-x^2)*(2*x^2 - 1) + 1"),
    ] {
        let cfg = format!("[instance]\npreset = \"{scenario}\"\nsigma = \"{bound} - 0.05\"\n");
        let (o, _d) = hardylab(&["check"], Some(&cfg));
        assert_eq!(code(&o), 1, "{scenario}: {}", text(&o));
        assert!(text(&o).contains("VIOLATED at x ="), "{}", text(&o));
    }
}

#[test]
fn check_writes_record_and_weights() {
    let (o, dir) = hardylab(&["check"], Some("[instance]\npreset = \"cor53\"\n"));
    assert_eq!(code(&o), 0, "{}", text(&o));
    let rec = read_json(&dir.path().join("out/check.json"));
    assert_eq!(rec["operation"], "check");
    assert_eq!(rec["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(rec["result"]["admissible"], true);
    let csv = std::fs::read_to_string(dir.path().join("out/weights.csv")).unwrap();
    assert_eq!(csv.lines().count(), 101);
}

#[test]
fn identical_configs_hash_identically() {
    let cfg = "[instance]\npreset = \"cor51\"\n";
    let (_, a) = hardylab(&["check"], Some(cfg));
    let (_, b) = hardylab(&["check"], Some(cfg));
    let (_, c) = hardylab(&["check", "--seed", "9"], Some(cfg));
    let hash = |d: &TempDir| read_json(&d.path().join("out/check.json"))["config_hash"].clone();
    assert_eq!(hash(&a), hash(&b));
    assert_ne!(hash(&a), hash(&c));
}

#[test]
fn malformed_expression_is_usage_error() {
    let (o, _d) = hardylab(
        &["check"],
        Some("[instance]\npreset = \"cor51\"\np = \"2 + * x\"\n"),
    );
    assert_eq!(code(&o), 2, "{}", text(&o));
}

#[test]
fn malformed_config_and_flags_are_usage_errors() {
    assert_eq!(code(&hardylab(&["check"], Some("[instance\n")).0), 2);
    assert_eq!(code(&hardylab(&["check"], None).0), 2);
    assert_eq!(code(&hardylab(&["frobnicate"], None).0), 2);
    assert_eq!(
        code(
            &hardylab(
                &["check", "--tol", "-1"],
                Some("[instance]\npreset = \"cor51\"\n")
            )
            .0
        ),
        2
    );
}

#[test]
fn exponent_outside_class_is_math_failure() {
    let (o, _d) = hardylab(
        &["check"],
        Some("[instance]\npreset = \"cor51\"\np = \"1 + x\"\n"),
    );
    assert_eq!(code(&o), 1, "{}", text(&o));
}

#[test]
fn beta_equal_to_sup_sigma_is_refused() {
    let (o, _d) = hardylab(
        &["verify"],
        Some("[instance]\npreset = \"cor51\"\nbeta = 1\n"),
    );
    assert_eq!(code(&o), 1, "{}", text(&o));
    assert!(text(&o).contains("not admissible"));
}

#[test]
fn verify_with_zero_count_is_empty_success() {
    let (o, dir) = hardylab(
        &["verify"],
        Some("[instance]\npreset = \"cor51\"\n[verification]\ncount = 0\n"),
    );
    assert_eq!(code(&o), 0, "{}", text(&o));
    let rec = read_json(&dir.path().join("out/verify.json"));
    assert_eq!(rec["result"]["hardy"]["count"], 0);
    assert_eq!(rec["result"]["caccioppoli"]["pass"], 0);
}

#[test]
fn scan_budget_one_gives_single_row_trace() {
    let cfg = "[instance]\npreset = \"constp-hardy\"\n[scan]\nbudget = 1\n";
    let (o, dir) = hardylab(&["scan"], Some(cfg));
    assert_eq!(code(&o), 0, "{}", text(&o));
    let csv = std::fs::read_to_string(dir.path().join("out/scan-trace.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.starts_with("restart,evaluation,eps,log10_delta0,log10_l,ratio,best_so_far\n"));
}

#[test]
fn scan_on_degenerate_weight_is_math_failure() {
    // σ = −1 with u = x^(1/2) and p = 2 makes the Hardy weight vanish.
    let cfg = "[instance]\npreset = \"constp\"\nsigma = -1\n[scan]\nbudget = 4\n";
    let (o, _d) = hardylab(&["scan"], Some(cfg));
    assert_eq!(code(&o), 1, "{}", text(&o));
    assert!(text(&o).contains("vacuous"));
}

#[test]
fn environment_overrides_reach_the_run() {
    let dir = TempDir::new().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_hardylab"))
        .env("HARDYLAB_INSTANCE_PRESET", "cor51")
        .env("HARDYLAB_VERIFICATION_COUNT", "2")
        .env("HARDYLAB_OUTPUT_DIR", dir.path())
        .arg("verify")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", text(&o));
    let rec = read_json(&dir.path().join("verify.json"));
    assert_eq!(rec["result"]["hardy"]["count"], 2);
}

#[test]
fn list_presets_names_every_scenario() {
    let (o, _d) = hardylab(&["list-presets"], None);
    assert_eq!(code(&o), 0);
    for name in hardylab_core::instance::SCENARIO_NAMES {
        assert!(text(&o).contains(name), "{name}");
    }
}
