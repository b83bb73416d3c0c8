use std::path::Path;
use std::process::{Command, Output};

fn wkg(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wkg")).args(args).current_dir(cwd).env_remove("WKG_OUTPUT_ROOT").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

const SMALL: [&str; 4] = ["--n", "16", "--box-length", "25.132741228718345"];

fn with_small<'a>(args: &[&'a str]) -> Vec<&'a str> {
    let mut v = args.to_vec();
    v.extend(SMALL);
    v
}

#[test]
fn simulate_writes_snapshots_and_is_deterministic() {
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut args = with_small(&["simulate", "--preset", "gaussian-kg", "--eps", "0.01", "--t-end", "50", "--dt", "0.1"]);
    args.extend(["-o", "out"]);
    for d in [&d1, &d2] {
        let o = wkg(&args, d.path());
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (a, b) = (d1.path().join("out"), d2.path().join("out"));
    let snaps = std::fs::read_dir(a.join("snapshots")).unwrap().count();
    assert!(snaps >= 20, "{snaps} snapshot files");
    for f in ["diagnostics.csv", "manifest.json", "snapshots/kg_0010.wkgs"] {
        assert!(std::fs::read(a.join(f)).unwrap() == std::fs::read(b.join(f)).unwrap(), "{f} differs between identical runs");
    }
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["eps"], 0.01);
    assert_eq!(manifest["config"]["data"]["preset"], "gaussian-kg");
    assert!(manifest["threads"].as_u64().unwrap() >= 1);
}

#[test]
fn zero_amplitude_gives_zero_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let o = wkg(&with_small(&["simulate", "--eps", "0", "--t-end", "1", "-o", "z"]), dir.path());
    assert_eq!(code(&o), 0);
    let csv = std::fs::read_to_string(dir.path().join("z/diagnostics.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let v: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert_eq!(v, 0.0, "{line}");
    }
}

#[test]
fn blow_up_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = wkg(&with_small(&["simulate", "--eps", "50", "--preset", "gaussian-both", "--t-end", "5", "-o", "b"]), dir.path());
    assert_eq!(code(&o), 3);
    assert!(dir.path().join("b/snapshots/kg_last_good.wkgs").exists());
    assert!(dir.path().join("b/manifest.json").exists());
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), r#"{"eps": 0.01, "colour": 1}"#).unwrap();
    std::fs::write(dir.path().join("neg.json"), r#"{"eps": -0.5}"#).unwrap();
    for args in [
        vec!["simulate", "--config", "bad.json"],
        vec!["simulate", "--config", "neg.json"],
        vec!["simulate", "--config", "absent.json"],
        vec!["construct", "--n", "9"],
        vec!["simulate", "--preset", "square"],
        vec!["simulate", "--dt", "0.5"],
        vec!["nonsense"],
    ] {
        let o = wkg(&args, dir.path());
        assert_eq!(code(&o), 2, "{args:?}");
    }
}

#[test]
fn flags_override_the_json_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("c.json"),
        r#"{"grid": {"n": 16, "box_length": 25.132741228718345}, "eps": 0.5, "solver": {"t_end": 0.5}, "output_dir": "from-json"}"#,
    )
    .unwrap();
    let o = wkg(&["simulate", "--config", "c.json", "--eps", "0.001"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("from-json/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config"]["eps"], 0.001);
    assert_eq!(m["config"]["solver"]["t_end"], 0.5);
}

#[test]
fn output_root_variable_places_relative_directories() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("root");
    let o = Command::new(env!("CARGO_BIN_EXE_wkg"))
        .args(with_small(&["simulate", "--eps", "0", "--t-end", "0.2", "-o", "rel"]))
        .current_dir(dir.path())
        .env("WKG_OUTPUT_ROOT", &root)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(root.join("rel/manifest.json").exists());
    assert!(!dir.path().join("rel").exists());
}

#[test]
fn construct_artifacts_and_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let o = wkg(&with_small(&["construct", "--eps", "0.01", "--t-max", "12", "--cache-dt", "0.25", "-o", "c"]), dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let c = dir.path().join("c");
    for f in ["contraction.csv", "residuals.csv", "report.json", "norms.json", "manifest.json", "cache/cache_manifest.json", "cache/D_004.wkgs"] {
        assert!(c.join(f).exists(), "{f}");
    }
    let residuals = std::fs::read_to_string(c.join("residuals.csv")).unwrap();
    assert!(residuals.starts_with("t,r_wa,r_kg,r_kg_uncorrected\n"));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(c.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["converged"], true);
    assert!(report["ratios"].as_array().unwrap().iter().all(|r| r.as_f64().unwrap() < 1.0));

    let o = wkg(&["plotdata", "c", "--which", "residuals"], dir.path());
    assert_eq!(code(&o), 0);
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(out.starts_with("x,series,value\n"));
    assert_eq!(out.lines().skip(1).count(), 3 * (residuals.lines().count() - 1));
    for s in [",r_wa,", ",r_kg,", ",r_kg_uncorrected,"] {
        assert!(out.contains(s));
    }
    let o = wkg(&["plotdata", "c", "--which", "contraction"], dir.path());
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(out.contains("2,ratio,"));
    assert!(!out.contains("1,ratio,"));

    let o = wkg(&["plotdata", "c", "--which", "decay"], dir.path());
    assert_eq!(code(&o), 2, "no diagnostics in a construct directory");
}

#[test]
fn trivial_and_unreachable_constructions() {
    let dir = tempfile::tempdir().unwrap();
    let o = wkg(&with_small(&["construct", "--eps", "0", "--t-max", "4", "--cache-dt", "0.5", "-o", "z"]), dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = std::fs::read_to_string(dir.path().join("z/contraction.csv")).unwrap();
    assert_eq!(rows.lines().count(), 2);

    let o = wkg(
        &with_small(&["construct", "--eps", "0.01", "--t-max", "4", "--cache-dt", "0.5", "--tol", "1e-30", "--max-iter", "2", "-o", "u"]),
        dir.path(),
    );
    assert_eq!(code(&o), 4);
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("contraction.csv"), "{err}");
    assert_eq!(std::fs::read_to_string(dir.path().join("u/contraction.csv")).unwrap().lines().count(), 3);
}

#[test]
fn decay_and_shell_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let o = wkg(&with_small(&["simulate", "--eps", "0.01", "--t-end", "10", "--dt", "0.1", "-o", "s"]), dir.path());
    assert_eq!(code(&o), 0);
    let out = String::from_utf8(wkg(&["plotdata", "s", "--which", "decay"], dir.path()).stdout).unwrap();
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "x,series,value");
    assert!(lines[lines.len() - 2].starts_with("fit,exponent_sup_v,"));
    assert!(lines[lines.len() - 1].starts_with("fit,exponent_sup_u,"));
    let p: f64 = lines[lines.len() - 2].rsplit(',').next().unwrap().parse().unwrap();
    assert!(p.is_finite());
    let out = String::from_utf8(wkg(&["plotdata", "s", "--which", "shells"], dir.path()).stdout).unwrap();
    assert!(out.lines().skip(1).all(|l| l.split(',').nth(1).unwrap().starts_with('P')));
    assert_eq!(code(&wkg(&["plotdata", "missing", "--which", "shells"], dir.path())), 2);
}

#[test]
fn verify_passes_and_fault_injection_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = wkg(&["verify", "--phase-samples", "20000", "-o", "v"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let rep: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("v/verify.json")).unwrap()).unwrap();
    assert_eq!(rep["all_pass"], true);
    let names: Vec<&str> = rep["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert!(!names.contains(&"oracle_equivalence"), "the default 32³ grid skips the oracle");

    let o = wkg(&["verify", "--phase-samples", "20000", "--broken-bump", "-o", "w"], dir.path());
    assert_eq!(code(&o), 5);
    assert!(String::from_utf8(o.stdout).unwrap().lines().any(|l| l.starts_with("lp_shell_partition") && l.contains("FAIL")));

    let o = wkg(&["verify", "--phase-samples", "20000", "--n", "8", "--box-length", "12", "-o", "x"], dir.path());
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8(o.stdout).unwrap().contains("oracle_equivalence"));
}

#[test]
fn oracle_respects_the_cost_guard() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&wkg(&["oracle", "--n", "16", "-o", "o"], dir.path())), 2);
    let o = wkg(&["oracle", "--n", "8", "--box-length", "12", "-o", "o"], dir.path());
    assert_eq!(code(&o), 0);
    let c: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("o/oracle.json")).unwrap()).unwrap();
    assert!(c["value"].as_f64().unwrap() <= 1e-12);
}
