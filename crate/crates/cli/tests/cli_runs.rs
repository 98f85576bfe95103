//! End-to-end runs of the binary: exit codes, JSON output, artifact files.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_btl"))
}

fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

#[test]
fn classify_constant_scenario() {
    let output = bin()
        .args(["classify", "--scenario"])
        .arg(scenario_path("z-constant.toml"))
        .arg("--json")
        .output()
        .expect("binary runs");
    assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    let report: serde_json::Value = serde_json::from_slice(&output.stdout).expect("json report");
    assert_eq!(report["classification"]["tag"], "TypeII1");
    assert!(report["mc"].is_null(), "classify must not run the sampling stage");
}

#[test]
fn classify_candidate_scenario_emits_subtype() {
    let output = bin()
        .args(["classify", "--scenario"])
        .arg(scenario_path("afp-candidate.toml"))
        .arg("--json")
        .output()
        .expect("binary runs");
    assert!(output.status.success());
    let report: serde_json::Value = serde_json::from_slice(&output.stdout).expect("json report");
    let lambda = report["classification"]["tag"]["TypeIIILambda"].as_f64().expect("subtype");
    assert!((lambda - 0.81).abs() < 1e-9);
    assert_eq!(report["conservativeness"]["tag"], "StronglyConservative");
    // every non-Unknown verdict carries a named criterion trail
    assert!(!report["classification"]["evidence"].as_array().unwrap().is_empty());
    assert!(!report["conservativeness"]["evidence"].as_array().unwrap().is_empty());
    assert!(report["classification"]["evidence"][0]["criterion"].is_string());
}

#[test]
fn simulate_prints_fit_and_writes_samples() {
    let dir = std::env::temp_dir().join(format!("btl-test-simulate-{}", std::process::id()));
    let output = bin()
        .args(["simulate", "--scenario"])
        .arg(scenario_path("afp-candidate.toml"))
        .args(["--mc-samples", "1000", "--out"])
        .arg(&dir)
        .output()
        .expect("binary runs");
    assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("certified"), "stdout: {stdout}");
    let samples = std::fs::read_to_string(dir.join("rn_samples.csv")).unwrap();
    assert_eq!(samples.lines().count(), 1001); // header + one row per draw
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn invalid_scenario_exits_with_validation_code() {
    let dir = std::env::temp_dir().join("btl-test-invalid");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad.toml");
    std::fs::write(
        &path,
        "[group]\nfamily = \"lattice\"\ndim = 1\n\n[profile]\nbuiltin = \"constant\"\nlambda = 1.7\n",
    )
    .unwrap();
    let output = bin().args(["classify", "--scenario"]).arg(&path).output().expect("binary runs");
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("profile"), "stderr should name the field: {stderr}");
}

#[test]
fn budget_multiplier_forces_overrun_exit() {
    let output = bin()
        .args(["classify", "--scenario"])
        .arg(scenario_path("afp-candidate.toml"))
        .env("BTL_BUDGET_MULTIPLIER", "0.0001")
        .output()
        .expect("binary runs");
    assert_eq!(output.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&output.stderr));
}

#[test]
fn report_writes_artifacts() {
    let dir = std::env::temp_dir().join(format!("btl-test-report-{}", std::process::id()));
    let output = bin()
        .args(["report", "--scenario"])
        .arg(scenario_path("afp-candidate.toml"))
        .args(["--mc-samples", "2000", "--out"])
        .arg(&dir)
        .output()
        .expect("binary runs");
    assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    for file in ["report.json", "cocycle_rows.csv", "rn_samples.csv"] {
        let path = dir.join(file);
        assert!(path.exists(), "missing artifact {file}");
        assert!(std::fs::metadata(&path).unwrap().len() > 0);
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["mc"]["report"]["certified_samples"], 2000);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn reports_are_bit_identical_for_fixed_seed() {
    let run = || {
        let output = bin()
            .args(["report", "--scenario"])
            .arg(scenario_path("z-half-line.toml"))
            .args(["--seed", "99", "--json"])
            .output()
            .expect("binary runs");
        assert!(output.status.success());
        let mut value: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
        value.as_object_mut().unwrap().remove("timing_ms");
        serde_json::to_string(&value).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn strict_flag_turns_unknown_into_exit_four() {
    let dir = std::env::temp_dir().join("btl-test-strict");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("unknown.toml");
    // oscillating profile without the conservativeness assumption: honest Unknown
    std::fs::write(
        &path,
        "[group]\nfamily = \"lattice\"\ndim = 1\n\n[profile]\nbuiltin = \"oscillating\"\namplitude = 0.25\n\n[run]\nseed = 1\nradius = 16\n",
    )
    .unwrap();
    let output = bin()
        .args(["classify", "--scenario"])
        .arg(&path)
        .arg("--strict")
        .output()
        .expect("binary runs");
    assert_eq!(output.status.code(), Some(4));
}

#[test]
fn verify_counts_table_matches() {
    let output = bin()
        .args(["verify-counts", "--scenario"])
        .arg(scenario_path("afp-candidate.toml"))
        .output()
        .expect("binary runs");
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("18  18  yes"), "table: {stdout}");
}

#[test]
fn construct_ai_set_reports_flows() {
    let dir = std::env::temp_dir().join(format!("btl-test-aiset-{}", std::process::id()));
    let output = bin()
        .args(["construct-ai-set", "--scenario"])
        .arg(scenario_path("afp-candidate.toml"))
        .arg("--out")
        .arg(&dir)
        .output()
        .expect("binary runs");
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("boundary flow"));
    assert!(stdout.contains("= 0"));
    let membership = std::fs::read_to_string(dir.join("membership.csv")).unwrap();
    assert!(membership.lines().count() > 10);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn chain_and_oscillating_scenarios_classify() {
    let output = bin()
        .args(["classify", "--scenario"])
        .arg(scenario_path("chain-ii-infinity.toml"))
        .arg("--json")
        .output()
        .expect("binary runs");
    assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    let report: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(report["classification"]["tag"], "TypeIIInfinity");

    let output = bin()
        .args(["classify", "--scenario"])
        .arg(scenario_path("z-oscillating.toml"))
        .arg("--json")
        .output()
        .expect("binary runs");
    assert!(output.status.success());
    let report: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(report["classification"]["tag"], "TypeIII1");
}

#[test]
fn hnn_scenario_from_tables() {
    let dir = std::env::temp_dir().join("btl-test-hnn");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("hnn.toml");
    std::fs::write(
        &path,
        r#"
[group]
family = "hnn"
a = { kind = "cyclic", order = 4 }
c = { kind = "cyclic", order = 2, letter = "c" }
c_in_a = [0, 2]
alpha = [0, 2]

[profile]
builtin = "type3-candidate"
lambda = 0.95

[run]
seed = 5
radius = 3
mc_samples = 2000
"#,
    )
    .unwrap();
    let output = bin()
        .args(["report", "--scenario"])
        .arg(&path)
        .arg("--json")
        .output()
        .expect("binary runs");
    assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    let report: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    // candidate two-value profile on the canonical HNN set: subtype exp(-2|log 0.95|)
    let lambda = report["classification"]["tag"]["TypeIIILambda"].as_f64().expect("subtype");
    assert!((lambda - 0.95f64 * 0.95).abs() < 1e-9);
}

#[test]
fn amalgam_scenario_with_shared_subgroup_and_tables() {
    let dir = std::env::temp_dir().join("btl-test-amalgam");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("amalgam.toml");
    std::fs::write(
        &path,
        r#"
[group]
family = "afp"
a = { kind = "cyclic", order = 4 }
b = { kind = "table", names = ["e", "b", "b^2", "b^3", "b^4", "b^5"], mul = [
    [0, 1, 2, 3, 4, 5],
    [1, 2, 3, 4, 5, 0],
    [2, 3, 4, 5, 0, 1],
    [3, 4, 5, 0, 1, 2],
    [4, 5, 0, 1, 2, 3],
    [5, 0, 1, 2, 3, 4],
] }
c = { kind = "cyclic", order = 2, letter = "c" }
c_in_a = [0, 2]
c_in_b = [0, 3]

[profile]
builtin = "type3-candidate"
lambda = 0.9

[run]
seed = 11
radius = 3
mc_samples = 4000
"#,
    )
    .unwrap();
    let output = bin().args(["report", "--scenario"]).arg(&path).arg("--json").output().expect("binary runs");
    assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    let report: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    let lambda = report["classification"]["tag"]["TypeIIILambda"].as_f64().expect("subtype");
    assert!((lambda - 0.81).abs() < 1e-9);
    assert_eq!(report["mc"]["lattice_agreement"], true);
}

#[test]
fn chain_candidate_with_declared_growth_classifies_to_subtype() {
    let output = bin()
        .args(["classify", "--scenario"])
        .arg(scenario_path("chain-iii-lambda.toml"))
        .arg("--json")
        .output()
        .expect("binary runs");
    assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    let report: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(report["conservativeness"]["tag"], "StronglyConservative");
    let evidence = report["conservativeness"]["evidence"][0]["outcome"].as_str().unwrap();
    assert!(evidence.contains("declared divergent minorant"), "evidence: {evidence}");
    let lambda = report["classification"]["tag"]["TypeIIILambda"].as_f64().expect("subtype");
    assert!((lambda - 0.99f64 * 0.99).abs() < 1e-9);
}
