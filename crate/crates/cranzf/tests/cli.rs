//! End-to-end checks of the command-line interface.

use std::process::Command;

fn cranzf() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cranzf"))
}

#[test]
fn bound_subcommand_prints_the_report() {
    let out = cranzf()
        .args([
            "bound",
            "--theorem",
            "1",
            "-m",
            "4",
            "-q",
            "8",
            "--nt",
            "8",
            "-b",
            "160",
            "--pmax-db",
            "35",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("delta_r1"), "{text}");
    assert!(text.contains("delta_r2"));
    assert!(text.contains("phi (perfect) = 11.242166"));
    assert!(text.contains("lower bound"));
}

#[test]
fn bound_paq_and_leading_terms() {
    for args in [
        vec![
            "bound",
            "--theorem",
            "2",
            "--qbar",
            "4",
            "-b",
            "160",
            "--pmax-db",
            "35",
        ],
        vec!["bound", "--corollary", "1", "-b", "160", "--pmax-db", "35"],
        vec![
            "bound",
            "--corollary",
            "3",
            "--qbar",
            "4",
            "-b",
            "160",
            "--pmax-db",
            "35",
            "--subscript",
            "serving",
        ],
    ] {
        let out = cranzf().args(&args).output().unwrap();
        assert!(out.status.success(), "failed: {args:?}");
    }
    // theorem 2 with a non-divisible Q̄ is a clean error
    let out = cranzf()
        .args([
            "bound",
            "--theorem",
            "2",
            "--qbar",
            "3",
            "-b",
            "160",
            "--pmax-db",
            "35",
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn simulate_runs_and_is_seed_deterministic() {
    let run = || {
        let out = cranzf()
            .args([
                "simulate",
                "--scheme",
                "paq",
                "--qbar",
                "4",
                "-m",
                "4",
                "-q",
                "8",
                "--nt",
                "8",
                "-b",
                "120",
                "--pmax-db",
                "35",
                "--trials",
                "40",
                "--seed",
                "5",
            ])
            .output()
            .unwrap();
        assert!(out.status.success());
        String::from_utf8(out.stdout).unwrap()
    };
    let a = run();
    assert!(a.contains("throughput:"), "{a}");
    assert_eq!(a, run());
}

#[test]
fn sweep_emits_outputs_and_rerun_reproduces_them() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("spec.toml");
    std::fs::write(
        &spec_path,
        r#"
schema_version = 1
name = "cli-test"
seed = 3
rvq_mode = "surrogate"

[setup]
kind = "symmetric"
m_srrh = 2
q_ms = 4
n_t = 4

[sweep]
variable = "bits"
grid = [24.0, 64.0]
fixed_pmax = 25.0

[trials]
channels = 20

[candidates]
n_t = [2, 4]
q_bar = [0, 2]
"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let run = || {
        let out = cranzf()
            .args([
                "sweep",
                spec_path.to_str().unwrap(),
                "--out",
                out_dir.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        std::fs::read_to_string(out_dir.join("results.csv")).unwrap()
    };
    let first = run();
    assert!(first.lines().count() >= 5); // header + 2 points × 2 schemes
    let again = run();
    assert_eq!(first, again);
    assert!(out_dir.join("rates.svg").exists());
    assert!(out_dir.join("candidates.csv").exists());
    // rerunning from the resolved spec reproduces the table bit for bit
    let resolved = out_dir.join("spec.resolved.toml");
    let out2 = dir.path().join("out2");
    let rerun = cranzf()
        .args([
            "sweep",
            resolved.to_str().unwrap(),
            "--out",
            out2.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(rerun.status.success());
    assert_eq!(
        first,
        std::fs::read_to_string(out2.join("results.csv")).unwrap()
    );
}

#[test]
fn malformed_spec_reports_position_and_fails() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("bad.toml");
    std::fs::write(&spec_path, "schema_version = \"one\"\n").unwrap();
    let out = cranzf()
        .args(["sweep", spec_path.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(
        err.contains("line") || err.contains("schema_version"),
        "diagnostic should point at the field: {err}"
    );
}

#[test]
fn unknown_flag_fails_with_usage() {
    let out = cranzf()
        .args(["simulate", "--no-such-flag"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.to_lowercase().contains("usage"), "{err}");
}

#[test]
fn validate_quick_passes() {
    let out = cranzf().args(["validate", "--quick"]).output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(out.status.success(), "{text}");
    assert!(text.matches("PASS").count() >= 8, "{text}");
    assert!(!text.contains("FAIL"));
}

#[test]
fn spec_template_round_trips_through_the_parser() {
    for kind in ["symmetric", "random-placement"] {
        let out = cranzf().args(["spec-template", kind]).output().unwrap();
        assert!(out.status.success());
        let text = String::from_utf8(out.stdout).unwrap();
        cranzf::harness::spec::ExperimentSpec::from_toml(&text).unwrap();
    }
}
