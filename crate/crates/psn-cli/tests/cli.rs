//! End-to-end checks of the binary: subcommands, formats, exit codes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn psn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn repo_path(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

#[test]
fn check_ring4_finds_all_three_notions() {
    let out = psn(&["check", "--builtin", "ring4", "--notion", "all", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    for notion in ["global", "local", "weak"] {
        assert_eq!(json["verdicts"][notion]["status"], "found", "{notion}");
    }
    assert_eq!(json["stats"]["complete"], true);
    assert_eq!(json["inclusions"]["holds"], true);
}

#[test]
fn check_grid17_row_11_12_13_15() {
    let out = psn(&[
        "check",
        "--builtin",
        "grid17",
        "--terminals",
        "11,12,13,15",
        "--notion",
        "all",
        "--format",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(json["verdicts"]["global"]["status"], "absent");
    assert_eq!(json["verdicts"]["local"]["status"], "found");
    assert_eq!(json["verdicts"]["weak"]["status"], "found");
}

#[test]
fn text_and_json_agree_on_verdicts() {
    let json_out = psn(&["check", "--builtin", "ring4-ex3", "--format", "json"]);
    let text_out = psn(&["check", "--builtin", "ring4-ex3", "--format", "text"]);
    let json: serde_json::Value = serde_json::from_str(&stdout(&json_out)).unwrap();
    let text = stdout(&text_out);
    for (notion, token) in [
        ("global", "global: absent"),
        ("local", "local: FOUND"),
        ("weak", "weak: FOUND"),
    ] {
        let status = json["verdicts"][notion]["status"].as_str().unwrap();
        assert!(text.contains(token), "{text}");
        match status {
            "found" => assert!(token.contains("FOUND")),
            other => assert!(token.contains(other)),
        }
    }
}

#[test]
fn exhausted_budget_exits_with_code_2_and_unknowns() {
    let out = psn(&[
        "check",
        "--builtin",
        "grid17",
        "--terminals",
        "2,4,6",
        "--max-states",
        "100",
        "--format",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(json["stats"]["complete"], false);
    assert_eq!(json["verdicts"]["local"]["status"], "unknown");
}

#[test]
fn early_stop_notions_still_report_found_on_truncated_graphs() {
    let out = psn(&[
        "check",
        "--builtin",
        "ring4",
        "--notion",
        "weak",
        "--format",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(json["verdicts"]["weak"]["status"], "found");
    assert_eq!(json["verdicts"]["weak"]["exhaustive"], false);
}

#[test]
fn network_file_matches_builtin() {
    let out = psn(&[
        "check",
        "--network",
        repo_path("networks/ring4.net").to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    for notion in ["global", "local", "weak"] {
        assert_eq!(json["verdicts"][notion]["status"], "found");
    }
}

#[test]
fn deadlock_free_sample_is_clean() {
    let out = psn(&[
        "check",
        "--network",
        repo_path("networks/twin-rings.net").to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    for notion in ["global", "local", "weak"] {
        assert_eq!(json["verdicts"][notion]["status"], "absent", "{notion}");
    }
}

#[test]
fn validate_reports_violations_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.net");
    std::fs::write(&bad, "nodes: 1 2\nterminals: 1\nchannel a 1 -> 2\nchannel b 2 -> 1\n")
        .unwrap();
    let out = psn(&["validate", "--network", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("terminal"), "{err}");

    let out = psn(&["validate", "--builtin", "ring4"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("valid"));
}

#[test]
fn parse_errors_carry_line_numbers_and_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("syntax.net");
    std::fs::write(&bad, "nodes: 1 2\nterminals: 1 2\nchannel oops\n").unwrap();
    let out = psn(&["check", "--network", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn export_smv_matches_the_golden_file() {
    let out = psn(&["export-smv", "--builtin", "ring4", "--ctl", "all"]);
    assert_eq!(out.status.code(), Some(0));
    let golden = std::fs::read_to_string(repo_path("crates/psn/tests/golden/ring4.smv")).unwrap();
    assert_eq!(stdout(&out), golden);

    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("out.smv");
    let out = psn(&[
        "export-smv",
        "--builtin",
        "grid17",
        "--terminals",
        "11,12,13,15",
        "--ctl",
        "all",
        "--out",
        file.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let golden =
        std::fs::read_to_string(repo_path("crates/psn/tests/golden/grid17_t11-12-13-15.smv"))
            .unwrap();
    assert_eq!(std::fs::read_to_string(&file).unwrap(), golden);
}

#[test]
fn emit_dot_writes_a_digraph() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("net.dot");
    let out = psn(&[
        "validate",
        "--builtin",
        "ring4",
        "--emit-dot",
        file.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let dot = std::fs::read_to_string(&file).unwrap();
    assert!(dot.starts_with("digraph \"ring4\""));
    assert!(dot.contains("1 -> 2 [label=\"c1\"];"));
}

#[test]
fn xcheck_without_a_tool_is_a_distinct_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_psn"))
        .args(["xcheck", "--builtin", "ring4"])
        .env_remove("PSN_SMV_TOOL")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("PSN_SMV_TOOL"), "{err}");

    let out = Command::new(env!("CARGO_BIN_EXE_psn"))
        .args(["xcheck", "--builtin", "ring4", "--tool", "/does/not/exist"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("not found"), "{err}");
}

#[cfg(unix)]
#[test]
fn xcheck_agrees_with_a_fake_checker() {
    use std::os::unix::fs::PermissionsExt;
    let dir = tempfile::tempdir().unwrap();
    let tool = dir.path().join("fake-nuxmv");
    // ring4 has all three deadlocks, so a checker claiming all three
    // formulas hold agrees with the native verdicts.
    std::fs::write(
        &tool,
        "#!/bin/sh\ncat > /dev/null\n\
         echo '-- specification one is true'\n\
         echo '-- specification two is true'\n\
         echo '-- specification three is true'\n",
    )
    .unwrap();
    std::fs::set_permissions(&tool, std::fs::Permissions::from_mode(0o755)).unwrap();
    let out = psn(&[
        "xcheck",
        "--builtin",
        "ring4",
        "--tool",
        tool.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert_eq!(text.matches(" ok").count(), 3, "{text}");
}
