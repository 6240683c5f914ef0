//! Command-line behavior: exit codes, flag validation, report determinism.

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hemimax"))
}

fn tmp(name: &str) -> std::path::PathBuf {
    let mut p = std::env::temp_dir();
    p.push(format!("hemimax-cli-{name}-{}", std::process::id()));
    p
}

#[test]
fn usage_errors_exit_2() {
    // decimals are rejected everywhere
    let out = bin()
        .args(["verify-local", "--r0", "0.14"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    // out-of-range radius
    let out = bin()
        .args(["verify-local", "--r0", "3/2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    // an edge off the grid
    let out = bin()
        .args(["verify-global", "--dfs-max-edge", "1/100"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    // unknown subcommand (clap's own usage error)
    let out = bin().args(["no-such-command"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    // report on a missing file
    let out = bin()
        .args(["report", "/definitely/not/here.cert"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_local_small_box_succeeds_and_reports() {
    let cert = tmp("local-ok");
    let out = bin()
        .args(["verify-local", "--r0", "1/8", "--output"])
        .arg(&cert)
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    assert!(cert.exists());

    // report accepts the certificate and renders identically across runs
    let run = || {
        let out = bin().args(["report"]).arg(&cert).output().unwrap();
        (out.status.code(), out.stdout)
    };
    let (c1, r1) = run();
    let (c2, r2) = run();
    assert_eq!(c1, Some(0));
    assert_eq!(c2, Some(0));
    assert_eq!(r1, r2, "report must be byte-identical across runs");
    let rendered = String::from_utf8_lossy(&r1);
    assert!(
        rendered.contains("note=box radius differs from the reference 1/7"),
        "radius-specific rows must not hard-fail: {rendered}"
    );
    std::fs::remove_file(&cert).ok();
}

#[test]
fn verify_local_rounded_majorizer_succeeds() {
    let out = bin()
        .args(["verify-local", "--r0", "1/7", "--majorizer", "rounded"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn report_flags_failures_in_a_tampered_certificate() {
    let cert = tmp("local-tamper");
    let out = bin()
        .args(["verify-local", "--r0", "1/7", "--output"])
        .arg(&cert)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&cert).unwrap();
    let tampered = text.replace("nsd: true", "nsd: false");
    std::fs::write(&cert, tampered).unwrap();
    let out = bin().args(["report"]).arg(&cert).output().unwrap();
    assert_eq!(
        out.status.code(),
        Some(1),
        "a FAILURE row must flip the exit status"
    );
    let rendered = String::from_utf8_lossy(&out.stdout);
    assert!(rendered.contains("local.nsd ours=false reference=true class=FAILURE"));
    std::fs::remove_file(&cert).ok();
}

#[test]
fn verify_global_trustless_mode_succeeds() {
    let cert = tmp("trustless");
    let out = bin()
        .args(["verify-global", "--mode", "trustless", "--output"])
        .arg(&cert)
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let text = std::fs::read_to_string(&cert).unwrap();
    assert!(text.contains("mode: trustless"));
    assert!(text.contains("bound-filter: false"));
    assert!(text.contains("valid: true"));
    // with the filter off, more cubes reach the sum test
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("bound=0"));
    std::fs::remove_file(&cert).ok();
}

#[test]
fn oracle_command_prints_reference_values() {
    let out = bin()
        .args(["oracle", "--restarts", "5", "--seed", "3"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("proven maximum 9.6568542495"));
    assert!(text.contains("triangle-plus-pole"));
    // constrained variant accepts exact rationals only
    let out = bin()
        .args(["oracle", "--restarts", "2", "--v-floor", "9/10"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let out = bin().args(["oracle", "--v-floor", "0.9"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
