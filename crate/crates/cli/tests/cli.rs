use std::process::Command;

fn gravanom() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gravanom"));
    cmd.env_remove("GRAVANOM_OUT_DIR");
    cmd
}

#[test]
fn explain_accepts_full_check_ids() {
    let out = gravanom().args(["explain", "cocycle/shear_xy∘shear_yz"]).output().unwrap();
    assert!(out.status.success());
    assert!(!out.stdout.is_empty());
}

#[test]
fn explain_rejects_unknown_ids() {
    let out = gravanom().args(["explain", "no-such-check"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no-such-check"));
}

#[test]
fn ledger_run_writes_a_report_under_the_out_dir() {
    let dir = std::env::temp_dir().join(format!("gravanom-cli-{}", std::process::id()));
    let out = gravanom().args(["ledger", "--out", "nested/ledger.json"]).env("GRAVANOM_OUT_DIR", &dir).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("nested/ledger.json")).unwrap()).unwrap();
    std::fs::remove_dir_all(&dir).unwrap();
    assert_eq!(report["environment"]["subcommand"], "ledger");
    assert!(report["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true));
}

#[test]
fn bad_configs_exit_with_usage_status() {
    let dir = std::env::temp_dir().join(format!("gravanom-cfg-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad.toml");
    std::fs::write(&path, "seed = 1\n[tolerances]\ndefault = 1e-4\nbogus = 3\n").unwrap();
    let out = gravanom().arg("delta").arg("--config").arg(&path).output().unwrap();
    std::fs::remove_dir_all(&dir).unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}
