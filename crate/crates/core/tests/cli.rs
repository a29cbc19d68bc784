use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fcofdm"))
}

#[test]
fn lists_builtins() {
    let out = bin().arg("list-builtins").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["exampleA", "exampleB", "exampleC", "exampleD"] {
        assert!(text.contains(name));
    }
}

#[test]
fn validates_shipped_files() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios");
    for name in ["exampleA", "exampleB", "exampleC", "exampleD"] {
        let out = bin().arg("validate").arg(format!("{dir}/{name}.json")).output().unwrap();
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    // Missing file.
    let out = bin().args(["validate", "/nonexistent/scenario.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    // Schema error.
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, r#"{"schema_version": 1, "name": "x"}"#).unwrap();
    let out = bin().arg("validate").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema"));
    // Output directory that cannot be created.
    let blocker = tmp.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let out = bin().args(["run", "exampleD", "--out"]).arg(blocker.join("sub")).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn overrides_apply() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run", "exampleD", "--seed", "3", "--scheme", "ols", "--tx", "wola", "--rx", "wola", "--plots", "--out"])
        .arg(tmp.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["seed"], 3);
    assert_eq!(summary["config"]["fc"]["scheme"], "ols");
    assert_eq!(summary["config"]["tx"], "wola");
    assert!(tmp.path().join("psd.svg").exists());
}
