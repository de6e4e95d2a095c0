use std::fs;
use std::process::Command;

fn bfswitch() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bfswitch"))
}

const RING: &str = "N 5\n0 1\n1 2\n2 3\n3 4\n4 0\n1 3\n";

#[test]
fn demo_and_compile() {
    let dir = tempfile::tempdir().unwrap();
    let topo = dir.path().join("ring.txt");
    fs::write(&topo, RING).unwrap();

    let out = bfswitch().args(["demo"]).arg(&topo).args(["--source", "0", "--dest", "2,3"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("exact"));

    let rules = dir.path().join("rules.jsonl");
    let out = bfswitch().arg("compile").arg(&topo).args(["--scheme", "bridged(2)", "--out"]).arg(&rules).output().unwrap();
    assert!(out.status.success());
    assert_eq!(fs::read_to_string(&rules).unwrap().lines().count(), 5);
}

#[test]
fn synthetic_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = bfswitch()
        .args(["synthetic", "--n-sweep", "20,30", "--repeats", "2", "--trees", "5", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["per_node.csv", "summary.csv", "cdf.csv", "groups.csv", "verification.csv"] {
        assert!(dir.path().join(name).is_file(), "{name}");
    }
}

#[test]
fn bad_input_exit_codes() {
    let out = bfswitch().args(["synthetic", "--width", "100"]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let out = bfswitch().args(["compile", "/nonexistent/topology.graphml"]).output().unwrap();
    assert_ne!(out.status.code(), Some(0));

    let out = bfswitch().args(["no-such-command"]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
}
