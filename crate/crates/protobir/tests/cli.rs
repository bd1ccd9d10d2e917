//! The command-line front end on the shipped data.

use protobir::iml::parse_process;
use std::path::PathBuf;
use std::process::{Command, Output};

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name).to_string_lossy().into_owned()
}

fn protobir(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_protobir")).args(args).env_remove("PROTOBIR_OPS").output().expect("spawn protobir")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn extract_matches_golden_model() {
    let o = protobir(&["extract", &data("xor_client.bir")]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let got = parse_process(&stdout(&o)).unwrap();
    let golden = parse_process(&std::fs::read_to_string(data("xor_client.iml")).unwrap()).unwrap();
    assert_eq!(got.alpha_normal(), golden.alpha_normal());
}

#[test]
fn difftest_on_shipped_corpus() {
    let o = protobir(&["difftest", &data("corpus"), "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("20/20 systems ok"));
}

#[test]
fn empty_program_runs() {
    let dir = std::env::temp_dir().join(format!("protobir-empty-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let f = dir.join("empty.bir");
    std::fs::write(&f, "").unwrap();
    let o = protobir(&["run", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).is_empty());
}

#[test]
fn parse_error_exit_code() {
    let dir = std::env::temp_dir().join(format!("protobir-bad-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let f = dir.join("bad.bir");
    std::fs::write(&f, "block 0:\n  x := 1:8\n").unwrap();
    let o = protobir(&["parse", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let diag: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(diag["error"], "parse");
}

#[test]
fn client_run_sends_ciphertext() {
    let o = protobir(&["run", &data("client_server.bir"), "--start", "100", "--arg", "0x5", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let steps: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let tags: Vec<&str> = steps.as_array().unwrap().iter().filter_map(|s| s["event"].as_str()).collect();
    assert!(tags.contains(&"ev:send"));
    assert!(tags.contains(&"out:c"));
}

#[test]
fn server_without_input_is_stuck() {
    let o = protobir(&["run", &data("client_server.bir"), "--start", "200", "--arg", "0x5"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn insecurity_and_bound() {
    let prog = data("client_server.bir");
    let auth = data("auth.toml");
    let sys = data("eavesdropper.iml");
    for layer in ["iml", "bir"] {
        let o = protobir(&["insec", &sys, "--program", &prog, "--property", &auth, "--layer", layer, "--n", "2", "--depth", "40"]);
        assert_eq!(o.status.code(), Some(0), "{layer}: {}", stdout(&o));
        assert!(stdout(&o).contains("insecurity: 0/1 (0.000000)"));
    }
    let o = protobir(&["check", &sys, "--program", &prog, "--property", &auth, "--n", "2", "--depth", "40"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("bound holds: true"));
}

#[test]
fn violated_property_exit_code() {
    let dir = std::env::temp_dir().join(format!("protobir-prop-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let f = dir.join("forbid.toml");
    std::fs::write(&f, "mode = \"forbid\"\nevent = \"accept\"\n").unwrap();
    let o = protobir(&["insec", &data("eavesdropper.iml"), "--program", &data("client_server.bir"), "--property", f.to_str().unwrap(), "--n", "2", "--depth", "40"]);
    assert_eq!(o.status.code(), Some(5));
    assert!(stdout(&o).contains("insecurity: 1/1 (1.000000)"));
}

#[test]
fn symexec_formats() {
    let dot = protobir(&["symexec", &data("xor_client.bir"), "--format", "dot"]);
    assert!(stdout(&dot).starts_with("digraph"));
    let json = protobir(&["symexec", &data("xor_client.bir"), "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&json)).unwrap();
    assert_eq!(v[0]["start"], "100");
    assert_eq!(v[0]["params"][0], "pad");
}

#[test]
fn mixed_flavors_reach_accept() {
    for flavor in ["bir", "sym"] {
        let o = protobir(&["mixed", &data("client_server.bir"), &data("eavesdropper.iml"), "--flavor", flavor, "--seed", "3"]);
        assert_eq!(o.status.code(), Some(0), "{flavor}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).contains("ev:accept"));
    }
}

#[test]
fn custom_registry_from_env() {
    let o = Command::new(env!("CARGO_BIN_EXE_protobir"))
        .args(["extract", &data("xor_client.bir")])
        .env("PROTOBIR_OPS", "/nonexistent/ops.toml")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
