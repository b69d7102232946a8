use std::path::Path;
use std::process::{Command, Output};

fn ncb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ncb"))
        .args(args)
        .env_remove("NCB_SEED")
        .output()
        .unwrap()
}

fn config_path(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

#[test]
fn list_schemes_prints_all_ten() {
    let out = ncb(&["list-schemes"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 10);
    assert!(text.lines().any(|l| l.starts_with("multi-module")));
}

#[test]
fn missing_config_exits_one_and_names_the_path() {
    let out = ncb(&["run", "/nonexistent/cfg.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/cfg.toml"));
}

#[test]
fn bad_arguments_exit_one() {
    assert_eq!(ncb(&["run", "--bogus"]).status.code(), Some(1));
    assert_eq!(ncb(&["compare", &config_path("mimic.toml"), "--schemes", "nope"]).status.code(), Some(1));
    assert_eq!(ncb(&["--help"]).status.code(), Some(0));
}

#[test]
fn compare_prints_one_row_per_scheme() {
    let out = ncb(&["compare", &config_path("mimic.toml"), "--schemes", "mimic,mpc"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("mimic") && lines[1].ends_with("ok"));
    assert!(lines[2].starts_with("mpc"));
}

#[test]
fn seed_flag_overrides_config() {
    let out = ncb(&["run", &config_path("hdp.toml"), "--seed", "77"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("seed: 77"));
}

#[test]
fn divergence_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("unstable.toml");
    std::fs::write(
        &cfg,
        "scheme = \"hybrid-parallel\"\nticks = 200\nsetpoints = [[0, 0.5]]\n\
         pid = { k1 = 0.0, k2 = 5.0, k3 = 0.0 }\n[plant]\nkind = \"linear1\"\na = 0.5\nb = 1.0\n",
    )
    .unwrap();
    let out = ncb(&["run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stdout).contains("diverged: true"));
}

#[test]
fn gradcheck_passes() {
    let out = ncb(&["gradcheck", "--cases", "5"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("5 of 5 cases passed"));
}
