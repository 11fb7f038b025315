use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
seed = 3
[sweep]
configurations = ["siso", "af1x1x1"]
source_power_db = { start = -30.0, stop = -22.0, step = 4.0 }
packets_per_point = 60
[link]
payload_symbols = 2
"#;

fn afsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_afsim")).args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn sweep_to_file_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cfg.toml", SMALL);
    let out = |name: &str| dir.path().join("nested").join(name);
    for name in ["a.csv", "b.csv"] {
        let o = afsim(&["sweep", "--config", &cfg, "--out", out(name).to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = std::fs::read_to_string(out("a.csv")).unwrap();
    assert_eq!(a, std::fs::read_to_string(out("b.csv")).unwrap());
    let mut lines = a.lines();
    assert!(lines.next().unwrap().starts_with("config_hash,configuration,modulation"));
    assert_eq!(lines.count(), 6);
}

#[test]
fn seed_flag_overrides_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cfg.toml", SMALL);
    let from_file = afsim(&["sweep", "--config", &cfg, "--seed", "9"]).stdout;
    let edited = write_config(dir.path(), "edited.toml", &SMALL.replace("seed = 3", "seed = 9"));
    assert_eq!(from_file, afsim(&["sweep", "--config", &edited]).stdout);
    assert_ne!(from_file, afsim(&["sweep", "--config", &cfg]).stdout);
}

#[test]
fn bad_configuration_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", "[sweep]\npackets = 3\n");
    let o = afsim(&["sweep", "--config", &cfg]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("packets"));
    assert!(!afsim(&["sweep", "--config", "/nonexistent/cfg.toml"]).status.success());
}

#[test]
fn cfo_demo_and_bound_outputs() {
    let demo = String::from_utf8(afsim(&["cfo-demo"]).stdout).unwrap();
    assert!(demo.lines().any(|l| l.starts_with("# case=long")));
    assert!(demo.contains("config_hash,case,sample,relay_phase_rad,return_phase_rad"));

    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cfg.toml", SMALL);
    let rows = String::from_utf8(afsim(&["sweep", "--config", &cfg, "--bound"]).stdout).unwrap();
    assert_eq!(rows.lines().filter(|l| l.contains(",mrc_bound,")).count(), 3);
}
