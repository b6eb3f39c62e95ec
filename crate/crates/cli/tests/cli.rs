use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_frac-homog"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("run frac-homog")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const SMALL: &str = "h = 0.75\nx0 = [0.2]\neps = [0.05, 0.02]\npaths = 200\nseed = 9\n\n[[component]]\nfield = \"sin\"\ng = \"H1\"\n\n[sample]\nmodel = \"fou\"\nt1 = 2.0\ndt = 0.002\npaths = 3\n";

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("cfg.toml");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn missing_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["limits", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let o = run(&["limits", "--config", "/nonexistent/cfg.toml"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("cannot read config"));
}

#[test]
fn parse_error_reports_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "h = 0.7\nx0 = [0.0]\n[[component]]\nfield = \"spiral\"\ng = \"H1\"\n");
    let o = run(&["describe", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 4, column 9"), "{err}");
}

#[test]
fn unknown_override_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = run(&["describe", "--config", cfg.to_str().unwrap(), "--override", "colour=3"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("after overrides"));
}

#[test]
fn describe_mixed_system() {
    let o = run(&["describe", "--config", config("mixed_h89.toml").to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    let regimes: Vec<&str> =
        text.lines().filter_map(|l| l.trim().strip_prefix("regime")).map(|r| r.split_whitespace().next().unwrap()).collect();
    assert_eq!(regimes, ["hermite", "hermite", "wiener"]);
    for hstar in ["0.777778", "0.555556", "-0.111111"] {
        assert!(text.contains(&format!("H*        {hstar}")), "{hstar} missing:\n{text}");
    }
    assert!(!text.contains("WARNING"));
}

#[test]
fn describe_classical_branch_and_band_warning() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "h = 0.5\nx0 = [0.0]\n[[component]]\nfield = \"sin\"\ng = \"H1\"\n");
    let text = String::from_utf8_lossy(&run(&["describe", "--config", cfg.to_str().unwrap()]).stdout).to_string();
    assert!(text.contains("classical branch"), "{text}");
    assert!(!text.contains("WARNING"));
    let cfg = write_config(dir.path(), "h = 0.7\nx0 = [0.0]\n[[component]]\nfield = \"sin\"\ng = \"H3\"\n");
    let text = String::from_utf8_lossy(&run(&["describe", "--config", cfg.to_str().unwrap()]).stdout).to_string();
    assert!(text.contains("WARNING: component 0 has rank 3 inside the excluded band"), "{text}");
}

#[test]
fn same_seed_gives_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let outs: Vec<PathBuf> = ["a", "b"].iter().map(|n| dir.path().join(n)).collect();
    for (out, workers) in outs.iter().zip(["1", "3"]) {
        for cmd in ["sample", "clt"] {
            let o = run(&[cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--workers", workers]);
            // a failed pass rule (exit 1) still writes every file
            assert!(code(&o) <= 1 && (cmd != "sample" || code(&o) == 0), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        }
    }
    let mut names: Vec<String> = std::fs::read_dir(&outs[0])
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    names.sort();
    assert!(names.len() >= 5, "{names:?}");
    for n in &names {
        let a = std::fs::read(outs[0].join(n)).unwrap();
        let b = std::fs::read(outs[1].join(n)).unwrap();
        assert_eq!(a, b, "{n} differs");
    }
}

#[test]
fn reports_embed_resolved_config_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = run(&["limits", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "42", "--eps", "0.1,0.01"]);
    assert_eq!(code(&o), 0);
    let rep = read_json(&out.join("limits.json"));
    assert_eq!(rep["schema"], "report_v1");
    let resolved = &rep["params"]["config"];
    assert_eq!(resolved["seed"], 42);
    assert_eq!(resolved["eps"], serde_json::json!([0.1, 0.01]));
    assert_eq!(resolved["sample"]["paths"], 3);
    let m = read_json(&out.join("manifest.json"));
    assert_eq!(m["seed"], 42);
    assert_eq!(m["pass"], true);
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
    assert!(m["files"].as_array().unwrap().iter().any(|f| f == "limits.csv"));
}

#[test]
fn path_cap_exits_4() {
    let o = run(&["homogenize", "--config", config("sin_h2.toml").to_str().unwrap(), "--paths", "9000", "--out", "/tmp/unused"]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn unsupported_system_exits_2() {
    let o = run(&["homogenize", "--config", config("mixed_h89.toml").to_str().unwrap(), "--out", "/tmp/unused"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn verify_subset_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v");
    let o = run(&[
        "verify-all",
        "--out",
        out.to_str().unwrap(),
        "--override",
        "verify.checks=[3, 4, 11]",
        "--override",
        "verify.scale=smoke",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let m = read_json(&out.join("manifest.json"));
    assert_eq!(m["command"], "verify-all");
    for name in ["hermite_suite.json", "rough_core.json", "determinism.json"] {
        assert!(out.join(name).exists(), "{name}");
    }
}

#[test]
fn calibration_cache_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    let o = bin()
        .args(["sample", "--config", config("sin_h2.toml").to_str().unwrap(), "--out", out.to_str().unwrap()])
        .env("FRAC_HOMOG_CACHE", dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("hermite_k_v2.json").exists());
}
