use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn fsbp(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fsbp")).args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn rule_csv(dir: &Path) -> (Vec<f64>, Vec<f64>) {
    let text = fs::read_to_string(dir.join("rule.csv")).unwrap();
    let mut nodes = vec![];
    let mut weights = vec![];
    for line in text.lines().skip(1) {
        let (x, w) = line.split_once(',').unwrap();
        nodes.push(x.parse().unwrap());
        weights.push(w.parse().unwrap());
    }
    (nodes, weights)
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

#[test]
fn example_one_rule_matches_printed_values() {
    let tmp = TempDir::new().unwrap();
    let cfg = config("example1.toml");
    let o = fsbp(&["rule", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (x, w) = rule_csv(tmp.path());
    assert!(close(&x, &[0.0, 0.2956452974, 0.7423537958, 1.0], 1e-9), "{x:?}");
    assert!(close(&w, &[0.0914828668, 0.4341375639, 0.3987262252, 0.0756533441], 1e-9), "{w:?}");
    assert!(tmp.path().join("manifest.json").exists());
}

#[test]
fn quadratics_give_gauss_and_lobatto() {
    let cfg = config("gauss-legendre.toml");
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&fsbp(&["rule", "--config", cfg.to_str().unwrap()], tmp.path())), 0);
    let (x, w) = rule_csv(tmp.path());
    let r = 1.0 / 3f64.sqrt();
    assert!(close(&x, &[-r, r], 1e-12) && close(&w, &[1.0, 1.0], 1e-12), "{x:?} {w:?}");

    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&fsbp(&["rule", "--config", cfg.to_str().unwrap(), "--mode", "closed"], tmp.path())), 0);
    let (x, w) = rule_csv(tmp.path());
    assert!(close(&x, &[-1.0, 0.0, 1.0], 1e-12) && close(&w, &[1.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0], 1e-12), "{x:?} {w:?}");
}

#[test]
fn operator_files_verify_again() {
    let cfg = config("example1.toml");
    let tmp = TempDir::new().unwrap();
    let built = tmp.path().join("built");
    assert_eq!(code(&fsbp(&["operator", "--config", cfg.to_str().unwrap()], &built)), 0);
    for f in ["d.csv", "norm.csv", "operator.json"] {
        assert!(built.join(f).exists(), "{f}");
    }
    let op = built.join("operator.json");
    let o = fsbp(&["verify", "--operator", op.to_str().unwrap()], &tmp.path().join("checked"));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let verdict: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("checked/verdict.json")).unwrap()).unwrap();
    assert_eq!(verdict["pass"], true);
}

#[test]
fn operator_from_a_written_rule() {
    let cfg = config("example1.toml");
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&fsbp(&["rule", "--config", cfg.to_str().unwrap()], &tmp.path().join("r"))), 0);
    let rule = tmp.path().join("r/rule.json");
    let o = fsbp(&["operator", "--config", cfg.to_str().unwrap(), "--rule", rule.to_str().unwrap()], &tmp.path().join("o"));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn exit_codes_follow_failure_kind() {
    let tmp = TempDir::new().unwrap();
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "bogus = 1\n").unwrap();
    assert_eq!(code(&fsbp(&["rule", "--config", bad.to_str().unwrap()], tmp.path())), 2);
    let missing = tmp.path().join("missing.toml");
    assert_eq!(code(&fsbp(&["rule", "--config", missing.to_str().unwrap()], tmp.path())), 1);
    let cfg = config("example1.toml");
    assert_eq!(code(&fsbp(&["rule", "--config", cfg.to_str().unwrap(), "--mode", "radau"], tmp.path())), 2);
    // The equispaced least-squares operator is not exact on its space.
    assert_eq!(code(&fsbp(&["verify", "--fixture", "exp-equispaced-5"], tmp.path())), 4);
    assert_eq!(code(&fsbp(&["verify", "--fixture", "exp-gglq-4"], tmp.path())), 0);
    assert_eq!(code(&fsbp(&["verify", "--fixture", "no-such-table"], tmp.path())), 2);
}

fn without_wall_time(path: &Path) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("wall_time_s");
    v
}

fn assert_same_outputs(a: &Path, b: &Path) {
    let mut names: Vec<_> = fs::read_dir(a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() > 1);
    for name in names {
        if name == "manifest.json" {
            assert_eq!(without_wall_time(&a.join(&name)), without_wall_time(&b.join(&name)));
        } else {
            assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{name:?}");
        }
    }
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    for (cmd, cfg) in [("rule", "example1.toml"), ("operator", "example1.toml"), ("solve", "wave.toml")] {
        let cfg = config(cfg);
        let (a, b) = (tmp.path().join(format!("{cmd}-a")), tmp.path().join(format!("{cmd}-b")));
        for dir in [&a, &b] {
            let o = fsbp(&[cmd, "--config", cfg.to_str().unwrap(), "--seed", "7"], dir);
            assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        }
        assert_same_outputs(&a, &b);
    }
}

#[test]
fn zero_data_solve_loses_energy() {
    let tmp = TempDir::new().unwrap();
    let cfg = config("stability-advection.toml");
    let o = fsbp(&["solve", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(tmp.path().join("energy.csv")).unwrap();
    let energy: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(energy.len() > 1000);
    assert!(energy.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
}

#[test]
fn fixtures_are_written() {
    let tmp = TempDir::new().unwrap();
    let o = fsbp(&["fixtures"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["exp-gglq-4.json", "exp-equispaced-5.json", "exp-uniform-optimised-4.json", "bessel-gglq-25.json", "comparison.csv"] {
        assert!(tmp.path().join(f).exists(), "{f}");
    }
}
