use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use poolforge::kernels::{FeatureMatrix, Precision};
use poolforge::potential::xyz::write_structure;
use poolforge::potential::Structure;
use tempfile::TempDir;

fn poolforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_poolforge")).args(args).env("RUST_LOG", "warn").output().expect("binary runs")
}

fn write_structures(path: &Path, n: usize) {
    let mut buf = Vec::new();
    for k in 0..n {
        let d = 1.2 + 0.1 * k as f64;
        let s = Structure::new(vec![0, 1, 2], vec![[0.0, 0.0, 0.0], [d, 0.0, 0.0], [0.0, d, 0.3]]).unwrap();
        write_structure(&mut buf, &s, None, None).unwrap();
    }
    fs::write(path, buf).unwrap();
}

fn features(dir: &TempDir, name: &str, n: usize) -> FeatureMatrix {
    let xyz = dir.path().join(format!("{name}.xyz"));
    write_structures(&xyz, n);
    let out = dir.path().join(name);
    let o = poolforge(&["--out", out.to_str().unwrap(), "features", xyz.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    FeatureMatrix::load(&out.join("features.pffm")).unwrap()
}

#[test]
fn features_are_deterministic_with_joint_norm() {
    let dir = TempDir::new().unwrap();
    let a = features(&dir, "a", 6);
    let b = features(&dir, "b", 6);
    assert_eq!(a.rows(), 6);
    assert_eq!(a.as_slice(), b.as_slice());
    for i in 0..a.rows() {
        let norm: f64 = a.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
        // default joint weights (1, 1) over two unit blocks
        assert!((norm - 2f64.sqrt()).abs() < 1e-12);
    }
}

#[test]
fn empty_structure_file_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let xyz = dir.path().join("empty.xyz");
    fs::write(&xyz, "").unwrap();
    let o = poolforge(&["--out", dir.path().join("out").to_str().unwrap(), "features", xyz.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

fn acquire(dir: &TempDir, out: &str, config: &str, train: &Path, pool: &Path) -> Output {
    let cfg = dir.path().join(format!("{out}.cfg"));
    fs::write(&cfg, config).unwrap();
    poolforge(&[
        "--config",
        cfg.to_str().unwrap(),
        "--deterministic",
        "--out",
        dir.path().join(out).to_str().unwrap(),
        "acquire",
        "--train",
        train.to_str().unwrap(),
        "--pool",
        pool.to_str().unwrap(),
    ])
}

fn selected(csv: &str) -> Vec<usize> {
    let mut idx: Vec<usize> =
        csv.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().trim().parse().unwrap()).collect();
    idx.sort_unstable();
    idx
}

#[test]
fn acquire_whole_pool_and_rerun_identically() {
    let dir = TempDir::new().unwrap();
    let (d, n_t, n_p) = (5, 8, 12);
    let rows = |n: usize, shift: f64| {
        let data: Vec<f64> = (0..n * d).map(|k| ((k as f64 + shift) * 0.7).sin()).collect();
        FeatureMatrix::new(n, d, data).unwrap()
    };
    let train = dir.path().join("train.pffm");
    let pool = dir.path().join("pool.pffm");
    rows(n_t, 0.0).save(&train, Precision::F64).unwrap();
    rows(n_p, 100.0).save(&pool, Precision::F64).unwrap();

    let o = acquire(&dir, "all", "batch = 12\nshortlist = 12\n", &train, &pool);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("all/selection.csv")).unwrap();
    assert_eq!(selected(&csv), (0..n_p).collect::<Vec<_>>());

    let first = acquire(&dir, "r1", "batch = 4\nchunk = 5\n", &train, &pool);
    let second = acquire(&dir, "r2", "batch = 4\nchunk = 5\n", &train, &pool);
    assert!(first.status.success() && second.status.success());
    let a = fs::read_to_string(dir.path().join("r1/selection.csv")).unwrap();
    let b = fs::read_to_string(dir.path().join("r2/selection.csv")).unwrap();
    assert_eq!(a, b);
    assert_eq!(selected(&a).len(), 4);
}

#[test]
fn unknown_config_key_is_named() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "batch = 4\nbatchsize = 4\n").unwrap();
    let o = poolforge(&["--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap(), "oracle-check"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("batchsize"));
}

#[test]
fn oracle_check_passes_and_writes_report() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("o");
    let o = poolforge(&["--out", out.to_str().unwrap(), "oracle-check"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let csv = fs::read_to_string(out.join("oracle.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",true")));
    assert!(fs::read_to_string(out.join("config.txt")).unwrap().starts_with("# seed = 0"));
}
