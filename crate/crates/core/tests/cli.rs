use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn magws(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_magws"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn rows(path: &Path) -> Vec<(u64, f64)> {
    let mut reader = csv::Reader::from_path(path).unwrap();
    assert_eq!(reader.headers().unwrap().iter().collect::<Vec<_>>(), ["N", "gamma_N"]);
    reader
        .records()
        .map(|r| {
            let r = r.unwrap();
            (r[0].parse().unwrap(), r[1].parse().unwrap())
        })
        .collect()
}

#[test]
fn laguerre_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = magws(&["laguerre"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mut reader = csv::Reader::from_path(dir.path().join("laguerre_orthonormality.csv")).unwrap();
    let residual_col = reader.headers().unwrap().iter().position(|h| h == "residual").unwrap();
    let mut count = 0;
    for record in reader.records() {
        let r: f64 = record.unwrap()[residual_col].parse().unwrap();
        assert!(r < 1e-9);
        count += 1;
    }
    assert_eq!(count, 81 * 81);
    assert!(dir.path().join("laguerre_samples.csv").exists());
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "ell_B = 1\nno_such_key = 3\n").unwrap();
    let out = magws(&["verify", "spectrum", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = magws(&["verify", "spectrum", "--eps", "0,1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = magws(&["verify", "nonsense"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let missing = dir.path().join("missing.cfg");
    let out = magws(&["laguerre", "--config", missing.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_is_echoed_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# spectrum only\nblock_cutoff_J = 6\nell_B = 2\n").unwrap();
    let out = magws(&["verify", "spectrum", "--config", cfg.to_str().unwrap(), "--ell-b", "1.5"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("verify_spectrum.json")).unwrap()).unwrap();
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["config_echo"]["block_cutoff_J"], 6);
    assert_eq!(report["config_echo"]["ell_B"].as_f64(), Some(1.5));
    let cases = report["cases"].as_array().unwrap();
    assert!(cases.iter().any(|c| c["name"] == "dirac-multiplicities J=6"));
    for c in cases {
        for key in ["name", "paper_ref", "expected", "estimate", "residual", "tolerance", "pass"] {
            assert!(c.get(key).is_some(), "case lacks {key}");
        }
        assert_eq!(c["pass"], true);
    }
}

#[test]
fn unknown_gamma_case_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = magws(&["gamma-table", "--case", "nope"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gamma_tables_converge() {
    let dir = tempfile::tempdir().unwrap();
    for (case, limit, slack) in [("q2", 0.5, 0.02), ("d4", 2.0, 0.05)] {
        let out = magws(&["gamma-table", "--case", case, "--n-max", "1048576"], dir.path());
        assert_eq!(out.status.code(), Some(0));
        let table = rows(&dir.path().join(format!("gamma_{case}.csv")));
        assert_eq!(table.len(), 17);
        assert_eq!(table[0].0, 16);
        assert_eq!(table[16].0, 1 << 20);
        let errors: Vec<f64> = table.iter().map(|(_, g)| (g - limit).abs()).collect();
        assert!(errors[8..].windows(2).all(|w| w[1] < w[0]), "{case}: {errors:?}");
        assert!(errors[16] < slack, "{case}: {errors:?}");
    }
}

#[test]
fn verify_reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let first = magws(&["verify", "calculus"], dir.path());
    assert_eq!(first.status.code(), Some(0));
    let a = fs::read(dir.path().join("verify_calculus.json")).unwrap();
    let second = magws(&["verify", "calculus"], dir.path());
    assert_eq!(second.status.code(), Some(0));
    let b = fs::read(dir.path().join("verify_calculus.json")).unwrap();
    assert_eq!(a, b);
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn connes_pair_flag_selects_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let out = magws(&["verify", "connes", "--pair", "pi0,pi0", "--eps", "1"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("verify_connes.json")).unwrap()).unwrap();
    let cases = report["cases"].as_array().unwrap();
    assert_eq!(cases.len(), 3);
    let lhs = cases[0]["estimate"].as_f64().unwrap();
    assert!((3.8..=4.2).contains(&lhs));
    let out = magws(&["verify", "connes", "--pair", "pi0"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}
