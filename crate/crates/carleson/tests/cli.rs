use std::process::{Command, Output};

use carleson::report::{from_json, CSV_HEADER};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_carleson")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["check", "--weight", "builtin:nosuch"]).status.code(), Some(1));
    assert_eq!(run(&["analyze", "--weight", "builtin:constant", "--p-grid", "0.5"]).status.code(), Some(1));
}

#[test]
fn failed_runs_leave_no_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let o = run(&["analyze", "--weight", "/does/not/exist.toml", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("exist.toml"));
    assert!(!out.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn csv_is_deterministic() {
    let args = ["analyze", "--weight", "builtin:example52?x=1.5", "--depth", "10", "--format", "csv"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, CSV_HEADER);
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert!(rows.len() > 100);
    assert!(rows.iter().all(|r| r[0] == *"example52"));
}

#[test]
fn json_report_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = run(&["analyze", "--weight", "builtin:power?a=0.5", "--depth", "9", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let report = from_json(&text).unwrap();
    assert_eq!(report.weight.name, "power");
    assert_eq!(report.config.depth, 9);
    let again = carleson::report::to_json(&report).unwrap();
    assert_eq!(from_json(&again).unwrap().constants().len(), report.constants().len());
    assert!(from_json(&text.replace("carleson-report/v1", "carleson-report/v0")).is_err());
}

#[test]
fn constant_weight_scan_is_flat() {
    let o = run(&["scan", "rhi", "--weight", "builtin:constant", "--depth", "10", "--p-grid", "1.5,2,3", "--format", "csv"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut n = 0;
    for r in rdr.records() {
        let r = r.unwrap();
        let v: f64 = r[4].parse().unwrap();
        assert!((v - 1.0).abs() < 1e-9, "{r:?}");
        assert_eq!(&r[5], "bounded");
        n += 1;
    }
    assert_eq!(n, 3 * 11);
}

#[test]
fn cz_of_a_constant_selects_nothing() {
    let o = run(&["cz", "--weight", "builtin:constant", "--depth", "8"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("0 boxes selected"));
}

#[test]
fn check_rows() {
    for w in ["builtin:example53", "builtin:example52?x=1.5"] {
        let o = run(&["check", "--weight", w, "--depth", "20"]);
        assert_eq!(o.status.code(), Some(0), "{w}");
        let text = stdout(&o);
        for id in ["binfty", "rhi", "bq", "blog", "minimal-lp"] {
            let line = text.lines().find(|l| l.starts_with(id)).unwrap_or_else(|| panic!("{w}: no {id} row"));
            assert!(line.ends_with("→ CONSISTENT"), "{w}: {line}");
        }
    }
    let o = run(&["check", "--weight", "builtin:example53", "--depth", "12"]);
    let text = stdout(&o);
    let row = text.lines().find(|l| l.starts_with("binfty")).unwrap();
    assert!(row.contains("FW ✓") && row.contains("B_∞ ✗"), "{row}");
}

#[test]
fn oracle_agrees_with_cache() {
    let o = run(&["oracle", "--weight", "builtin:example52?x=1.5", "--depth", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}
