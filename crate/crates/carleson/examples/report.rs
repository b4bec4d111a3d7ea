//! Full analysis written as a JSON report and a long-format CSV.
use carleson::report::{analyze, from_json, to_json, write_atomic, write_csv, AnalysisConfig};

fn main() -> anyhow::Result<()> {
    let cfg = AnalysisConfig { weight: "builtin:power?a=0.5".into(), depth: 12, ..Default::default() };
    let r = analyze(&cfg)?;
    let dir = tempfile::tempdir()?;
    let json = dir.path().join("power.json");
    write_atomic(&json, to_json(&r)?.as_bytes())?;
    let back = from_json(&std::fs::read_to_string(&json)?)?;
    println!("{} constants, schema {}, inconsistent rows: {}", back.constants().len(), back.schema, back.suite.inconsistent());
    let mut csv = Vec::new();
    write_csv(&mut csv, &r.weight.name, &r.constants())?;
    for line in String::from_utf8(csv)?.lines().take(4) {
        println!("{line}");
    }
    Ok(())
}
