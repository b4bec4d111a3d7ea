//! Command-line front end. Exit codes: 0 success, 2 when a theorem row is
//! inconsistent, 1 on any error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::conditions::{ConditionConstant, FamilyMode, SuiteReport};
use crate::error::{Error, Result};
use crate::weights::Measure;

use super::{analyze, cz, oracle_rows, scan, to_json, write_atomic, write_csv, AnalysisConfig, Format};

#[derive(Parser, Debug)]
#[command(name = "carleson", version, about = "Carleson-box conditions for weights on the unit disc")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Every condition constant, theorem cross-checks and critical exponents.
    Analyze(Common),
    /// Calderón-Zygmund decomposition at one level.
    Cz(CzArgs),
    /// Depth traces of one condition over its parameter grid.
    Scan(ScanArgs),
    /// Theorem table only.
    Check(Common),
    /// Cached box integrals against brute-force quadrature.
    Oracle(OracleArgs),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// `builtin:NAME?k=v` or a weight definition file (TOML or JSON).
    #[arg(long)]
    pub weight: String,
    #[arg(long, default_value_t = 16)]
    pub depth: u32,
    #[arg(long = "p-grid", value_delimiter = ',', default_value = "1.01,1.05,1.1,1.2,1.5,2,3,5,10")]
    pub p_grid: Vec<f64>,
    #[arg(long = "alpha-grid", value_delimiter = ',', default_value = "0.5,0.2,0.1,0.05,0.01,0.001")]
    pub alpha_grid: Vec<f64>,
    #[arg(long = "A-grid", value_delimiter = ',', default_value = "2,4,8")]
    pub a_grid: Vec<f64>,
    /// Key-estimate levels, as multiples of `1/w_Q`.
    #[arg(long = "lambda-grid", value_delimiter = ',', default_value = "2,3,10")]
    pub lambda_grid: Vec<f64>,
    /// Translates per dyadic box in shifted families.
    #[arg(long, default_value_t = 3)]
    pub shifts: usize,
    /// auto, dyadic, radial-lengths or shifted.
    #[arg(long, default_value = "auto")]
    pub family: String,
    /// Radial-lengths family density.
    #[arg(long = "per-decade", default_value_t = 200)]
    pub per_decade: usize,
    /// Bisection width for critical exponents.
    #[arg(long, default_value_t = 0.01)]
    pub tolerance: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "json")]
    pub format: String,
}

impl Common {
    pub fn config(&self) -> Result<AnalysisConfig> {
        let mut c = AnalysisConfig {
            weight: self.weight.clone(),
            depth: self.depth,
            p_grid: self.p_grid.clone(),
            alpha_grid: self.alpha_grid.clone(),
            a_grid: self.a_grid.clone(),
            lambda_grid: self.lambda_grid.clone(),
            family: self.family.parse::<FamilyMode>()?,
            shifts: self.shifts,
            per_decade: self.per_decade,
            tolerance: self.tolerance,
        };
        c.validate()?;
        Ok(c)
    }

    fn format(&self) -> Result<Format> {
        self.format.parse()
    }
}

#[derive(Args, Debug)]
pub struct CzArgs {
    #[arg(long)]
    pub weight: String,
    #[arg(long, default_value_t = 12)]
    pub depth: u32,
    #[arg(long, default_value_t = 2.0)]
    pub lambda: f64,
    /// Read `--lambda` as a multiple of the root average.
    #[arg(long)]
    pub relative: bool,
    /// lebesgue or weighted (`μ = w dA`).
    #[arg(long, default_value = "lebesgue")]
    pub measure: String,
    /// Decompose `f = 1/w` (weighted measure only).
    #[arg(long)]
    pub reciprocal: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "json")]
    pub format: String,
}

#[derive(Args, Debug)]
pub struct ScanArgs {
    /// bp, b1, rhi, blog, binfty, doubling, fw, mlp, mdw, mlp_minimal or mlog.
    pub condition: String,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    #[arg(long)]
    pub weight: String,
    /// At most 6; deeper boxes are clamped.
    #[arg(long, default_value_t = 3)]
    pub depth: u32,
    /// Exponents `s` of `∫_Q w^s`.
    #[arg(long = "p-grid", value_delimiter = ',', default_value = "1")]
    pub p_grid: Vec<f64>,
    /// Largest acceptable relative error.
    #[arg(long, default_value_t = 1e-6)]
    pub tolerance: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "json")]
    pub format: String,
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, bytes),
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(bytes)?;
            so.flush()?;
            Ok(())
        }
    }
}

fn csv_bytes(weight: &str, constants: &[&ConditionConstant]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_csv(&mut buf, weight, constants)?;
    Ok(buf)
}

fn json_bytes<T: serde::Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::Schema(e.to_string()))?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn exit_code(s: &SuiteReport) -> i32 {
    if s.inconsistent() {
        2
    } else {
        0
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Analyze(a) => {
            let cfg = a.config()?;
            let fmt = a.format()?;
            let r = analyze(&cfg)?;
            let bytes = match fmt {
                Format::Json => {
                    let mut s = to_json(&r)?;
                    s.push('\n');
                    s.into_bytes()
                }
                Format::Csv => csv_bytes(&r.weight.name, &r.constants())?,
            };
            emit(a.out.as_deref(), &bytes)?;
            if a.out.is_some() {
                print!("{}", suite_table(&r.suite));
                for c in &r.critical {
                    println!(
                        "critical {}: {} (bounded edge {}, divergent edge {})",
                        c.condition,
                        opt(c.estimate),
                        opt(c.bounded_edge),
                        opt(c.divergent_edge)
                    );
                }
            }
            Ok(exit_code(&r.suite))
        }
        Command::Check(a) => {
            let cfg = a.config()?;
            let fmt = a.format()?;
            let w = crate::weights::load_weight(&cfg.weight)?;
            let s = crate::conditions::theorem_suite(&w, &cfg.suite())?;
            print!("{}", suite_table(&s));
            if let Some(out) = &a.out {
                let bytes = match fmt {
                    Format::Json => json_bytes(&s)?,
                    Format::Csv => csv_bytes(&s.weight, &s.constants.iter().collect::<Vec<_>>())?,
                };
                write_atomic(out, &bytes)?;
            }
            Ok(exit_code(&s))
        }
        Command::Scan(a) => {
            let cfg = a.common.config()?;
            let fmt = a.common.format()?;
            let (constants, est) = scan(&cfg, &a.condition)?;
            let w = crate::weights::load_weight(&cfg.weight)?;
            let bytes = match fmt {
                Format::Csv => csv_bytes(&w.name, &constants.iter().collect::<Vec<_>>())?,
                Format::Json => json_bytes(&serde_json::json!({ "constants": constants, "critical": est }))?,
            };
            emit(a.common.out.as_deref(), &bytes)?;
            if let Some(e) = est {
                eprintln!("critical {}: {}", e.condition, opt(e.estimate));
            }
            Ok(0)
        }
        Command::Cz(a) => {
            let measure = match a.measure.as_str() {
                "lebesgue" => Measure::Lebesgue,
                "weighted" => Measure::Weighted,
                m => return Err(Error::Domain(format!("unknown measure `{m}`"))),
            };
            let exponent = if a.reciprocal { -1.0 } else { 1.0 };
            let r = cz(&a.weight, a.depth, a.lambda, a.relative, measure, exponent)?;
            match a.format.parse::<Format>()? {
                Format::Json => {
                    print!("{}", r.text());
                    if let Some(out) = &a.out {
                        write_atomic(out, &json_bytes(&r)?)?;
                    }
                }
                Format::Csv => {
                    let mut wr = csv::Writer::from_writer(Vec::new());
                    let to_io = |e: csv::Error| Error::Io(std::io::Error::other(e));
                    wr.write_record(["path", "lambda", "average", "measure"]).map_err(to_io)?;
                    let m = if measure == Measure::Lebesgue { "lebesgue" } else { "weighted" };
                    for c in &r.selected {
                        wr.write_record([c.path.as_str(), &r.lambda.to_string(), &c.average().to_string(), m])
                            .map_err(to_io)?;
                    }
                    let bytes = wr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
                    match &a.out {
                        Some(out) => {
                            print!("{}", r.text());
                            write_atomic(out, &bytes)?;
                        }
                        None => emit(None, &bytes)?,
                    }
                }
            }
            Ok(if r.violations.is_empty() { 0 } else { 2 })
        }
        Command::Oracle(a) => {
            let w = crate::weights::load_weight(&a.weight)?;
            let rows = oracle_rows(&w, a.depth, &a.p_grid)?;
            let worst = rows.iter().filter_map(|r| r.rel_err).fold(0.0, f64::max);
            let bytes = match a.format.parse::<Format>()? {
                Format::Json => json_bytes(&rows)?,
                Format::Csv => {
                    let mut wr = csv::Writer::from_writer(Vec::new());
                    let to_io = |e: csv::Error| Error::Io(std::io::Error::other(e));
                    wr.write_record(["path", "exponent", "cached", "oracle", "rel_err", "note"]).map_err(to_io)?;
                    for r in &rows {
                        wr.write_record([
                            r.path.clone(),
                            r.exponent.to_string(),
                            super::fmt_value(r.cached),
                            r.oracle.map_or(String::new(), super::fmt_value),
                            r.rel_err.map_or(String::new(), super::fmt_value),
                            r.note.clone(),
                        ])
                        .map_err(to_io)?;
                    }
                    wr.into_inner().map_err(|e| Error::Io(e.into_error()))?
                }
            };
            emit(a.out.as_deref(), &bytes)?;
            eprintln!("{} boxes, max relative error {worst:.3e} (tolerance {:.1e})", rows.len(), a.tolerance);
            Ok(if worst <= a.tolerance { 0 } else { 1 })
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or("n/a".into(), |x| format!("{x}"))
}

/// Display name of a flag in the theorem table.
pub fn label(flag: &str) -> &str {
    match flag {
        "fw" => "FW",
        "mdw" => "(Mdw)",
        "binfty" => "B_∞",
        "mlp" => "(MLp)",
        "rhi" => "RHI",
        "bq" => "B_q",
        "mlp_minimal" => "(mLp)",
        "blog" => "B_log",
        "mlog" => "(mlog)",
        other => other,
    }
}

/// Human-readable theorem table.
pub fn suite_table(s: &SuiteReport) -> String {
    let side = |names: &[String]| {
        names.iter().map(|n| format!("{} {}", label(n), s.flag(n).symbol())).collect::<Vec<_>>().join(", ")
    };
    let mut out = format!("{} at depth {} ({} boxes)\n", s.weight, s.depth, s.family_size);
    for r in &s.rows {
        out.push_str(&format!(
            "{:<14} {:<28} ⇔ {:<28} → {}\n",
            r.theorem,
            side(&r.left),
            side(&r.right),
            r.outcome
        ));
    }
    for l in &s.lemmas {
        let h = match l.holds {
            Some(true) => "holds",
            Some(false) => "FAILS",
            None => "n/a",
        };
        out.push_str(&format!("  {:<28} {:<6} {}\n", l.name, h, l.detail));
    }
    out
}
