//! Analysis runs, report records and their JSON/CSV serialisation.

pub mod cli;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::conditions::family::radial_lengths;
use crate::conditions::scan::CriticalEstimate;
use crate::conditions::{
    bmo_c_norm_log, bp_constant, critical_exponent, rhi_constant, theorem_suite, BoxFamily, ConditionConstant,
    FamilyConfig, FamilyMode, Orientation, SuiteConfig, SuiteReport,
};
use crate::error::{Error, Result};
use crate::geometry::{build_tree, DyadicArc, DyadicTree, MAX_DEPTH};
use crate::operators::{child_measure_ratio, cz_decompose, cz_invariant_violations, cz_level_set_bound_check, CzNode};
use crate::quad::RTOL;
use crate::weights::oracle::oracle_box_integral_ln;
use crate::weights::{BoxIntegralCache, Measure, Weight, WeightKind};

/// Version tag carried by every JSON report.
pub const SCHEMA: &str = "carleson-report/v1";
/// Header of the long-format CSV.
pub const CSV_HEADER: [&str; 6] = ["weight", "condition", "param", "depth", "value", "verdict"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(Error::Domain(format!("unknown format `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AnalysisConfig {
    /// `builtin:NAME?k=v` or a path to a weight definition.
    pub weight: String,
    pub depth: u32,
    pub p_grid: Vec<f64>,
    pub alpha_grid: Vec<f64>,
    pub a_grid: Vec<f64>,
    pub lambda_grid: Vec<f64>,
    pub family: FamilyMode,
    pub shifts: usize,
    pub per_decade: usize,
    /// Bisection width for critical exponents.
    pub tolerance: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        let s = SuiteConfig::default();
        AnalysisConfig {
            weight: "builtin:constant".into(),
            depth: s.depth,
            p_grid: s.p_grid,
            alpha_grid: s.alpha_grid,
            a_grid: s.a_grid,
            lambda_grid: s.lambda_grid,
            family: s.family,
            shifts: s.shifts,
            per_decade: s.per_decade,
            tolerance: 0.01,
        }
    }
}

fn sorted_grid(name: &str, g: &mut Vec<f64>) -> Result<()> {
    if g.is_empty() {
        return Err(Error::Domain(format!("{name} is empty")));
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("{name} has a non-finite entry")));
    }
    g.sort_by(|a, b| a.partial_cmp(b).unwrap());
    g.dedup();
    Ok(())
}

impl AnalysisConfig {
    /// Sorts and deduplicates the grids and checks their ranges.
    pub fn validate(&mut self) -> Result<()> {
        if self.depth > MAX_DEPTH {
            return Err(Error::DepthGuard(self.depth));
        }
        sorted_grid("p-grid", &mut self.p_grid)?;
        sorted_grid("alpha-grid", &mut self.alpha_grid)?;
        sorted_grid("A-grid", &mut self.a_grid)?;
        sorted_grid("lambda-grid", &mut self.lambda_grid)?;
        if self.p_grid[0] <= 1.0 {
            return Err(Error::Domain("p-grid entries must exceed 1".into()));
        }
        if self.alpha_grid[0] <= 0.0 || *self.alpha_grid.last().unwrap() >= 1.0 {
            return Err(Error::Domain("alpha-grid entries must lie in (0, 1)".into()));
        }
        if self.a_grid[0] <= 1.0 {
            return Err(Error::Domain("A-grid entries must exceed 1".into()));
        }
        if self.lambda_grid[0] <= 1.0 {
            return Err(Error::Domain("lambda-grid entries are multiples of 1/w_Q and must exceed 1".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Domain("tolerance must be positive".into()));
        }
        Ok(())
    }

    pub fn suite(&self) -> SuiteConfig {
        SuiteConfig {
            depth: self.depth,
            p_grid: self.p_grid.clone(),
            alpha_grid: self.alpha_grid.clone(),
            a_grid: self.a_grid.clone(),
            lambda_grid: self.lambda_grid.clone(),
            family: self.family,
            shifts: self.shifts,
            per_decade: self.per_decade,
            root: DyadicArc::circle(),
        }
    }

    pub fn family(&self) -> FamilyConfig {
        FamilyConfig {
            mode: self.family,
            depth: self.depth,
            shifts: self.shifts,
            per_decade: self.per_decade,
            root: DyadicArc::circle(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightMeta {
    pub name: String,
    pub source: String,
    pub kind: String,
    pub params: BTreeMap<String, f64>,
}

impl WeightMeta {
    pub fn of(w: &Weight, source: &str) -> Self {
        let kind = match w.kind {
            WeightKind::Radial(_) => "radial",
            WeightKind::Product { .. } => "product",
            WeightKind::General(_) => "general",
        };
        WeightMeta { name: w.name.clone(), source: source.to_string(), kind: kind.into(), params: w.params.clone() }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Telemetry {
    pub wall_seconds: f64,
    pub stages: BTreeMap<String, f64>,
    pub quadrature_rtol: f64,
    /// Largest relative gap between cached and brute-force box integrals on
    /// the spot-checked boxes.
    pub oracle_max_rel_err: Option<f64>,
    pub oracle_boxes: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionReport {
    pub schema: String,
    pub weight: WeightMeta,
    pub config: AnalysisConfig,
    pub suite: SuiteReport,
    pub critical: Vec<CriticalEstimate>,
    pub bmo_log: Option<ConditionConstant>,
    pub telemetry: Telemetry,
}

impl ConditionReport {
    /// Every constant in the report: the suite's, then the scan points.
    pub fn constants(&self) -> Vec<&ConditionConstant> {
        let mut v: Vec<&ConditionConstant> = self.suite.constants.iter().collect();
        for c in &self.critical {
            v.extend(c.constants());
        }
        v.extend(self.bmo_log.iter());
        v
    }

    pub fn critical(&self, condition: &str) -> Option<&CriticalEstimate> {
        self.critical.iter().find(|c| c.condition == condition)
    }
}

/// Box-family size for mean oscillations of non-radial weights, which cost a
/// 2D quadrature per box.
const BMO_DEPTH_GENERAL: u32 = 6;

/// Runs the full analysis of one weight.
pub fn analyze(cfg: &AnalysisConfig) -> Result<ConditionReport> {
    let start = Instant::now();
    let w = crate::weights::load_weight(&cfg.weight)?;
    let suite = theorem_suite(&w, &cfg.suite())?;
    let mut stages = suite.timings.clone();

    let t = Instant::now();
    let fam = BoxFamily::build(&w, &cfg.family(), &[1.0])?;
    let rhi = critical_exponent("rhi", &cfg.p_grid, Orientation::BoundedBelow, cfg.tolerance, &|p| rhi_constant(&fam, p))?;
    let bq = critical_exponent("bp", &cfg.p_grid, Orientation::BoundedAbove, cfg.tolerance, &|p| bp_constant(&fam, p))?;
    stages.insert("critical".into(), t.elapsed().as_secs_f64());

    let t = Instant::now();
    let bmo_log = if w.is_radial() {
        Some(bmo_c_norm_log(&fam)?)
    } else {
        let small = FamilyConfig { depth: cfg.depth.min(BMO_DEPTH_GENERAL), ..cfg.family() };
        Some(bmo_c_norm_log(&BoxFamily::build(&w, &small, &[1.0])?)?)
    };
    stages.insert("bmo".into(), t.elapsed().as_secs_f64());

    let t = Instant::now();
    let (oracle_max_rel_err, oracle_boxes) = spot_check(&w, cfg.depth.min(2))?;
    stages.insert("oracle".into(), t.elapsed().as_secs_f64());

    Ok(ConditionReport {
        schema: SCHEMA.into(),
        weight: WeightMeta::of(&w, &cfg.weight),
        config: cfg.clone(),
        suite,
        critical: vec![rhi, bq],
        bmo_log,
        telemetry: Telemetry {
            wall_seconds: start.elapsed().as_secs_f64(),
            stages,
            quadrature_rtol: RTOL,
            oracle_max_rel_err,
            oracle_boxes,
        },
    })
}

/// Largest relative gap between cached `∫_Q w` and the brute-force oracle on
/// the boxes down to `depth`; `None` when the oracle cannot evaluate them.
fn spot_check(w: &Weight, depth: u32) -> Result<(Option<f64>, usize)> {
    let rows = oracle_rows(w, depth, &[1.0])?;
    let errs: Vec<f64> = rows.iter().filter_map(|r| r.rel_err).collect();
    if errs.is_empty() {
        return Ok((None, 0));
    }
    Ok((Some(errs.iter().cloned().fold(0.0, f64::max)), errs.len()))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleRow {
    pub path: String,
    pub exponent: f64,
    #[serde(with = "crate::extended")]
    pub cached: f64,
    #[serde(with = "crate::extended::opt")]
    pub oracle: Option<f64>,
    #[serde(with = "crate::extended::opt")]
    pub rel_err: Option<f64>,
    pub note: String,
}

/// Cached against brute-force `∫_Q w^s` on every tree box down to `depth`.
pub fn oracle_rows(w: &Weight, depth: u32, exponents: &[f64]) -> Result<Vec<OracleRow>> {
    let tree = build_tree(DyadicArc::circle(), depth.min(6))?;
    let cache = BoxIntegralCache::build(w, &tree, exponents)?;
    let mut rows = Vec::new();
    let nodes: Vec<usize> =
        if cache.is_per_depth() { (0..=tree.depth).map(DyadicTree::level_start).collect() } else { (0..tree.node_count()).collect() };
    for node in nodes {
        for &s in exponents {
            let cached = cache.ln_box(node, s)?;
            let (oracle, rel_err, note) = match oracle_box_integral_ln(w, &tree.node_box(node), s, 1e-9) {
                Ok(o) => {
                    let rel = if o.is_finite() && cached.is_finite() { Some(((cached - o).exp() - 1.0).abs()) } else { None };
                    (Some(o.exp()), rel, String::new())
                }
                Err(e) => (None, None, e.to_string()),
            };
            rows.push(OracleRow { path: tree.arc(node).path(), exponent: s, cached: cached.exp(), oracle, rel_err, note });
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CzReport {
    pub weight: String,
    pub depth: u32,
    pub lambda: f64,
    pub measure: Measure,
    /// `f = w^exponent` (`-1` for `1/w`).
    pub exponent: f64,
    pub root_average: f64,
    pub selected: Vec<CzNode>,
    pub achieved_constant: f64,
    pub bound: f64,
    pub child_measure_ratio: f64,
    /// `(λ μ(Ω), ∫_Ω f dμ, C λ μ(Ω))`.
    pub level_set: (f64, f64, f64),
    pub violations: Vec<String>,
}

impl CzReport {
    pub fn text(&self) -> String {
        let mut out = format!(
            "CZ decomposition of {} at λ = {} ({} measure, f = w^{}), root average {}\n{} boxes selected\n",
            self.weight,
            self.lambda,
            match self.measure {
                Measure::Lebesgue => "Lebesgue",
                Measure::Weighted => "weighted",
            },
            self.exponent,
            self.root_average,
            self.selected.len()
        );
        for c in &self.selected {
            out.push_str(&format!("  {:<24} avg/λ = {:.6}\n", if c.path.is_empty() { "(root)" } else { &c.path }, c.average() / self.lambda));
        }
        out.push_str(&format!(
            "achieved constant {:.6} (bound {:.6}); λμ(Ω) = {:.6e} < ∫_Ω f dμ = {:.6e} <= Cλμ(Ω) = {:.6e}\n",
            self.achieved_constant, self.bound, self.level_set.0, self.level_set.1, self.level_set.2
        ));
        if self.measure == Measure::Weighted {
            out.push_str(&format!("measured C(μ) = max μ(parent)/μ(child) = {:.6}\n", self.child_measure_ratio));
        }
        if self.violations.is_empty() {
            out.push_str("invariants: disjoint, λ < avg <= Cλ, ancestors <= λ, union = superlevel set: all hold\n");
        } else {
            out.push_str(&format!("invariants: {} violations\n", self.violations.len()));
            for v in &self.violations {
                out.push_str(&format!("  {v}\n"));
            }
        }
        out
    }
}

/// CZ decomposition of `f = w^exponent` at `λ` (or `λ` times the root
/// average when `relative`).
pub fn cz(source: &str, depth: u32, lambda: f64, relative: bool, measure: Measure, exponent: f64) -> Result<CzReport> {
    let w = crate::weights::load_weight(source)?;
    let tree = build_tree(DyadicArc::circle(), depth)?;
    let mut exps = vec![1.0];
    match measure {
        Measure::Lebesgue if exponent != 1.0 => {
            return Err(Error::Unsupported("Lebesgue CZ decomposes w itself; use the weighted measure for w^t".into()))
        }
        Measure::Lebesgue => {}
        Measure::Weighted => exps.push(exponent + 1.0),
    }
    let cache = BoxIntegralCache::build(&w, &tree, &exps)?;
    let root_average = crate::operators::ln_cz_average(&cache, 0, measure, exponent)?.exp();
    let lambda = if relative { lambda * root_average } else { lambda };
    let d = cz_decompose(&tree, &cache, lambda, measure, exponent)?;
    let violations = cz_invariant_violations(&tree, &cache, &d)?;
    let level_set = cz_level_set_bound_check(&d, &cache);
    Ok(CzReport {
        weight: w.name.clone(),
        depth,
        lambda,
        measure,
        exponent,
        root_average,
        achieved_constant: d.achieved_constant,
        bound: d.bound,
        child_measure_ratio: child_measure_ratio(&tree, &cache),
        selected: d.selected,
        level_set,
        violations,
    })
}

/// Conditions accepted by the `scan` command.
pub const SCAN_CONDITIONS: [&str; 11] = ["bp", "b1", "rhi", "blog", "binfty", "doubling", "fw", "mlp", "mdw", "mlp_minimal", "mlog"];

/// Depth traces of one condition over its parameter grid; exponents of
/// `bp` and `rhi` are refined by bisection near the verdict flip.
pub fn scan(cfg: &AnalysisConfig, condition: &str) -> Result<(Vec<ConditionConstant>, Option<CriticalEstimate>)> {
    use crate::conditions::tree::{
        fw_constant, mdw_condition, mlog_condition, mlp_condition, mlp_minimal_condition, FwVariant, TreeContext,
    };
    use crate::conditions::{b1_constant, binfty_profile, blog_constant, doubling_constant};
    if !SCAN_CONDITIONS.contains(&condition) {
        return Err(Error::UnknownCondition(condition.to_string()));
    }
    let w = crate::weights::load_weight(&cfg.weight)?;
    let root = DyadicArc::circle();
    match condition {
        "bp" | "b1" | "rhi" | "blog" | "binfty" | "doubling" => {
            let fam = BoxFamily::build(&w, &cfg.family(), &[1.0])?;
            match condition {
                "bp" | "rhi" => {
                    let (o, f): (Orientation, &(dyn Fn(f64) -> Result<ConditionConstant> + Sync)) = if condition == "bp" {
                        (Orientation::BoundedAbove, &|p| bp_constant(&fam, p))
                    } else {
                        (Orientation::BoundedBelow, &|p| rhi_constant(&fam, p))
                    };
                    let est = critical_exponent(condition, &cfg.p_grid, o, cfg.tolerance, f)?;
                    Ok((est.constants().cloned().collect(), Some(est)))
                }
                "b1" => match b1_constant(&fam)? {
                    Some(c) => Ok((vec![c], None)),
                    None => Err(Error::Unsupported(format!("B_1 needs an exact essential infimum, `{}` has none", w.name))),
                },
                "blog" => Ok((vec![blog_constant(&fam)?], None)),
                "binfty" => Ok((binfty_profile(&fam, &cfg.alpha_grid)?, None)),
                _ => Ok((vec![doubling_constant(&fam)?], None)),
            }
        }
        "fw" => {
            let ctx = TreeContext::build(&w, root, cfg.depth, &[1.0])?;
            let mut v = vec![fw_constant(&ctx, FwVariant::Dyadic, cfg.shifts)?];
            if w.is_radial() {
                v.push(fw_constant(&ctx, FwVariant::RadialExact, cfg.shifts)?);
            }
            Ok((v, None))
        }
        "mlp" => {
            let mut exps = vec![1.0];
            exps.extend(&cfg.p_grid);
            let ctx = TreeContext::build(&w, root, cfg.depth, &exps)?;
            Ok((cfg.p_grid.iter().map(|&p| mlp_condition(&ctx, p)).collect::<Result<_>>()?, None))
        }
        "mlp_minimal" => {
            let mut exps = vec![1.0];
            exps.extend(cfg.p_grid.iter().map(|p| 1.0 / (1.0 - p)));
            let ctx = TreeContext::build(&w, root, cfg.depth, &exps)?;
            Ok((cfg.p_grid.iter().map(|&p| Ok(mlp_minimal_condition(&ctx, p)?.ratio)).collect::<Result<_>>()?, None))
        }
        "mlog" => {
            let ctx = TreeContext::build(&w, root, cfg.depth, &[1.0])?;
            Ok((vec![mlog_condition(&ctx)?.constant], None))
        }
        _ => {
            let ctx = TreeContext::build(&w, root, cfg.depth, &[1.0])?;
            Ok((mdw_condition(&ctx, &cfg.a_grid)?, None))
        }
    }
}

/// Shortest round-trip decimal, with `inf`/`-inf`/`nan` spelled out.
pub fn fmt_value(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn fmt_params(c: &ConditionConstant) -> String {
    c.params.iter().map(|(k, v)| format!("{k}={}", fmt_value(*v))).collect::<Vec<_>>().join(";")
}

/// Long-format CSV: one row per constant and depth.
pub fn write_csv<W: Write>(out: W, weight: &str, constants: &[&ConditionConstant]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    wr.write_record(CSV_HEADER).map_err(csv_err)?;
    for c in constants {
        let param = fmt_params(c);
        for t in &c.trace {
            let depth = t.depth.to_string();
            let value = fmt_value(t.value);
            wr.write_record([weight, &c.name, &param, &depth, &value, c.verdict.as_str()]).map_err(csv_err)?;
        }
    }
    wr.flush()?;
    Ok(())
}

/// Writes `bytes` to `path` through a temporary file in the same directory,
/// so a failed run never leaves a partial file behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn to_json(r: &ConditionReport) -> Result<String> {
    serde_json::to_string_pretty(r).map_err(|e| Error::Schema(e.to_string()))
}

pub fn from_json(s: &str) -> Result<ConditionReport> {
    let r: ConditionReport = serde_json::from_str(s).map_err(|e| Error::Schema(e.to_string()))?;
    if r.schema != SCHEMA {
        return Err(Error::Schema(format!("expected schema {SCHEMA}, found {}", r.schema)));
    }
    Ok(r)
}

/// Lengths used by the radial-lengths family, exposed for plotting scripts.
pub fn family_lengths(depth: u32, per_decade: usize) -> Vec<(f64, u32)> {
    radial_lengths(1.0, depth, per_decade)
}
