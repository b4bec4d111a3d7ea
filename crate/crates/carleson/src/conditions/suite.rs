//! Cross-checks of the characterization theorems on one weight.
//!
//! Every condition gets a three-valued flag from its depth traces. Each
//! theorem's two sides are combined with three-valued logic and compared:
//! both sides known and equal is consistent, known and different is
//! inconsistent, anything else inconclusive. Nothing here can refute a
//! theorem; an inconsistent row only means the discretisation misled us, and
//! the report lists the constants involved.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::DyadicArc;
use crate::operators::{cz_decompose, cz_level_set_bound_check};
use crate::weights::{Measure, Weight};

use super::family::{b1_constant, binfty_profile, blog_constant, bp_constant, doubling_constant, rhi_constant};
use super::tree::{
    cell_ratio_sup, fw_constant, keyestimate_check, maximal_power_check, closing_epsilon, mdw_condition, mlog_condition,
    mlp_condition, mlp_minimal_condition, FwVariant, KeyEstimate, MaximalPowerBound, MinimalLog, MinimalLp, TreeContext,
};
use super::{BoxFamily, ConditionConstant, FamilyConfig, FamilyMode, Verdict};

/// Level below which `b(A)` and `β(α)` count as "less than one".
pub const PROPER_FRACTION: f64 = 0.9;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub depth: u32,
    pub p_grid: Vec<f64>,
    pub alpha_grid: Vec<f64>,
    pub a_grid: Vec<f64>,
    /// Levels for the key estimate as multiples of `1/w_Q`.
    pub lambda_grid: Vec<f64>,
    pub family: FamilyMode,
    pub shifts: usize,
    pub per_decade: usize,
    pub root: DyadicArc,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            depth: 16,
            p_grid: vec![1.01, 1.05, 1.1, 1.2, 1.5, 2.0, 3.0, 5.0, 10.0],
            alpha_grid: vec![0.5, 0.2, 0.1, 0.05, 0.01, 0.001],
            a_grid: vec![2.0, 4.0, 8.0],
            lambda_grid: vec![2.0, 3.0, 10.0],
            family: FamilyMode::Auto,
            shifts: 3,
            per_decade: 200,
            root: DyadicArc::circle(),
        }
    }
}

/// Three-valued truth.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TheoremVerdict {
    Holds,
    Fails,
    Unknown,
}

impl TheoremVerdict {
    pub fn and(self, o: Self) -> Self {
        use TheoremVerdict::*;
        match (self, o) {
            (Fails, _) | (_, Fails) => Fails,
            (Holds, Holds) => Holds,
            _ => Unknown,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            TheoremVerdict::Holds => "✓",
            TheoremVerdict::Fails => "✗",
            TheoremVerdict::Unknown => "?",
        }
    }

    fn from_verdict(v: Verdict) -> Self {
        match v {
            Verdict::Bounded => TheoremVerdict::Holds,
            Verdict::Divergent => TheoremVerdict::Fails,
            Verdict::Inconclusive => TheoremVerdict::Unknown,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Outcome {
    Consistent,
    Inconsistent,
    Inconclusive,
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Outcome::Consistent => "CONSISTENT",
            Outcome::Inconsistent => "INCONSISTENT",
            Outcome::Inconclusive => "INCONCLUSIVE",
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Flag {
    pub verdict: TheoremVerdict,
    pub reason: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TheoremRow {
    pub theorem: String,
    pub left: Vec<String>,
    pub right: Vec<String>,
    pub left_verdict: TheoremVerdict,
    pub right_verdict: TheoremVerdict,
    pub outcome: Outcome,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LemmaCheck {
    pub name: String,
    /// `None` when the hypothesis was not verified.
    pub holds: Option<bool>,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteReport {
    pub weight: String,
    pub depth: u32,
    pub family: FamilyMode,
    pub family_size: usize,
    /// Fraction of the root box below the deepest cells.
    pub uncovered_fraction: f64,
    pub constants: Vec<ConditionConstant>,
    pub mlp_minimal_global: BTreeMap<String, String>,
    pub mlog_global: String,
    pub flags: BTreeMap<String, Flag>,
    pub rows: Vec<TheoremRow>,
    pub lemmas: Vec<LemmaCheck>,
    pub keyestimate: Vec<KeyEstimate>,
    pub maximal_power: Option<MaximalPowerBound>,
    pub diagnostics: Vec<String>,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<String, f64>,
}

impl SuiteReport {
    pub fn inconsistent(&self) -> bool {
        self.rows.iter().any(|r| r.outcome == Outcome::Inconsistent)
    }

    pub fn flag(&self, name: &str) -> TheoremVerdict {
        self.flags.get(name).map_or(TheoremVerdict::Unknown, |f| f.verdict)
    }

    pub fn find(&self, name: &str) -> impl Iterator<Item = &ConditionConstant> {
        let name = name.to_string();
        self.constants.iter().filter(move |c| c.name == name)
    }
}

fn fmt_ext(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6e}")
    } else {
        format!("{v}")
    }
}

/// Exponent for the maximal-function side conditions: the midpoint of
/// `(1, 4L/(4L-1))`, with `L` raised to its Jensen floor of 1 when
/// round-off undercuts it.
pub fn self_improvement_exponent(fw: f64) -> Option<f64> {
    let l = fw.max(1.0);
    l.is_finite().then(|| 0.5 * (1.0 + 4.0 * l / (4.0 * l - 1.0)))
}

/// Some grid value below [`PROPER_FRACTION`] at full depth.
fn proper_fraction_flag(cs: &[ConditionConstant], key: &str) -> Flag {
    let hit = cs.iter().find(|c| c.value < PROPER_FRACTION && c.verdict != Verdict::Divergent);
    match hit {
        Some(c) => Flag {
            verdict: TheoremVerdict::Holds,
            reason: format!("{} = {:.4} at {key} = {}", c.name, c.value, c.param(key).unwrap_or(f64::NAN)),
        },
        None => Flag {
            verdict: TheoremVerdict::Fails,
            reason: format!("no {key} in the grid gives a value below {PROPER_FRACTION}"),
        },
    }
}

/// Holds when some exponent is bounded, fails when none is and some diverge.
fn exists_bounded_flag(cs: &[ConditionConstant]) -> Flag {
    if let Some(c) = cs.iter().find(|c| c.verdict == Verdict::Bounded) {
        let at = c.param("p").map_or_else(|| c.name.clone(), |p| format!("p = {p}"));
        return Flag { verdict: TheoremVerdict::Holds, reason: format!("bounded at {at}") };
    }
    if cs.iter().any(|c| c.verdict == Verdict::Divergent) {
        return Flag { verdict: TheoremVerdict::Fails, reason: "no bounded exponent in the grid".into() };
    }
    Flag { verdict: TheoremVerdict::Unknown, reason: "every exponent inconclusive".into() }
}

fn trace_flag(c: &ConditionConstant) -> Flag {
    Flag { verdict: TheoremVerdict::from_verdict(c.verdict), reason: format!("{} trace {}", c.name, c.verdict.as_str()) }
}

fn mlp_minimal_flag(ms: &[(f64, MinimalLp)]) -> Flag {
    let n = ms.len();
    for i in 0..n {
        let tail_bounded = ms[i..].iter().all(|(_, m)| m.ratio.verdict == Verdict::Bounded);
        if tail_bounded && ms[i].1.ln_global.is_finite() {
            return Flag {
                verdict: TheoremVerdict::Holds,
                reason: format!("bounded for p >= {} and 1/w integrable at that power", ms[i].0),
            };
        }
    }
    match ms.last() {
        Some((p, m)) if m.ratio.verdict == Verdict::Divergent || m.ln_global == f64::INFINITY => Flag {
            verdict: TheoremVerdict::Fails,
            reason: format!("largest exponent p = {p} fails"),
        },
        _ => Flag { verdict: TheoremVerdict::Unknown, reason: "no exponent settled".into() },
    }
}

fn mlog_flag(m: &MinimalLog) -> Flag {
    let g = m.global_log_integral;
    if !g.is_finite() || m.constant.verdict == Verdict::Divergent {
        return Flag { verdict: TheoremVerdict::Fails, reason: format!("∫ log w = {g}, trace {}", m.constant.verdict.as_str()) };
    }
    if m.constant.verdict == Verdict::Bounded {
        return Flag { verdict: TheoremVerdict::Holds, reason: format!("deficit bounded, ∫ log w = {g:.6}") };
    }
    Flag { verdict: TheoremVerdict::Unknown, reason: "deficit trace inconclusive".into() }
}

fn fw_flag(dy: &ConditionConstant, radial: Option<&ConditionConstant>) -> Flag {
    let mut v = TheoremVerdict::from_verdict(dy.verdict);
    if let Some(r) = radial {
        v = v.and(TheoremVerdict::from_verdict(r.verdict));
    }
    let extra = radial.map(|r| format!(", radial-exact {}", r.verdict.as_str())).unwrap_or_default();
    Flag { verdict: v, reason: format!("dyadic {}{extra}", dy.verdict.as_str()) }
}

fn row(theorem: &str, flags: &BTreeMap<String, Flag>, left: &[&str], right: &[&str]) -> TheoremRow {
    let side = |names: &[&str]| {
        names
            .iter()
            .map(|n| flags.get(*n).map_or(TheoremVerdict::Unknown, |f| f.verdict))
            .fold(TheoremVerdict::Holds, TheoremVerdict::and)
    };
    let (l, r) = (side(left), side(right));
    let outcome = match (l, r) {
        (TheoremVerdict::Unknown, _) | (_, TheoremVerdict::Unknown) => Outcome::Inconclusive,
        (a, b) if a == b => Outcome::Consistent,
        _ => Outcome::Inconsistent,
    };
    TheoremRow {
        theorem: theorem.to_string(),
        left: left.iter().map(|s| s.to_string()).collect(),
        right: right.iter().map(|s| s.to_string()).collect(),
        left_verdict: l,
        right_verdict: r,
        outcome,
    }
}

/// The theorem rows as `(theorem, left conditions, right conditions)`.
pub const THEOREMS: [(&str, &[&str], &[&str]); 5] = [
    ("binfty", &["fw", "mdw"], &["binfty"]),
    ("rhi", &["fw", "mlp"], &["rhi"]),
    ("bq", &["bq"], &["binfty", "mlp_minimal"]),
    ("blog", &["blog"], &["binfty", "mlog"]),
    ("minimal-lp", &["rhi", "mlp_minimal"], &["bq", "mlp"]),
];

/// Runs every condition on one weight and checks the theorems.
pub fn theorem_suite(w: &Weight, cfg: &SuiteConfig) -> Result<SuiteReport> {
    let mut timings = BTreeMap::new();
    let mut clock = Instant::now();
    let mut lap = |name: &str, timings: &mut BTreeMap<String, f64>| {
        timings.insert(name.to_string(), clock.elapsed().as_secs_f64());
        clock = Instant::now();
    };
    let mut exps = vec![1.0, 0.0];
    for &p in &cfg.p_grid {
        exps.push(p);
        exps.push(1.0 / (1.0 - p));
    }

    let fam_cfg = FamilyConfig {
        mode: cfg.family,
        depth: cfg.depth,
        shifts: cfg.shifts,
        per_decade: cfg.per_decade,
        root: cfg.root,
    };
    let fam = BoxFamily::build(w, &fam_cfg, &exps)?;
    let bp: Vec<ConditionConstant> = cfg.p_grid.iter().map(|&p| bp_constant(&fam, p)).collect::<Result<_>>()?;
    let rhi: Vec<ConditionConstant> = cfg.p_grid.iter().map(|&p| rhi_constant(&fam, p)).collect::<Result<_>>()?;
    let b1 = b1_constant(&fam)?;
    let blog = blog_constant(&fam)?;
    let doubling = doubling_constant(&fam)?;
    let binfty = binfty_profile(&fam, &cfg.alpha_grid)?;
    lap("family", &mut timings);

    let ctx = TreeContext::build(w, cfg.root, cfg.depth, &exps)?;
    let fw = fw_constant(&ctx, FwVariant::Dyadic, cfg.shifts)?;
    let fw_radial = if w.is_radial() { Some(fw_constant(&ctx, FwVariant::RadialExact, cfg.shifts)?) } else { None };
    let p_mlp = self_improvement_exponent(fw.value);
    let (mlp, rhi_at_mlp) = match p_mlp {
        Some(p) => {
            let c = TreeContext::build(w, cfg.root, cfg.depth, &[1.0, p])?;
            (Some(mlp_condition(&c, p)?), Some(rhi_constant(&fam, p)?))
        }
        None => (None, None),
    };
    let mut minimal = Vec::new();
    for &p in &cfg.p_grid {
        minimal.push((p, mlp_minimal_condition(&ctx, p)?));
    }
    let mlog = mlog_condition(&ctx)?;
    let mdw = mdw_condition(&ctx, &cfg.a_grid)?;
    let ratio = cell_ratio_sup(&ctx)?;
    lap("tree", &mut timings);

    let mut flags = BTreeMap::new();
    flags.insert("fw".to_string(), fw_flag(&fw, fw_radial.as_ref()));
    flags.insert("mdw".to_string(), proper_fraction_flag(&mdw, "A"));
    flags.insert("binfty".to_string(), proper_fraction_flag(&binfty, "alpha"));
    flags.insert("rhi".to_string(), exists_bounded_flag(&rhi));
    // q = 1 counts too, where B_1 is available
    let bq: Vec<ConditionConstant> = bp.iter().chain(&b1).cloned().collect();
    flags.insert("bq".to_string(), exists_bounded_flag(&bq));
    flags.insert(
        "mlp".to_string(),
        mlp.as_ref().map_or(Flag { verdict: TheoremVerdict::Unknown, reason: "FW constant not finite".into() }, |c| {
            let mut f = trace_flag(c);
            f.reason = format!("p = {:.4}: {}", c.param("p").unwrap_or(f64::NAN), f.reason);
            f
        }),
    );
    flags.insert("mlp_minimal".to_string(), mlp_minimal_flag(&minimal));
    flags.insert("mlog".to_string(), mlog_flag(&mlog));
    flags.insert("blog".to_string(), trace_flag(&blog));
    let rows: Vec<TheoremRow> = THEOREMS.iter().map(|(t, l, r)| row(t, &flags, l, r)).collect();

    // lemma-level checks, each only where its hypothesis is verified
    let mut lemmas = Vec::new();
    let ab: Vec<(f64, f64)> =
        binfty.iter().filter_map(|c| Some((c.param("alpha")?, c.value))).filter(|&(_, b)| b < 1.0).collect();
    let binfty_ok = flags["binfty"].verdict == TheoremVerdict::Holds;
    if binfty_ok {
        let bound = ab.iter().map(|&(_, b)| (2.0 - b) / (1.0 - b)).fold(f64::INFINITY, f64::min);
        lemmas.push(LemmaCheck {
            name: "binfty-implies-fw".into(),
            holds: Some(fw.value <= bound * (1.0 + 1e-9)),
            detail: format!("FW {:.6} <= (2-β)/(1-β) = {:.6}", fw.value, bound),
        });
    }
    if let (Some(m), Some(r)) = (&mlp, &rhi_at_mlp) {
        if r.verdict == Verdict::Bounded {
            lemmas.push(LemmaCheck {
                name: "rhi-implies-mlp".into(),
                holds: Some(m.value <= r.value * (1.0 + 1e-9)),
                detail: format!("MLp ratio {:.6} <= RHI constant {:.6}", m.value, r.value),
            });
        }
    }
    if let Some(b0) = bp.iter().find(|c| c.verdict == Verdict::Bounded) {
        let p0 = b0.param("p").unwrap();
        let bound = b0.value.powf(1.0 / (p0 - 1.0));
        let worst = minimal
            .iter()
            .filter(|(p, _)| *p >= p0)
            .map(|(_, m)| m.ratio.value)
            .fold(f64::NEG_INFINITY, f64::max);
        lemmas.push(LemmaCheck {
            name: "bq-implies-mlp-minimal".into(),
            holds: Some(worst <= bound * (1.0 + 1e-9)),
            detail: format!("max (mLp) ratio for p >= {p0}: {} <= [w]_{p0}^(1/(p0-1)) = {}", fmt_ext(worst), fmt_ext(bound)),
        });
    }
    if blog.verdict == Verdict::Bounded {
        let deficit = mlog.constant.value.ln();
        lemmas.push(LemmaCheck {
            name: "blog-implies-mlog".into(),
            holds: Some(deficit <= blog.value.ln() + 1e-9),
            detail: format!("deficit {:.6} <= log [w]_log = {:.6}", deficit, blog.value.ln()),
        });
    }
    let maximal_power = match p_mlp {
        Some(p) if fw.verdict == Verdict::Bounded => Some(maximal_power_check(&ctx, fw.value.max(1.0), p)?),
        _ => None,
    };
    if let Some(l) = &maximal_power {
        lemmas.push(LemmaCheck {
            name: "self-improvement".into(),
            holds: Some(l.holds),
            detail: format!("p = {:.4}, factor {:.6}, min slack {:.6} at {}", l.p, l.factor, l.min_slack, l.worst_box),
        });
    }
    let keyestimate = if binfty_ok { keyestimate_check(&ctx, &cfg.lambda_grid, &ab)? } else { Vec::new() };
    if !keyestimate.is_empty() {
        let ok = keyestimate.iter().all(|k| k.holds != Some(false));
        lemmas.push(LemmaCheck {
            name: "key-level-set-estimate".into(),
            holds: Some(ok),
            detail: keyestimate
                .iter()
                .map(|k| format!("λ={:.4e}: {:.4e} <= {}", k.lambda, k.lhs, k.rhs.map_or("n/a".into(), fmt_ext)))
                .collect::<Vec<_>>()
                .join("; "),
        });
        // the pair that lets the largest ε close
        let c_w = keyestimate[0].c_w;
        let best = ab
            .iter()
            .filter_map(|&(alpha, _)| Some((alpha, closing_epsilon(c_w, alpha, 1.0)?)))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        lemmas.push(LemmaCheck {
            name: "epsilon-scan".into(),
            holds: Some(best.is_some()),
            detail: match best {
                Some((alpha, eps)) => format!("C(w) = {c_w:.4}, α = {alpha}: first closing ε = {eps}"),
                None => format!("C(w) = {c_w:.4}: no ε closes"),
            },
        });
    }
    {
        let lambda = 2.0 * ctx.cache.ln_avg(0).exp();
        let cz = cz_decompose(&ctx.tree, &ctx.cache, lambda, Measure::Lebesgue, 1.0)?;
        let (lo, mid, hi) = cz_level_set_bound_check(&cz, &ctx.cache);
        lemmas.push(LemmaCheck {
            name: "cz-level-set-chain".into(),
            holds: Some(cz.selected.is_empty() || (lo < mid && mid <= hi * (1.0 + 1e-12))),
            detail: format!("λ = 2 w_Q: {lo:.6e} < {mid:.6e} <= {hi:.6e} over {} boxes", cz.selected.len()),
        });
    }
    lap("lemmas", &mut timings);

    let mut diagnostics = Vec::new();
    for r in rows.iter().filter(|r| r.outcome == Outcome::Inconsistent) {
        let mut line = format!("theorem {}:", r.theorem);
        for n in r.left.iter().chain(&r.right) {
            line.push_str(&format!(" {n}={} ({})", flags[n].verdict.symbol(), flags[n].reason));
        }
        diagnostics.push(line);
    }

    let mut constants = Vec::new();
    constants.extend(bp);
    constants.extend(b1);
    constants.push(blog);
    constants.extend(rhi);
    constants.extend(binfty);
    constants.push(doubling);
    constants.push(fw);
    constants.extend(fw_radial);
    constants.extend(mlp);
    constants.extend(mdw);
    constants.extend(minimal.iter().map(|(_, m)| m.ratio.clone()));
    constants.push(mlog.constant.clone());
    constants.push(ratio);

    Ok(SuiteReport {
        weight: w.name.clone(),
        depth: cfg.depth,
        family: fam.mode,
        family_size: fam.len(),
        uncovered_fraction: ctx.tree.uncovered_area() / ctx.tree.box_area_at(0),
        constants,
        mlp_minimal_global: minimal.iter().map(|(p, m)| (format!("{p}"), fmt_ext(m.ln_global))).collect(),
        mlog_global: fmt_ext(mlog.global_log_integral),
        flags,
        rows,
        lemmas,
        keyestimate,
        maximal_power,
        diagnostics,
        timings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_weight_is_consistent() {
        let w = Weight::constant(1.0);
        let cfg = SuiteConfig { depth: 10, per_decade: 20, ..Default::default() };
        let r = theorem_suite(&w, &cfg).unwrap();
        for row in &r.rows {
            assert_eq!(row.outcome, Outcome::Consistent, "{row:?}");
        }
        assert!(r.lemmas.iter().all(|l| l.holds != Some(false)), "{:?}", r.lemmas);
    }

    #[test]
    fn kleene_and() {
        use TheoremVerdict::*;
        assert_eq!(Fails.and(Unknown), Fails);
        assert_eq!(Holds.and(Unknown), Unknown);
        assert_eq!(Holds.and(Holds), Holds);
    }
}
