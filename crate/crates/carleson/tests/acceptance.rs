//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.

mod common;

use std::time::Instant;

use carleson::conditions::boxwise::{ln_bp, ln_blog, ln_rhi, FreeBox};
use carleson::conditions::{
    binfty_profile, bp_constant, cell_ratio_sup, critical_exponent, fw_constant, maximal_power_check, mlp_condition,
    mlp_minimal_condition, rhi_constant, theorem_suite, BoxFamily, ConditionConstant, FamilyConfig, FwVariant,
    Orientation, SuiteConfig, TreeContext,
};
use carleson::geometry::{build_tree, CarlesonBox, DyadicArc, DyadicTree};
use carleson::operators::{cz_decompose, cz_invariant_violations, dyadic_minimal, weighted_maximal, ln_cz_average};
use carleson::report::cz;
use carleson::weights::oracle::oracle_box_integral_ln;
use carleson::weights::{box_integral_ln, BoxIntegralCache, Measure};
use rand::Rng;

use common::{load, random_pieces, radial_weight, random_radial, rel_ln, rng};

type Outcome = (bool, String);

/// `(max - min) / min` of a trace between two depths.
fn variation(c: &ConditionConstant, from: u32, to: u32) -> f64 {
    let v: Vec<f64> = (from..=to).filter_map(|d| c.at(d)).collect();
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (hi - lo) / lo
}

fn constant_weight() -> Outcome {
    let t = Instant::now();
    let w = load("builtin:constant");
    let s = theorem_suite(&w, &SuiteConfig { depth: 16, ..Default::default() }).unwrap();
    let mut bad = Vec::new();
    for c in &s.constants {
        // β(α) and b(A) are mass fractions (0 for a constant); the doubling
        // ratio of a constant is the area ratio |Q_l| / |Q_{l/2}| < 4
        let ok = match c.name.as_str() {
            "binfty" | "mdw" => c.value == 0.0,
            "doubling" => c.value < 4.0 && c.value > 3.999,
            _ => (c.value - 1.0).abs() < 1e-9,
        };
        if !ok {
            bad.push(format!("{}{:?} = {}", c.name, c.params, c.value));
        }
    }
    let d = cz("builtin:constant", 16, 2.0, false, Measure::Lebesgue, 1.0).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let pass = bad.is_empty() && d.selected.is_empty() && secs < 5.0 && !s.inconsistent();
    (pass, format!("{} constants, off: {bad:?}; CZ at λ=2 selects {}; {secs:.2}s", s.constants.len(), d.selected.len()))
}

fn shell_weight_exponents() -> Outcome {
    let t = Instant::now();
    let x: f64 = 1.5;
    let w = load("builtin:example52?x=1.5");
    let fam = BoxFamily::build(&w, &FamilyConfig { depth: 20, ..Default::default() }, &[1.0]).unwrap();
    let grid = [1.2, 1.4, 1.6, 1.8, 2.0, 2.2];
    let rhi = critical_exponent("rhi", &grid, Orientation::BoundedBelow, 0.01, &|p| rhi_constant(&fam, p)).unwrap();
    let bq = critical_exponent("bp", &grid, Orientation::BoundedAbove, 0.01, &|q| bp_constant(&fam, q)).unwrap();
    let p_star = 2f64.ln() / x.ln();
    let q_star = 1.0 + x.ln() / 2f64.ln();
    let secs = t.elapsed().as_secs_f64();
    let ok_p = rhi.estimate.is_some_and(|e| (e - p_star).abs() <= 0.05);
    let ok_q = bq.estimate.is_some_and(|e| (e - q_star).abs() <= 0.05);
    let last_bounded = rhi.points.iter().filter(|s| s.verdict.as_str() == "bounded").map(|s| s.param).fold(0.0, f64::max);
    (
        ok_p && ok_q && secs < 180.0,
        format!(
            "RHI flip {:?} vs {p_star:.4} (bounded up to p = {last_bounded}, growth-rate fit {:?}); B_q flip {:?} vs {q_star:.4}; {secs:.1}s",
            rhi.estimate, rhi.extrapolated, bq.estimate
        ),
    )
}

fn shell_weight_side_conditions() -> Outcome {
    let w = load("builtin:example52?x=1.5");
    let fam = BoxFamily::build(&w, &FamilyConfig { depth: 20, ..Default::default() }, &[1.0]).unwrap();
    let b2 = bp_constant(&fam, 2.0).unwrap().value;
    let ctx = TreeContext::build(&w, DyadicArc::circle(), 20, &[1.0, 1.0 / (1.0 - 2.5)]).unwrap();
    let minimal = mlp_minimal_condition(&ctx, 2.5).unwrap();
    let l = fw_constant(&ctx, FwVariant::Dyadic, 0).unwrap().value;
    let p = 0.5 * (1.0 + 4.0 * l / (4.0 * l - 1.0));
    let ctx_p = TreeContext::build(&w, DyadicArc::circle(), 20, &[1.0, p]).unwrap();
    let mlp = mlp_condition(&ctx_p, p).unwrap();
    let var = variation(&mlp, 12, 20);
    (
        minimal.ratio.value <= b2 && var < 0.1,
        format!(
            "(mLp) ratio at p=2.5 {:.6} <= [w]_2 {b2:.6}; L = {l:.6}, (MLp) at p = {p:.4}: {:.6}, variation {:.2}%",
            minimal.ratio.value,
            mlp.value,
            100.0 * var
        ),
    )
}

fn fw_without_doubling() -> Outcome {
    let t = Instant::now();
    let w = load("builtin:example53");
    let ctx = TreeContext::build(&w, DyadicArc::circle(), 20, &[1.0]).unwrap();
    let fw = fw_constant(&ctx, FwVariant::Dyadic, 0).unwrap();
    let fw_var = variation(&fw, 12, 20);
    let mut doubling = Vec::new();
    let mut doubling_ok = true;
    for b in [0.6, 0.7, 0.75] {
        let l = 1.0 - b;
        let q = CarlesonBox::free(0.0, l).unwrap();
        let ln_ratio = box_integral_ln(&w, &q, 1.0).unwrap() - box_integral_ln(&w, &q.half(), 1.0).unwrap();
        let target = 3.0 / (l * l);
        let rel = (ln_ratio - target).abs() / target;
        doubling_ok &= rel < 0.2;
        doubling.push(format!("b={b}: {ln_ratio:.3} vs {target:.3}"));
    }
    let cell = cell_ratio_sup(&ctx).unwrap();
    let growth = cell.at(20).unwrap() / cell.at(12).unwrap();
    let fam = BoxFamily::build(&w, &FamilyConfig { depth: 20, ..Default::default() }, &[1.0]).unwrap();
    let alphas = [0.5, 0.2, 0.1, 0.05, 0.01, 0.001];
    let betas = binfty_profile(&fam, &alphas).unwrap();
    let beta_min = betas.iter().map(|c| c.value).fold(f64::INFINITY, f64::min);
    let secs = t.elapsed().as_secs_f64();
    (
        fw_var < 0.1 && doubling_ok && growth >= 2.0 && beta_min >= 0.9 && secs < 180.0,
        format!(
            "FW {:.6} (variation {:.2e}); log doubling {}; sup w/M_Q w grew {growth:.3e}x; min β(α) {beta_min:.4}; {secs:.1}s",
            fw.value,
            fw_var,
            doubling.join(", ")
        ),
    )
}

const RANDOM_WEIGHTS: usize = 25;
const RANDOM_SEED: u64 = 0x5eed;

fn cz_invariants() -> Outcome {
    let mut r = rng(RANDOM_SEED);
    let mut failures = Vec::new();
    let mut selected = 0;
    let tree = build_tree(DyadicArc::circle(), 12).unwrap();
    for k in 0..RANDOM_WEIGHTS {
        let w = random_radial(&mut r, k);
        let cache = BoxIntegralCache::build(&w, &tree, &[1.0]).unwrap();
        let root = cache.ln_avg(0).exp();
        for m in [1.5, 3.0, 10.0] {
            let lambda = m * root;
            let d = cz_decompose(&tree, &cache, lambda, Measure::Lebesgue, 1.0).unwrap();
            selected += d.selected.len();
            let mut v = cz_invariant_violations(&tree, &cache, &d).unwrap();
            // an independent pass over the node set
            let avg = |i: usize| ln_cz_average(&cache, i, Measure::Lebesgue, 1.0).unwrap();
            let ln_l = lambda.ln();
            let paths: Vec<&str> = d.selected.iter().map(|c| c.path.as_str()).collect();
            for (a, pa) in paths.iter().enumerate() {
                for (b, pb) in paths.iter().enumerate() {
                    if a != b && pb.starts_with(pa) {
                        v.push(format!("{pb} inside {pa}"));
                    }
                }
            }
            for c in &d.selected {
                if !(c.ln_avg > ln_l && c.ln_avg <= ln_l + 4f64.ln()) {
                    v.push(format!("{} average ratio {}", c.path, (c.ln_avg - ln_l).exp()));
                }
            }
            for i in 0..tree.node_count() {
                let path = tree.arc(i).path();
                let chain: Vec<usize> = std::iter::successors(Some(i), |&j| DyadicTree::parent(j)).collect();
                let in_level_set = chain.iter().any(|&j| avg(j) > ln_l);
                let in_union = paths.iter().any(|p| path.starts_with(p));
                if in_level_set != in_union {
                    v.push(format!("{path}: level set {in_level_set}, union {in_union}"));
                }
                if paths.contains(&path.as_str()) && chain[1..].iter().any(|&j| avg(j) > ln_l) {
                    v.push(format!("{path}: an ancestor exceeds λ"));
                }
            }
            if !v.is_empty() {
                failures.push(format!("{} λ={m}w_Q: {}", w.name, v[0]));
            }
        }
    }
    (failures.is_empty(), format!("{RANDOM_WEIGHTS} weights x 3 levels, {selected} boxes selected, violations {failures:?}"))
}

fn self_improvement() -> Outcome {
    let mut r = rng(RANDOM_SEED);
    let mut worst = (f64::INFINITY, String::new());
    let mut failures = Vec::new();
    for k in 0..RANDOM_WEIGHTS {
        let w = random_radial(&mut r, k);
        let ctx = TreeContext::build(&w, DyadicArc::circle(), 12, &[1.0]).unwrap();
        let l = fw_constant(&ctx, FwVariant::Dyadic, 0).unwrap().value;
        let p = 0.5 * (1.0 + 4.0 * l / (4.0 * l - 1.0));
        let c = maximal_power_check(&ctx, l, p).unwrap();
        if c.min_slack < worst.0 {
            worst = (c.min_slack, format!("{} (L = {l:.4}, p = {p:.4}, {})", w.name, c.worst_box));
        }
        if !c.holds {
            failures.push(w.name.clone());
        }
    }
    (failures.is_empty(), format!("smallest slack rhs/lhs {:.6} at {}; failing {failures:?}", worst.0, worst.1))
}

fn oracle_equivalence() -> Outcome {
    let mut r = rng(RANDOM_SEED + 1);
    let sources =
        ["builtin:constant?c=2", "builtin:power?a=0.5", "builtin:example52?x=1.5", "builtin:product", "builtin:general"];
    let tree = build_tree(DyadicArc::circle(), 6).unwrap();
    let mut worst = 0.0f64;
    for src in sources {
        let w = load(src);
        let cache = BoxIntegralCache::build(&w, &tree, &[1.0]).unwrap();
        for _ in 0..10 {
            let i = r.gen_range(0..tree.node_count());
            let o = oracle_box_integral_ln(&w, &tree.node_box(i), 1.0, 1e-10).unwrap();
            worst = worst.max(rel_ln(cache.ln_box(i, 1.0).unwrap(), o));
        }
    }
    let mut duality = 0.0f64;
    for k in 0..5 {
        let w = random_radial(&mut r, k);
        let cache = BoxIntegralCache::build(&w, &tree, &[1.0, 0.0]).unwrap();
        let maxi = weighted_maximal(&tree, &cache, -1.0).unwrap();
        let mini = dyadic_minimal(&tree, &cache);
        for i in 0..tree.node_count() {
            duality = duality.max((maxi.value(i) * mini.value(i) - 1.0).abs());
        }
    }
    (
        worst <= 1e-6 && duality <= 1e-12,
        format!("50 boxes, max relative error {worst:.2e}; max |M^μ(1/w) m_Q w - 1| = {duality:.2e}"),
    )
}

/// How far `a <= b` is violated; a divergent `b` bounds anything.
fn le_gap(a: f64, b: f64) -> f64 {
    if b == f64::INFINITY || a == f64::NEG_INFINITY {
        0.0
    } else {
        a - b
    }
}

/// Relative gap of two logarithms; equal infinities agree.
fn same(ln_a: f64, ln_b: f64) -> f64 {
    if ln_a == ln_b {
        0.0
    } else {
        rel_ln(ln_a, ln_b)
    }
}

fn jensen_and_invariance() -> Outcome {
    let mut r = rng(RANDOM_SEED + 2);
    let weights: Vec<_> = (0..10)
        .map(|k| {
            let pieces = random_pieces(&mut r);
            (radial_weight(&pieces, 1.0, k), radial_weight(&pieces, 3.0, k))
        })
        .collect();
    let mut checked = 0;
    let mut bad = Vec::new();
    let tol = 1e-9;
    for n in 0..10_000 {
        let (w, w3) = &weights[n % weights.len()];
        let l = (-r.gen_range(0.0..12.0f64)).exp2();
        let b = CarlesonBox::free(r.gen_range(0.0..1.0), l).unwrap();
        let p = r.gen_range(1.05..4.0);
        let q = p + r.gen_range(0.0..4.0);
        let (f, f3) = (FreeBox { w, b }, FreeBox { w: w3, b });
        let bp = ln_bp(&f, p).unwrap();
        let bq = ln_bp(&f, q).unwrap();
        let bl = ln_blog(&f).unwrap();
        let (rp, rq) = (ln_rhi(&f, p).unwrap(), ln_rhi(&f, q).unwrap());
        // each check is `gap <= tol`
        let mut check = |what: &str, gap: f64| {
            if !(gap <= tol) {
                bad.push(format!("{what} by {gap:.2e} on {} at |I| = {l:.3e}, p = {p:.3}, q = {q:.3}", w.name));
            }
        };
        check("B_q <= B_p", le_gap(bq, bp));
        check("B_log <= B_p", le_gap(bl, bp));
        check("RHI power means", le_gap(rp / p, rq / q));
        check("B_p under 3w", same(ln_bp(&f3, p).unwrap(), bp));
        check("B_log under 3w", same(ln_blog(&f3).unwrap(), bl));
        check("RHI under 3w", same(ln_rhi(&f3, p).unwrap(), rp));
        checked += 1;
    }
    (bad.is_empty(), format!("{checked} boxes, {} failures {:?}", bad.len(), bad.iter().take(3).collect::<Vec<_>>()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("constant weight sanity", constant_weight),
        ("shell weight critical exponents", shell_weight_exponents),
        ("shell weight side conditions", shell_weight_side_conditions),
        ("FW without doubling", fw_without_doubling),
        ("CZ invariants", cz_invariants),
        ("self-improvement bound", self_improvement),
        ("oracle equivalence", oracle_equivalence),
        ("Jensen chains and scale invariance", jensen_and_invariance),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let (pass, detail) = f();
        failed += usize::from(!pass);
        println!("criterion {}: {} {name}: {detail}", i + 1, if pass { "PASS" } else { "FAIL" });
    }
    println!("{} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
