//! Constants that need the dyadic maximal or minimal function of every box:
//! Fujii-Wilson, the four side conditions, and the per-box lemma checks.
//!
//! Box `Q_J` is represented by the cells (top-halves) of its subtree down to
//! the truncation depth; the annulus below the deepest cells is left out of
//! numerators and denominators alike. With `w ≡ 1` every ratio is then exactly 1.

use std::collections::HashMap;
use std::f64::consts::{LN_2, PI};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{build_tree, CarlesonBox, DyadicArc, DyadicTree};
use crate::operators::{
    cell_region, child_measure_ratio, cz_decompose, ln_radial_average, nondyadic_maximal_general, walk_subtree, Cell,
};
use crate::quad::ln_add;
use crate::weights::{
    box_integral_ln, box_log_integral, level_set_measure_ln, region_ln_range, BoxIntegralCache, Measure, Weight,
};

use super::ConditionConstant;

/// A tree with its frozen integral cache.
pub struct TreeContext<'w> {
    pub weight: &'w Weight,
    pub tree: DyadicTree,
    pub cache: BoxIntegralCache,
}

impl<'w> TreeContext<'w> {
    pub fn build(w: &'w Weight, root: DyadicArc, depth: u32, exponents: &[f64]) -> Result<Self> {
        let tree = build_tree(root, depth)?;
        let cache = BoxIntegralCache::build(w, &tree, exponents)?;
        Ok(TreeContext { weight: w, tree, cache })
    }

    pub fn depth(&self) -> u32 {
        self.tree.depth
    }

    /// One node per distinct box (one per depth for radial weights).
    pub fn boxes(&self) -> Vec<usize> {
        if self.cache.is_per_depth() {
            (0..=self.tree.depth).map(DyadicTree::level_start).collect()
        } else {
            (0..self.tree.node_count()).collect()
        }
    }

    /// Visits the cells below `j` with their offset depth `k`.
    fn walk(&self, j: usize, f: &mut dyn FnMut(usize, &Cell) -> Result<()>) -> Result<()> {
        let d0 = DyadicTree::depth_of(j);
        let avg = |i: usize| self.cache.ln_avg(i);
        let mut err = None;
        walk_subtree(&self.tree, self.cache.is_per_depth(), &avg, j, &mut |c| {
            if err.is_none() {
                if let Err(e) = f((DyadicTree::depth_of(c.node) - d0) as usize, &c) {
                    err = Some(e);
                }
            }
        });
        err.map_or(Ok(()), Err)
    }

    /// Cumulative log-sums of two cell terms, per truncation depth.
    fn ratio_levels(&self, j: usize, term: &(dyn Fn(&Cell) -> Result<(f64, f64)> + Sync)) -> Result<Vec<f64>> {
        let n = (self.tree.depth - DyadicTree::depth_of(j)) as usize + 1;
        let mut num = vec![f64::NEG_INFINITY; n];
        let mut den = vec![f64::NEG_INFINITY; n];
        self.walk(j, &mut |k, c| {
            let (a, b) = term(c)?;
            num[k] = ln_add(num[k], a + c.ln_mult);
            den[k] = ln_add(den[k], b + c.ln_mult);
            Ok(())
        })?;
        for k in 1..n {
            num[k] = ln_add(num[k], num[k - 1]);
            den[k] = ln_add(den[k], den[k - 1]);
        }
        Ok(num.iter().zip(&den).map(|(a, b)| a - b).collect())
    }

    /// Sup over boxes of per-box values given at every truncation depth.
    fn sup_constant(
        &self,
        name: &str,
        params: &[(&str, f64)],
        per_box: &(dyn Fn(usize) -> Result<Vec<f64>> + Sync),
    ) -> Result<ConditionConstant> {
        let boxes = self.boxes();
        let vals: Vec<Vec<f64>> = boxes.par_iter().map(|&j| per_box(j)).collect::<Result<_>>()?;
        let n = self.tree.depth as usize + 1;
        let mut trace = vec![f64::NEG_INFINITY; n];
        let mut arg = vec![0usize; n];
        for (bi, (&j, v)) in boxes.iter().zip(&vals).enumerate() {
            let d = DyadicTree::depth_of(j) as usize;
            for (k, &x) in v.iter().enumerate() {
                if x > trace[d + k] {
                    trace[d + k] = x;
                    arg[d + k] = bi;
                }
            }
        }
        let ext = self.tree.arc(boxes[arg[n - 1]]).path();
        Ok(ConditionConstant::from_ln_trace(name, params, &trace, format!("dyadic:{ext}")))
    }

    /// `ln` of the covered area below a depth, `Σ_{k >= d} 2^{k-d} |T_k|`.
    pub fn ln_covered_area(&self, d: u32) -> f64 {
        let mut acc = f64::NEG_INFINITY;
        for k in d..=self.tree.depth {
            acc = ln_add(acc, (k - d) as f64 * LN_2 + self.tree.top_area_at(k).ln());
        }
        acc
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FwVariant {
    /// `∫_Q M_Q w / w(Q)` with the dyadic maximal function.
    Dyadic,
    /// Exact non-dyadic maximal function of a radial weight.
    RadialExact,
    /// Shifted-grid envelope, root box only.
    Shifted,
}

/// Fujii-Wilson constant.
pub fn fw_constant(ctx: &TreeContext, variant: FwVariant, shifts: usize) -> Result<ConditionConstant> {
    match variant {
        FwVariant::Dyadic => {
            let c = &ctx.cache;
            ctx.sup_constant("fw", &[], &|j| {
                ctx.ratio_levels(j, &|cell| Ok((cell.ln_max + c.ln_top_area(cell.node), c.ln_top_mass(cell.node))))
            })
        }
        FwVariant::RadialExact => fw_radial_exact(ctx),
        FwVariant::Shifted => {
            let env = nondyadic_maximal_general(ctx.weight, &ctx.tree, shifts)?;
            let c = &ctx.cache;
            let n = ctx.tree.depth as usize + 1;
            let mut num = vec![f64::NEG_INFINITY; n];
            let mut den = vec![f64::NEG_INFINITY; n];
            ctx.walk(0, &mut |k, cell| {
                num[k] = ln_add(num[k], env.lower.ln_value(cell.node) + c.ln_top_area(cell.node) + cell.ln_mult);
                den[k] = ln_add(den[k], c.ln_top_mass(cell.node) + cell.ln_mult);
                Ok(())
            })?;
            for k in 1..n {
                num[k] = ln_add(num[k], num[k - 1]);
                den[k] = ln_add(den[k], den[k - 1]);
            }
            let t: Vec<f64> = num.iter().zip(&den).map(|(a, b)| a - b).collect();
            Ok(ConditionConstant::from_ln_trace("fw_shifted", &[("shifts", shifts as f64)], &t, "dyadic:".into()))
        }
    }
}

const GRID_PER_OCTAVE: usize = 32;

/// FW with `M(w χ_Q)(z) = sup { avg over boxes of length l : r <= l <= |I| }`,
/// integrated by the trapezoid rule on a grid of 32 points per octave.
fn fw_radial_exact(ctx: &TreeContext) -> Result<ConditionConstant> {
    let w = ctx.weight;
    if !w.is_radial() {
        return Err(Error::Unsupported("the radial-exact FW variant needs a radial weight".into()));
    }
    let n = ctx.tree.depth as usize;
    let root = ctx.tree.root.root_length;
    let g = GRID_PER_OCTAVE;
    let count = g * (n + 1) + 1;
    let grid: Vec<f64> = (0..count).map(|i| root * (-(i as f64) / g as f64).exp2()).collect();
    let ln_a: Vec<f64> = grid.par_iter().map(|&l| ln_radial_average(w, l)).collect::<Result<_>>()?;
    let c = &ctx.cache;
    let per_box = |d: usize| -> Vec<f64> {
        let start = g * d;
        let l = grid[start];
        let mut m = f64::NEG_INFINITY;
        let mut ms = Vec::with_capacity(count - start);
        for i in start..count {
            m = m.max(ln_a[i]);
            ms.push(m);
        }
        let f = |i: usize| (1.0 - grid[i]).ln() + ms[i - start];
        let mut out = Vec::new();
        let mut num = f64::NEG_INFINITY;
        let mut den = f64::NEG_INFINITY;
        for i in start..count - 1 {
            let h = grid[i] - grid[i + 1];
            num = ln_add(num, (0.5 * h).ln() + ln_add(f(i), f(i + 1)));
            if (i + 1 - start) % g == 0 {
                let k = (i + 1 - start) / g - 1;
                den = ln_add(den, c.ln_top_mass(DyadicTree::level_start((d + k) as u32)) + k as f64 * LN_2);
                out.push((2.0 * PI * l).ln() + num - den);
            }
        }
        out
    };
    let vals: Vec<Vec<f64>> = (0..=n).into_par_iter().map(per_box).collect();
    let mut trace = vec![f64::NEG_INFINITY; n + 1];
    let mut arg = vec![0; n + 1];
    for (d, v) in vals.iter().enumerate() {
        for (k, &x) in v.iter().enumerate() {
            if x > trace[d + k] {
                trace[d + k] = x;
                arg[d + k] = d;
            }
        }
    }
    let ext = ctx.tree.arc(DyadicTree::level_start(arg[n] as u32)).path();
    Ok(ConditionConstant::from_ln_trace("fw_radial", &[], &trace, format!("dyadic:{ext}")))
}

/// (MLp): sup of `∫_Q w^p / ∫_Q (M_Q w)^p`. The cache must hold exponent `p`.
pub fn mlp_condition(ctx: &TreeContext, p: f64) -> Result<ConditionConstant> {
    let c = &ctx.cache;
    if !c.has_exponent(p) {
        return Err(Error::Domain(format!("exponent {p} is not cached")));
    }
    ctx.sup_constant("mlp", &[("p", p)], &|j| {
        ctx.ratio_levels(j, &|cell| Ok((c.ln_top(cell.node, p)?, p * cell.ln_max + c.ln_top_area(cell.node))))
    })
}

/// (mLp): the ratio constant and `ln ∫_𝔻 w^{-1/(p-1)}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MinimalLp {
    pub ratio: ConditionConstant,
    /// `ln ∫_𝔻 (1/w)^{1/(p-1)}`; `+inf` when `1/w` is not in that space.
    #[serde(with = "crate::extended")]
    pub ln_global: f64,
}

/// (mLp): sup of `∫_Q (1/w)^{1/(p-1)} / ∫_Q (1/m_Q w)^{1/(p-1)}`. The cache
/// must hold exponent `1/(1-p)`.
pub fn mlp_minimal_condition(ctx: &TreeContext, p: f64) -> Result<MinimalLp> {
    if !(p > 1.0) {
        return Err(Error::Domain(format!("(mLp) needs p > 1, got {p}")));
    }
    let s = 1.0 / (1.0 - p);
    let c = &ctx.cache;
    if !c.has_exponent(s) {
        return Err(Error::Domain(format!("exponent {s} is not cached")));
    }
    let ratio = ctx.sup_constant("mlp_minimal", &[("p", p)], &|j| {
        ctx.ratio_levels(j, &|cell| Ok((c.ln_top(cell.node, s)?, s * cell.ln_min + c.ln_top_area(cell.node))))
    })?;
    let disc = CarlesonBox::free(0.5, 1.0)?;
    Ok(MinimalLp { ratio, ln_global: box_integral_ln(ctx.weight, &disc, s)? })
}

/// (mlog): `C = exp(sup deficit)` with the deficit
/// `(1/|Q|) ∫_Q (log m_Q w - log w)`, plus `∫_𝔻 log w`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MinimalLog {
    pub constant: ConditionConstant,
    #[serde(with = "crate::extended")]
    pub global_log_integral: f64,
}

pub fn mlog_condition(ctx: &TreeContext) -> Result<MinimalLog> {
    let c = &ctx.cache;
    let constant = ctx.sup_constant("mlog", &[], &|j| {
        let n = (ctx.tree.depth - DyadicTree::depth_of(j)) as usize + 1;
        let mut area = vec![0.0; n];
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        ctx.walk(j, &mut |k, cell| {
            let mult = cell.ln_mult.exp();
            let t = c.ln_top_area(cell.node).exp();
            area[k] += mult * t;
            a[k] += mult * t * cell.ln_min;
            b[k] += mult * c.log_top(cell.node);
            Ok(())
        })?;
        let mut out = Vec::with_capacity(n);
        let (mut sa, mut sx, mut sy) = (0.0, 0.0, 0.0);
        for k in 0..n {
            sa += area[k];
            sx += a[k];
            sy += b[k];
            out.push((sx - sy) / sa);
        }
        Ok(out)
    })?;
    let disc = CarlesonBox::free(0.5, 1.0)?;
    Ok(MinimalLog { constant, global_log_integral: box_log_integral(ctx.weight, &disc)? })
}

/// (Mdw) curve: for each `A`, sup of `w({x ∈ Q : w >= A M_Q w}) / w(Q)`.
pub fn mdw_condition(ctx: &TreeContext, a_grid: &[f64]) -> Result<Vec<ConditionConstant>> {
    let c = &ctx.cache;
    let per_depth = c.is_per_depth();
    let memo: Mutex<HashMap<(usize, u64), f64>> = Mutex::new(HashMap::new());
    let level = |node: usize, ln_t: f64| -> Result<f64> {
        let key = (if per_depth { DyadicTree::depth_of(node) as usize } else { node }, ln_t.to_bits());
        if let Some(&v) = memo.lock().unwrap().get(&key) {
            return Ok(v);
        }
        let v = level_set_measure_ln(ctx.weight, &cell_region(&ctx.tree, node), ln_t, Measure::Weighted)?;
        memo.lock().unwrap().insert(key, v);
        Ok(v)
    };
    a_grid
        .iter()
        .map(|&a| {
            if !(a > 1.0) {
                return Err(Error::Domain(format!("(Mdw) needs A > 1, got {a}")));
            }
            ctx.sup_constant("mdw", &[("A", a)], &|j| {
                ctx.ratio_levels(j, &|cell| Ok((level(cell.node, a.ln() + cell.ln_max)?, c.ln_top_mass(cell.node))))
            })
        })
        .collect()
}

/// Sup over boxes `Q` and cells `T ⊂ Q` of `sup_T w / M_Q w`.
pub fn cell_ratio_sup(ctx: &TreeContext) -> Result<ConditionConstant> {
    let slots = ctx.boxes();
    let sup: Vec<f64> =
        slots.par_iter().map(|&i| Ok(region_ln_range(ctx.weight, &cell_region(&ctx.tree, i))?.1)).collect::<Result<_>>()?;
    let per_depth = ctx.cache.is_per_depth();
    let ln_sup = |node: usize| if per_depth { sup[DyadicTree::depth_of(node) as usize] } else { sup[node] };
    ctx.sup_constant("w_over_mw", &[], &|j| {
        let n = (ctx.tree.depth - DyadicTree::depth_of(j)) as usize + 1;
        let mut best = vec![f64::NEG_INFINITY; n];
        ctx.walk(j, &mut |k, cell| {
            best[k] = best[k].max(ln_sup(cell.node) - cell.ln_max);
            Ok(())
        })?;
        for k in 1..n {
            best[k] = best[k].max(best[k - 1]);
        }
        Ok(best)
    })
}

/// Outcome of the self-improvement bound on every box of the tree.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MaximalPowerBound {
    pub p: f64,
    pub fw: f64,
    /// `L / (1 - 4L/p')`.
    pub factor: f64,
    /// Smallest `rhs / lhs` over the boxes.
    pub min_slack: f64,
    pub worst_box: String,
    pub holds: bool,
}

/// `avg_Q (M_Q w)^p <= L/(1 - 4L/p') (avg_Q w)^p` on every box, `L` the
/// measured dyadic FW constant.
pub fn maximal_power_check(ctx: &TreeContext, fw: f64, p: f64) -> Result<MaximalPowerBound> {
    let limit = 4.0 * fw / (4.0 * fw - 1.0);
    if !(p > 1.0 && p < limit) {
        return Err(Error::Domain(format!("p = {p} outside (1, {limit})")));
    }
    let factor = fw / (1.0 - 4.0 * fw * (p - 1.0) / p);
    let c = &ctx.cache;
    let boxes = ctx.boxes();
    let slack: Vec<f64> = boxes
        .par_iter()
        .map(|&j| {
            let mut num = f64::NEG_INFINITY;
            let mut den = f64::NEG_INFINITY;
            ctx.walk(j, &mut |_, cell| {
                let t = c.ln_top_area(cell.node) + cell.ln_mult;
                num = ln_add(num, p * cell.ln_max + t);
                den = ln_add(den, t);
                Ok(())
            })?;
            Ok(factor.ln() + p * c.ln_avg(j) - (num - den))
        })
        .collect::<Result<_>>()?;
    let (i, &s) = slack.iter().enumerate().min_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap();
    Ok(MaximalPowerBound {
        p,
        fw,
        factor,
        min_slack: s.exp(),
        worst_box: format!("dyadic:{}", ctx.tree.arc(boxes[i]).path()),
        holds: s >= 0.0,
    })
}

/// Both sides of the key level-set estimate on the root box at one level.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KeyEstimate {
    pub lambda: f64,
    /// `|Q ∩ {1/m_Q w > λ}|` from the cells.
    pub lhs: f64,
    /// The same set from the weighted CZ decomposition of `1/w`.
    pub lhs_cz: f64,
    #[serde(with = "crate::extended::opt")]
    pub rhs: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub c_w: f64,
    pub holds: Option<bool>,
}

/// Evaluates `|Q ∩ {1/m_Q w > λ}| <= C(w) λ/(1-β) w(Q ∩ {1/w > λα})` at
/// `λ = m / w_Q` for each multiplier `m > 1`. `(α, β)` pairs come from a
/// B∞ profile; the pair giving the smallest right side is used.
pub fn keyestimate_check(ctx: &TreeContext, multipliers: &[f64], ab: &[(f64, f64)]) -> Result<Vec<KeyEstimate>> {
    let c = &ctx.cache;
    if !c.has_exponent(0.0) {
        return Err(Error::Domain("the key estimate needs exponent 0 in the cache".into()));
    }
    let w = ctx.weight;
    let root_avg = c.ln_avg(0);
    let c_w = child_measure_ratio(&ctx.tree, c);
    let root_box = ctx.tree.node_box(0);
    let ln_mass = c.ln_mass(0);
    let mut out = Vec::new();
    for &m in multipliers {
        if !(m > 1.0) {
            return Err(Error::Domain(format!("λ must exceed 1/w_Q; multiplier {m} <= 1")));
        }
        let ln_l = m.ln() - root_avg;
        let lambda = ln_l.exp();
        let mut lhs = f64::NEG_INFINITY;
        ctx.walk(0, &mut |_, cell| {
            if -cell.ln_min > ln_l {
                lhs = ln_add(lhs, c.ln_top_area(cell.node) + cell.ln_mult);
            }
            Ok(())
        })?;
        let cz = cz_decompose(&ctx.tree, c, lambda, Measure::Weighted, -1.0)?;
        let mut lhs_cz = f64::NEG_INFINITY;
        for s in &cz.selected {
            lhs_cz = ln_add(lhs_cz, ctx.ln_covered_area(DyadicTree::depth_of(s.node)));
        }
        let mut best: Option<(f64, f64, f64)> = None;
        for &(alpha, beta) in ab {
            if !(beta < 1.0) {
                continue;
            }
            // w(Q ∩ {w < 1/(λα)}) = w(Q) - w(Q ∩ {w >= 1/(λα)})
            let upper = level_set_measure_ln(w, &root_box.region(), -(ln_l + alpha.ln()), Measure::Weighted)?;
            let below = ln_mass + (-(upper - ln_mass).exp()).ln_1p();
            let rhs = c_w.ln() + ln_l - (1.0 - beta).ln() + below;
            if best.is_none_or(|b| rhs < b.0) {
                best = Some((rhs, alpha, beta));
            }
        }
        out.push(KeyEstimate {
            lambda,
            lhs: lhs.exp(),
            lhs_cz: lhs_cz.exp(),
            rhs: best.map(|b| b.0.exp()),
            alpha: best.map(|b| b.1),
            beta: best.map(|b| b.2),
            c_w,
            holds: best.map(|b| lhs <= b.0 + 1e-12),
        });
    }
    Ok(out)
}

/// Largest `ε = ε0 2^{-i}` with `C ε / ((1 + ε) α^{1+ε}) < 1`: the exponent
/// at which the self-improvement step for `B_q`, `q = 1 + 1/ε`, closes.
pub fn closing_epsilon(c: f64, alpha: f64, eps0: f64) -> Option<f64> {
    let mut eps = eps0;
    for _ in 0..200 {
        if c * eps / ((1.0 + eps) * alpha.powf(1.0 + eps)) < 1.0 {
            return Some(eps);
        }
        eps *= 0.5;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx_for<'a>(w: &'a Weight, depth: u32, exps: &[f64]) -> TreeContext<'a> {
        TreeContext::build(w, DyadicArc::circle(), depth, exps).unwrap()
    }

    #[test]
    fn constant_weight_tree_constants_are_one() {
        let w = Weight::constant(3.0);
        let ctx = ctx_for(&w, 8, &[2.0, -1.0, 0.0]);
        let fw = fw_constant(&ctx, FwVariant::Dyadic, 3).unwrap();
        assert!((fw.value - 1.0).abs() < 1e-12, "{}", fw.value);
        let fr = fw_constant(&ctx, FwVariant::RadialExact, 3).unwrap();
        assert!((fr.value - 1.0).abs() < 1e-9, "{}", fr.value);
        assert!((mlp_condition(&ctx, 2.0).unwrap().value - 1.0).abs() < 1e-12);
        let ml = mlp_minimal_condition(&ctx, 2.0).unwrap();
        assert!((ml.ratio.value - 1.0).abs() < 1e-12);
        assert!(ml.ln_global.is_finite());
        let lg = mlog_condition(&ctx).unwrap();
        assert!((lg.constant.value - 1.0).abs() < 1e-12);
        for b in mdw_condition(&ctx, &[2.0, 4.0]).unwrap() {
            assert_eq!(b.value, 0.0);
        }
        assert!((cell_ratio_sup(&ctx).unwrap().value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn epsilon_scan_closes() {
        let e = closing_epsilon(4.0, 0.5, 1.0).unwrap();
        assert!(4.0 * e / ((1.0 + e) * 0.5f64.powf(1.0 + e)) < 1.0);
        assert!(e < 1.0);
    }
}
