//! Dyadic maximal and minimal functions, the non-dyadic maximal function and
//! Calderón-Zygmund stopping times on a truncated tree.
//!
//! A maximal (minimal) function relative to a box `Q_J` is constant on every
//! top-half `T_K` below `J`: its value is the largest (smallest) box average
//! along the chain `J ⊇ ... ⊇ K`. Values are kept as logarithms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{build_tree, top_half, Arc, CarlesonBox, DyadicArc, DyadicTree};
use crate::quad::ln_add;
use crate::weights::{box_integral_ln, BoxIntegralCache, Measure, Weight};

/// One value per top-half cell, stored as a logarithm.
///
/// Radial weights give one value per depth; `per_depth` records that.
#[derive(Clone, Debug, PartialEq)]
pub struct CellFunction {
    pub per_depth: bool,
    pub depth: u32,
    pub ln: Vec<f64>,
}

impl CellFunction {
    fn slot(&self, node: usize) -> usize {
        if self.per_depth {
            DyadicTree::depth_of(node) as usize
        } else {
            node
        }
    }

    pub fn ln_value(&self, node: usize) -> f64 {
        self.ln[self.slot(node)]
    }

    pub fn value(&self, node: usize) -> f64 {
        self.ln_value(node).exp()
    }

    /// Prefix max (`max = true`) or min down every root-to-leaf chain.
    pub fn prefix_scan(ln_avg: &[f64], per_depth: bool, depth: u32, max: bool) -> CellFunction {
        let pick = |a: f64, b: f64| if max { a.max(b) } else { a.min(b) };
        let mut ln = ln_avg.to_vec();
        for i in 1..ln.len() {
            let parent = if per_depth { i - 1 } else { (i - 1) / 2 };
            ln[i] = pick(ln[i], ln[parent]);
        }
        CellFunction { per_depth, depth, ln }
    }
}

/// Logs of the Lebesgue box averages, one per cache slot.
fn slot_averages(tree: &DyadicTree, cache: &BoxIntegralCache) -> Vec<f64> {
    slots(tree, cache).map(|i| cache.ln_avg(i)).collect()
}

/// Representative node of every cache slot.
pub(crate) fn slots<'a>(tree: &'a DyadicTree, cache: &BoxIntegralCache) -> Box<dyn Iterator<Item = usize> + 'a> {
    if cache.is_per_depth() {
        Box::new((0..=tree.depth).map(DyadicTree::level_start))
    } else {
        Box::new(0..tree.node_count())
    }
}

/// `M_Q w` on the cells of the tree, `Q` the root box.
pub fn dyadic_maximal(tree: &DyadicTree, cache: &BoxIntegralCache) -> CellFunction {
    CellFunction::prefix_scan(&slot_averages(tree, cache), cache.is_per_depth(), tree.depth, true)
}

/// `m_Q w` on the cells of the tree.
pub fn dyadic_minimal(tree: &DyadicTree, cache: &BoxIntegralCache) -> CellFunction {
    CellFunction::prefix_scan(&slot_averages(tree, cache), cache.is_per_depth(), tree.depth, false)
}

/// `ln` of the `μ`-average of `f = w^t` over `Q_J`, with `μ = w dA`.
pub fn ln_weighted_avg(cache: &BoxIntegralCache, node: usize, t: f64) -> Result<f64> {
    Ok(cache.ln_box(node, t + 1.0)? - cache.ln_mass(node))
}

/// The weighted dyadic maximal function `M^μ_Q (w^t)`, `μ = w dA`.
/// Needs exponent `t + 1` in the cache (`t = -1` needs `0`).
pub fn weighted_maximal(tree: &DyadicTree, cache: &BoxIntegralCache, t: f64) -> Result<CellFunction> {
    let avgs: Vec<f64> = slots(tree, cache).map(|i| ln_weighted_avg(cache, i, t)).collect::<Result<_>>()?;
    Ok(CellFunction::prefix_scan(&avgs, cache.is_per_depth(), tree.depth, true))
}

/// A cell visited below some box, with the chain extremes from that box.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Cell {
    pub node: usize,
    pub ln_max: f64,
    pub ln_min: f64,
    /// `ln` of how many cells this one stands for (per-depth caches).
    pub ln_mult: f64,
}

/// Visits every cell of the subtree under `j`, carrying the running max and
/// min of `ln_avg` along the chain that starts at `j`.
pub(crate) fn walk_subtree(
    tree: &DyadicTree,
    per_depth: bool,
    ln_avg: &dyn Fn(usize) -> f64,
    j: usize,
    visit: &mut dyn FnMut(Cell),
) {
    let d0 = DyadicTree::depth_of(j);
    if per_depth {
        let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
        for k in 0..=(tree.depth - d0) {
            let node = ((j + 1) << k) - 1;
            let a = ln_avg(node);
            hi = hi.max(a);
            lo = lo.min(a);
            visit(Cell { node, ln_max: hi, ln_min: lo, ln_mult: k as f64 * std::f64::consts::LN_2 });
        }
        return;
    }
    let mut stack = vec![(j, f64::NEG_INFINITY, f64::INFINITY)];
    while let Some((node, hi, lo)) = stack.pop() {
        let a = ln_avg(node);
        let (hi, lo) = (hi.max(a), lo.min(a));
        visit(Cell { node, ln_max: hi, ln_min: lo, ln_mult: 0.0 });
        if let Some((l, r)) = tree.children(node) {
            stack.push((r, hi, lo));
            stack.push((l, hi, lo));
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    Identity,
    Reciprocal,
    Log,
}

/// Result of summing a cell function over the covered cells.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CellIntegral {
    /// The integral. For `Log` this is the plain value, otherwise `exp(ln_value)`.
    pub value: f64,
    /// `ln` of the integral (`NaN` for `Log`).
    pub ln_value: f64,
    /// Fraction of `|Q|` not covered by the cells.
    pub uncovered_fraction: f64,
}

/// `Σ_J g(value_J)^p |T_J|` over the cells, `g` the chosen transform.
/// For `Log` the sum is `Σ_J ln(value_J) |T_J|` and `p` is ignored.
pub fn integrate_cell_power(f: &CellFunction, tree: &DyadicTree, p: f64, transform: Transform) -> CellIntegral {
    let mut ln_acc = f64::NEG_INFINITY;
    let mut plain = 0.0;
    let mut covered = 0.0;
    let count = if f.per_depth { (tree.depth + 1) as usize } else { tree.node_count() };
    for slot in 0..count {
        let (node, mult) = if f.per_depth {
            (DyadicTree::level_start(slot as u32), (1u64 << slot) as f64)
        } else {
            (slot, 1.0)
        };
        let area = tree.top_area_at(DyadicTree::depth_of(node));
        covered += mult * area;
        let v = f.ln_value(node);
        match transform {
            Transform::Identity => ln_acc = ln_add(ln_acc, p * v + (mult * area).ln()),
            Transform::Reciprocal => ln_acc = ln_add(ln_acc, -p * v + (mult * area).ln()),
            Transform::Log => plain += mult * area * v,
        }
    }
    let total = tree.box_area_at(0);
    let uncovered_fraction = (1.0 - covered / total).max(0.0);
    match transform {
        Transform::Log => CellIntegral { value: plain, ln_value: f64::NAN, uncovered_fraction },
        _ => CellIntegral { value: ln_acc.exp(), ln_value: ln_acc, uncovered_fraction },
    }
}

/// `ln` of the Lebesgue average of a radial weight over any box of length `l`.
pub fn ln_radial_average(w: &Weight, l: f64) -> Result<f64> {
    let b = CarlesonBox::free(0.5, l)?;
    Ok(box_integral_ln(w, &b, 1.0)? - b.area().ln())
}

/// `ln M(w χ_Q)(z)` for a radial weight, `Q` a box of length `top`, `z` at
/// distance `r` from the circle: the sup of box averages over lengths in `[r, top]`.
pub fn nondyadic_maximal_radial_ln(w: &Weight, r: f64, top: f64) -> Result<f64> {
    if !w.is_radial() {
        return Err(Error::Unsupported("the exact non-dyadic maximal function needs a radial weight".into()));
    }
    if !(r > 0.0 && r <= top && top <= 1.0) {
        return Err(Error::Domain(format!("need 0 < r <= top <= 1, got r = {r}, top = {top}")));
    }
    let (a, b) = (r.ln(), top.ln());
    let f = |x: f64| ln_radial_average(w, x.exp().clamp(r, top));
    let n = (((b - a) / std::f64::consts::LN_2) * 24.0).ceil().max(8.0) as usize;
    let mut best = (f64::NEG_INFINITY, a);
    let mut grid = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let x = a + (b - a) * i as f64 / n as f64;
        let v = f(x)?;
        grid.push(v);
        if v > best.0 {
            best = (v, x);
        }
    }
    // golden-section polish inside the bracketing grid cell pair
    let h = (b - a) / n as f64;
    let (mut lo, mut hi) = ((best.1 - h).max(a), (best.1 + h).min(b));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut x1, mut x2) = (hi - g * (hi - lo), lo + g * (hi - lo));
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    for _ in 0..60 {
        if (hi - lo) < 1e-12 * (1.0 + b.abs()) {
            break;
        }
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2)?;
        }
    }
    Ok(best.0.max(f1).max(f2))
}

pub fn nondyadic_maximal_radial(w: &Weight, z_radius: f64) -> Result<f64> {
    Ok(nondyadic_maximal_radial_ln(w, 1.0 - z_radius, 1.0)?.exp())
}

/// Shifted-grid approximation of the non-dyadic maximal function.
#[derive(Clone, Debug)]
pub struct Envelope {
    pub shifts: usize,
    /// Lower bound for `M(w χ)` on each base cell.
    pub lower: CellFunction,
    /// `lower` inflated by the measured doubling constant cubed.
    pub upper: CellFunction,
    pub doubling: f64,
}

/// Max over `S` rotated dyadic grids (shift `root_length · s / S`) of the
/// dyadic maximal function, each base cell taking the smaller value of the
/// shifted cells it overlaps.
pub fn nondyadic_maximal_general(w: &Weight, tree: &DyadicTree, shifts: usize) -> Result<Envelope> {
    if shifts == 0 {
        return Err(Error::Domain("at least one shift is needed".into()));
    }
    let root = tree.root;
    let base_cache = BoxIntegralCache::build(w, tree, &[1.0])?;
    let per_depth = base_cache.is_per_depth();
    let mut lower = dyadic_maximal(tree, &base_cache);
    for s in 1..shifts {
        let offset = root.root_length * s as f64 / shifts as f64;
        let shifted_root = DyadicArc::root(root.root_center + offset, root.root_length)?;
        let st = build_tree(shifted_root, tree.depth)?;
        let sc = BoxIntegralCache::build(w, &st, &[1.0])?;
        let sm = dyadic_maximal(&st, &sc);
        for slot in 0..lower.ln.len() {
            let node = if per_depth { DyadicTree::level_start(slot as u32) } else { slot };
            let v = if per_depth {
                sm.ln_value(node)
            } else {
                overlapping(tree, &st, node).into_iter().map(|k| sm.ln_value(k)).fold(f64::INFINITY, f64::min)
            };
            if v.is_finite() {
                lower.ln[slot] = lower.ln[slot].max(v);
            }
        }
    }
    let doubling = measured_dyadic_doubling(w, tree)?;
    let mut upper = lower.clone();
    for v in &mut upper.ln {
        *v += 3.0 * doubling.ln();
    }
    Ok(Envelope { shifts, lower, upper, doubling })
}

/// Cells of `other` at the same depth whose arcs meet the arc of `node`.
fn overlapping(tree: &DyadicTree, other: &DyadicTree, node: usize) -> Vec<usize> {
    let d = DyadicTree::depth_of(node);
    let arc = tree.arc(node).arc();
    let start = DyadicTree::level_start(d);
    let n = 1usize << d;
    let l = other.length_at(d);
    let pos = ((arc.start - other.root.root_start()).rem_euclid(1.0) / l).floor() as usize;
    let mut out = Vec::new();
    for k in [pos, pos + 1] {
        if k < n {
            let cand = other.arc(start + k).arc();
            if arc.overlap(&cand) > 1e-15 * l {
                out.push(start + k);
            }
        }
    }
    out
}

/// `sup w(Q_I) / w(Q_{I/2})` over the tree's boxes (concentric halves).
pub fn measured_dyadic_doubling(w: &Weight, tree: &DyadicTree) -> Result<f64> {
    let nodes: Vec<usize> = if w.is_radial() {
        (0..=tree.depth).map(DyadicTree::level_start).collect()
    } else {
        (0..tree.node_count()).collect()
    };
    let mut best = f64::NEG_INFINITY;
    for i in nodes {
        let b = tree.node_box(i);
        let half = b.half();
        best = best.max(box_integral_ln(w, &b, 1.0)? - box_integral_ln(w, &half, 1.0)?);
    }
    Ok(best.exp())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CzNode {
    pub node: usize,
    pub path: String,
    pub ln_avg: f64,
}

impl CzNode {
    pub fn average(&self) -> f64 {
        self.ln_avg.exp()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CzDecomposition {
    pub lambda: f64,
    pub measure: Measure,
    /// `f = w^t` under the weighted measure; ignored for Lebesgue.
    pub exponent: f64,
    pub selected: Vec<CzNode>,
    /// `max avg_j / λ` over the selection (0 when empty).
    pub achieved_constant: f64,
    /// Constant guaranteed by the parent-child measure ratio (4 for Lebesgue).
    pub bound: f64,
}

/// `ln` of the average of `f` over `Q_J` under the chosen measure.
pub fn ln_cz_average(cache: &BoxIntegralCache, node: usize, measure: Measure, t: f64) -> Result<f64> {
    match measure {
        Measure::Lebesgue => Ok(cache.ln_avg(node)),
        Measure::Weighted => ln_weighted_avg(cache, node, t),
    }
}

/// `ln μ(Q_J)`.
pub fn ln_cz_measure(cache: &BoxIntegralCache, node: usize, measure: Measure) -> f64 {
    match measure {
        Measure::Lebesgue => cache.ln_area(node),
        Measure::Weighted => cache.ln_mass(node),
    }
}

/// Maximal dyadic boxes with average strictly above `λ`, found depth-first
/// with the left child first. `f = w` for Lebesgue measure, `f = w^t` with
/// `μ = w dA` for the weighted one.
pub fn cz_decompose(
    tree: &DyadicTree,
    cache: &BoxIntegralCache,
    lambda: f64,
    measure: Measure,
    t: f64,
) -> Result<CzDecomposition> {
    let ln_l = lambda.ln();
    let root_avg = ln_cz_average(cache, 0, measure, t)?;
    if ln_l < root_avg {
        return Err(Error::LevelBelowAverage { lambda, root_average: root_avg.exp() });
    }
    let mut selected = Vec::new();
    let mut stack = vec![0usize];
    while let Some(i) = stack.pop() {
        let a = ln_cz_average(cache, i, measure, t)?;
        if a > ln_l {
            selected.push(CzNode { node: i, path: tree.arc(i).path(), ln_avg: a });
        } else if let Some((l, r)) = tree.children(i) {
            stack.push(r);
            stack.push(l);
        }
    }
    let achieved_constant = selected.iter().map(|c| (c.ln_avg - ln_l).exp()).fold(0.0, f64::max);
    let bound = match measure {
        Measure::Lebesgue => 4.0,
        Measure::Weighted => child_measure_ratio(tree, cache),
    };
    Ok(CzDecomposition { lambda, measure, exponent: t, selected, achieved_constant, bound })
}

/// `max μ(Q_parent) / μ(Q_child)` over the tree, `μ = w dA`.
pub fn child_measure_ratio(tree: &DyadicTree, cache: &BoxIntegralCache) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for i in slots(tree, cache) {
        if let Some((l, r)) = tree.children(i) {
            let m = cache.ln_mass(i);
            best = best.max(m - cache.ln_mass(l)).max(m - cache.ln_mass(r));
        }
    }
    best.exp()
}

/// Checks the three CZ properties and the union identity on the tree. Returns
/// a list of violations (empty when all hold exactly).
pub fn cz_invariant_violations(
    tree: &DyadicTree,
    cache: &BoxIntegralCache,
    cz: &CzDecomposition,
) -> Result<Vec<String>> {
    let mut bad = Vec::new();
    let ln_l = cz.lambda.ln();
    let ln_c = cz.bound.ln();
    let mut owner = vec![false; tree.node_count()];
    for c in &cz.selected {
        if !(c.ln_avg > ln_l) || c.ln_avg > ln_l + ln_c {
            bad.push(format!("node {} average {} outside (λ, Cλ]", c.path, c.average()));
        }
        let mut a = DyadicTree::parent(c.node);
        while let Some(p) = a {
            if ln_cz_average(cache, p, cz.measure, cz.exponent)? > ln_l {
                bad.push(format!("ancestor {} of {} exceeds λ", tree.arc(p).path(), c.path));
            }
            if owner[p] {
                bad.push(format!("{} is nested in another selected box", c.path));
            }
            a = DyadicTree::parent(p);
        }
        if owner[c.node] {
            bad.push(format!("{} selected twice", c.path));
        }
        owner[c.node] = true;
    }
    // union of selected subtrees versus the superlevel set of the maximal function
    let avgs: Vec<f64> =
        (0..tree.node_count()).map(|i| ln_cz_average(cache, i, cz.measure, cz.exponent)).collect::<Result<_>>()?;
    let max = CellFunction::prefix_scan(&avgs, false, tree.depth, true);
    let mut inside = vec![false; tree.node_count()];
    for i in 0..tree.node_count() {
        inside[i] = owner[i] || DyadicTree::parent(i).is_some_and(|p| inside[p]);
        if inside[i] != (max.ln[i] > ln_l) {
            bad.push(format!("cell {} breaks the union identity", tree.arc(i).path()));
        }
    }
    Ok(bad)
}

/// `(λ μ(Ω), ∫_Ω f dμ, C λ μ(Ω))` for `Ω` the union of the selected boxes.
pub fn cz_level_set_bound_check(cz: &CzDecomposition, cache: &BoxIntegralCache) -> (f64, f64, f64) {
    let mut ln_mu = f64::NEG_INFINITY;
    let mut ln_int = f64::NEG_INFINITY;
    for c in &cz.selected {
        let m = ln_cz_measure(cache, c.node, cz.measure);
        ln_mu = ln_add(ln_mu, m);
        ln_int = ln_add(ln_int, m + c.ln_avg);
    }
    let lhs = cz.lambda * ln_mu.exp();
    (lhs, ln_int.exp(), cz.bound * lhs)
}

/// Top-half of a tree node, as a plain geometric object.
pub fn cell_region(tree: &DyadicTree, node: usize) -> crate::geometry::Region {
    top_half(&tree.node_box(node)).region()
}

/// Free box with the same arc as a node, shifted by `offset` of the circle.
pub fn shifted_box(tree: &DyadicTree, node: usize, offset: f64) -> Result<CarlesonBox> {
    let a = tree.arc(node).arc();
    Ok(CarlesonBox::new(Arc::new(a.start + offset, a.length)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_level_prefix_scans() {
        let avgs = [1f64.ln(), 2f64.ln(), 0.5f64.ln()];
        let max = CellFunction::prefix_scan(&avgs, false, 1, true);
        let min = CellFunction::prefix_scan(&avgs, false, 1, false);
        let v = |f: &CellFunction| (0..3).map(|i| f.value(i)).collect::<Vec<_>>();
        assert_eq!(v(&max), vec![1.0, 2.0, 1.0]);
        assert_eq!(v(&min), vec![1.0, 1.0, 0.5]);
    }

    #[test]
    fn constant_weight_cells() {
        let tree = build_tree(DyadicArc::circle(), 6).unwrap();
        let w = Weight::constant(1.0);
        let cache = BoxIntegralCache::build(&w, &tree, &[]).unwrap();
        let m = dyadic_maximal(&tree, &cache);
        for v in &m.ln {
            assert!(v.abs() < 1e-12);
        }
        let i = integrate_cell_power(&m, &tree, 3.0, Transform::Identity);
        let covered = tree.box_area_at(0) - tree.uncovered_area();
        assert!((i.value / covered - 1.0).abs() < 1e-12);
        let cz = cz_decompose(&tree, &cache, 2.0, Measure::Lebesgue, 0.0).unwrap();
        assert!(cz.selected.is_empty());
        assert_eq!(cz_level_set_bound_check(&cz, &cache), (0.0, 0.0, 0.0));
        assert!(cz_decompose(&tree, &cache, 0.5, Measure::Lebesgue, 0.0).is_err());
    }

    #[test]
    fn radial_maximal_of_constant() {
        let w = Weight::constant(2.0);
        for z in [0.1, 0.5, 0.9, 0.999] {
            assert!((nondyadic_maximal_radial(&w, z).unwrap() - 2.0).abs() < 1e-9);
        }
    }
}
