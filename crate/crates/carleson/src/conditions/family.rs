//! Box families standing in for "sup over all arcs", and the constants that
//! are plain sups of per-box quantities.

use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{build_tree, CarlesonBox, DyadicArc, DyadicTree};
use crate::weights::{box_integral_ln, box_log_integral, BoxIntegralCache, Weight};

use super::boxwise::{ln_b1, ln_binfty, ln_blog, ln_bp, ln_doubling, ln_rhi, BoxIntegrals};
use super::{prefix_sup, ConditionConstant};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyMode {
    /// Radial lengths for radial weights, shifted grids otherwise.
    Auto,
    Dyadic,
    RadialLengths,
    Shifted,
}

impl FromStr for FamilyMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(FamilyMode::Auto),
            "dyadic" => Ok(FamilyMode::Dyadic),
            "radial-lengths" | "radial" => Ok(FamilyMode::RadialLengths),
            "shifted" => Ok(FamilyMode::Shifted),
            other => Err(Error::Domain(format!("unknown box family `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FamilyConfig {
    pub mode: FamilyMode,
    pub depth: u32,
    pub shifts: usize,
    /// Lengths per decade in radial-lengths mode.
    pub per_decade: usize,
    pub root: DyadicArc,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        FamilyConfig { mode: FamilyMode::Auto, depth: 16, shifts: 3, per_decade: 200, root: DyadicArc::circle() }
    }
}

#[derive(Clone, Debug)]
pub enum BoxSource {
    Free,
    Node { tree: usize, node: usize },
}

#[derive(Clone, Debug)]
pub struct FamilyBox {
    pub id: String,
    /// Smallest truncation depth at which the box belongs to the family.
    pub depth: u32,
    pub geom: CarlesonBox,
    pub source: BoxSource,
}

/// A finite family of boxes with cached integrals where available.
pub struct BoxFamily<'w> {
    pub weight: &'w Weight,
    pub mode: FamilyMode,
    pub depth: u32,
    pub trees: Vec<DyadicTree>,
    pub caches: Vec<BoxIntegralCache>,
    pub boxes: Vec<FamilyBox>,
    ln_mass: Vec<f64>,
}

/// Geometric grid of lengths from `root` down to `root 2^{-depth}`, exact
/// dyadic lengths included, longest first.
pub fn radial_lengths(root: f64, depth: u32, per_decade: usize) -> Vec<(f64, u32)> {
    let floor = root * (-(depth as f64)).exp2();
    let mut ls: Vec<f64> = (0..=depth).map(|n| root * (-(n as f64)).exp2()).collect();
    let mut i = 1;
    loop {
        let l = root * 10f64.powf(-(i as f64) / per_decade as f64);
        if l < floor * (1.0 - 1e-12) {
            break;
        }
        ls.push(l);
        i += 1;
    }
    ls.sort_by(|a, b| b.partial_cmp(a).unwrap());
    ls.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * *b);
    ls.into_iter()
        .map(|l| {
            let n = ((root / l).log2() - 1e-9).ceil().max(0.0) as u32;
            (l, n.min(depth))
        })
        .collect()
}

impl<'w> BoxFamily<'w> {
    pub fn build(w: &'w Weight, config: &FamilyConfig, exponents: &[f64]) -> Result<Self> {
        let mode = match config.mode {
            FamilyMode::Auto if w.is_radial() => FamilyMode::RadialLengths,
            FamilyMode::Auto => FamilyMode::Shifted,
            FamilyMode::RadialLengths if !w.is_radial() => {
                return Err(Error::Unsupported("the radial-lengths family needs a radial weight".into()))
            }
            m => m,
        };
        let root = config.root;
        let mut trees = Vec::new();
        let mut caches = Vec::new();
        let mut boxes = Vec::new();
        match mode {
            FamilyMode::RadialLengths => {
                for (l, n) in radial_lengths(root.root_length, config.depth, config.per_decade) {
                    let geom = CarlesonBox::free(root.root_center, l)?;
                    boxes.push(FamilyBox { id: format!("len={l:.6e}"), depth: n, geom, source: BoxSource::Free });
                }
            }
            FamilyMode::Dyadic | FamilyMode::Shifted => {
                let shifts = if mode == FamilyMode::Shifted { config.shifts.max(1) } else { 1 };
                for s in 0..shifts {
                    let offset = root.root_length * s as f64 / shifts as f64;
                    let tree = build_tree(DyadicArc::root(root.root_center + offset, root.root_length)?, config.depth)?;
                    let cache = BoxIntegralCache::build(w, &tree, exponents)?;
                    let nodes: Vec<usize> = if cache.is_per_depth() {
                        (0..=tree.depth).map(DyadicTree::level_start).collect()
                    } else {
                        (0..tree.node_count()).collect()
                    };
                    for node in nodes {
                        let path = tree.arc(node).path();
                        let id = if shifts > 1 { format!("shift{s}:{path}") } else { format!("dyadic:{path}") };
                        boxes.push(FamilyBox {
                            id,
                            depth: DyadicTree::depth_of(node),
                            geom: tree.node_box(node),
                            source: BoxSource::Node { tree: trees.len(), node },
                        });
                    }
                    trees.push(tree);
                    caches.push(cache);
                    if w.is_radial() {
                        // rotations change nothing for radial weights
                        break;
                    }
                }
            }
            FamilyMode::Auto => unreachable!(),
        }
        let mut fam = BoxFamily { weight: w, mode, depth: config.depth, trees, caches, boxes, ln_mass: Vec::new() };
        let ln_mass: Vec<f64> = (0..fam.len()).into_par_iter().map(|i| fam.member(i).raw_ln_int(1.0)).collect::<Result<_>>()?;
        fam.ln_mass = ln_mass;
        Ok(fam)
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn member(&self, i: usize) -> Member<'_, 'w> {
        Member { fam: self, i }
    }

    pub fn depths(&self) -> Vec<u32> {
        self.boxes.iter().map(|b| b.depth).collect()
    }

    /// Per-box logarithms, in parallel, in box order.
    pub fn map_ln<F>(&self, f: F) -> Result<Vec<f64>>
    where
        F: Fn(&Member<'_, 'w>) -> Result<f64> + Sync + Send,
    {
        (0..self.len()).into_par_iter().map(|i| f(&self.member(i))).collect()
    }

    /// Sup-over-family constant from per-box logarithms.
    pub fn constant(&self, name: &str, params: &[(&str, f64)], ln_values: &[f64]) -> ConditionConstant {
        let (trace, arg) = prefix_sup(&self.depths(), ln_values, self.depth);
        let ext = arg.last().copied().flatten().map(|i| self.boxes[i].id.clone()).unwrap_or_default();
        ConditionConstant::from_ln_trace(name, params, &trace, ext)
    }
}

/// One box of a family.
pub struct Member<'a, 'w> {
    fam: &'a BoxFamily<'w>,
    pub i: usize,
}

impl Member<'_, '_> {
    pub fn info(&self) -> &FamilyBox {
        &self.fam.boxes[self.i]
    }

    fn raw_ln_int(&self, s: f64) -> Result<f64> {
        let b = self.info();
        if let BoxSource::Node { tree, node } = b.source {
            let c = &self.fam.caches[tree];
            if c.has_exponent(s) {
                return c.ln_box(node, s);
            }
        }
        box_integral_ln(self.fam.weight, &b.geom, s)
    }
}

impl BoxIntegrals for Member<'_, '_> {
    fn ln_int(&self, s: f64) -> Result<f64> {
        if s == 1.0 && !self.fam.ln_mass.is_empty() {
            return Ok(self.fam.ln_mass[self.i]);
        }
        self.raw_ln_int(s)
    }
    fn log_int(&self) -> Result<f64> {
        let b = self.info();
        if let BoxSource::Node { tree, node } = b.source {
            return Ok(self.fam.caches[tree].log_box(node));
        }
        box_log_integral(self.fam.weight, &b.geom)
    }
    fn ln_area(&self) -> f64 {
        self.info().geom.area().ln()
    }
    fn weight(&self) -> &Weight {
        self.fam.weight
    }
    fn geometry(&self) -> CarlesonBox {
        self.info().geom
    }
}

/// `[w]_p`: sup of `(avg w)(avg w^{1/(1-p)})^{p-1}`.
pub fn bp_constant(fam: &BoxFamily, p: f64) -> Result<ConditionConstant> {
    if !(p > 1.0) {
        return Err(Error::Domain(format!("B_p needs p > 1, got {p}")));
    }
    let v = fam.map_ln(|m| ln_bp(m, p))?;
    Ok(fam.constant("bp", &[("p", p)], &v))
}

/// `[w]_{B_1}`: sup of `(avg w) / ess inf w`. `None` unless the weight's
/// essential infimum is exact on every box (see [`box_ln_essinf`]).
///
/// [`box_ln_essinf`]: crate::weights::box_ln_essinf
pub fn b1_constant(fam: &BoxFamily) -> Result<Option<ConditionConstant>> {
    if !fam.is_empty() && ln_b1(&fam.member(0))?.is_none() {
        return Ok(None);
    }
    let v = fam.map_ln(|m| Ok(ln_b1(m)?.unwrap_or(f64::INFINITY)))?;
    Ok(Some(fam.constant("b1", &[], &v)))
}

/// `[w]_log`: sup of `(avg w) exp(-avg log w)`.
pub fn blog_constant(fam: &BoxFamily) -> Result<ConditionConstant> {
    let v = fam.map_ln(|m| ln_blog(m))?;
    Ok(fam.constant("blog", &[], &v))
}

/// `[w]_{RHI_p}`: sup of `avg w^p / (avg w)^p`.
pub fn rhi_constant(fam: &BoxFamily, p: f64) -> Result<ConditionConstant> {
    if !(p > 1.0) {
        return Err(Error::Domain(format!("RHI_p needs p > 1, got {p}")));
    }
    let v = fam.map_ln(|m| ln_rhi(m, p))?;
    Ok(fam.constant("rhi", &[("p", p)], &v))
}

/// Sup of `w(Q_I) / w(Q_{I/2})`.
pub fn doubling_constant(fam: &BoxFamily) -> Result<ConditionConstant> {
    let v = fam.map_ln(|m| ln_doubling(m))?;
    Ok(fam.constant("doubling", &[], &v))
}

/// `β(α)` for each `α`: sup of `w({w >= w_Q/α}) / w(Q)`.
pub fn binfty_profile(fam: &BoxFamily, alphas: &[f64]) -> Result<Vec<ConditionConstant>> {
    alphas
        .iter()
        .map(|&a| {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::Domain(format!("α must lie in (0, 1), got {a}")));
            }
            let v = fam.map_ln(|m| ln_binfty(m, a))?;
            Ok(fam.constant("binfty", &[("alpha", a)], &v))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn length_grid_covers_every_depth() {
        let ls = radial_lengths(1.0, 10, 200);
        assert_eq!(ls[0], (1.0, 0));
        assert!((ls.last().unwrap().0 - 2f64.powi(-10)).abs() < 1e-15);
        for w in ls.windows(2) {
            assert!(w[0].0 > w[1].0 && w[0].1 <= w[1].1);
        }
        // a length just below 2^-n belongs to depth n + 1
        for &(l, n) in &ls {
            assert!(l >= 2f64.powi(-(n as i32)) * (1.0 - 1e-9));
        }
    }

    #[test]
    fn constant_weight_constants_are_one() {
        let w = Weight::constant(2.5);
        let cfg = FamilyConfig { depth: 8, per_decade: 20, ..Default::default() };
        let fam = BoxFamily::build(&w, &cfg, &[]).unwrap();
        for c in [bp_constant(&fam, 2.0).unwrap(), blog_constant(&fam).unwrap(), rhi_constant(&fam, 3.0).unwrap()] {
            assert!((c.value - 1.0).abs() < 1e-9, "{}: {}", c.name, c.value);
        }
        let b = binfty_profile(&fam, &[0.5]).unwrap();
        assert_eq!(b[0].value, 0.0);
    }
}
