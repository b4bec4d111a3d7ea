//! Weights on the disc and their integral providers.
//!
//! Every integral is returned in log form (`ln ∫ w^s`), with `+inf` meaning
//! divergence. The plain-valued helpers simply exponentiate.

pub mod cache;
pub mod defs;
pub mod expr;
pub mod oracle;
pub mod profile;

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::sync::{Arc as Shared, Mutex, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{band_moment, Arc, CarlesonBox, Region, TopHalf};
use crate::quad::{integrate, integrate_ln, integrate_scaled, ln_add, ln_sum, RTOL};

pub use cache::BoxIntegralCache;
pub use defs::{load_weight, parse_weight};
pub use expr::{Env, Expr};
pub use profile::{Monotone, RadialProfile, Segment, ShellPiece};

use profile::{first_full_shell, shell_bounds, LogSeries, ShellSeries};

#[derive(Clone, Debug)]
pub enum WeightKind {
    Radial(RadialProfile),
    /// `v(r) · a(theta)`.
    Product { radial: RadialProfile, angular: Expr },
    /// Any positive expression in `r` and `theta`.
    General(Expr),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    Lebesgue,
    Weighted,
}

#[derive(Default, Debug)]
struct Memo {
    power: RwLock<HashMap<u64, Shared<ShellSeries>>>,
    log: Mutex<Option<Shared<LogSeries>>>,
}

#[derive(Clone, Debug)]
pub struct Weight {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    pub kind: WeightKind,
    /// `w = e^{ln_scale} · (formula)`.
    pub ln_scale: f64,
    memo: Shared<Memo>,
}

impl Weight {
    pub fn new(name: impl Into<String>, kind: WeightKind) -> Self {
        Weight { name: name.into(), params: BTreeMap::new(), kind, ln_scale: 0.0, memo: Default::default() }
    }

    pub fn radial(name: impl Into<String>, profile: RadialProfile) -> Self {
        Weight::new(name, WeightKind::Radial(profile))
    }

    pub fn constant(c: f64) -> Self {
        Weight::radial("constant", RadialProfile::constant(c))
    }

    pub fn is_radial(&self) -> bool {
        matches!(self.kind, WeightKind::Radial(_))
    }

    /// `c · w`; shares integral memos with `self`.
    pub fn scaled(&self, c: f64) -> Weight {
        Weight { ln_scale: self.ln_scale + c.ln(), ..self.clone() }
    }

    fn profile(&self) -> Option<&RadialProfile> {
        match &self.kind {
            WeightKind::Radial(p) | WeightKind::Product { radial: p, .. } => Some(p),
            WeightKind::General(_) => None,
        }
    }

    pub fn ln_eval(&self, r: f64, theta: f64) -> f64 {
        self.ln_scale
            + match &self.kind {
                WeightKind::Radial(p) => p.ln_value(r),
                WeightKind::Product { radial, angular } => {
                    radial.ln_value(r) + angular.ln_eval(&Env { r, theta, k: 0.0 })
                }
                WeightKind::General(e) => e.ln_eval(&Env { r, theta, k: 0.0 }),
            }
    }

    pub fn eval(&self, r: f64, theta: f64) -> f64 {
        self.ln_eval(r, theta).exp()
    }

    /// Radial breakpoints in `(a, b)`; empty for general weights.
    pub fn radial_breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        self.profile().map(|p| p.breakpoints(a, b)).unwrap_or_default()
    }

    pub(crate) fn power_series(&self, s: f64) -> Result<Shared<ShellSeries>> {
        let key = s.to_bits();
        if let Some(t) = self.memo.power.read().unwrap().get(&key) {
            return Ok(t.clone());
        }
        let p = self.profile().ok_or_else(|| Error::Unsupported("shell series of a general weight".into()))?;
        let t = Shared::new(p.power_series(s)?);
        self.memo.power.write().unwrap().insert(key, t.clone());
        Ok(t)
    }

    fn log_series(&self) -> Result<Shared<LogSeries>> {
        let mut slot = self.memo.log.lock().unwrap();
        if let Some(t) = slot.as_ref() {
            return Ok(t.clone());
        }
        let p = self.profile().ok_or_else(|| Error::Unsupported("shell series of a general weight".into()))?;
        let t = Shared::new(p.log_series()?);
        *slot = Some(t.clone());
        Ok(t)
    }

    /// `ln ∫_a^b v^s (1 - r) dr` for the radial factor; `a = 0` allowed.
    pub fn radial_ln(&self, a: f64, b: f64, s: f64) -> Result<f64> {
        let p = self.profile().ok_or_else(|| Error::Unsupported("radial integral of a general weight".into()))?;
        if a > 0.0 {
            return p.ln_band(a, b, s);
        }
        let k = first_full_shell(b);
        let top = shell_bounds(k).1;
        let head = if top < b { p.ln_band(top, b, s)? } else { f64::NEG_INFINITY };
        let series = self.power_series(s)?;
        Ok(ln_add(head, series.ln_suffix(k)))
    }

    /// `∫_a^b log v (1 - r) dr` for the radial factor; `a = 0` allowed.
    pub fn radial_log(&self, a: f64, b: f64) -> Result<f64> {
        let p = self.profile().ok_or_else(|| Error::Unsupported("radial integral of a general weight".into()))?;
        if a > 0.0 {
            return p.log_band(a, b);
        }
        let k = first_full_shell(b);
        let top = shell_bounds(k).1;
        let head = if top < b { p.log_band(top, b)? } else { 0.0 };
        Ok(head + self.log_series()?.suffix(k))
    }

    /// True when any shell tail of the radial factor came from the geometric model.
    pub fn tail_modelled(&self, s: f64) -> bool {
        self.power_series(s).map(|t| t.modelled_tail).unwrap_or(false)
    }
}

/// Pieces of an arc that do not wrap past angle 1.
fn arc_pieces(arc: &Arc) -> Vec<(f64, f64)> {
    let end = arc.start + arc.length;
    if end <= 1.0 {
        vec![(arc.start, end)]
    } else {
        vec![(arc.start, 1.0), (0.0, end - 1.0)]
    }
}

fn angular_ln(angular: &Expr, arc: &Arc, s: f64) -> Result<f64> {
    if s == 0.0 {
        return Ok(arc.length.ln());
    }
    let mut acc = f64::NEG_INFINITY;
    for (a, b) in arc_pieces(arc) {
        let v = integrate_ln(|t| s * angular.ln_eval(&Env { r: 0.0, theta: t, k: 0.0 }), a, b, RTOL)?;
        acc = ln_add(acc, v);
    }
    Ok(acc)
}

fn angular_log(angular: &Expr, arc: &Arc) -> Result<f64> {
    let mut acc = 0.0;
    for (a, b) in arc_pieces(arc) {
        acc += integrate(|t| angular.ln_eval(&Env { r: 0.0, theta: t, k: 0.0 }), a, b, RTOL)?;
    }
    Ok(acc)
}

/// `ln ∫_{arc} ∫_{a}^{b} w^s (1 - r) dr dθ` for a general expression, `a > 0`.
fn general_band_ln(e: &Expr, arc: &Arc, a: f64, b: f64, s: f64) -> Result<f64> {
    let mut acc = f64::NEG_INFINITY;
    for (t0, t1) in arc_pieces(arc) {
        let mut err = None;
        let v = integrate_ln(
            |r| {
                let inner = integrate_ln(|t| s * e.ln_eval(&Env { r, theta: t, k: 0.0 }), t0, t1, RTOL);
                match inner {
                    Ok(x) => x + (1.0 - r).ln(),
                    Err(x) => {
                        err = Some(x);
                        f64::NEG_INFINITY
                    }
                }
            },
            a,
            b,
            RTOL,
        )?;
        if let Some(x) = err {
            return Err(x);
        }
        acc = ln_add(acc, v);
    }
    Ok(acc)
}

fn general_band_log(e: &Expr, arc: &Arc, a: f64, b: f64) -> Result<f64> {
    let mut acc = 0.0;
    for (t0, t1) in arc_pieces(arc) {
        let inner = |r: f64, abs: bool| {
            let f = |t: f64| e.ln_eval(&Env { r, theta: t, k: 0.0 });
            let v = if abs { integrate(|t| f(t).abs(), t0, t1, RTOL) } else { integrate(f, t0, t1, RTOL) };
            v.unwrap_or(f64::NAN) * (1.0 - r)
        };
        // log w changes sign, so the signed integral can cancel to ~0
        let mag = integrate(|r| inner(r, true), a, b, RTOL)?;
        acc += integrate_scaled(|r| inner(r, false), a, b, RTOL, mag)?;
    }
    Ok(acc)
}

/// `ln ∫_region w^s dA`.
pub fn region_integral_ln(w: &Weight, region: &Region, s: f64) -> Result<f64> {
    let arc = &region.arc;
    let (a, b) = (region.r_lo, region.r_hi);
    let scale = s * w.ln_scale;
    if s == 0.0 {
        return Ok(region.area().ln());
    }
    match &w.kind {
        WeightKind::Radial(_) => Ok((2.0 * PI * arc.length).ln() + scale + w.radial_ln(a, b, s)?),
        WeightKind::Product { angular, .. } => {
            Ok((2.0 * PI).ln() + scale + angular_ln(angular, arc, s)? + w.radial_ln(a, b, s)?)
        }
        WeightKind::General(e) => {
            let inner = if a > 0.0 {
                general_band_ln(e, arc, a, b, s)?
            } else {
                let k0 = first_full_shell(b);
                let top = shell_bounds(k0).1;
                let head = if top < b { general_band_ln(e, arc, top, b, s)? } else { f64::NEG_INFINITY };
                let series = profile::shell_series(
                    |j| {
                        let (lo, hi) = shell_bounds(k0 + j);
                        general_band_ln(e, arc, lo, hi, s)
                    },
                    |_| false,
                )?;
                ln_add(head, series.ln_suffix(0))
            };
            Ok((2.0 * PI).ln() + scale + inner)
        }
    }
}

pub fn box_integral_ln(w: &Weight, b: &CarlesonBox, s: f64) -> Result<f64> {
    region_integral_ln(w, &b.region(), s)
}

/// `ln ess inf_Q w`, where it is exact: radial segment profiles whose
/// pieces are constant or flagged monotone. `None` for anything else.
pub fn box_ln_essinf(w: &Weight, b: &CarlesonBox) -> Option<f64> {
    let WeightKind::Radial(p @ RadialProfile::Segments(_)) = &w.kind else {
        return None;
    };
    let mut lo = f64::INFINITY;
    for sp in p.spans(0.0, b.length()) {
        let v = match sp.kind {
            profile::SpanKind::Const(c) => c,
            profile::SpanKind::Smooth { monotone: Monotone::General, .. } => return None,
            profile::SpanKind::Smooth { monotone: Monotone::Decreasing, .. } => sp.ln_value(sp.hi),
            profile::SpanKind::Smooth { .. } if sp.lo > 0.0 => sp.ln_value(sp.lo),
            // limit at the boundary: accept only a clean 0 or ∞
            profile::SpanKind::Smooth { .. } => match sp.ln_value(0.0) {
                v if !v.is_nan() => v,
                _ => Some(sp.ln_value(f64::MIN_POSITIVE)).filter(|v| v.is_infinite())?,
            },
        };
        if v.is_nan() {
            return None;
        }
        lo = lo.min(v);
    }
    Some(lo + w.ln_scale)
}

/// `∫_Q w^s dA`; `+inf` when the integral diverges.
pub fn box_integral(w: &Weight, b: &CarlesonBox, s: f64) -> Result<f64> {
    Ok(box_integral_ln(w, b, s)?.exp())
}

/// `∫_region log w dA`; `-inf` when it diverges.
pub fn region_log_integral(w: &Weight, region: &Region) -> Result<f64> {
    let arc = &region.arc;
    let (a, b) = (region.r_lo, region.r_hi);
    let area_part = region.area() * w.ln_scale;
    let v = match &w.kind {
        WeightKind::Radial(_) => 2.0 * PI * arc.length * w.radial_log(a, b)?,
        WeightKind::Product { angular, .. } => {
            2.0 * PI * (arc.length * w.radial_log(a, b)? + band_moment(a, b) * angular_log(angular, arc)?)
        }
        WeightKind::General(e) => {
            if a > 0.0 {
                2.0 * PI * general_band_log(e, arc, a, b)?
            } else {
                let k0 = first_full_shell(b);
                let top = shell_bounds(k0).1;
                let mut acc = if top < b { general_band_log(e, arc, top, b)? } else { 0.0 };
                let mut prev = 0.0f64;
                let mut run = 0;
                for j in 0..=profile::EXPLICIT_SHELLS {
                    let (lo, hi) = shell_bounds(k0 + j);
                    let c = general_band_log(e, arc, lo, hi)?;
                    if prev != 0.0 && c.signum() == prev.signum() && c.abs() >= prev.abs() {
                        run += 1;
                        if run >= profile::DIVERGENCE_RUN {
                            return Ok(c.signum() * f64::INFINITY);
                        }
                    } else {
                        run = 0;
                    }
                    acc += c;
                    prev = c;
                }
                2.0 * PI * acc
            }
        }
    };
    Ok(v + area_part)
}

pub fn box_log_integral(w: &Weight, b: &CarlesonBox) -> Result<f64> {
    region_log_integral(w, &b.region())
}

/// Radial superlevel set `{v >= e^{ln_t}}` in `(a, b]`: returns
/// `ln ∫_set (1 - r) dr` (Lebesgue) or `ln ∫_set v (1 - r) dr` (weighted).
fn radial_level_ln(w: &Weight, a: f64, b: f64, ln_t: f64, measure: Measure) -> Result<f64> {
    let p = w.profile().expect("radial factor");
    let band = |lo: f64, hi: f64| -> Result<f64> {
        let mut acc = f64::NEG_INFINITY;
        for sp in p.spans(lo, hi) {
            for (x, y) in sp.superlevel(ln_t)? {
                let v = match measure {
                    Measure::Lebesgue => band_moment(x, y).ln(),
                    Measure::Weighted => sp.ln_moment(x, y, 1.0)?,
                };
                acc = ln_add(acc, v);
            }
        }
        Ok(acc)
    };
    if a > 0.0 {
        return band(a, b);
    }
    let k0 = first_full_shell(b);
    let top = shell_bounds(k0).1;
    let mut acc = if top < b { band(top, b)? } else { f64::NEG_INFINITY };
    let total = match measure {
        Measure::Lebesgue => band_moment(0.0, b).ln(),
        Measure::Weighted => w.radial_ln(0.0, b, 1.0)?,
    };
    let series = match measure {
        Measure::Weighted => Some(w.power_series(1.0)?),
        Measure::Lebesgue => None,
    };
    for k in k0..k0 + 1100 {
        let (lo, hi) = shell_bounds(k);
        if !(hi > lo && lo > 0.0) {
            break;
        }
        acc = ln_add(acc, band(lo, hi)?);
        let rest = match &series {
            None => band_moment(0.0, lo).ln(),
            Some(t) => t.ln_suffix(k + 1),
        };
        if rest < total - 40.0 {
            break;
        }
    }
    Ok(acc)
}

const GRID_R: usize = 32;
const GRID_T: usize = 64;

/// Midpoints and widths of a uniform grid on an arc.
fn arc_grid(arc: &Arc, n: usize) -> Vec<(f64, f64)> {
    let h = arc.length / n as f64;
    (0..n).map(|i| ((arc.start + (i as f64 + 0.5) * h).rem_euclid(1.0), h)).collect()
}

/// Level sets of general weights: midpoint rule on a `32 x 64` grid per
/// radial shell (and per band), shells followed 60 levels below the region.
fn general_level_ln(e: &Expr, ln_scale: f64, region: &Region, ln_t: f64, measure: Measure) -> Result<f64> {
    let arc = &region.arc;
    let band = |a: f64, b: f64| -> f64 {
        let mut terms = Vec::new();
        let dr = (b - a) / GRID_R as f64;
        for i in 0..GRID_R {
            let (r0, r1) = (a + i as f64 * dr, a + (i + 1) as f64 * dr);
            let r = 0.5 * (r0 + r1);
            let m = band_moment(r0, r1).ln();
            for (t, h) in arc_grid(arc, GRID_T) {
                let lw = ln_scale + e.ln_eval(&Env { r, theta: t, k: 0.0 });
                if lw >= ln_t {
                    terms.push(m + h.ln() + if measure == Measure::Weighted { lw } else { 0.0 });
                }
            }
        }
        ln_sum(terms)
    };
    let (a, b) = (region.r_lo, region.r_hi);
    let inner = if a > 0.0 {
        band(a, b)
    } else {
        let k0 = first_full_shell(b);
        let top = shell_bounds(k0).1;
        let mut acc = if top < b { band(top, b) } else { f64::NEG_INFINITY };
        for k in k0..k0 + profile::EXPLICIT_SHELLS {
            let (lo, hi) = shell_bounds(k);
            acc = ln_add(acc, band(lo, hi));
        }
        acc
    };
    Ok((2.0 * PI).ln() + inner)
}

/// `ln |{x ∈ region : w(x) >= e^{ln_t}}|` or the `w`-measure of that set.
pub fn level_set_measure_ln(w: &Weight, region: &Region, ln_t: f64, measure: Measure) -> Result<f64> {
    let arc = &region.arc;
    let (a, b) = (region.r_lo, region.r_hi);
    let ln_t_formula = ln_t - w.ln_scale;
    let wscale = if measure == Measure::Weighted { w.ln_scale } else { 0.0 };
    match &w.kind {
        WeightKind::Radial(_) => {
            Ok((2.0 * PI * arc.length).ln() + wscale + radial_level_ln(w, a, b, ln_t_formula, measure)?)
        }
        WeightKind::Product { angular, .. } => {
            // exact in r, 64-point midpoint rule in theta
            let mut terms = Vec::new();
            for (t, h) in arc_grid(arc, GRID_T) {
                let la = angular.ln_eval(&Env { r: 0.0, theta: t, k: 0.0 });
                let rad = radial_level_ln(w, a, b, ln_t_formula - la, measure)?;
                terms.push(h.ln() + rad + if measure == Measure::Weighted { la } else { 0.0 });
            }
            Ok((2.0 * PI).ln() + wscale + ln_sum(terms))
        }
        WeightKind::General(e) => Ok(general_level_ln(e, 0.0, region, ln_t_formula, measure)? + wscale),
    }
}

/// Plain-valued [`level_set_measure_ln`] with a threshold `t > 0`.
pub fn level_set_measure(w: &Weight, region: impl Into<Region>, t: f64, measure: Measure) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("threshold {t} must be positive")));
    }
    Ok(level_set_measure_ln(w, &region.into(), t.ln(), measure)?.exp())
}

impl From<CarlesonBox> for Region {
    fn from(b: CarlesonBox) -> Region {
        b.region()
    }
}

impl From<TopHalf> for Region {
    fn from(t: TopHalf) -> Region {
        t.region()
    }
}

/// `(ln inf w, ln sup w)` over a band region (`r_lo > 0`), sampled where no
/// closed form exists.
pub fn region_ln_range(w: &Weight, region: &Region) -> Result<(f64, f64)> {
    let (a, b) = (region.r_lo, region.r_hi);
    if !(a > 0.0) {
        return Err(Error::Unsupported("range over a region touching the boundary".into()));
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    match &w.kind {
        WeightKind::Radial(p) => {
            for sp in p.spans(a, b) {
                let (x, y) = sp.ln_range();
                lo = lo.min(x);
                hi = hi.max(y);
            }
        }
        WeightKind::Product { radial, angular } => {
            let (mut rl, mut rh) = (f64::INFINITY, f64::NEG_INFINITY);
            for sp in radial.spans(a, b) {
                let (x, y) = sp.ln_range();
                rl = rl.min(x);
                rh = rh.max(y);
            }
            let (mut al, mut ah) = (f64::INFINITY, f64::NEG_INFINITY);
            for i in 0..=256 {
                let t = region.arc.start + region.arc.length * i as f64 / 256.0;
                let v = angular.ln_eval(&Env { r: 0.0, theta: t.rem_euclid(1.0), k: 0.0 });
                al = al.min(v);
                ah = ah.max(v);
            }
            lo = rl + al;
            hi = rh + ah;
        }
        WeightKind::General(e) => {
            for i in 0..=32 {
                let r = a + (b - a) * i as f64 / 32.0;
                for j in 0..=64 {
                    let t = region.arc.start + region.arc.length * j as f64 / 64.0;
                    let v = e.ln_eval(&Env { r, theta: t.rem_euclid(1.0), k: 0.0 });
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
        }
    }
    Ok((lo + w.ln_scale, hi + w.ln_scale))
}

/// Load-time checks: positivity on a `10^4`-point grid and `w ∈ L^1(𝔻)`.
pub fn validate(w: &Weight) -> Result<()> {
    let n = 100;
    for i in 0..n {
        // half log-spaced toward the boundary, half uniform
        let r = if i % 2 == 0 {
            (-(i as f64) * 0.3).exp2().min(1.0) * (1.0 - 1e-9)
        } else {
            (i as f64 + 0.5) / n as f64
        };
        for j in 0..n {
            let t = (j as f64 + 0.5) / n as f64;
            let v = w.ln_eval(r, t);
            if v.is_nan() || v == f64::INFINITY {
                return Err(Error::Domain(format!("weight undefined or non-positive at r = {r}, theta = {t}")));
            }
            if v == f64::NEG_INFINITY && r > 1e-3 {
                return Err(Error::Domain(format!("weight vanishes at r = {r}, theta = {t}")));
            }
        }
    }
    let disc = CarlesonBox::free(0.5, 1.0)?;
    let total = box_integral_ln(w, &disc, 1.0)?;
    if !total.is_finite() {
        return Err(Error::Integrability(format!("∫ w over the disc is {}", total.exp())));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_weight_integrals() {
        let w = Weight::constant(1.0);
        let b = CarlesonBox::free(0.3, 0.25).unwrap();
        let v = box_integral(&w, &b, 7.0).unwrap();
        assert!((v - b.area()).abs() < 1e-12 * b.area());
        assert_eq!(box_log_integral(&w, &b).unwrap(), 0.0);
        let c = w.scaled(3.0);
        let lg = box_log_integral(&c, &b).unwrap();
        assert!((lg - b.area() * 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn constant_level_sets() {
        let w = Weight::constant(1.0);
        let b = CarlesonBox::free(0.1, 0.5).unwrap();
        assert_eq!(level_set_measure(&w, b, 2.0, Measure::Lebesgue).unwrap(), 0.0);
        let all = level_set_measure(&w, b, 0.5, Measure::Lebesgue).unwrap();
        assert!((all - b.area()).abs() < 1e-12);
    }
}
