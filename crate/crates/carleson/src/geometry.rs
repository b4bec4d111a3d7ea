//! Arcs of the circle, Carleson boxes, top-halves and the truncated dyadic tree.
//!
//! The circle has total measure 1, so an arc is a half-open interval of
//! angles `[start, start + length)` taken mod 1. Radial positions are stored
//! as `r = 1 - |z|`, the distance to the boundary: the box over an arc of
//! length `l` is the band `0 < r < l`, its top-half is `l/2 < r < l`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest truncation depth accepted by [`build_tree`].
pub const MAX_DEPTH: u32 = 26;

/// A half-open arc `[start, start + length)` of the unit-measure circle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub start: f64,
    pub length: f64,
}

impl Arc {
    pub fn new(start: f64, length: f64) -> Result<Self> {
        if !(length > 0.0 && length <= 1.0) {
            return Err(Error::ArcLength(length));
        }
        Ok(Arc { start: start.rem_euclid(1.0), length })
    }

    pub fn centered(center: f64, length: f64) -> Result<Self> {
        Arc::new(center - 0.5 * length, length)
    }

    pub fn center(&self) -> f64 {
        (self.start + 0.5 * self.length).rem_euclid(1.0)
    }

    /// Offset of `theta` from the arc start, in `[0, 1)`.
    pub fn offset(&self, theta: f64) -> f64 {
        (theta - self.start).rem_euclid(1.0)
    }

    pub fn contains(&self, theta: f64) -> bool {
        self.offset(theta) < self.length
    }

    /// Concentric sub-arc scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Arc> {
        Arc::centered(self.center(), self.length * factor)
    }

    /// Measure of the intersection with another arc (wraparound aware).
    pub fn overlap(&self, other: &Arc) -> f64 {
        let a0 = 0.0;
        let a1 = self.length;
        let b0 = self.offset(other.start);
        let mut total = 0.0;
        for shift in [-1.0, 0.0] {
            let lo = (b0 + shift).max(a0);
            let hi = (b0 + shift + other.length).min(a1);
            if hi > lo {
                total += hi - lo;
            }
        }
        total
    }
}

/// An arc obtained from a root arc by `depth` bisections.
///
/// `index` holds the bisection path, most significant bit first; a zero bit
/// is the left half (lower angle).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicArc {
    pub root_length: f64,
    pub root_center: f64,
    pub index: u64,
    pub depth: u32,
}

impl DyadicArc {
    pub fn root(root_center: f64, root_length: f64) -> Result<Self> {
        if !(root_length > 0.0 && root_length <= 1.0) {
            return Err(Error::ArcLength(root_length));
        }
        Ok(DyadicArc { root_length, root_center: root_center.rem_euclid(1.0), index: 0, depth: 0 })
    }

    /// The whole circle as root, starting at angle 0.
    pub fn circle() -> Self {
        DyadicArc { root_length: 1.0, root_center: 0.5, index: 0, depth: 0 }
    }

    pub fn length(&self) -> f64 {
        self.root_length * (-(self.depth as f64)).exp2()
    }

    pub fn root_start(&self) -> f64 {
        (self.root_center - 0.5 * self.root_length).rem_euclid(1.0)
    }

    pub fn start(&self) -> f64 {
        (self.root_start() + self.index as f64 * self.length()).rem_euclid(1.0)
    }

    pub fn arc(&self) -> Arc {
        Arc { start: self.start(), length: self.length() }
    }

    /// Bisection path as a string of `0` (left) and `1` (right).
    pub fn path(&self) -> String {
        (0..self.depth).rev().map(|b| if self.index >> b & 1 == 1 { '1' } else { '0' }).collect()
    }

    pub fn child(&self, right: bool) -> DyadicArc {
        DyadicArc { index: self.index << 1 | right as u64, depth: self.depth + 1, ..*self }
    }

    /// True when `other` is this arc or one of its dyadic descendants.
    pub fn contains_arc(&self, other: &DyadicArc) -> bool {
        other.depth >= self.depth && other.index >> (other.depth - self.depth) == self.index
    }
}

/// The two halves of a dyadic arc, left (lower angle) first.
pub fn children(arc: &DyadicArc) -> (DyadicArc, DyadicArc) {
    (arc.child(false), arc.child(true))
}

/// The Carleson box `Q_I = {z : z/|z| ∈ I, 1 - |I| < |z| < 1}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarlesonBox {
    pub arc: Arc,
}

impl CarlesonBox {
    pub fn new(arc: Arc) -> Self {
        CarlesonBox { arc }
    }

    pub fn free(center: f64, length: f64) -> Result<Self> {
        Ok(CarlesonBox { arc: Arc::centered(center, length)? })
    }

    pub fn length(&self) -> f64 {
        self.arc.length
    }

    pub fn inner_radius(&self) -> f64 {
        1.0 - self.arc.length
    }

    pub fn area(&self) -> f64 {
        area_for_length(self.arc.length)
    }

    /// The box over the concentric arc of half the length.
    pub fn half(&self) -> CarlesonBox {
        CarlesonBox { arc: Arc { start: (self.arc.start + 0.25 * self.arc.length).rem_euclid(1.0), length: 0.5 * self.arc.length } }
    }

    pub fn region(&self) -> Region {
        Region { arc: self.arc, r_lo: 0.0, r_hi: self.arc.length }
    }
}

impl From<DyadicArc> for CarlesonBox {
    fn from(a: DyadicArc) -> Self {
        CarlesonBox { arc: a.arc() }
    }
}

fn area_for_length(l: f64) -> f64 {
    PI * l * l * (2.0 - l)
}

/// Exact area `π|I|²(2 - |I|)` of a Carleson box.
pub fn box_area(b: &CarlesonBox) -> Result<f64> {
    let l = b.arc.length;
    if !(l > 0.0 && l <= 1.0) {
        return Err(Error::ArcLength(l));
    }
    Ok(area_for_length(l))
}

/// Area of `Q_I` minus the concentric box over `(1 - eps) I`.
pub fn collar_area(l: f64, eps: f64) -> f64 {
    area_for_length(l) - area_for_length((1.0 - eps) * l)
}

/// The top-half `T_I = {z : z/|z| ∈ I, 1 - |I| < |z| < 1 - |I|/2}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopHalf {
    pub arc: Arc,
}

impl TopHalf {
    pub fn area(&self) -> f64 {
        let l = self.arc.length;
        PI * l * l * (1.0 - 0.75 * l)
    }

    pub fn region(&self) -> Region {
        Region { arc: self.arc, r_lo: 0.5 * self.arc.length, r_hi: self.arc.length }
    }

    /// Radial band `(1 - |I|, 1 - |I|/2)` in `|z|`.
    pub fn radii(&self) -> (f64, f64) {
        (1.0 - self.arc.length, 1.0 - 0.5 * self.arc.length)
    }
}

pub fn top_half(b: &CarlesonBox) -> TopHalf {
    TopHalf { arc: b.arc }
}

/// A sector of an annulus in boundary-distance coordinates:
/// angles in `arc`, `r_lo < 1 - |z| < r_hi`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub arc: Arc,
    pub r_lo: f64,
    pub r_hi: f64,
}

impl Region {
    pub fn area(&self) -> f64 {
        2.0 * PI * self.arc.length * band_moment(self.r_lo, self.r_hi)
    }
}

/// `∫_a^b (1 - r) dr`.
pub fn band_moment(a: f64, b: f64) -> f64 {
    (b - a) * (1.0 - 0.5 * (a + b))
}

/// Truncated dyadic tree in breadth-first order; children of `i` are `2i+1`, `2i+2`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DyadicTree {
    pub root: DyadicArc,
    pub depth: u32,
}

pub fn build_tree(root: DyadicArc, depth: u32) -> Result<DyadicTree> {
    if depth > MAX_DEPTH {
        return Err(Error::DepthGuard(depth));
    }
    Ok(DyadicTree { root: DyadicArc { index: 0, depth: 0, ..root }, depth })
}

impl DyadicTree {
    pub fn node_count(&self) -> usize {
        (1usize << (self.depth + 1)) - 1
    }

    pub fn depth_of(i: usize) -> u32 {
        usize::BITS - 1 - (i + 1).leading_zeros()
    }

    pub fn level_start(d: u32) -> usize {
        (1usize << d) - 1
    }

    pub fn parent(i: usize) -> Option<usize> {
        if i == 0 {
            None
        } else {
            Some((i - 1) / 2)
        }
    }

    pub fn children(&self, i: usize) -> Option<(usize, usize)> {
        if Self::depth_of(i) < self.depth {
            Some((2 * i + 1, 2 * i + 2))
        } else {
            None
        }
    }

    pub fn arc(&self, i: usize) -> DyadicArc {
        let d = Self::depth_of(i);
        DyadicArc { index: (i - Self::level_start(d)) as u64, depth: d, ..self.root }
    }

    pub fn node_box(&self, i: usize) -> CarlesonBox {
        self.arc(i).into()
    }

    pub fn length_at(&self, d: u32) -> f64 {
        self.root.root_length * (-(d as f64)).exp2()
    }

    pub fn box_area_at(&self, d: u32) -> f64 {
        area_for_length(self.length_at(d))
    }

    pub fn top_area_at(&self, d: u32) -> f64 {
        let l = self.length_at(d);
        PI * l * l * (1.0 - 0.75 * l)
    }

    /// Node whose top-half contains the point, if it lies in the covered part.
    pub fn locate(&self, theta: f64, r: f64) -> Option<usize> {
        let l0 = self.root.root_length;
        let offset = (theta - self.root.root_start()).rem_euclid(1.0);
        if offset >= l0 || !(r > 0.0 && r < l0) {
            return None;
        }
        let mut d = (l0 / r).log2().floor() as i64;
        // settle boundary rounding: need l_d / 2 < r <= l_d
        while d > 0 && r > l0 * (-(d as f64)).exp2() {
            d -= 1;
        }
        while r <= l0 * (-(d as f64 + 1.0)).exp2() {
            d += 1;
        }
        if d as u32 > self.depth {
            return None;
        }
        let d = d as u32;
        let pos = ((offset / l0) * (1u64 << d) as f64).floor() as usize;
        Some(Self::level_start(d) + pos.min((1usize << d) - 1))
    }

    /// Area of the part of the root box below the deepest top-halves.
    pub fn uncovered_area(&self) -> f64 {
        let l = self.length_at(self.depth + 1);
        (1u64 << (self.depth + 1)) as f64 * area_for_length(l)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_identity() {
        for d in 0..10 {
            let t = DyadicTree { root: DyadicArc::circle(), depth: 12 };
            let lhs = t.box_area_at(d);
            let rhs = t.top_area_at(d) + 2.0 * t.box_area_at(d + 1);
            assert!((lhs - rhs).abs() <= 1e-14 * lhs);
        }
    }

    #[test]
    fn node_arithmetic() {
        let t = build_tree(DyadicArc::circle(), 3).unwrap();
        assert_eq!(t.node_count(), 15);
        assert_eq!(DyadicTree::depth_of(0), 0);
        assert_eq!(DyadicTree::depth_of(2), 1);
        assert_eq!(DyadicTree::depth_of(3), 2);
        assert_eq!(t.arc(4).path(), "01");
        assert_eq!(t.arc(4).start(), 0.25);
        assert!(t.children(7).is_none());
    }

    #[test]
    fn wrapping_overlap() {
        let a = Arc::new(0.9, 0.2).unwrap();
        let b = Arc::new(0.0, 0.05).unwrap();
        assert!((a.overlap(&b) - 0.05).abs() < 1e-15);
        assert!(a.contains(0.05) && !a.contains(0.2));
    }
}
