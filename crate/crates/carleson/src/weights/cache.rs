//! Frozen per-tree tables of box and top-half integrals.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{top_half, DyadicTree};
use crate::quad::ln_add;

use super::{box_log_integral, region_integral_ln, region_log_integral, Weight};

/// Integrals over every node of a [`DyadicTree`], for a fixed set of exponents.
///
/// Radial weights are stored once per depth (all nodes of a level are
/// rotations of each other); other weights once per node. Parent values are
/// assembled from the top-half plus both children, so the partition identity
/// holds up to rounding.
#[derive(Clone, Debug)]
pub struct BoxIntegralCache {
    pub exponents: Vec<f64>,
    pub depth: u32,
    per_depth: bool,
    ln_box: Vec<Vec<f64>>,
    ln_top: Vec<Vec<f64>>,
    log_box: Vec<f64>,
    log_top: Vec<f64>,
    ln_box_area: Vec<f64>,
    ln_top_area: Vec<f64>,
}

impl BoxIntegralCache {
    /// Computes all tables in one parallel pass. Exponent 1 is always included.
    pub fn build(w: &Weight, tree: &DyadicTree, exponents: &[f64]) -> Result<Self> {
        let mut exps: Vec<f64> = vec![1.0];
        for &s in exponents {
            if !exps.contains(&s) {
                exps.push(s);
            }
        }
        let n = tree.depth;
        let ln_box_area: Vec<f64> = (0..=n).map(|d| tree.box_area_at(d).ln()).collect();
        let ln_top_area: Vec<f64> = (0..=n).map(|d| tree.top_area_at(d).ln()).collect();
        let per_depth = w.is_radial();
        let (ln_box, ln_top, log_box, log_top) = if per_depth {
            let reps: Vec<usize> = (0..=n).map(DyadicTree::level_start).collect();
            let below = tree.arc(0).arc();
            let deeper = crate::geometry::Arc { start: below.start, length: tree.length_at(n + 1) };
            let deep_box = crate::geometry::CarlesonBox::new(deeper);
            let mut ln_box = Vec::new();
            let mut ln_top = Vec::new();
            for &s in &exps {
                let tops: Vec<f64> = reps
                    .par_iter()
                    .map(|&i| region_integral_ln(w, &top_half(&tree.node_box(i)).region(), s))
                    .collect::<Result<_>>()?;
                let mut boxes = vec![0.0; (n + 1) as usize];
                let mut acc = region_integral_ln(w, &deep_box.region(), s)?;
                for d in (0..=n as usize).rev() {
                    acc = ln_add(tops[d], std::f64::consts::LN_2 + acc);
                    boxes[d] = acc;
                }
                ln_box.push(boxes);
                ln_top.push(tops);
            }
            let log_top: Vec<f64> = reps
                .iter()
                .map(|&i| region_log_integral(w, &top_half(&tree.node_box(i)).region()))
                .collect::<Result<_>>()?;
            let mut log_box = vec![0.0; (n + 1) as usize];
            let mut acc = box_log_integral(w, &deep_box)?;
            for d in (0..=n as usize).rev() {
                acc = log_top[d] + 2.0 * acc;
                log_box[d] = acc;
            }
            (ln_box, ln_top, log_box, log_top)
        } else {
            let count = tree.node_count();
            let leaf0 = DyadicTree::level_start(n);
            let mut ln_box = Vec::new();
            let mut ln_top = Vec::new();
            for &s in &exps {
                let tops: Vec<f64> = (0..count)
                    .into_par_iter()
                    .map(|i| region_integral_ln(w, &top_half(&tree.node_box(i)).region(), s))
                    .collect::<Result<_>>()?;
                let leaves: Vec<f64> = (leaf0..count)
                    .into_par_iter()
                    .map(|i| region_integral_ln(w, &tree.node_box(i).region(), s))
                    .collect::<Result<_>>()?;
                let mut boxes = vec![0.0; count];
                boxes[leaf0..].copy_from_slice(&leaves);
                for i in (0..leaf0).rev() {
                    boxes[i] = ln_add(tops[i], ln_add(boxes[2 * i + 1], boxes[2 * i + 2]));
                }
                ln_box.push(boxes);
                ln_top.push(tops);
            }
            let log_top: Vec<f64> = (0..count)
                .into_par_iter()
                .map(|i| region_log_integral(w, &top_half(&tree.node_box(i)).region()))
                .collect::<Result<_>>()?;
            let leaves: Vec<f64> = (leaf0..count)
                .into_par_iter()
                .map(|i| box_log_integral(w, &tree.node_box(i)))
                .collect::<Result<_>>()?;
            let mut log_box = vec![0.0; count];
            log_box[leaf0..].copy_from_slice(&leaves);
            for i in (0..leaf0).rev() {
                log_box[i] = log_top[i] + log_box[2 * i + 1] + log_box[2 * i + 2];
            }
            (ln_box, ln_top, log_box, log_top)
        };
        Ok(BoxIntegralCache {
            exponents: exps,
            depth: n,
            per_depth,
            ln_box,
            ln_top,
            log_box,
            log_top,
            ln_box_area,
            ln_top_area,
        })
    }

    pub fn is_per_depth(&self) -> bool {
        self.per_depth
    }

    fn slot(&self, node: usize) -> usize {
        if self.per_depth {
            DyadicTree::depth_of(node) as usize
        } else {
            node
        }
    }

    fn exp_index(&self, s: f64) -> Result<usize> {
        self.exponents
            .iter()
            .position(|&x| x == s)
            .ok_or_else(|| Error::Domain(format!("exponent {s} was not cached")))
    }

    pub fn has_exponent(&self, s: f64) -> bool {
        self.exponents.contains(&s)
    }

    /// `ln ∫_{Q_J} w^s`.
    pub fn ln_box(&self, node: usize, s: f64) -> Result<f64> {
        Ok(self.ln_box[self.exp_index(s)?][self.slot(node)])
    }

    /// `ln ∫_{T_J} w^s`.
    pub fn ln_top(&self, node: usize, s: f64) -> Result<f64> {
        Ok(self.ln_top[self.exp_index(s)?][self.slot(node)])
    }

    /// `ln ∫_{Q_J} w` (exponent 1, always present).
    pub fn ln_mass(&self, node: usize) -> f64 {
        self.ln_box[0][self.slot(node)]
    }

    pub fn ln_top_mass(&self, node: usize) -> f64 {
        self.ln_top[0][self.slot(node)]
    }

    pub fn ln_area(&self, node: usize) -> f64 {
        self.ln_box_area[DyadicTree::depth_of(node) as usize]
    }

    pub fn ln_top_area(&self, node: usize) -> f64 {
        self.ln_top_area[DyadicTree::depth_of(node) as usize]
    }

    /// `ln` of the Lebesgue average of `w` over `Q_J`.
    pub fn ln_avg(&self, node: usize) -> f64 {
        self.ln_mass(node) - self.ln_area(node)
    }

    /// `∫_{Q_J} log w`.
    pub fn log_box(&self, node: usize) -> f64 {
        self.log_box[self.slot(node)]
    }

    pub fn log_top(&self, node: usize) -> f64 {
        self.log_top[self.slot(node)]
    }
}
