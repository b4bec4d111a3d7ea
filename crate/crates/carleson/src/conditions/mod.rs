//! Weight-condition constants over families of Carleson boxes, their
//! convergence-in-depth traces, and the cross-checks between them.
//!
//! Every constant is computed as a logarithm and reported as a plain value
//! together with a trace: the constant restricted to boxes (and cells) down
//! to each truncation depth.

pub mod bmo;
pub mod boxwise;
pub mod family;
pub mod scan;
pub mod suite;
pub mod tree;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use bmo::{bmo_c_norm, bmo_c_norm_log};
pub use boxwise::{BoxIntegrals, FreeBox};
pub use family::{
    b1_constant, binfty_profile, blog_constant, bp_constant, doubling_constant, rhi_constant, BoxFamily, FamilyConfig, FamilyMode,
};
pub use scan::{critical_exponent, CriticalEstimate, Orientation};
pub use suite::{theorem_suite, SuiteConfig, SuiteReport, TheoremRow, TheoremVerdict};
pub use tree::{
    cell_ratio_sup, fw_constant, keyestimate_check, maximal_power_check, mdw_condition, mlog_condition, mlp_condition,
    mlp_minimal_condition, FwVariant, TreeContext,
};

/// Depth increments inspected by [`verdict`].
pub const WINDOW: usize = 8;
/// Growth factor over the window that counts as divergence.
pub const DIVERGENT_GROWTH: f64 = 2.0;
/// Relative variation over the window that counts as bounded.
pub const BOUNDED_VARIATION: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Bounded,
    Divergent,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Bounded => "bounded",
            Verdict::Divergent => "divergent",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// Classifies a depth trace by its last [`WINDOW`] increments: divergent when
/// it grows by [`DIVERGENT_GROWTH`], bounded when it varies by less than
/// [`BOUNDED_VARIATION`], inconclusive otherwise.
pub fn verdict(trace: &[f64]) -> Verdict {
    let n = trace.len();
    if n == 0 {
        return Verdict::Inconclusive;
    }
    let last = trace[n - 1];
    if last == f64::INFINITY {
        return Verdict::Divergent;
    }
    let w = WINDOW.min(n - 1);
    if w == 0 {
        return Verdict::Inconclusive;
    }
    let win = &trace[n - 1 - w..];
    if win.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return Verdict::Inconclusive;
    }
    if last / win[0] >= DIVERGENT_GROWTH {
        return Verdict::Divergent;
    }
    let lo = win.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = win.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if (hi - lo) / lo < BOUNDED_VARIATION {
        Verdict::Bounded
    } else {
        Verdict::Inconclusive
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub depth: u32,
    #[serde(with = "crate::extended")]
    pub value: f64,
}

/// A condition constant with its extremizing box and depth trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionConstant {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    #[serde(with = "crate::extended")]
    pub value: f64,
    pub extremizer: String,
    pub trace: Vec<TracePoint>,
    pub verdict: Verdict,
}

impl ConditionConstant {
    /// Builds the constant from a trace of logarithms.
    pub fn from_ln_trace(name: &str, params: &[(&str, f64)], ln_trace: &[f64], extremizer: String) -> Self {
        let values: Vec<f64> = ln_trace.iter().map(|v| v.exp()).collect();
        ConditionConstant {
            name: name.to_string(),
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            value: values.last().copied().unwrap_or(f64::NAN),
            extremizer,
            trace: values.iter().enumerate().map(|(d, &value)| TracePoint { depth: d as u32, value }).collect(),
            verdict: verdict(&values),
        }
    }

    pub fn values(&self) -> Vec<f64> {
        self.trace.iter().map(|t| t.value).collect()
    }

    pub fn param(&self, key: &str) -> Option<f64> {
        self.params.get(key).copied()
    }

    /// Trace value at a given depth.
    pub fn at(&self, depth: u32) -> Option<f64> {
        self.trace.iter().find(|t| t.depth == depth).map(|t| t.value)
    }
}

/// Running maximum over per-box values: `out[n] = max { v_i : depth_i <= n }`.
/// Returns the trace and the index attaining each entry.
pub(crate) fn prefix_sup(depths: &[u32], values: &[f64], max_depth: u32) -> (Vec<f64>, Vec<Option<usize>>) {
    let mut best = vec![(f64::NEG_INFINITY, None); (max_depth + 1) as usize];
    for (i, (&d, &v)) in depths.iter().zip(values).enumerate() {
        let slot = &mut best[d as usize];
        if v > slot.0 || slot.1.is_none() {
            *slot = (v, Some(i));
        }
    }
    for n in 1..best.len() {
        if best[n - 1].0 >= best[n].0 && best[n - 1].1.is_some() {
            best[n] = best[n - 1];
        }
    }
    best.into_iter().unzip()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_rules() {
        let flat: Vec<f64> = (0..20).map(|_| 3.0).collect();
        assert_eq!(verdict(&flat), Verdict::Bounded);
        let grow: Vec<f64> = (0..20).map(|d| 1.1f64.powi(d)).collect();
        assert_eq!(verdict(&grow), Verdict::Divergent);
        let slow: Vec<f64> = (0..20).map(|d| 1.0 + 0.05 * d as f64).collect();
        assert_eq!(verdict(&slow), Verdict::Inconclusive);
        let mut inf = flat.clone();
        inf[19] = f64::INFINITY;
        assert_eq!(verdict(&inf), Verdict::Divergent);
    }

    #[test]
    fn prefix_sup_tracks_argmax() {
        let (t, arg) = prefix_sup(&[0, 1, 1, 2], &[1.0, 3.0, 2.0, 0.5], 3);
        assert_eq!(t, vec![1.0, 3.0, 3.0, 3.0]);
        assert_eq!(arg, vec![Some(0), Some(1), Some(1), Some(1)]);
    }
}
