//! Per-box quantities behind the sup-type constants, as logarithms.

use crate::error::Result;
use crate::geometry::CarlesonBox;
use crate::weights::{box_integral_ln, box_ln_essinf, box_log_integral, level_set_measure_ln, Measure, Weight};

/// Integrals over one box.
pub trait BoxIntegrals {
    /// `ln ∫_Q w^s`.
    fn ln_int(&self, s: f64) -> Result<f64>;
    /// `∫_Q log w`.
    fn log_int(&self) -> Result<f64>;
    fn ln_area(&self) -> f64;
    fn weight(&self) -> &Weight;
    fn geometry(&self) -> CarlesonBox;

    /// `ln` of the Lebesgue average of `w^s`.
    fn ln_avg_power(&self, s: f64) -> Result<f64> {
        Ok(self.ln_int(s)? - self.ln_area())
    }
}

/// A box evaluated straight from the weight, no cache.
pub struct FreeBox<'a> {
    pub w: &'a Weight,
    pub b: CarlesonBox,
}

impl BoxIntegrals for FreeBox<'_> {
    fn ln_int(&self, s: f64) -> Result<f64> {
        box_integral_ln(self.w, &self.b, s)
    }
    fn log_int(&self) -> Result<f64> {
        box_log_integral(self.w, &self.b)
    }
    fn ln_area(&self) -> f64 {
        self.b.area().ln()
    }
    fn weight(&self) -> &Weight {
        self.w
    }
    fn geometry(&self) -> CarlesonBox {
        self.b
    }
}

/// `ln [(avg w) ess sup (1/w)]`, when the essential infimum is exact.
pub fn ln_b1(b: &impl BoxIntegrals) -> Result<Option<f64>> {
    match box_ln_essinf(b.weight(), &b.geometry()) {
        Some(inf) => Ok(Some(b.ln_avg_power(1.0)? - inf)),
        None => Ok(None),
    }
}

/// `ln [(avg w)(avg w^{1/(1-p)})^{p-1}]`.
pub fn ln_bp(b: &impl BoxIntegrals, p: f64) -> Result<f64> {
    let dual = b.ln_avg_power(1.0 / (1.0 - p))?;
    Ok(b.ln_avg_power(1.0)? + (p - 1.0) * dual)
}

/// `ln [(avg w) exp(-avg log w)]`.
pub fn ln_blog(b: &impl BoxIntegrals) -> Result<f64> {
    let avg_log = b.log_int()? / b.ln_area().exp();
    Ok(b.ln_avg_power(1.0)? - avg_log)
}

/// `ln [avg w^p / (avg w)^p]`.
pub fn ln_rhi(b: &impl BoxIntegrals, p: f64) -> Result<f64> {
    Ok(b.ln_avg_power(p)? - p * b.ln_avg_power(1.0)?)
}

/// `ln (avg w^s)^{1/s}`.
pub fn ln_power_mean(b: &impl BoxIntegrals, s: f64) -> Result<f64> {
    Ok(b.ln_avg_power(s)? / s)
}

/// `ln [w(Q_I) / w(Q_{I/2})]`, the half box concentric.
pub fn ln_doubling(b: &impl BoxIntegrals) -> Result<f64> {
    let half = b.geometry().half();
    Ok(b.ln_int(1.0)? - box_integral_ln(b.weight(), &half, 1.0)?)
}

/// `ln [w({w >= w_Q / α}) / w(Q)]`.
pub fn ln_binfty(b: &impl BoxIntegrals, alpha: f64) -> Result<f64> {
    let ln_mass = b.ln_int(1.0)?;
    let ln_t = ln_mass - b.ln_area() - alpha.ln();
    let ln_level = level_set_measure_ln(b.weight(), &b.geometry().region(), ln_t, Measure::Weighted)?;
    // a fraction of the mass; when `|ln w(Q)|` is huge the two logs differ by an ulp or so
    Ok((ln_level - ln_mass).min(0.0))
}
