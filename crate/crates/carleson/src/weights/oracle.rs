//! Slow, independent box integrals for cross-checking the cached providers.
//!
//! Plain 2D adaptive Simpson in polar coordinates `(|z|, angle)`, evaluating
//! the weight pointwise. It knows where the radial formula switches (so it
//! does not have to discover jumps) but nothing else: no shell sums, no
//! closed forms, no radial collapse. The band `r < |I| 2^{-40}` is dropped.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::CarlesonBox;

use super::Weight;

const CUT_SHELLS: i32 = 40;

fn simpson<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64, tol: f64) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 0)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth >= 50 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1)
}

/// `ln ∫_Q w^s dA` by brute-force polar quadrature. Boxes must have
/// `|I| >= 2^{-6}`.
pub fn oracle_box_integral_ln(w: &Weight, b: &CarlesonBox, s: f64, rtol: f64) -> Result<f64> {
    let l = b.length();
    if l < (-6f64).exp2() * (1.0 - 1e-12) {
        return Err(Error::Domain(format!("oracle is limited to boxes of depth <= 6 (|I| = {l})")));
    }
    let t0 = b.arc.start;
    let lw = |r: f64, t: f64| w.ln_eval(r, t.rem_euclid(1.0));
    // reference scale keeps the integrand near 1 where it matters
    let mut shift = f64::NEG_INFINITY;
    for i in 1..=16 {
        let r = l * i as f64 / 16.0;
        for j in 0..8 {
            shift = shift.max(s * lw(r, t0 + l * (j as f64 + 0.5) / 8.0));
        }
    }
    if !shift.is_finite() {
        return Err(Error::Domain("weight not finite on the sample grid".into()));
    }
    let mut cuts: Vec<f64> = (0..=CUT_SHELLS).map(|j| l * (-(j as f64)).exp2()).collect();
    cuts.extend(w.radial_breakpoints(l * (-(CUT_SHELLS as f64)).exp2(), l));
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();

    // first pass at coarse tolerance to size the absolute tolerance
    let run = |tol: f64| -> f64 {
        let mut total = 0.0;
        for win in cuts.windows(2) {
            let (ra, rb) = (win[0], win[1]);
            let mut radial = |r: f64| {
                let rho = 1.0 - r;
                let mut ang = |t: f64| (s * lw(r, t) - shift).exp();
                rho * simpson(&mut ang, t0, t0 + l, tol)
            };
            total += simpson(&mut radial, ra, rb, tol);
        }
        total
    };
    let rough = run(1e-4 * l);
    let fine = run(rtol * rough.abs().max(1e-300) / 64.0);
    if !(fine > 0.0) || !fine.is_finite() {
        return Err(Error::Quadrature { achieved: f64::INFINITY });
    }
    Ok(shift + (2.0 * PI * fine).ln())
}

/// Plain-valued oracle at the default tolerance.
pub fn oracle_box_integral(w: &Weight, b: &CarlesonBox, s: f64) -> Result<f64> {
    Ok(oracle_box_integral_ln(w, b, s, 1e-9)?.exp())
}
