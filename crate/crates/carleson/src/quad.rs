//! Composite adaptive Gauss-Legendre quadrature.
//!
//! Integrands are handled either directly or in log form: `integrate_ln`
//! takes `ln f` and returns `ln ∫ f`, which keeps integrals of weights such
//! as `exp(-1/r^2)` meaningful long after `f` itself underflows.

use std::sync::LazyLock;

use crate::error::{Error, Result};

/// Relative tolerance used by every radial integral in the crate.
pub const RTOL: f64 = 1e-9;
/// Absolute floor below which differences are ignored.
pub const ATOL: f64 = 1e-300;

const ORDER: usize = 10;
const MAX_LEVEL: u32 = 48;

struct Rule {
    nodes: [f64; ORDER],
    weights: [f64; ORDER],
}

static GL: LazyLock<Rule> = LazyLock::new(|| legendre_rule());

/// Nodes and weights on [-1, 1] by Newton iteration on P_n.
fn legendre_rule() -> Rule {
    let n = ORDER;
    let mut nodes = [0.0; ORDER];
    let mut weights = [0.0; ORDER];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    Rule { nodes, weights }
}

fn gl_panel<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> f64 {
    let rule = &*GL;
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    let mut s = 0.0;
    for i in 0..ORDER {
        s += rule.weights[i] * f(c + h * rule.nodes[i]);
    }
    s * h
}

/// Adaptive Gauss-Legendre on `[a, b]`, tolerance `rtol` relative to `∫|f|`.
pub fn integrate<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, rtol: f64) -> Result<f64> {
    integrate_scaled(f, a, b, rtol, 0.0)
}

/// As [`integrate`], with the error scale at least `floor`. Callers whose
/// integrand is itself a computed integral pass the magnitude it was
/// computed against, since its noise is relative to that and not to `f`.
pub fn integrate_scaled<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, rtol: f64, floor: f64) -> Result<f64> {
    if !(b > a) {
        return Ok(0.0);
    }
    let whole = gl_panel(&mut f, a, b);
    // error is measured against ∫|f|, so integrals that cancel to ~0 still converge
    let mag = gl_panel(&mut |x| f(x).abs(), a, b);
    let mut budget = 200_000usize;
    let mut worst = 0.0f64;
    let v = refine(&mut f, a, b, whole, rtol, 0, &mut budget, &mut worst, whole.abs().max(mag).max(floor))?;
    if !v.is_finite() {
        return Err(Error::Quadrature { achieved: f64::INFINITY });
    }
    Ok(v)
}

#[allow(clippy::too_many_arguments)]
fn refine<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    whole: f64,
    rtol: f64,
    level: u32,
    budget: &mut usize,
    worst: &mut f64,
    scale: f64,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let left = gl_panel(f, a, m);
    let right = gl_panel(f, m, b);
    let both = left + right;
    let scale = scale.max(both.abs());
    let err = (both - whole).abs();
    if err <= rtol * scale || err <= ATOL || level >= MAX_LEVEL || *budget == 0 {
        if err > rtol * scale && err > ATOL {
            *worst = worst.max(err / scale.max(ATOL));
            if *budget == 0 || level >= MAX_LEVEL {
                // report but keep the estimate; callers see the flag through `worst`
                if *worst > 1e-4 {
                    return Err(Error::Quadrature { achieved: *worst });
                }
            }
        }
        return Ok(both);
    }
    *budget = budget.saturating_sub(1);
    Ok(refine(f, a, m, left, rtol, level + 1, budget, worst, scale)?
        + refine(f, m, b, right, rtol, level + 1, budget, worst, scale)?)
}

/// Log-integrand mass below `max - TRIM` is dropped before integrating.
const TRIM: f64 = 80.0;

fn ulp(x: f64) -> f64 {
    let x = x.abs().max(f64::MIN_POSITIVE);
    f64::from_bits(x.to_bits() + 1) - x
}

/// Bisect for where `g` crosses `thr`, with `g(inside) >= thr > g(outside)`.
fn crossing<G: FnMut(f64) -> f64>(g: &mut G, mut inside: f64, mut outside: f64, thr: f64) -> f64 {
    for _ in 0..60 {
        let m = 0.5 * (inside + outside);
        if m == inside || m == outside {
            break;
        }
        if g(m) >= thr {
            inside = m;
        } else {
            outside = m;
        }
    }
    outside
}

/// `ln ∫_a^b exp(g(x)) dx` for a log-integrand `g`.
///
/// The integrand is shifted by its located maximum before exponentiation,
/// negligible flanks are trimmed, and a boundary layer thinner than the
/// floating-point grid is handled by its one-sided Laplace limit.
pub fn integrate_ln<G: FnMut(f64) -> f64>(mut g: G, a: f64, b: f64, rtol: f64) -> Result<f64> {
    if !(b > a) {
        return Ok(f64::NEG_INFINITY);
    }
    let samples = 64;
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(samples + 64);
    for i in 0..=samples {
        let x = a + (b - a) * (i as f64 + 0.5) / (samples as f64 + 1.0);
        let v = g(x);
        if v.is_nan() {
            return Err(Error::Domain(format!("integrand undefined near {x}")));
        }
        if v == f64::INFINITY {
            return Ok(f64::INFINITY);
        }
        pts.push((x, v));
    }
    // endpoints only count when finite; integrable endpoint singularities are allowed
    for x in [a, b] {
        let v = g(x);
        if v.is_finite() || v == f64::NEG_INFINITY {
            pts.push((x, v));
        }
    }
    let by_x = |p: &mut Vec<(f64, f64)>| p.sort_by(|u, v| u.0.partial_cmp(&v.0).unwrap());
    by_x(&mut pts);
    let argmax = |p: &[(f64, f64)]| {
        let mut best = 0;
        for (i, q) in p.iter().enumerate() {
            if q.1 > p[best].1 {
                best = i;
            }
        }
        best
    };
    // zoom in around the best sample
    for _ in 0..3 {
        let i = argmax(&pts);
        let lo = pts[i.saturating_sub(1)].0;
        let hi = pts[(i + 1).min(pts.len() - 1)].0;
        for j in 1..16 {
            let x = lo + (hi - lo) * j as f64 / 16.0;
            let v = g(x);
            if v == f64::INFINITY {
                return Ok(f64::INFINITY);
            }
            if !v.is_nan() {
                pts.push((x, v));
            }
        }
        by_x(&mut pts);
    }
    let i = argmax(&pts);
    let (xm, shift) = pts[i];
    if shift == f64::NEG_INFINITY {
        // the integrand may still be positive between samples; probe the GL nodes once
        let rule = &*GL;
        let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
        let probe = (0..ORDER).map(|i| g(c + h * rule.nodes[i])).fold(f64::NEG_INFINITY, f64::max);
        if probe == f64::NEG_INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
        return integrate(|x| (g(x) - probe).exp(), a, b, rtol).map(|v| probe + v.max(0.0).ln());
    }
    if xm == a || xm == b {
        let dir = if xm == b { -1.0 } else { 1.0 };
        // step until the integrand has dropped by e^-200; the curvature left
        // over after extrapolating the slope costs about 2 (s2 - s1) / (s0 drop)
        let mut h = ((b - a) * 1e-12).max(64.0 * ulp(xm));
        let mut drop = shift - g(xm + dir * h);
        while drop < 200.0 && h < (b - a) * 1e-7 {
            h *= 4.0;
            drop = shift - g(xm + dir * h);
        }
        let s1 = drop / h;
        let s2 = (shift - g(xm + dir * 2.0 * h)) / (2.0 * h);
        // secants over h and 2h extrapolate to the endpoint slope
        let s0 = 2.0 * s1 - s2;
        if s0 > 0.0 && drop >= 200.0 && 1.0 / s0 < (b - a) * 1e-7 && 2.0 * (s1 - s2).abs() / (s0 * drop) <= 1e-7 {
            return Ok(shift - s0.ln());
        }
    }
    let thr = shift - TRIM;
    let first = pts.iter().position(|p| p.1 >= thr).unwrap();
    let last = pts.iter().rposition(|p| p.1 >= thr).unwrap();
    let lo = if first == 0 { a } else { crossing(&mut g, pts[first].0, pts[first - 1].0, thr) };
    let hi = if last + 1 == pts.len() { b } else { crossing(&mut g, pts[last].0, pts[last + 1].0, thr) };
    let lo = if pts[0].0 > a && first == 0 { a } else { lo };
    let hi = if pts[pts.len() - 1].0 < b && last + 1 == pts.len() { b } else { hi };
    // `g` itself is only known to a few ulps of `shift`; asking for more is futile
    let rtol = rtol.max(16.0 * ulp(shift.abs()));
    let v = integrate(|x| (g(x) - shift).exp(), lo, hi, rtol)?;
    if v <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(shift + v.ln())
}

/// Numerically stable `ln(e^a + e^b)`.
pub fn ln_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    if a == f64::INFINITY || b == f64::INFINITY {
        return f64::INFINITY;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln Σ e^{x_i}`.
pub fn ln_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let v: Vec<f64> = xs.into_iter().collect();
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || m == f64::INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `ln(e^a - e^b)` for `a >= b`; `-inf` when the difference vanishes.
pub fn ln_sub(a: f64, b: f64) -> f64 {
    if b == f64::NEG_INFINITY {
        return a;
    }
    if b >= a {
        return f64::NEG_INFINITY;
    }
    a + (-(b - a).exp()).ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_integrates_polynomials_exactly() {
        let v = integrate(|x| x.powi(19), 0.0, 1.0, 1e-12).unwrap();
        assert!((v - 0.05).abs() < 1e-15);
        let w: f64 = GL.weights.iter().sum();
        assert!((w - 2.0).abs() < 1e-14);
    }

    #[test]
    fn smooth_and_kinked() {
        let v = integrate(|x| x.exp(), 0.0, 1.0, 1e-10).unwrap();
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-12);
        let k = integrate(|x| (x - 0.3).abs(), 0.0, 1.0, 1e-10).unwrap();
        assert!((k - (0.045 + 0.245)).abs() < 1e-9);
    }

    #[test]
    fn log_domain_survives_underflow() {
        // ∫_0^{0.01} 2 r^-3 e^{-1/r^2} dr = e^{-10000}
        let ln = integrate_ln(|r| 2f64.ln() - 3.0 * r.ln() - 1.0 / (r * r), 1e-6, 0.01, 1e-10).unwrap();
        assert!((ln + 10000.0).abs() < 1e-6, "{ln}");
    }

    #[test]
    fn ln_helpers() {
        assert!((ln_add(0.0, 0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((ln_sub(2f64.ln(), 0.0)).abs() < 1e-15);
        assert!((ln_sum([1f64.ln(), 2f64.ln(), 3f64.ln()]) - 6f64.ln()).abs() < 1e-15);
    }
}
