//! Radial profiles `v(r)`, `r = 1 - |z|`, and their integrals.
//!
//! Integrals reaching the boundary (`r → 0`) are summed over the dyadic
//! shells `(2^{-k-1}, 2^{-k}]`. Shells `0..=60` are always evaluated; past
//! that, shells whose pieces are constant in `r` keep being summed in closed
//! form, anything else is continued by the geometric model fitted to the
//! last two shells (and flagged).

use crate::error::{Error, Result};
use crate::geometry::band_moment;
use crate::quad::{integrate, integrate_ln, ln_add, RTOL};

use super::expr::{Env, Expr};

/// Shells summed before any tail model kicks in.
pub const EXPLICIT_SHELLS: usize = 60;
/// Consecutive non-decreasing shells that signal divergence.
pub const DIVERGENCE_RUN: usize = 10;
const MAX_SHELLS: usize = 400_000;
const STORED_SHELLS: usize = 1100;
/// Terms this far below the running total (in log) are negligible.
const NEGLIGIBLE: f64 = 46.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Monotone {
    Increasing,
    Decreasing,
    General,
}

#[derive(Clone, Debug)]
pub struct Segment {
    pub lo: f64,
    pub hi: f64,
    pub expr: Expr,
    pub monotone: Monotone,
}

/// One piece of a shell family. Inside shell `k` it covers
/// `(previous upper, upper(k)]`, starting from `2^{-k-1}`.
#[derive(Clone, Debug)]
pub struct ShellPiece {
    pub upper: Expr,
    pub value: Expr,
}

#[derive(Clone, Debug)]
pub enum RadialProfile {
    /// Finitely many segments partitioning `(0, 1]`.
    Segments(Vec<Segment>),
    /// The same piece layout repeated in every dyadic shell, `k = 0, 1, ...`.
    Shells(Vec<ShellPiece>),
}

#[derive(Clone, Copy, Debug)]
pub(crate) enum SpanKind<'a> {
    Const(f64),
    Smooth { expr: &'a Expr, k: f64, monotone: Monotone },
}

/// A maximal stretch `(lo, hi]` on which the profile is given by one formula.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Span<'a> {
    pub lo: f64,
    pub hi: f64,
    pub kind: SpanKind<'a>,
}

impl<'a> Span<'a> {
    pub fn ln_value(&self, r: f64) -> f64 {
        match self.kind {
            SpanKind::Const(c) => c,
            SpanKind::Smooth { expr, k, .. } => expr.ln_eval(&Env { r, theta: 0.0, k }),
        }
    }

    pub fn is_const(&self) -> bool {
        matches!(self.kind, SpanKind::Const(_))
    }

    /// `ln ∫ v^s (1 - r) dr` over `(a, b] ⊂ (lo, hi]`.
    pub fn ln_moment(&self, a: f64, b: f64, s: f64) -> Result<f64> {
        if !(b > a) {
            return Ok(f64::NEG_INFINITY);
        }
        match self.kind {
            SpanKind::Const(c) => {
                let m = band_moment(a, b).ln();
                Ok(if s == 0.0 { m } else { s * c + m })
            }
            SpanKind::Smooth { .. } => {
                if s == 0.0 {
                    return Ok(band_moment(a, b).ln());
                }
                integrate_ln(|r| s * self.ln_value(r) + (1.0 - r).ln(), a, b, RTOL)
            }
        }
    }

    /// `∫ log v (1 - r) dr` over `(a, b]`.
    pub fn log_moment(&self, a: f64, b: f64) -> Result<f64> {
        if !(b > a) {
            return Ok(0.0);
        }
        match self.kind {
            SpanKind::Const(c) => Ok(c * band_moment(a, b)),
            SpanKind::Smooth { .. } => integrate(|r| self.ln_value(r) * (1.0 - r), a, b, RTOL),
        }
    }

    /// Sub-intervals of `(lo, hi]` where `ln v >= ln_t`.
    pub fn superlevel(&self, ln_t: f64) -> Result<Vec<(f64, f64)>> {
        let (lo, hi) = (self.lo, self.hi);
        match self.kind {
            SpanKind::Const(c) => Ok(if c >= ln_t { vec![(lo, hi)] } else { vec![] }),
            SpanKind::Smooth { monotone, .. } => {
                let g = |r: f64| self.ln_value(r) - ln_t;
                match monotone {
                    Monotone::Increasing | Monotone::Decreasing => {
                        let inc = monotone == Monotone::Increasing;
                        let (ga, gb) = (g(lo), g(hi));
                        if (inc && ga > gb + 1e-9 * ga.abs().max(1.0)) || (!inc && gb > ga + 1e-9 * ga.abs().max(1.0)) {
                            return Err(Error::RootFinding(lo));
                        }
                        let c = crossing(&g, lo, hi, ga, gb);
                        let mid = if inc { 0.5 * (c + hi) } else { 0.5 * (lo + c) };
                        let out = match (ga >= 0.0, gb >= 0.0) {
                            (true, true) => vec![(lo, hi)],
                            (false, false) => vec![],
                            _ if inc => vec![(c, hi)],
                            _ => vec![(lo, c)],
                        };
                        if !out.is_empty() && out[0].1 > out[0].0 && g(mid) < 0.0 && ga * gb < 0.0 {
                            return Err(Error::RootFinding(mid));
                        }
                        Ok(out)
                    }
                    Monotone::General => {
                        // 64 sub-intervals, one crossing resolved per sub-interval
                        let n = 64;
                        let mut out: Vec<(f64, f64)> = Vec::new();
                        let mut push = |a: f64, b: f64| {
                            if b <= a {
                                return;
                            }
                            if let Some(last) = out.last_mut() {
                                if last.1 == a {
                                    last.1 = b;
                                    return;
                                }
                            }
                            out.push((a, b));
                        };
                        let mut x0 = lo;
                        let mut g0 = g(lo);
                        for i in 1..=n {
                            let x1 = if i == n { hi } else { lo + (hi - lo) * i as f64 / n as f64 };
                            let g1 = g(x1);
                            match (g0 >= 0.0, g1 >= 0.0) {
                                (true, true) => push(x0, x1),
                                (false, false) => {}
                                (false, true) => push(crossing(&g, x0, x1, g0, g1), x1),
                                (true, false) => push(x0, crossing(&g, x0, x1, g0, g1)),
                            }
                            x0 = x1;
                            g0 = g1;
                        }
                        Ok(out)
                    }
                }
            }
        }
    }

    /// (min, max) of `ln v` over the span.
    pub fn ln_range(&self) -> (f64, f64) {
        match self.kind {
            SpanKind::Const(c) => (c, c),
            SpanKind::Smooth { monotone, .. } => {
                let n = if monotone == Monotone::General { 64 } else { 1 };
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for i in 0..=n {
                    let r = self.lo + (self.hi - self.lo) * i as f64 / n as f64;
                    let v = self.ln_value(r);
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                (lo, hi)
            }
        }
    }
}

/// Bisection to 1e-12 for a sign change of `g` on `[a, b]`.
fn crossing(g: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, ga: f64, _gb: f64) -> f64 {
    let a_nonneg = ga >= 0.0;
    for _ in 0..200 {
        if b - a <= 1e-12 * b.abs().max(1e-300) {
            break;
        }
        let m = 0.5 * (a + b);
        if (g(m) >= 0.0) == a_nonneg {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

pub fn shell_bounds(k: usize) -> (f64, f64) {
    ((-(k as f64) - 1.0).exp2(), (-(k as f64)).exp2())
}

/// Index of the shell containing `r ∈ (0, 1]`.
pub fn shell_of(r: f64) -> usize {
    let mut k = (-r.log2()).floor().max(0.0) as usize;
    while k > 0 && shell_bounds(k).1 < r {
        k -= 1;
    }
    while shell_bounds(k).0 >= r {
        k += 1;
    }
    k
}

/// Smallest `k` with `2^{-k} <= b`.
pub fn first_full_shell(b: f64) -> usize {
    let mut k = (-b.log2()).ceil().max(0.0) as usize;
    while k > 0 && shell_bounds(k - 1).1 <= b {
        k -= 1;
    }
    while shell_bounds(k).1 > b {
        k += 1;
    }
    k
}

impl RadialProfile {
    pub fn constant(c: f64) -> Self {
        RadialProfile::Segments(vec![Segment { lo: 0.0, hi: 1.0, expr: Expr::Num(c), monotone: Monotone::General }])
    }

    pub fn ln_value(&self, r: f64) -> f64 {
        match self.spans(r * (1.0 - 1e-15), r).first() {
            Some(sp) => sp.ln_value(r),
            None => f64::NAN,
        }
    }

    /// Spans covering `(a, b]`, ordered by increasing `r`. Requires `a > 0`.
    pub(crate) fn spans(&self, a: f64, b: f64) -> Vec<Span<'_>> {
        let mut out = Vec::new();
        if !(b > a) {
            return out;
        }
        match self {
            RadialProfile::Segments(segs) => {
                for s in segs {
                    let (lo, hi) = (a.max(s.lo), b.min(s.hi));
                    if hi > lo {
                        let kind = if s.expr.mentions("r") {
                            SpanKind::Smooth { expr: &s.expr, k: 0.0, monotone: s.monotone }
                        } else {
                            SpanKind::Const(s.expr.ln_eval(&Env::default()))
                        };
                        out.push(Span { lo, hi, kind });
                    }
                }
            }
            RadialProfile::Shells(pieces) => {
                let k_hi = shell_of(a.max(f64::MIN_POSITIVE) * (1.0 + 1e-16)).max(shell_of(b));
                let k_lo = shell_of(b);
                for k in (k_lo..=k_hi).rev() {
                    let kf = k as f64;
                    let env = Env { r: 0.0, theta: 0.0, k: kf };
                    let mut prev = shell_bounds(k).0;
                    let top = shell_bounds(k).1;
                    for (j, p) in pieces.iter().enumerate() {
                        let up = if j + 1 == pieces.len() { top } else { p.upper.eval(&env).clamp(prev, top) };
                        let (lo, hi) = (a.max(prev), b.min(up));
                        if hi > lo {
                            let kind = if p.value.mentions("r") {
                                SpanKind::Smooth { expr: &p.value, k: kf, monotone: Monotone::General }
                            } else {
                                SpanKind::Const(p.value.ln_eval(&env))
                            };
                            out.push(Span { lo, hi, kind });
                        }
                        prev = up;
                    }
                }
            }
        }
        out
    }

    /// Points where the formula changes inside `(a, b)`.
    pub fn breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        let mut pts: Vec<f64> = self.spans(a, b).iter().map(|s| s.lo).filter(|&x| x > a).collect();
        pts.dedup();
        pts
    }

    /// `ln ∫_a^b v^s (1 - r) dr` over spans of a band with `a > 0`.
    pub fn ln_band(&self, a: f64, b: f64, s: f64) -> Result<f64> {
        let mut acc = f64::NEG_INFINITY;
        for sp in self.spans(a, b) {
            acc = ln_add(acc, sp.ln_moment(sp.lo, sp.hi, s)?);
        }
        Ok(acc)
    }

    pub fn log_band(&self, a: f64, b: f64) -> Result<f64> {
        let mut acc = 0.0;
        for sp in self.spans(a, b) {
            acc += sp.log_moment(sp.lo, sp.hi)?;
        }
        Ok(acc)
    }

    fn shell_is_const(&self, k: usize) -> bool {
        let (a, b) = shell_bounds(k);
        self.spans(a, b).iter().all(|s| s.is_const())
    }

    /// Shell series of `∫ v^s (1 - r) dr`.
    pub fn power_series(&self, s: f64) -> Result<ShellSeries> {
        shell_series(
            |k| {
                let (a, b) = shell_bounds(k);
                self.ln_band(a, b, s)
            },
            |k| self.shell_is_const(k),
        )
    }

    /// Shell series of `∫ log v (1 - r) dr` (plain sums; `±inf` on divergence).
    pub fn log_series(&self) -> Result<LogSeries> {
        let mut terms: Vec<f64> = Vec::new();
        let mut run = 0usize;
        let mut k = 0usize;
        let modelled;
        loop {
            if k > EXPLICIT_SHELLS {
                let cheap = self.shell_is_const(k);
                let n = terms.len();
                let total: f64 = terms.iter().sum();
                let small = terms[n - 1].abs() <= 1e-17 * total.abs().max(1e-300);
                if !cheap || (k >= STORED_SHELLS && small) || k >= MAX_SHELLS {
                    modelled = !cheap;
                    break;
                }
            }
            let (a, b) = shell_bounds(k);
            let c = self.log_band(a, b)?;
            if c.is_infinite() {
                return Ok(LogSeries { terms: vec![], suffix: vec![], tail: c, total: c, modelled: false });
            }
            if let Some(&prev) = terms.last() {
                if c != 0.0 && prev != 0.0 && c.signum() == prev.signum() && c.abs() >= prev.abs() * (1.0 - 1e-12) {
                    run += 1;
                    if run >= DIVERGENCE_RUN {
                        let inf = c.signum() * f64::INFINITY;
                        return Ok(LogSeries { terms: vec![], suffix: vec![], tail: inf, total: inf, modelled: false });
                    }
                } else {
                    run = 0;
                }
            }
            terms.push(c);
            k += 1;
        }
        let n = terms.len();
        let tail = if n >= 2 && terms[n - 2] != 0.0 {
            let rho = terms[n - 1] / terms[n - 2];
            if rho.abs() < 1.0 {
                terms[n - 1] * rho / (1.0 - rho)
            } else {
                terms[n - 1].signum() * f64::INFINITY
            }
        } else {
            0.0
        };
        if tail.is_infinite() {
            return Ok(LogSeries { terms: vec![], suffix: vec![], tail, total: tail, modelled });
        }
        let keep = n.min(STORED_SHELLS);
        let mut suffix = vec![0.0; keep];
        let mut acc = tail;
        for j in (0..n).rev() {
            acc += terms[j];
            if j < keep {
                suffix[j] = acc;
            }
        }
        terms.truncate(keep);
        Ok(LogSeries { total: acc, terms, suffix, tail, modelled })
    }
}

/// Sums log-form shell terms `term(k)`, `k = 0, 1, ...`.
///
/// `cheap(k)` says whether shell `k` has a closed form; past
/// [`EXPLICIT_SHELLS`] the explicit sum only continues while it does.
pub fn shell_series(
    mut term: impl FnMut(usize) -> Result<f64>,
    mut cheap: impl FnMut(usize) -> bool,
) -> Result<ShellSeries> {
    let mut terms: Vec<f64> = Vec::new();
    let mut run = 0usize;
    let mut total = f64::NEG_INFINITY;
    let mut closed = false;
    let mut k = 0usize;
    while k < MAX_SHELLS {
        if k > EXPLICIT_SHELLS {
            closed = cheap(k);
            if !closed {
                break;
            }
            if k >= STORED_SHELLS {
                let n = terms.len();
                let last = terms[n - 1];
                if last == f64::NEG_INFINITY || (last < total - NEGLIGIBLE && last - terms[n - 2] < 0.0) {
                    break;
                }
            }
        }
        let c = term(k)?;
        if c == f64::INFINITY {
            return Ok(ShellSeries::diverged());
        }
        if let Some(&prev) = terms.last() {
            if c.is_finite() && prev.is_finite() && c - prev >= -1e-12 {
                run += 1;
                if run >= DIVERGENCE_RUN {
                    return Ok(ShellSeries::diverged());
                }
            } else {
                run = 0;
            }
        }
        terms.push(c);
        total = ln_add(total, c);
        k += 1;
    }
    Ok(ShellSeries::finish(terms, !closed || k >= MAX_SHELLS))
}

/// Terms of a shell series in log form, with suffix sums.
#[derive(Clone, Debug)]
pub struct ShellSeries {
    pub diverged: bool,
    /// True when the tail came from the geometric model rather than closed forms.
    pub modelled_tail: bool,
    terms: Vec<f64>,
    suffix: Vec<f64>,
    /// Log-ratio of the last two explicit terms, used past the stored range.
    last_step: f64,
}

impl ShellSeries {
    fn diverged() -> Self {
        ShellSeries { diverged: true, modelled_tail: false, terms: vec![], suffix: vec![], last_step: 0.0 }
    }

    fn finish(terms: Vec<f64>, modelled: bool) -> Self {
        let n = terms.len();
        let last_step = if n >= 2 { terms[n - 1] - terms[n - 2] } else { f64::NEG_INFINITY };
        let tail = if n >= 1 && modelled {
            if last_step < 0.0 {
                let rho = last_step.exp();
                terms[n - 1] + (rho / (1.0 - rho)).ln()
            } else if terms[n - 1] == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                return ShellSeries::diverged();
            }
        } else {
            f64::NEG_INFINITY
        };
        let keep = n.min(STORED_SHELLS);
        let mut suffix = vec![f64::NEG_INFINITY; keep];
        let mut acc = tail;
        for j in (0..n).rev() {
            acc = ln_add(acc, terms[j]);
            if j < keep {
                suffix[j] = acc;
            }
        }
        let mut terms = terms;
        terms.truncate(keep);
        ShellSeries { diverged: false, modelled_tail: modelled, terms, suffix, last_step }
    }

    /// `ln Σ_{j >= k} term_j`: the integral over `(0, 2^{-k}]`.
    pub fn ln_suffix(&self, k: usize) -> f64 {
        if self.diverged {
            return f64::INFINITY;
        }
        if k < self.suffix.len() {
            return self.suffix[k];
        }
        let n = self.terms.len();
        if n == 0 || self.last_step >= 0.0 || !self.last_step.is_finite() {
            return f64::NEG_INFINITY;
        }
        let rho = self.last_step.exp();
        self.terms[n - 1] + (k - (n - 1)) as f64 * self.last_step - (1.0 - rho).ln()
    }

    pub fn ln_term(&self, k: usize) -> f64 {
        self.terms.get(k).copied().unwrap_or(f64::NEG_INFINITY)
    }
}

#[derive(Clone, Debug)]
pub struct LogSeries {
    terms: Vec<f64>,
    suffix: Vec<f64>,
    tail: f64,
    pub total: f64,
    pub modelled: bool,
}

impl LogSeries {
    pub fn suffix(&self, k: usize) -> f64 {
        if self.total.is_infinite() {
            return self.total;
        }
        if k < self.suffix.len() {
            return self.suffix[k];
        }
        let n = self.terms.len();
        if n >= 2 && self.terms[n - 2] != 0.0 {
            let rho = self.terms[n - 1] / self.terms[n - 2];
            return self.terms[n - 1] * rho.powi((k - (n - 1)) as i32) / (1.0 - rho);
        }
        self.tail
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::expr::parse;

    #[test]
    fn shell_indexing() {
        assert_eq!(shell_of(1.0), 0);
        assert_eq!(shell_of(0.5), 1);
        assert_eq!(shell_of(0.75), 0);
        assert_eq!(first_full_shell(1.0), 0);
        assert_eq!(first_full_shell(0.75), 1);
        assert_eq!(first_full_shell(0.5), 1);
    }

    #[test]
    fn power_profile_series() {
        // ∫_0^{1/2} r^a (1 - r) dr, a = 0.5
        let p = RadialProfile::Segments(vec![Segment {
            lo: 0.0,
            hi: 1.0,
            expr: parse("r^0.5").unwrap(),
            monotone: Monotone::Increasing,
        }]);
        let ser = p.power_series(1.0).unwrap();
        let b: f64 = 0.5;
        let want = b.powf(1.5) / 1.5 - b.powf(2.5) / 2.5;
        assert!((ser.ln_suffix(1).exp() - want).abs() < 1e-9 * want);
        let div = p.power_series(-2.0).unwrap();
        assert!(div.diverged);
    }
}
