//! Locating the exponent where a depth-trace verdict flips.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{ConditionConstant, Verdict, WINDOW};

/// Which side of the critical exponent is bounded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    /// Bounded for exponents below the critical one (reverse Hölder).
    BoundedBelow,
    /// Bounded for exponents above it (`B_q`).
    BoundedAbove,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScanPoint {
    pub param: f64,
    pub verdict: Verdict,
    pub constant: ConditionConstant,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriticalEstimate {
    pub condition: String,
    pub orientation: Orientation,
    /// Every evaluated exponent, grid and bisection points, sorted.
    pub points: Vec<ScanPoint>,
    /// Bounded exponent closest to the flip.
    pub bounded_edge: Option<f64>,
    /// Divergent exponent closest to the flip.
    pub divergent_edge: Option<f64>,
    /// Midpoint of the two edges, rounded to two decimals.
    pub estimate: Option<f64>,
    /// Zero of a straight-line fit of the growth rate per depth over the
    /// divergent points; a diagnostic, not a verdict.
    pub extrapolated: Option<f64>,
}

impl CriticalEstimate {
    pub fn constants(&self) -> impl Iterator<Item = &ConditionConstant> {
        self.points.iter().map(|p| &p.constant)
    }
}

/// Evaluates `eval` on the grid, then bisects between the innermost bounded
/// and divergent exponents until they are `tol` apart. An inconclusive
/// midpoint is retried at the quarter points before giving up.
pub fn critical_exponent(
    condition: &str,
    grid: &[f64],
    orientation: Orientation,
    tol: f64,
    eval: &(dyn Fn(f64) -> Result<ConditionConstant> + Sync),
) -> Result<CriticalEstimate> {
    if grid.is_empty() {
        return Err(Error::Domain("empty exponent grid".into()));
    }
    let mut points: Vec<ScanPoint> = Vec::new();
    let run = |p: f64, points: &mut Vec<ScanPoint>| -> Result<Verdict> {
        let c = eval(p)?;
        let v = c.verdict;
        points.push(ScanPoint { param: p, verdict: v, constant: c });
        Ok(v)
    };
    for &p in grid {
        run(p, &mut points)?;
    }
    let edges = |points: &[ScanPoint]| -> (Option<f64>, Option<f64>) {
        let of = |v: Verdict| points.iter().filter(move |s| s.verdict == v).map(|s| s.param);
        match orientation {
            Orientation::BoundedBelow => {
                let b = of(Verdict::Bounded).fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.max(x))));
                let d = of(Verdict::Divergent)
                    .filter(|&x| b.is_none_or(|b| x > b))
                    .fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.min(x))));
                (b, d)
            }
            Orientation::BoundedAbove => {
                let b = of(Verdict::Bounded).fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.min(x))));
                let d = of(Verdict::Divergent)
                    .filter(|&x| b.is_none_or(|b| x < b))
                    .fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.max(x))));
                (b, d)
            }
        }
    };
    loop {
        let (Some(b), Some(d)) = edges(&points) else { break };
        if (b - d).abs() <= tol {
            break;
        }
        let mid = 0.5 * (b + d);
        if run(mid, &mut points)? != Verdict::Inconclusive {
            continue;
        }
        let moved_b = run(0.5 * (b + mid), &mut points)? == Verdict::Bounded;
        let moved_d = run(0.5 * (mid + d), &mut points)? == Verdict::Divergent;
        if !moved_b && !moved_d {
            break;
        }
    }
    points.sort_by(|a, b| a.param.partial_cmp(&b.param).unwrap());
    let (bounded_edge, divergent_edge) = edges(&points);
    let estimate = match (bounded_edge, divergent_edge) {
        (Some(b), Some(d)) => Some((50.0 * (b + d)).round() / 100.0),
        _ => None,
    };
    Ok(CriticalEstimate {
        condition: condition.to_string(),
        orientation,
        extrapolated: extrapolate(&points),
        points,
        bounded_edge,
        divergent_edge,
        estimate,
    })
}

/// Growth rate of `ln value` per depth over the last window.
fn growth_rate(c: &ConditionConstant) -> Option<f64> {
    let v = c.values();
    let n = v.len();
    if n <= WINDOW {
        return None;
    }
    let (a, b) = (v[n - 1 - WINDOW], v[n - 1]);
    (a > 0.0 && b.is_finite()).then(|| (b / a).ln() / WINDOW as f64)
}

fn extrapolate(points: &[ScanPoint]) -> Option<f64> {
    let xy: Vec<(f64, f64)> = points
        .iter()
        .filter(|s| s.verdict == Verdict::Divergent)
        .filter_map(|s| growth_rate(&s.constant).map(|g| (s.param, g)))
        .collect();
    if xy.len() < 2 {
        return None;
    }
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 || sxy == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some(mx - my / slope)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Synthetic trace: flat up to `crit`, geometric above.
    fn fake(p: f64, crit: f64) -> Result<ConditionConstant> {
        let ln: Vec<f64> = (0..=20).map(|d| if p <= crit { 0.0 } else { 0.5 * d as f64 }).collect();
        Ok(ConditionConstant::from_ln_trace("t", &[("p", p)], &ln, String::new()))
    }

    #[test]
    fn bisection_brackets_the_flip() {
        let est = critical_exponent("t", &[1.2, 1.5, 2.0, 3.0], Orientation::BoundedBelow, 0.01, &|p| fake(p, 1.71))
            .unwrap();
        let (b, d) = (est.bounded_edge.unwrap(), est.divergent_edge.unwrap());
        assert!(b <= 1.71 && d > 1.71 && d - b <= 0.011 + 1e-12, "{b} {d}");
    }

    #[test]
    fn bounded_above_orientation() {
        let est = critical_exponent(
            "t",
            &[1.2, 1.5, 2.0, 3.0],
            Orientation::BoundedAbove,
            0.01,
            &|p| fake(4.0 - p, 4.0 - 1.6),
        )
        .unwrap();
        assert!((est.estimate.unwrap() - 1.6).abs() <= 0.01);
    }
}
