//! Mean oscillation over Carleson boxes.

use crate::error::Result;
use crate::geometry::CarlesonBox;
use crate::quad::{integrate, integrate_scaled};
use crate::weights::{Env, Expr, Weight};

use super::family::BoxFamily;
use super::ConditionConstant;

/// Dyadic shells used to split the radial integral near the boundary.
const SHELLS: usize = 60;
const TOL: f64 = 1e-8;

type Field<'a> = dyn Fn(f64, f64) -> f64 + Sync + 'a;

/// `(1/|Q|) ∫_Q g dA`, the angular average done first unless `radial`.
fn box_average(g: &Field, radial: bool, b: &CarlesonBox, cuts: &[f64]) -> Result<f64> {
    let arc = b.arc;
    let l = arc.length;
    let angular_of = |r: f64, abs: bool| -> Result<f64> {
        if radial {
            Ok(g(r, arc.center()))
        } else if abs {
            Ok(integrate(|t| g(r, t).abs(), arc.start, arc.start + l, TOL)? / l)
        } else {
            Ok(integrate(|t| g(r, t), arc.start, arc.start + l, TOL)? / l)
        }
    };
    let mut knots: Vec<f64> = (0..=SHELLS).map(|k| l * (-(k as f64)).exp2()).collect();
    let floor = knots[SHELLS];
    knots.extend(cuts.iter().copied().filter(|&c| c > floor && c < l));
    knots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    knots.dedup();
    let mut num = 0.0;
    for w in knots.windows(2) {
        let mut err = None;
        let mut radial_part = |abs: bool, floor: f64| {
            integrate_scaled(
                |r| match angular_of(r, abs) {
                    Ok(v) => (1.0 - r) * v,
                    Err(e) => {
                        err.get_or_insert(e);
                        0.0
                    }
                },
                w[0],
                w[1],
                TOL,
                floor,
            )
        };
        // the inner averages are only accurate relative to their own magnitude
        let floor = if radial { 0.0 } else { radial_part(true, 0.0)? };
        num += radial_part(false, floor)?;
        if let Some(e) = err {
            return Err(e);
        }
    }
    Ok(num / (l - 0.5 * l * l))
}

/// `avg_Q |g - g_Q|`.
pub fn mean_oscillation(g: &Field, radial: bool, b: &CarlesonBox, cuts: &[f64]) -> Result<f64> {
    let mean = box_average(g, radial, b, cuts)?;
    box_average(&|r, t| (g(r, t) - mean).abs(), radial, b, cuts)
}

fn oscillation_constant(name: &str, fam: &BoxFamily, g: &Field, radial: bool, cuts: &[f64]) -> Result<ConditionConstant> {
    let v = fam.map_ln(|m| Ok(mean_oscillation(g, radial, &m.info().geom, cuts)?.ln()))?;
    Ok(fam.constant(name, &[], &v))
}

/// `‖f‖_{BMO_C}` over the family for an expression in `r` and `theta`.
pub fn bmo_c_norm(f: &Expr, fam: &BoxFamily) -> Result<ConditionConstant> {
    let g = |r: f64, theta: f64| f.eval(&Env { r, theta, k: 0.0 });
    oscillation_constant("bmo_c", fam, &g, !f.mentions("theta"), &[])
}

/// `‖log w‖_{BMO_C}` over the family.
pub fn bmo_c_norm_log(fam: &BoxFamily) -> Result<ConditionConstant> {
    let w: &Weight = fam.weight;
    let g = |r: f64, theta: f64| w.ln_eval(r, theta);
    let cuts = if w.is_radial() { w.radial_breakpoints(0.0, 1.0) } else { Vec::new() };
    oscillation_constant("bmo_c_log", fam, &g, w.is_radial(), &cuts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conditions::FamilyConfig;
    use crate::weights::expr::parse;

    #[test]
    fn constant_has_no_oscillation() {
        let w = Weight::constant(1.0);
        let fam = BoxFamily::build(&w, &FamilyConfig { depth: 4, per_decade: 5, ..Default::default() }, &[]).unwrap();
        let c = bmo_c_norm(&parse("3").unwrap(), &fam).unwrap();
        assert!(c.value < 1e-12, "{}", c.value);
    }

    #[test]
    fn reciprocal_modulus_is_finite() {
        let w = Weight::constant(1.0);
        let fam = BoxFamily::build(&w, &FamilyConfig { depth: 12, per_decade: 5, ..Default::default() }, &[]).unwrap();
        let c = bmo_c_norm(&parse("-1/(1-r)").unwrap(), &fam).unwrap();
        assert!(c.value.is_finite() && c.value > 0.0 && c.value < 10.0, "{}", c.value);
    }
}
