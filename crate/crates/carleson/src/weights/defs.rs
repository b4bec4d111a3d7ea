//! Weight-definition files and `builtin:NAME?param=value` sources.
//!
//! A definition is TOML:
//!
//! ```toml
//! schema = 1
//! name = "power"
//! kind = "radial"            # radial | product | general
//! [parameters]
//! a = 0.5
//! [profile]
//! expression = "r^a"         # or `segments = [...]`, or `shells = [...]`
//! monotone = "increasing"
//! ```
//!
//! Segment endpoints are exact rationals: `3`, `3/8`, `0.375`, `2^-5`,
//! `3*2^-5`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::expr::{parse, Env, Expr};
use super::profile::{Monotone, RadialProfile, Segment, ShellPiece};
use super::{validate, Weight, WeightKind};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightDef {
    pub schema: u32,
    pub name: String,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<ProfileDef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angular: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expression: Option<String>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileDef {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expression: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monotone: Option<Monotone>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segments: Option<Vec<SegmentDef>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shells: Option<Vec<ShellDef>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentDef {
    pub lo: String,
    pub hi: String,
    pub expr: String,
    #[serde(default)]
    pub monotone: Option<Monotone>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShellDef {
    pub upper: String,
    pub value: String,
}

/// Exact rational endpoint `num / den`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rational {
    pub num: i128,
    pub den: u128,
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Rational {
    pub fn new(num: i128, den: u128) -> Self {
        let g = gcd(num.unsigned_abs(), den).max(1);
        Rational { num: num / g as i128, den: den / g }
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    fn mul(self, o: Rational) -> Option<Rational> {
        Some(Rational::new(self.num.checked_mul(o.num)?, self.den.checked_mul(o.den)?))
    }
}

fn schema_err(msg: impl Into<String>) -> Error {
    Error::Schema(msg.into())
}

fn parse_plain_rational(s: &str) -> Result<Rational> {
    let bad = || schema_err(format!("bad endpoint `{s}`"));
    if let Some((a, b)) = s.split_once('/') {
        let a = parse_plain_rational(a.trim())?;
        let b = parse_plain_rational(b.trim())?;
        if b.num == 0 {
            return Err(bad());
        }
        let inv = Rational::new(b.den as i128 * b.num.signum(), b.num.unsigned_abs());
        return a.mul(inv).ok_or_else(bad);
    }
    if let Some((int, frac)) = s.split_once('.') {
        if frac.len() > 30 || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let den = 10u128.pow(frac.len() as u32);
        let i: i128 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let f: i128 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        return Ok(Rational::new(i * den as i128 + f, den));
    }
    Ok(Rational::new(s.parse().map_err(|_| bad())?, 1))
}

/// Parse `A`, `A/B`, decimals, `2^-K` and products of those.
pub fn parse_endpoint(s: &str) -> Result<Rational> {
    let mut acc = Rational::new(1, 1);
    for factor in s.split('*') {
        let f = factor.trim();
        let r = if let Some(e) = f.strip_prefix("2^") {
            let e = e.trim().trim_start_matches('(').trim_end_matches(')');
            let k: i32 = e.trim().parse().map_err(|_| schema_err(format!("bad exponent in `{s}`")))?;
            if k.unsigned_abs() > 120 {
                return Err(schema_err(format!("exponent out of range in `{s}`")));
            }
            if k >= 0 {
                Rational::new(1i128 << k, 1)
            } else {
                Rational::new(1, 1u128 << (-k))
            }
        } else {
            parse_plain_rational(f)?
        };
        acc = acc.mul(r).ok_or_else(|| schema_err(format!("endpoint `{s}` overflows")))?;
    }
    Ok(acc)
}

fn toml_position(text: &str, err: &toml::de::Error) -> (usize, usize) {
    let Some(span) = err.span() else { return (1, 1) };
    let before = &text[..span.start.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map(|l| l.chars().count()).unwrap_or(0) + 1;
    (line, col)
}

fn expr_field(field: &str, src: &str, params: &BTreeMap<String, f64>, allowed: &[&str]) -> Result<Expr> {
    let e = parse(src).map_err(|e| match e {
        Error::Syntax { line, col, msg } => Error::Syntax { line, col, msg: format!("{field}: {msg}") },
        other => other,
    })?;
    let e = e.substitute(params);
    let mut free = Vec::new();
    e.free_parameters(&mut free);
    if let Some(p) = free.first() {
        return Err(schema_err(format!("{field}: unknown parameter `{p}`")));
    }
    for v in ["r", "theta", "k"] {
        if e.mentions(v) && !allowed.contains(&v) {
            if v == "r" && matches!(e, Expr::Piecewise(_)) && allowed.contains(&"r") {
                continue;
            }
            return Err(schema_err(format!("{field}: variable `{v}` is not allowed here")));
        }
    }
    Ok(e)
}

fn build_profile(def: &ProfileDef, params: &BTreeMap<String, f64>) -> Result<RadialProfile> {
    let given = [def.expression.is_some(), def.segments.is_some(), def.shells.is_some()];
    if given.iter().filter(|&&b| b).count() != 1 {
        return Err(schema_err("profile needs exactly one of `expression`, `segments`, `shells`"));
    }
    if let Some(src) = &def.expression {
        let e = expr_field("profile.expression", src, params, &["r"])?;
        let mono = def.monotone.unwrap_or(Monotone::General);
        return match e {
            Expr::Piecewise(pieces) => {
                let mut segs = Vec::new();
                for p in pieces {
                    let lo = p.lo.eval(&Env::default());
                    let hi = p.hi.eval(&Env::default());
                    segs.push(Segment { lo, hi, expr: p.body, monotone: Monotone::General });
                }
                check_partition(&segs)?;
                Ok(RadialProfile::Segments(segs))
            }
            e => Ok(RadialProfile::Segments(vec![Segment { lo: 0.0, hi: 1.0, expr: e, monotone: mono }])),
        };
    }
    if let Some(list) = &def.segments {
        let mut segs = Vec::new();
        for (i, s) in list.iter().enumerate() {
            let expr = expr_field(&format!("profile.segments[{i}].expr"), &s.expr, params, &["r"])?;
            segs.push(Segment {
                lo: parse_endpoint(&s.lo)?.value(),
                hi: parse_endpoint(&s.hi)?.value(),
                expr,
                monotone: s.monotone.unwrap_or(Monotone::General),
            });
        }
        check_partition(&segs)?;
        return Ok(RadialProfile::Segments(segs));
    }
    let list = def.shells.as_ref().unwrap();
    if list.is_empty() {
        return Err(schema_err("profile.shells is empty"));
    }
    let mut pieces = Vec::new();
    for (i, s) in list.iter().enumerate() {
        pieces.push(ShellPiece {
            upper: expr_field(&format!("profile.shells[{i}].upper"), &s.upper, params, &["k"])?,
            value: expr_field(&format!("profile.shells[{i}].value"), &s.value, params, &["r", "k"])?,
        });
    }
    let last = &pieces.last().unwrap().upper;
    for k in 0..8 {
        let want = (-(k as f64)).exp2();
        if last.eval(&Env { k: k as f64, ..Default::default() }) != want {
            return Err(schema_err("the last shell piece must end at 2^-k"));
        }
    }
    Ok(RadialProfile::Shells(pieces))
}

fn check_partition(segs: &[Segment]) -> Result<()> {
    let mut at = 0.0;
    for s in segs {
        if s.lo != at || !(s.hi > s.lo) {
            return Err(schema_err(format!("segments must partition (0, 1] in order; gap or overlap at {at}")));
        }
        at = s.hi;
    }
    if at != 1.0 {
        return Err(schema_err("segments must end at 1"));
    }
    Ok(())
}

/// Build (without validation) a weight from a parsed definition.
pub fn build_weight(def: &WeightDef) -> Result<Weight> {
    if def.schema != SCHEMA_VERSION {
        return Err(schema_err(format!("unsupported schema version {}", def.schema)));
    }
    let params = &def.parameters;
    let need_profile = || def.profile.as_ref().ok_or_else(|| schema_err("missing [profile]"));
    let kind = match def.kind.as_str() {
        "radial" => WeightKind::Radial(build_profile(need_profile()?, params)?),
        "product" => {
            let angular = def.angular.as_deref().ok_or_else(|| schema_err("product weights need `angular`"))?;
            WeightKind::Product {
                radial: build_profile(need_profile()?, params)?,
                angular: expr_field("angular", angular, params, &["theta"])?,
            }
        }
        "general" => {
            let src = def.expression.as_deref().ok_or_else(|| schema_err("general weights need `expression`"))?;
            WeightKind::General(expr_field("expression", src, params, &["r", "theta"])?)
        }
        other => return Err(schema_err(format!("unknown kind `{other}`"))),
    };
    let mut w = Weight::new(def.name.clone(), kind);
    w.params = params.clone();
    Ok(w)
}

pub fn parse_def(text: &str) -> Result<WeightDef> {
    toml::from_str(text).map_err(|e| {
        let (line, col) = toml_position(text, &e);
        Error::Syntax { line, col, msg: e.message().to_string() }
    })
}

pub fn parse_def_json(text: &str) -> Result<WeightDef> {
    serde_json::from_str(text)
        .map_err(|e| Error::Syntax { line: e.line(), col: e.column(), msg: e.to_string() })
}

/// Parse and validate a weight-definition document.
pub fn parse_weight(text: &str) -> Result<Weight> {
    let w = build_weight(&parse_def(text)?)?;
    validate(&w)?;
    Ok(w)
}

pub const BUILTINS: [(&str, &str); 6] = [
    ("constant", include_str!("../../data/weights/constant.toml")),
    ("power", include_str!("../../data/weights/power.toml")),
    ("example52", include_str!("../../data/weights/example52.toml")),
    ("example53", include_str!("../../data/weights/example53.toml")),
    ("product", include_str!("../../data/weights/product.toml")),
    ("general", include_str!("../../data/weights/general.toml")),
];

/// Definition behind `builtin:NAME?p=v&q=u`.
pub fn builtin_def(uri: &str) -> Result<WeightDef> {
    let rest = uri.strip_prefix("builtin:").unwrap_or(uri);
    let (name, query) = rest.split_once('?').unwrap_or((rest, ""));
    let text = BUILTINS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| Error::UnknownBuiltin(name.to_string()))?;
    let mut def = parse_def(text)?;
    for kv in query.split('&').filter(|s| !s.is_empty()) {
        let (k, v) = kv.split_once('=').ok_or_else(|| schema_err(format!("bad query `{kv}`")))?;
        if !def.parameters.contains_key(k) {
            return Err(schema_err(format!("builtin `{name}` has no parameter `{k}`")));
        }
        let v: f64 = v.parse().map_err(|_| schema_err(format!("bad value for `{k}`")))?;
        def.parameters.insert(k.to_string(), v);
    }
    Ok(def)
}

/// Load a weight from a `builtin:` URI or a definition file path.
pub fn load_weight(source: &str) -> Result<Weight> {
    let def = if source.starts_with("builtin:") {
        builtin_def(source)?
    } else {
        let text = std::fs::read_to_string(Path::new(source))
            .map_err(|e| std::io::Error::new(e.kind(), format!("{source}: {e}")))?;
        if source.ends_with(".json") {
            parse_def_json(&text)?
        } else {
            parse_def(&text)?
        }
    };
    let w = build_weight(&def)?;
    validate(&w)?;
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dyadic_endpoints_are_exact() {
        assert_eq!(parse_endpoint("2^-5").unwrap(), Rational { num: 1, den: 32 });
        assert_eq!(parse_endpoint("3*2^-5").unwrap(), Rational { num: 3, den: 32 });
        assert_eq!(parse_endpoint("0.375").unwrap(), Rational { num: 3, den: 8 });
        assert_eq!(parse_endpoint("6/16").unwrap(), Rational { num: 3, den: 8 });
        assert_eq!(parse_endpoint("2^-60").unwrap().value(), (-60f64).exp2());
        assert!(parse_endpoint("2^-x").is_err());
    }

    #[test]
    fn builtins_load() {
        for (name, _) in BUILTINS {
            load_weight(&format!("builtin:{name}")).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        let w = load_weight("builtin:example52?x=1.25").unwrap();
        assert_eq!(w.params["x"], 1.25);
        assert!(matches!(load_weight("builtin:nope"), Err(Error::UnknownBuiltin(_))));
        assert!(load_weight("builtin:example52?y=2").is_err());
    }

    #[test]
    fn json_definitions() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.json");
        let text = r#"{"schema": 1, "name": "j", "kind": "radial", "parameters": {"a": 0.25},
                       "profile": {"expression": "r^a", "monotone": "increasing"}}"#;
        std::fs::write(&path, text).unwrap();
        let w = load_weight(path.to_str().unwrap()).unwrap();
        assert_eq!(w.params["a"], 0.25);
        std::fs::write(&path, "{\"schema\": 1,\n  \"name\": }").unwrap();
        assert!(matches!(load_weight(path.to_str().unwrap()), Err(Error::Syntax { line: 2, .. })));
    }

    #[test]
    fn malformed_sources() {
        let bad = "schema = 1\nname = \"x\"\nkind = \"radial\"\n[profile]\nexpression = \"exp(\"\n";
        assert!(matches!(parse_weight(bad), Err(Error::Syntax { .. })));
        let neg = "schema = 1\nname = \"x\"\nkind = \"radial\"\n[profile]\nexpression = \"r - 0.5\"\n";
        assert!(matches!(parse_weight(neg), Err(Error::Domain(_))));
        let toml_bad = "schema = 1\nname = \n";
        match parse_weight(toml_bad) {
            Err(Error::Syntax { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
    }
}
