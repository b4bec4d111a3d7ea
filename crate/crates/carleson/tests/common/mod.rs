#![allow(dead_code)]

use carleson::weights::{parse_weight, Weight};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One piece `(lo, hi, c, a)` of a piecewise-radial weight: `c r^a` on
/// `(lo, hi]`, or the constant `c` when `a` is `None`.
pub type Piece = (String, String, f64, Option<f64>);

/// Random piecewise-radial profile with dyadic breakpoints. Each piece is a
/// constant or a power `c r^a`, `a` in `(-0.6, 1.5)`.
pub fn random_pieces(rng: &mut impl Rng) -> Vec<Piece> {
    let mut cuts: Vec<u32> = (0..rng.gen_range(1..5)).map(|_| rng.gen_range(1..12)).collect();
    cuts.sort_unstable();
    cuts.dedup();
    let mut ends: Vec<String> = cuts.iter().rev().map(|j| format!("2^-{j}")).collect();
    ends.push("1".into());
    let mut lo = "0".to_string();
    let mut out = Vec::new();
    for hi in ends {
        let c = (rng.gen_range(0.2..5.0f64) * 1e4).round() / 1e4;
        let a = rng.gen_bool(0.5).then(|| (rng.gen_range(-0.6..1.5f64) * 1e4).round() / 1e4);
        out.push((lo, hi.clone(), c, a));
        lo = hi;
    }
    out
}

/// Builds `scale * w` from its pieces through the definition parser.
pub fn radial_weight(pieces: &[Piece], scale: f64, tag: usize) -> Weight {
    let segs: Vec<String> = pieces
        .iter()
        .map(|(lo, hi, c, a)| match a {
            None => format!("{{ lo = \"{lo}\", hi = \"{hi}\", expr = \"{}\" }}", c * scale),
            Some(a) => {
                let mono = if *a >= 0.0 { "increasing" } else { "decreasing" };
                format!("{{ lo = \"{lo}\", hi = \"{hi}\", expr = \"{}*r^({a})\", monotone = \"{mono}\" }}", c * scale)
            }
        })
        .collect();
    let text = format!(
        "schema = 1\nname = \"random{tag}\"\nkind = \"radial\"\n[profile]\nsegments = [\n  {}\n]\n",
        segs.join(",\n  ")
    );
    parse_weight(&text).unwrap_or_else(|e| panic!("{e}\n{text}"))
}

pub fn random_radial(rng: &mut impl Rng, tag: usize) -> Weight {
    radial_weight(&random_pieces(rng), 1.0, tag)
}

pub fn load(src: &str) -> Weight {
    carleson::weights::load_weight(src).unwrap()
}

/// Relative gap `|a/b - 1|` computed from logarithms.
pub fn rel_ln(ln_a: f64, ln_b: f64) -> f64 {
    ((ln_a - ln_b).exp() - 1.0).abs()
}
