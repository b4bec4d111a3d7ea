mod common;

use std::f64::consts::PI;

use carleson::conditions::{verdict, FreeBox, TreeContext, Verdict};
use carleson::conditions::boxwise::{ln_bp, ln_power_mean};
use carleson::geometry::{build_tree, top_half, CarlesonBox, DyadicArc, DyadicTree};
use carleson::operators::cz_decompose;
use carleson::quad::ln_add;
use carleson::weights::expr::parse;
use carleson::weights::{box_integral_ln, parse_weight, Measure};
use proptest::prelude::*;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

// random well-formed source text for the expression grammar
fn expr_src() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        (0u32..50).prop_map(|n| n.to_string()),
        (1u32..400).prop_map(|n| format!("{}", n as f64 / 8.0)),
        Just("r".to_string()),
        Just("theta".to_string()),
        Just("k".to_string()),
        Just("pi".to_string()),
        Just("a".to_string()),
    ];
    leaf.prop_recursive(4, 32, 3, |inner| {
        prop_oneof![
            (inner.clone(), prop::sample::select(vec!["+", "-", "*", "/", "^"]), inner.clone())
                .prop_map(|(a, op, b)| format!("({a}) {op} ({b})")),
            (inner.clone(), prop::sample::select(vec!["+", "-", "*", "/", "^"]), inner.clone())
                .prop_map(|(a, op, b)| format!("{a} {op} {b}")),
            inner.clone().prop_map(|a| format!("-{a}")),
            (prop::sample::select(vec!["exp", "log", "sin", "cos", "abs", "sqrt"]), inner.clone())
                .prop_map(|(f, a)| format!("{f}({a})")),
            (inner.clone(), inner).prop_map(|(a, b)| format!("min({a}, {b})")),
        ]
    })
}

fn product_weight(phase: f64) -> carleson::weights::Weight {
    let text = format!(
        "schema = 1\nname = \"rot\"\nkind = \"product\"\nangular = \"2 + sin(2*pi*(theta + {phase}))\"\n\
         [profile]\nexpression = \"r^0.5\"\nmonotone = \"increasing\"\n"
    );
    parse_weight(&text).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn box_area_matches_closed_form(c in 0.0..1.0f64, l in 1e-6..1.0f64) {
        let b = CarlesonBox::free(c, l).unwrap();
        prop_assert!(close(b.area(), PI * l * l * (2.0 - l), 1e-12));
    }

    #[test]
    fn box_splits_into_top_and_children(c in 0.0..1.0f64, l in 1e-6..1.0f64) {
        let b = CarlesonBox::free(c, l).unwrap();
        let left = CarlesonBox::free(c - l / 4.0, l / 2.0).unwrap();
        let right = CarlesonBox::free(c + l / 4.0, l / 2.0).unwrap();
        let sum = top_half(&b).area() + left.area() + right.area();
        prop_assert!(close(b.area(), sum, 1e-12));
    }

    #[test]
    fn locate_finds_the_top_half(theta in 0.0..1.0f64, r in 1e-4..0.999f64) {
        let tree = build_tree(DyadicArc::circle(), 14).unwrap();
        let i = tree.locate(theta, r).expect("point inside the covered region");
        let arc = tree.arc(i);
        let l = arc.length();
        prop_assert!(r > l / 2.0 && r <= l);
        prop_assert!(arc.arc().contains(theta));
    }

    #[test]
    fn expression_printing_round_trips(src in expr_src()) {
        let e = parse(&src).unwrap();
        let printed = e.to_string();
        prop_assert_eq!(parse(&printed).unwrap(), e, "{} -> {}", src, printed);
    }

    #[test]
    fn verdict_follows_the_window_rule(trace in prop::collection::vec(0.5..3.0f64, 9..20)) {
        let n = trace.len();
        let win = &trace[n - 9..];
        let lo = win.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = win.iter().cloned().fold(0.0, f64::max);
        let want = if win[8] / win[0] >= 2.0 {
            Verdict::Divergent
        } else if (hi - lo) / lo < 0.1 {
            Verdict::Bounded
        } else {
            Verdict::Inconclusive
        };
        prop_assert_eq!(verdict(&trace), want);
        let mut blown = trace.clone();
        blown.push(f64::INFINITY);
        prop_assert_eq!(verdict(&blown), Verdict::Divergent);
    }

    #[test]
    fn radial_boxes_ignore_their_center(seed in any::<u64>(), c in 0.0..1.0f64, l in 1e-3..1.0f64) {
        let w = common::random_radial(&mut common::rng(seed), 0);
        let a = box_integral_ln(&w, &CarlesonBox::free(c, l).unwrap(), 1.0).unwrap();
        let b = box_integral_ln(&w, &CarlesonBox::free(0.5, l).unwrap(), 1.0).unwrap();
        prop_assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn rotating_the_weight_rotates_the_box(phi in 0.0..1.0f64, c in 0.0..1.0f64, l in 1e-2..0.5f64) {
        let w = product_weight(0.0);
        let wr = product_weight(phi);
        let b = CarlesonBox::free(c, l).unwrap();
        let moved = CarlesonBox::free((c + phi).rem_euclid(1.0), l).unwrap();
        for s in [1.0, -1.0, 2.0] {
            let a = box_integral_ln(&wr, &b, s).unwrap();
            let m = box_integral_ln(&w, &moved, s).unwrap();
            prop_assert!((a - m).abs() < 1e-7, "s={} {} vs {}", s, a, m);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn cache_is_additive_and_satisfies_jensen(seed in any::<u64>()) {
        let w = common::random_radial(&mut common::rng(seed), 0);
        let ctx = TreeContext::build(&w, DyadicArc::circle(), 10, &[1.0, 2.0, -1.0]).unwrap();
        let cache = &ctx.cache;
        for i in 0..DyadicTree::level_start(10) {
            let (l, r) = ctx.tree.children(i).unwrap();
            for s in [1.0, 2.0, -1.0] {
                let whole = cache.ln_box(i, s).unwrap();
                let parts = ln_add(cache.ln_top(i, s).unwrap(), ln_add(cache.ln_box(l, s).unwrap(), cache.ln_box(r, s).unwrap()));
                if whole.is_infinite() || parts.is_infinite() {
                    prop_assert_eq!(whole, parts, "node {} s={}", i, s);
                } else {
                    prop_assert!((whole - parts).abs() < 1e-8, "node {} s={}: {} vs {}", i, s, whole, parts);
                }
            }
            // exp(avg log w) <= avg w
            let area = cache.ln_area(i).exp();
            prop_assert!(cache.log_box(i) / area <= cache.ln_avg(i) + 1e-9);
        }
    }

    #[test]
    fn power_means_are_monotone(seed in any::<u64>(), c in 0.0..1.0f64, l in 1e-3..1.0f64) {
        let w = common::random_radial(&mut common::rng(seed), 0);
        let b = FreeBox { w: &w, b: CarlesonBox::free(c, l).unwrap() };
        let s = [-2.0, -1.0, 0.5, 1.0, 2.0];
        let m: Vec<f64> = s.iter().map(|&t| ln_power_mean(&b, t).unwrap()).collect();
        for k in 1..m.len() {
            prop_assert!(m[k - 1] <= m[k] + 1e-9, "{:?}", m);
        }
        prop_assert!(ln_bp(&b, 2.0).unwrap() >= -1e-9);
    }

    #[test]
    fn cz_selection_is_maximal(seed in any::<u64>(), mult in 1.2..20.0f64) {
        let w = common::random_radial(&mut common::rng(seed), 0);
        let tree = build_tree(DyadicArc::circle(), 10).unwrap();
        let ctx = TreeContext::build(&w, DyadicArc::circle(), 10, &[1.0]).unwrap();
        let lambda = ctx.cache.ln_avg(0).exp() * mult;
        let cz = cz_decompose(&tree, &ctx.cache, lambda, Measure::Lebesgue, 1.0).unwrap();
        for c in &cz.selected {
            prop_assert!(c.ln_avg > lambda.ln());
            let mut a = DyadicTree::parent(c.node);
            while let Some(p) = a {
                prop_assert!(ctx.cache.ln_avg(p) <= lambda.ln());
                a = DyadicTree::parent(p);
            }
        }
    }
}
