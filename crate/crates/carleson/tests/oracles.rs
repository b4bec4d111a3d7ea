//! Closed forms and series evaluated outside the library, with frozen values.

mod common;

use std::f64::consts::PI;

use carleson::conditions::boxwise::{ln_b1, ln_doubling};
use carleson::conditions::FreeBox;
use carleson::geometry::{box_area, CarlesonBox};
use carleson::weights::{box_integral_ln, box_log_integral, parse_weight};
use common::load;

fn dyadic(j: i32) -> CarlesonBox {
    CarlesonBox::free(0.3, 2f64.powi(-j)).unwrap()
}

// 2πℓ ∫_0^ℓ r^a (1 - r) dr
fn power_box(a: f64, l: f64) -> f64 {
    2.0 * PI * l * (l.powf(a + 1.0) / (a + 1.0) - l.powf(a + 2.0) / (a + 2.0))
}

// 2πℓ Σ_k ∫_shell f(value) (1 - r) dr over the three pieces of each shell
fn shell_series(j: i32, x: f64, f: impl Fn(f64) -> f64) -> f64 {
    let l = 2f64.powi(-j);
    let mut tot = 0.0;
    for k in j..200 {
        let kf = k as f64;
        let a = 2f64.powi(-k - 1);
        let b1 = a * (1.0 + a);
        let b3 = 2f64.powi(-k);
        let b2 = b3 * (1.0 - 2f64.powi(-k - 2));
        for (lo, hi, v) in [(a, b1, x.powf(-kf)), (b1, b2, kf + 1.0), (b2, b3, x.powf(kf))] {
            tot += f(v) * ((hi - lo) - (hi * hi - lo * lo) / 2.0);
        }
    }
    2.0 * PI * l * tot
}

#[test]
fn box_area_values() {
    for (l, want) in [(1.0, PI), (0.5, 1.1780972450961725), (2f64.powi(-10), 5.9891866165197517e-6)] {
        let b = CarlesonBox::free(0.0, l).unwrap();
        assert!((box_area(&b).unwrap() / want - 1.0).abs() < 1e-14, "{l}");
    }
}

#[test]
fn power_weight_boxes() {
    let frozen = [
        (0.5, 0, 0.51612122642702581),
        (0.5, 3, -3.8441534373681206),
        (-0.5, 2, 0.3645713282998251),
        (1.5, 10, -23.339262773103211),
    ];
    for (a, j, want) in frozen {
        let w = load(&format!("builtin:power?a={a}"));
        let l = 2f64.powi(-j);
        assert!((power_box(a, l).ln() - want).abs() < 1e-13);
        let got = box_integral_ln(&w, &dyadic(j), 1.0).unwrap();
        assert!((got - want).abs() < 1e-9, "a={a} j={j}: {got} vs {want}");
    }
}

#[test]
fn example53_boxes_underflow_gracefully() {
    // w(Q_ℓ) = 2πℓ exp(-1/ℓ²) for ℓ <= 1/2, and 10π e^-4 on the whole disc
    let w = load("builtin:example53");
    let whole = box_integral_ln(&w, &dyadic(0), 1.0).unwrap();
    assert!((whole - ((10.0 * PI).ln() - 4.0)).abs() < 1e-12);
    assert!((whole + 0.5526850211565542).abs() < 1e-12);
    let frozen = [(1, -2.8552701141505998), (3, -64.24156447527049)];
    for (j, want) in frozen {
        let l = 2f64.powi(-j);
        assert!(((2.0 * PI * l).ln() - 1.0 / (l * l) - want).abs() < 1e-12);
        let got = box_integral_ln(&w, &dyadic(j), 1.0).unwrap();
        assert!((got - want).abs() < 1e-9 * want.abs(), "j={j}: {got} vs {want}");
    }
    // far past underflow of the mass itself
    let l = 2f64.powi(-20);
    let got = box_integral_ln(&w, &dyadic(20), 1.0).unwrap();
    let want = (2.0 * PI * l).ln() - 1.0 / (l * l);
    assert!((got / want - 1.0).abs() < 1e-12);
}

#[test]
fn example52_shell_series() {
    let w = load("builtin:example52?x=1.5");
    let frozen = [
        (0, 1.0, 2.0135586956983082),
        (0, 2.0, 3.3226278661331241),
        (0, -1.0, 0.81178992625478632),
        (2, 1.0, 0.26652446024716979),
        (2, 2.0, 1.8078541117487803),
        (2, -1.0, -1.8038718271187994),
        (5, 1.0, -3.1670810390168357),
        (5, 2.0, -1.1706786191716882),
        (5, -1.0, -6.5349424455075264),
    ];
    for (j, s, want) in frozen {
        let series = shell_series(j, 1.5, |v| v.powf(s)).ln();
        assert!((series - want).abs() < 1e-12, "series j={j} s={s}: {series}");
        let got = box_integral_ln(&w, &dyadic(j), s).unwrap();
        assert!((got - want).abs() < 1e-9, "j={j} s={s}: {got} vs {want}");
    }
    for (j, want) in [(0, 1.9051748640785432), (2, 0.39869546759910212), (5, 0.011427446066408039)] {
        let series = shell_series(j, 1.5, f64::ln);
        assert!((series - want).abs() < 1e-12 * want.abs());
        let got = box_log_integral(&w, &dyadic(j)).unwrap();
        assert!((got - want).abs() < 1e-9 * want.abs(), "log j={j}: {got} vs {want}");
    }
}

#[test]
fn constant_weight_doubling_is_the_area_ratio() {
    let w = load("builtin:constant");
    for (l, want) in [(1.0, 2.6666666666666665), (0.5, 3.4285714285714286), (2f64.powi(-10), 3.999023199023199)] {
        assert!((4.0 * (2.0 - l) / (2.0 - l / 2.0) - want).abs() < 1e-14);
        let b = FreeBox { w: &w, b: CarlesonBox::free(0.7, l).unwrap() };
        let got = ln_doubling(&b).unwrap().exp();
        assert!((got - want).abs() < 1e-12, "ℓ={l}: {got}");
    }
}

#[test]
fn b1_of_a_step_weight() {
    // 1 on (0, 1/4], 3 above: on the whole disc avg w = (7 + 3 * 9) / 16
    let w = parse_weight(
        "schema = 1\nname = \"step\"\nkind = \"radial\"\n[profile]\nsegments = [\n\
         { lo = \"0\", hi = \"1/4\", expr = \"1\" },\n{ lo = \"1/4\", hi = \"1\", expr = \"3\" },\n]\n",
    )
    .unwrap();
    let b1 = |l: f64| ln_b1(&FreeBox { w: &w, b: CarlesonBox::free(0.1, l).unwrap() }).unwrap().unwrap().exp();
    assert!((b1(1.0) - 2.125).abs() < 1e-12);
    assert!((b1(0.25) - 1.0).abs() < 1e-12);
    // vanishes at the circle: no B_1
    let w = load("builtin:example53");
    let v = ln_b1(&FreeBox { w: &w, b: dyadic(3) }).unwrap().unwrap();
    assert_eq!(v, f64::INFINITY);
    // no exact essential infimum for a general expression
    let w = load("builtin:general");
    assert!(ln_b1(&FreeBox { w: &w, b: dyadic(3) }).unwrap().is_none());
}
