//! Cross-module properties of the catalog and the composites.

use actfn::catalog::{self, default_params, describe, steep_logistic, tanh_via_logistic, value, Kind};
use actfn::composite::{Composite, HullKind, Leaf, COMPOSITE_NAMES};
use actfn::special::{logistic, quasi_random};
use actfn::Activation;
use proptest::prelude::*;

fn ev(kind: Kind, x: f64) -> f64 {
    value(kind, default_params(kind).values(), x)
}

fn slope(act: &Activation, x: f64, conv: f64) -> f64 {
    let mut dp = vec![0.0; act.n_params()];
    act.grad(x, None, conv, &mut dp).1
}

#[test]
fn outputs_stay_in_declared_range() {
    for &k in Kind::ALL {
        let p = default_params(k);
        let d = describe(k, &p).unwrap();
        for x in quasi_random(-50.0, 50.0, 10_000) {
            let y = ev(k, x);
            assert!(d.contains_closed(y), "{k}({x}) = {y} outside [{}, {}]", d.lower.value, d.upper.value);
            // Beyond |x| ~ 15 exponential tails round onto open bounds in f64.
            if x.abs() <= 15.0 {
                assert!(d.contains_strict(y), "{k}({x}) = {y} touches an open bound");
            }
        }
    }
}

#[test]
fn monotone_kinds_never_decrease() {
    for &k in Kind::ALL {
        let d = describe(k, &default_params(k)).unwrap();
        if !d.monotonic {
            continue;
        }
        let mut prev = ev(k, -20.0);
        for i in 1..=40_000 {
            let x = -20.0 + i as f64 * 1e-3;
            let y = ev(k, x);
            assert!(y >= prev, "{k} decreases at {x}: {prev} -> {y}");
            prev = y;
        }
    }
}

#[test]
fn tanh_logistic_identity() {
    for i in -2000..=2000 {
        let x = i as f64 * 0.01;
        assert!((ev(Kind::Tanh, x) - tanh_via_logistic(x)).abs() < 1e-12, "x = {x}");
    }
}

#[test]
fn slopes_at_origin() {
    assert!((slope(&Kind::Logistic.into(), 0.0, 0.0) - 0.25).abs() < 1e-15);
    assert!((slope(&Kind::Tanh.into(), 0.0, 0.0) - 1.0).abs() < 1e-15);
    // The right derivative of ReLU is the `one` subgradient convention.
    assert_eq!(slope(&Kind::Relu.into(), 0.0, 1.0), 1.0);
    assert_eq!(slope(&Kind::Relu.into(), 1e-300, 0.0), 1.0);
}

#[test]
fn psf_saturates_for_moderate_m() {
    for m in [1.0, 5.0, 50.0, 500.0] {
        let p = default_params(Kind::Psf).with("m", m).unwrap();
        assert!(value(Kind::Psf, p.values(), 50.0) > 1.0 - 1e-9);
        assert!(value(Kind::Psf, p.values(), -50.0) < 1e-9);
    }
    // Small m flattens the left tail: PSF(-50, 0.1) = (1 + e^50)^-0.1 ~ e^-5.
    let p = default_params(Kind::Psf).with("m", 0.1).unwrap();
    let y = value(Kind::Psf, p.values(), -50.0);
    assert!((y - (-5.0f64).exp()).abs() < 1e-12);
}

/// Kinds whose tails approach their limits like 1/x rather than e^-x.
const ALGEBRAIC_TAILS: &[Kind] = &[Kind::Elliott, Kind::ElliottUnit, Kind::MElliott, Kind::Srs, Kind::Softsign];

#[test]
fn bounded_kinds_saturate() {
    let mut slow = Vec::new();
    for &k in Kind::ALL {
        let p = default_params(k);
        if !describe(k, &p).unwrap().bounded {
            continue;
        }
        for side in [-1.0, 1.0] {
            let limit = ev(k, side * 1e12);
            let gap = (ev(k, side * 50.0) - limit).abs();
            if gap > 1e-6 {
                slow.push(k);
                assert!((ev(k, side * 1e7) - limit).abs() < 1e-6, "{k} does not settle on side {side}");
            }
        }
    }
    slow.dedup();
    assert_eq!(slow, ALGEBRAIC_TAILS, "only algebraic tails may miss 1e-6 at |x| = 50");
}

#[test]
fn steep_logistic_approaches_step() {
    for i in 0..=1000 {
        let x = 0.01 + i as f64 * 0.05;
        assert!((steep_logistic(x, 1e4) - 1.0).abs() < 1e-6);
        assert!(steep_logistic(-x, 1e4) < 1e-6);
    }
}

#[test]
fn derivative_identities() {
    let silu: Activation = Kind::Silu.into();
    let sp: Activation = Kind::Softplus.into();
    for i in -1000..=1000 {
        let x = i as f64 * 0.01;
        assert!((ev(Kind::Dsilu, x) - slope(&silu, x, 0.0)).abs() < 1e-12);
        assert!((slope(&sp, x, 0.0) - logistic(x)).abs() < 1e-12);
    }
    assert_eq!(slope(&Kind::Lisht.into(), 0.0, 0.0), 0.0);
}

#[test]
fn landmark_constants_are_extrema() {
    let h = 1e-4;
    for (k, x) in [
        (Kind::Silu, catalog::SILU_ARGMIN),
        (Kind::Dsilu, catalog::DSILU_ARGMAX),
        (Kind::ReSech, catalog::RESECH_ARGMAX),
    ] {
        assert!(slope(&k.into(), x, 0.0).abs() < 1e-9, "{k} slope at {x}");
        let (l, m, r) = (ev(k, x - h), ev(k, x), ev(k, x + h));
        assert!((m <= l && m <= r) || (m >= l && m >= r));
    }
    assert!((ev(Kind::Silu, catalog::SILU_ARGMIN) - catalog::SILU_MIN).abs() < 1e-12);
    assert!((ev(Kind::Dsilu, catalog::DSILU_ARGMAX) - catalog::DSILU_MAX).abs() < 1e-12);
}

#[test]
fn combiners_are_identity_on_positive_axis() {
    for name in ["mixed", "gated", "hierarchical"] {
        let act = Activation::from_name(name).unwrap();
        for i in 1..=1000 {
            let x = i as f64 * 0.01;
            assert!((act.value(x) - x).abs() < 1e-12, "{name}({x})");
        }
    }
}

#[test]
fn convex_hull_of_monotone_bases_is_monotone() {
    let bases = [Kind::Relu, Kind::Tanh, Kind::Elu, Kind::Softplus, Kind::HardSigmoid];
    for w in [[0.2, 0.2, 0.2, 0.2, 0.2], [0.7, 0.0, 0.1, 0.0, 0.2], [0.0, 0.0, 0.0, 0.0, 1.0]] {
        let act = Activation::Composite(Composite::Hull {
            hull: HullKind::Convex,
            bases: bases.iter().map(|&k| Leaf::new(k)).collect(),
            coeffs: w.to_vec(),
        });
        act.validate().unwrap();
        let ys: Vec<f64> = (0..=20_000).map(|i| act.value(-10.0 + i as f64 * 1e-3)).collect();
        assert!(ys.windows(2).all(|p| p[1] >= p[0]));
    }
}

#[test]
fn bdaa_limits() {
    for (name, lo, hi) in [("bdaa1", 0.0, 1.0), ("bdaa2", -0.5, 0.5), ("bdaa3", 1.0, 0.0), ("bdaa4", -0.5, 0.5)] {
        let act = Activation::from_name(name).unwrap();
        let (a, b) = (act.value(-60.0), act.value(60.0));
        assert!((a - lo).abs() < 1e-6 || (a - hi).abs() < 1e-6, "{name}(-60) = {a}");
        assert!((b - lo).abs() < 1e-6 || (b - hi).abs() < 1e-6, "{name}(60) = {b}");
    }
}

#[test]
fn lutu_interp_is_piecewise_linear() {
    let act = Activation::from_name("lutu_interp").unwrap();
    let Activation::Composite(Composite::Lutu(p)) = &act else { unreachable!() };
    for (i, y) in p.y.iter().enumerate() {
        assert!((act.value(p.x0 + p.s * i as f64) - y).abs() < 1e-12);
    }
    for i in 0..p.y.len() - 1 {
        let a = p.x0 + p.s * i as f64;
        let h = p.s / 10.0;
        for j in 1..9 {
            let x = a + h * j as f64;
            let d2 = act.value(x + h) - 2.0 * act.value(x) + act.value(x - h);
            assert!(d2.abs() < 1e-12, "segment {i}, x = {x}");
        }
    }
}

#[test]
fn every_composite_serializes_round_trip() {
    for name in COMPOSITE_NAMES {
        let act = Activation::from_name(name).unwrap();
        let s = serde_json::to_string(&act).unwrap();
        let back: Activation = serde_json::from_str(&s).unwrap_or_else(|e| panic!("{name}: {e}\n{s}"));
        assert_eq!(back, act);
    }
}

fn any_kind() -> impl Strategy<Value = Kind> {
    (0..Kind::ALL.len()).prop_map(|i| Kind::ALL[i])
}

proptest! {
    #[test]
    fn values_and_slopes_are_finite(k in any_kind(), x in -1e3f64..1e3) {
        let act: Activation = k.into();
        let y = act.value(x);
        prop_assert!(y.is_finite(), "{k}({x}) = {y}");
        prop_assert!(slope(&act, x, 0.5).is_finite());
    }

    #[test]
    fn reductions_hold_at_random_points(x in -10f64..10.0, a in 0.0f64..1.0) {
        let lisa = default_params(Kind::Lisa).with("alpha1", 1.0).unwrap().with("alpha2", a).unwrap();
        let lrelu = default_params(Kind::LeakyRelu).with("alpha", a).unwrap();
        prop_assert_eq!(value(Kind::Lisa, lisa.values(), x), value(Kind::LeakyRelu, lrelu.values(), x));
        let blu = default_params(Kind::Blu).with("beta", 0.0).unwrap();
        prop_assert_eq!(value(Kind::Blu, blu.values(), x), x);
        let mp = default_params(Kind::Mpelu).with("alpha", 0.0).unwrap();
        prop_assert_eq!(value(Kind::Mpelu, mp.values(), x), x.max(0.0));
    }

    #[test]
    fn eval_is_deterministic_for_stochastic_kinds(x in -5f64..5.0) {
        for &k in Kind::ALL.iter().filter(|k| k.is_stochastic()) {
            let act: Activation = k.into();
            prop_assert_eq!(act.value(x), act.value(x));
        }
    }
}

#[test]
fn pdelu_accepts_t_above_one() {
    use actfn::gradients::grad_check;
    let p = default_params(Kind::Pdelu).with("t", 1.5).unwrap();
    catalog::validate(Kind::Pdelu, &p).unwrap();
    let d = describe(Kind::Pdelu, &p).unwrap();
    assert!(d.lower.open && d.lower.value == -1.0);
    assert!(d.kinks.is_empty());
    for x in quasi_random(-50.0, 50.0, 2000) {
        assert!(d.contains_closed(value(Kind::Pdelu, p.values(), x)));
    }
    assert!(grad_check(Kind::Pdelu, &p, -5.0, 5.0, 1000, 1e-5).unwrap().pass);
    let one = default_params(Kind::Pdelu).with("t", 1.0).unwrap();
    assert!(catalog::validate(Kind::Pdelu, &one).is_err());
}
