use chebvol::bs::{normalized_call, vega_normalized};
use chebvol::domain::{classify, AreaId, BoundaryCurves, LinearMap, PriceMap};
use chebvol::laplace::laplace_normalized_call;
use chebvol::oracle::implied_vol_oracle;
use proptest::prelude::*;

fn area_strategy() -> impl Strategy<Value = AreaId> {
    prop::sample::select(AreaId::ALL.to_vec())
}

/// `(x, v)` strictly inside the given area.
fn interior(curves: &BoundaryCurves, area: AreaId, ux: f64, uv: f64) -> (f64, f64) {
    let (x0, x1) = curves.x_range(area);
    let x = x0 + (x1 - x0) * ux;
    let (v0, v1) = curves.vol_bracket(area, x);
    (x, v0 + (v1 - v0) * uv)
}

proptest! {
    #[test]
    fn price_increases_with_vol(x in -5.0f64..=0.0, v in 0.02f64..5.9, dv in 1e-3f64..0.1) {
        let lo = normalized_call(x, v).unwrap();
        let hi = normalized_call(x, v + dv).unwrap();
        prop_assert!(hi > lo || (lo == 0.0 && hi == 0.0));
    }

    #[test]
    fn reflection_identity(x in -5.0f64..=5.0, v in 0.05f64..=6.0) {
        let lhs = normalized_call(-x, v).unwrap() - normalized_call(x, v).unwrap();
        let rhs = (-0.5 * x).exp() - (0.5 * x).exp();
        prop_assert!((lhs - rhs).abs() < 1e-13, "{lhs} vs {rhs}");
    }

    #[test]
    fn vega_matches_difference_quotient(x in -5.0f64..=0.0, v in 0.05f64..=6.0) {
        let vega = vega_normalized(x, v).unwrap();
        prop_assume!(vega > 1e-200);
        let h = 1e-6;
        let fd = (normalized_call(x, v + h).unwrap() - normalized_call(x, v - h).unwrap()) / (2.0 * h);
        // absolute floor for prices whose rounding dominates the quotient
        prop_assert!((fd - vega).abs() <= 1e-8 * vega + 1e-10, "fd {fd} vega {vega}");
    }

    #[test]
    fn price_stays_in_band(x in -5.0f64..=0.0, v in 0.001f64..=6.0) {
        let c = normalized_call(x, v).unwrap();
        prop_assert!(c >= 0.0 && c < (0.5 * x).exp());
    }

    #[test]
    fn price_maps_round_trip(area in area_strategy(), ux in 0.0f64..=1.0, uv in 0.0f64..=1.0) {
        let curves = BoundaryCurves::default();
        let (x, v) = interior(&curves, area, ux, uv);
        let c = normalized_call(x, v).unwrap();
        prop_assume!(c > 1e-300);
        let p = curves.boundary_prices(x).unwrap();
        let map = PriceMap::for_area(&curves, area, x, &p).unwrap();
        let t = map.apply(c);
        prop_assert!(t.abs() <= 1.0 + 1e-12, "t = {t}");
        let back = map.invert(t);
        prop_assert!((back - c).abs() <= 1e-12 * c, "{back} vs {c}");
    }

    #[test]
    fn classification_of_priced_points(area in area_strategy(), ux in 0.01f64..0.99, uv in 0.01f64..0.99) {
        let curves = BoundaryCurves::default();
        let (x, v) = interior(&curves, area, ux, uv);
        let c = normalized_call(x, v).unwrap();
        prop_assume!(c > 1e-300);
        let p = curves.boundary_prices(x).unwrap();
        prop_assert_eq!(classify(&curves, x, c, &p).unwrap(), area);
    }

    #[test]
    fn laplace_price_increases_with_vol(x in -0.4f64..=0.0, v in 0.25f64..0.99, dv in 1e-4f64..0.01) {
        prop_assert!(laplace_normalized_call(x, v + dv).unwrap() > laplace_normalized_call(x, v).unwrap());
    }
}

#[test]
fn price_maps_are_monotone() {
    let curves = BoundaryCurves::default();
    for area in AreaId::ALL {
        let (x0, x1) = curves.x_range(area);
        for i in 0..10 {
            let x = x0 + (x1 - x0) * (i as f64 + 0.5) / 10.0;
            let p = curves.boundary_prices(x).unwrap();
            let map = PriceMap::for_area(&curves, area, x, &p).unwrap();
            let (lo, hi) = match area {
                AreaId::I | AreaId::IPrime => (p.c_min, p.c1),
                AreaId::II => (p.c1, p.c2),
                AreaId::III => (p.c2, p.c_max),
            };
            let mut prev = f64::NEG_INFINITY;
            for k in 0..=1000 {
                let t = map.apply(lo + (hi - lo) * k as f64 / 1000.0);
                assert!(t > prev, "{area} x={x} k={k}");
                prev = t;
            }
        }
    }
}

/// Largest distance of `v(t)` from its secant over `t` in `[-1, 1]`,
/// relative to the range of `v`.
fn secant_deviation(x: f64, c_of_t: impl Fn(f64) -> f64) -> f64 {
    let vs: Vec<f64> = (0..=200)
        .map(|k| {
            let t = -1.0 + k as f64 / 100.0;
            implied_vol_oracle(x, c_of_t(t), 1e-14).unwrap().v
        })
        .collect();
    let (a, b) = (vs[0], vs[200]);
    let worst = vs
        .iter()
        .enumerate()
        .map(|(k, v)| (v - (a + (b - a) * k as f64 / 200.0)).abs())
        .fold(0.0, f64::max);
    worst / (b - a).abs()
}

#[test]
fn low_vol_map_straightens_the_surface() {
    let curves = BoundaryCurves::default();
    let x = -2.0;
    let p = curves.boundary_prices(x).unwrap();
    let scaled = PriceMap::for_area(&curves, AreaId::I, x, &p).unwrap();
    let plain = LinearMap::new(p.c_min, p.c1).unwrap();
    let with = secant_deviation(x, |t| scaled.invert(t));
    let without = secant_deviation(x, |t| plain.invert(t));
    println!("secant deviation at x = {x}: scaled {with:.3}, linear {without:.3}");
    assert!(with < 0.35, "{with}");
    assert!(without > 2.0 * with, "{without}");
}
