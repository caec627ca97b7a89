use std::sync::OnceLock;

use chebvol::bs::normalized_call;
use chebvol::builder::{build_surface, delta_sweep, out_of_sample_residual, AccuracyPreset, SurfaceModel};
use chebvol::domain::AreaId;
use chebvol::engine::{dvdc, invert, invert_batch, InversionStatus};
use chebvol::experiments::{seam_gap, Seam, TestDomain};
use chebvol::io::{read_model, write_model};
use chebvol::Error;
use proptest::prelude::*;

fn low() -> &'static SurfaceModel {
    static M: OnceLock<SurfaceModel> = OnceLock::new();
    M.get_or_init(|| build_surface(AccuracyPreset::Low).unwrap())
}

fn medium() -> &'static SurfaceModel {
    static M: OnceLock<SurfaceModel> = OnceLock::new();
    M.get_or_init(|| build_surface(AccuracyPreset::Medium).unwrap())
}

#[test]
fn builds_are_deterministic() {
    let again = build_surface(AccuracyPreset::Low).unwrap();
    assert_eq!(&again, low());
    assert_eq!(write_model(&again, None), write_model(low(), None));
}

#[test]
fn off_grid_residual_tracks_fit_residual() {
    for m in [low(), medium()] {
        for s in &m.areas {
            let out = out_of_sample_residual(&m.curves, &m.bounds, s, 30).unwrap();
            assert!(out <= 3.0 * s.residual.max(m.tol() * 1e-3), "{} {}: {out:e} vs {:e}", m.preset, s.area, s.residual);
        }
    }
}

#[test]
fn neighbouring_areas_agree_on_seams() {
    for m in [low(), medium()] {
        for seam in Seam::ALL {
            let gap = seam_gap(m, seam, 400);
            assert!(gap <= 2.0 * m.tol(), "{} {seam}: {gap:e}", m.preset);
        }
    }
}

#[test]
fn persisted_model_round_trips() {
    let text = write_model(low(), Some("2026-01-01T00:00:00Z"));
    let file = read_model(&text).unwrap();
    assert_eq!(&file.model, low());
    assert_eq!(file.created.as_deref(), Some("2026-01-01T00:00:00Z"));
    assert_eq!(write_model(&file.model, file.created.as_deref()), text);
}

#[test]
fn damaged_files_are_rejected() {
    let text = write_model(low(), None);
    let cut = &text[..text.len() * 2 / 3];
    assert!(matches!(read_model(cut), Err(Error::Format { .. })));
    let bumped = text.replacen("CHEB-IV v1", "CHEB-IV v9", 1);
    assert!(matches!(read_model(&bumped), Err(Error::Version { .. })));
    let garbled = text.replacen("weights ", "weights x", 1);
    assert!(matches!(read_model(&garbled), Err(Error::Format { .. })));
}

#[test]
fn volatility_grows_with_price() {
    let m = medium();
    for x in [-4.9, -3.0, -1.2, -0.3, -0.01] {
        let (v0, v1) = TestDomain::D2.v_range(m, x);
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=500 {
            let v = v0 + (v1 - v0) * k as f64 / 500.0;
            let c = normalized_call(x, v).unwrap();
            let got = invert(m, x, c);
            assert!(got.is_ok(), "x={x} v={v}: {:?}", got.status);
            let got = got.v.unwrap();
            // non-decreasing up to interpolation noise
            assert!(got >= prev - 2.0 * m.tol(), "x={x} v={v}: {got} after {prev}");
            prev = prev.max(got);
        }
    }
}

#[test]
fn inversion_is_pure() {
    let m = medium();
    let c = normalized_call(-1.0, 0.7).unwrap();
    let first = invert(m, -1.0, c);
    for _ in 0..5 {
        assert_eq!(invert(m, -1.0, c), first);
    }
}

#[test]
fn batch_matches_single_quotes() {
    let m = medium();
    let quotes: Vec<(f64, f64)> = TestDomain::D2
        .points(m, 30, Some(7))
        .into_iter()
        .map(|(x, v)| (x, normalized_call(x, v).unwrap()))
        .chain([(0.5, 0.3), (-1.0, 2.0), (f64::NAN, 0.1), (-6.0, 0.01)])
        .collect();
    let batch = invert_batch(m, &quotes);
    assert_eq!(batch.len(), quotes.len());
    for (&(x, c), r) in quotes.iter().zip(&batch) {
        assert_eq!(*r, invert(m, x, c));
    }
    let n = batch.len();
    assert_eq!(batch[n - 2].status, InversionStatus::Invalid);
    assert_eq!(batch[n - 1].status, InversionStatus::BelowDomain);
    assert_eq!(batch[n - 3].status, InversionStatus::Arbitrage);
}

#[test]
fn price_derivative_matches_difference_quotient() {
    let m = medium();
    let mut checked = 0;
    for (x, v) in TestDomain::D1.points(m, 10, None) {
        let c = normalized_call(x, v).unwrap();
        let h = 1e-6 * c;
        let (lo, hi) = (invert(m, x, c - h), invert(m, x, c + h));
        if lo.area != hi.area || !lo.is_ok() || !hi.is_ok() {
            continue;
        }
        let fd = (hi.v.unwrap() - lo.v.unwrap()) / (2.0 * h);
        let d = dvdc(m, x, c).unwrap();
        assert!((fd - d).abs() <= 1e-4 * d.abs(), "x={x} v={v}: {d} vs {fd}");
        checked += 1;
    }
    assert!(checked >= 90, "{checked}");
}

#[test]
fn delta_sweep_reports_every_value() {
    let rows = delta_sweep(&[0.5, 1.0]).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|&(_, r)| r > 0));
}

#[test]
fn every_area_is_reached() {
    let m = medium();
    let mut seen = [false; 4];
    for (x, v) in TestDomain::D2.points(m, 40, None) {
        if let Some(a) = invert(m, x, normalized_call(x, v).unwrap()).area {
            seen[AreaId::ALL.iter().position(|&b| b == a).unwrap()] = true;
        }
    }
    assert!(seen.iter().all(|&s| s), "{seen:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]
    #[test]
    fn reflected_quotes_give_the_same_volatility(x in -5.0f64..-0.01, u in 0.05f64..0.95) {
        let m = medium();
        let (v0, v1) = TestDomain::D2.v_range(m, x);
        let v = v0 + (v1 - v0) * u;
        let c = normalized_call(x, v).unwrap();
        let c_itm = normalized_call(-x, v).unwrap();
        // the reflection recovers the out-of-the-money price by cancellation
        prop_assume!(c > 1e-4 * c_itm);
        let a = invert(m, x, c).v.unwrap();
        let b = invert(m, -x, c_itm).v.unwrap();
        prop_assert!((a - b).abs() <= 1e-6 * a.max(1e-3), "{a} vs {b}");
    }
}
