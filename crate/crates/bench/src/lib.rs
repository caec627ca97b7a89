//! Shared fixtures for the inversion benchmarks.

use chebvol::builder::{build_surface, AccuracyPreset, SurfaceModel};
use chebvol::experiments::synthetic_quotes;

/// A built model and `n` seeded `(x, c)` quotes inside its domain.
pub fn fixture(preset: AccuracyPreset, n: usize) -> (SurfaceModel, Vec<(f64, f64)>) {
    let model = build_surface(preset).expect("surface build");
    let quotes = synthetic_quotes(&model, n, 42).into_iter().map(|(x, _, c)| (x, c)).collect();
    (model, quotes)
}
