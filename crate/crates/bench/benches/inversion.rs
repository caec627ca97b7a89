use std::hint::black_box;

use chebvol::builder::AccuracyPreset;
use chebvol::engine::{invert, invert_batch};
use chebvol::oracle::implied_vol_oracle;
use chebvol_bench::fixture;
use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};

const BATCH: usize = 10_000;

fn single(c: &mut Criterion) {
    let mut g = c.benchmark_group("single");
    for preset in AccuracyPreset::ALL {
        let (model, quotes) = fixture(preset, BATCH);
        g.throughput(Throughput::Elements(BATCH as u64));
        g.bench_function(format!("interpolant/{preset}"), |b| {
            b.iter(|| {
                for &(x, c) in &quotes {
                    black_box(invert(&model, x, c));
                }
            })
        });
        g.bench_function(format!("newton/{preset}"), |b| {
            let tol = preset.tol();
            b.iter(|| {
                for &(x, c) in &quotes {
                    black_box(implied_vol_oracle(x, c, tol).ok());
                }
            })
        });
    }
    g.finish();
}

fn batch(c: &mut Criterion) {
    let (model, quotes) = fixture(AccuracyPreset::Medium, BATCH);
    let mut g = c.benchmark_group("batch");
    g.throughput(Throughput::Elements(BATCH as u64));
    g.bench_function("invert_batch/medium", |b| {
        b.iter_batched(|| quotes.clone(), |q| black_box(invert_batch(&model, &q)), BatchSize::LargeInput)
    });
    g.finish();
}

criterion_group!(benches, single, batch);
criterion_main!(benches);
