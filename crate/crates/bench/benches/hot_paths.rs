use criterion::{criterion_group, criterion_main, Criterion};

use shelab_core::local_time::LocalTimeEstimator;
use shelab_core::solver::{ChaosSimulator, WalshSimulator};
use shelab_core::{GridSpec, PhiSpec, SheetSample, Stream};

fn bench_sheet(c: &mut Criterion) {
    let grid = GridSpec::new(256, 256, 6.0).unwrap();
    c.bench_function("sheet_256x512", |b| {
        let mut rep = 0u64;
        b.iter(|| {
            rep += 1;
            let mut s = Stream::driving(1, rep);
            SheetSample::draw(grid, &mut s.rng, s.lineage)
        })
    });
}

fn bench_walsh(c: &mut Criterion) {
    let grid = GridSpec::new(256, 256, 6.0).unwrap();
    let sim = WalshSimulator::rescaled(PhiSpec::GaussianBump, 100.0, 0.0, grid).unwrap();
    c.bench_function("walsh_gaussian_bump_256x512", |b| {
        let mut rep = 0u64;
        b.iter(|| {
            rep += 1;
            sim.sample(&mut Stream::driving(2, rep))
        })
    });
}

fn bench_local_time(c: &mut Criterion) {
    let grid = GridSpec::new(256, 256, 6.0).unwrap();
    let est = LocalTimeEstimator::new(grid);
    let mut s = Stream::driving(3, 0);
    let sheet = SheetSample::draw(grid, &mut s.rng, s.lineage);
    c.bench_function("local_time_256x512", |b| {
        b.iter(|| est.weighted_local_time(&sheet, 0.05, 1.0).unwrap().value)
    });
}

fn bench_chaos(c: &mut Criterion) {
    let grid = GridSpec::new(128, 128, 8.0).unwrap();
    let sim = ChaosSimulator::new(2, 1.0, 0.0, grid).unwrap();
    c.bench_function("chaos_order2_128x256", |b| {
        let mut rep = 0u64;
        b.iter(|| {
            rep += 1;
            sim.sample(&mut Stream::driving(4, rep)).value
        })
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = bench_sheet, bench_walsh, bench_local_time, bench_chaos
}
criterion_main!(benches);
