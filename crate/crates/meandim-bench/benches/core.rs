use std::io::BufReader;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use meandim::{
    chisq_quantile, estimate_mean_dimension_radial, load_direction_table, owen_scramble,
    sobol_points, DirectionTable,
};

fn table() -> DirectionTable {
    let path = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../data/new-joe-kuo-6.21201.txt"
    );
    let file = std::fs::File::open(path).expect("direction file");
    load_direction_table(BufReader::new(file)).expect("parse direction file")
}

fn bench_sobol(c: &mut Criterion) {
    let table = table();
    let mut group = c.benchmark_group("sobol_points");
    for &dims in &[3usize, 16, 64] {
        let n = 1usize << 14;
        group.throughput(Throughput::Elements((n * dims) as u64));
        group.bench_with_input(BenchmarkId::from_parameter(dims), &dims, |b, &dims| {
            b.iter(|| sobol_points(&table, n, dims).unwrap())
        });
    }
    group.finish();
}

fn bench_scramble(c: &mut Criterion) {
    let table = table();
    let n = 1usize << 14;
    let dims = 16;
    let batch = sobol_points(&table, n, dims).unwrap();
    let mut group = c.benchmark_group("owen_scramble");
    group.throughput(Throughput::Elements((n * dims) as u64));
    group.bench_function("16d_16k", |b| {
        b.iter(|| owen_scramble(&batch, 12345).unwrap())
    });
    group.finish();
}

fn bench_chisq_quantile(c: &mut Criterion) {
    let mut group = c.benchmark_group("chisq_quantile");
    for &df in &[1.0f64, 25.0, 1000.0] {
        group.bench_with_input(BenchmarkId::from_parameter(df), &df, |b, &df| {
            b.iter(|| {
                let mut acc = 0.0;
                for k in 1..64 {
                    acc += chisq_quantile(df, k as f64 / 64.0).unwrap();
                }
                acc
            })
        });
    }
    group.finish();
}

fn bench_radial_estimator(c: &mut Criterion) {
    let table = table();
    let mut group = c.benchmark_group("radial_estimator");
    group.sample_size(10);
    group.measurement_time(Duration::from_secs(10));
    for &d in &[25usize, 158] {
        group.bench_with_input(BenchmarkId::from_parameter(d), &d, |b, &d| {
            b.iter(|| {
                estimate_mean_dimension_radial(&table, |s| s.sqrt().cos(), d, 1 << 12, 2, 7, 1.0)
                    .unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    bench_sobol,
    bench_scramble,
    bench_chisq_quantile,
    bench_radial_estimator
);
criterion_main!(benches);
