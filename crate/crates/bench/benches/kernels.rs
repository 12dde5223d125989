use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use resonances_bench::{points, table, transition};
use resonances_core::dynamics::collide;
use resonances_core::ulam::{assemble, curve_options, leading_eigs};
use resonances_core::Twist;

fn bench_collide(c: &mut Criterion) {
    let t = table();
    let xs = points(&t, 1024);
    c.bench_function("collide x1024", |b| {
        b.iter(|| {
            for x in &xs {
                let _ = black_box(collide(&t, black_box(x)));
            }
        })
    });
}

fn bench_assemble(c: &mut Criterion) {
    let td = transition(64, 100);
    let w = Twist::new(0.3, -0.2);
    c.bench_function("assemble 64x64", |b| b.iter(|| black_box(assemble(&td, black_box(w)))));
}

fn bench_leading(c: &mut Criterion) {
    let td = transition(64, 100);
    let m = assemble(&td, Twist::new(0.3, 0.0));
    let opts = curve_options(1e-10);
    let mut g = c.benchmark_group("leading_eigs");
    g.sample_size(20);
    g.bench_function("64x64 w=(0.3,0)", |b| b.iter(|| black_box(leading_eigs(&m, &opts, None).unwrap())));
    g.finish();
}

criterion_group!(benches, bench_collide, bench_assemble, bench_leading);
criterion_main!(benches);
