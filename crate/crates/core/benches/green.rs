use criterion::{criterion_group, criterion_main, Criterion};
use num_complex::Complex64;
use slabguide::{apply_green, build_evaluator, par, ComplexField, Grid2D, WaveguideProfile};

fn synthesis(c: &mut Criterion) {
    let p = WaveguideProfile::step(5.0, 0.2, 2.0, 1.0).unwrap();
    let ev = build_evaluator(&p, 1e-4).unwrap();
    let g = Grid2D::new(-0.5, 0.5, 61, -0.5, 0.5, 61).unwrap();
    let f = ComplexField::from_fn(g, |x, z| Complex64::new((-(x * x + z * z) / 0.02).exp(), 0.0));
    let mut group = c.benchmark_group("apply_green_61x61");
    group.sample_size(10);
    group.bench_function("sequential", |b| {
        par::set_sequential(true);
        b.iter(|| apply_green(&ev, &f, &g).unwrap());
    });
    group.bench_function("parallel", |b| {
        par::set_sequential(false);
        b.iter(|| apply_green(&ev, &f, &g).unwrap());
    });
    group.finish();
}

criterion_group!(benches, synthesis);
criterion_main!(benches);
