use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use deforce_bench::{bump_de4, casimir_sphere, patch_kernel};
use deforce_core::analysis::{gamma_fit, Family, FitOptions};
use deforce_core::engine::{compute_jacobian, eval_de2, eval_de4, JacobianOptions};
use deforce_core::kernels::{patch_v, PatchCorrelation};
use deforce_core::profiles::make_sphere;
use deforce_core::QuadratureSpec;

fn functionals(c: &mut Criterion) {
    let spec = QuadratureSpec::default();
    let (k, p) = casimir_sphere();
    c.bench_function("de2_sphere_radial", |b| b.iter(|| eval_de2(&k, black_box(&p), &spec).unwrap()));
    let nd = QuadratureSpec {
        axisymmetric_reduction: false,
        ..spec
    };
    let wide = make_sphere(1e-1, 1.0, 0.9).unwrap();
    c.bench_function("de2_sphere_polar", |b| b.iter(|| eval_de2(&k, black_box(&wide), &nd).unwrap()));
    let (k4, bump) = bump_de4();
    c.bench_function("de4_bump_cartesian", |b| b.iter(|| eval_de4(&k4, black_box(&bump), &spec).unwrap()));
}

fn patch(c: &mut Criterion) {
    let spec = QuadratureSpec::default();
    let g = PatchCorrelation::gaussian();
    c.bench_function("patch_v_xi_1", |b| b.iter(|| patch_v(black_box(1.0), &g, &spec).unwrap()));
    // memoized lookups after the first pass
    let k = patch_kernel(1e-2);
    let (_, p) = casimir_sphere();
    eval_de2(&k, &p, &spec).unwrap();
    c.bench_function("de2_sphere_patch_warm", |b| b.iter(|| eval_de2(&k, black_box(&p), &spec).unwrap()));
}

fn analysis(c: &mut Criterion) {
    let spec = QuadratureSpec::default();
    let (k, _) = casimir_sphere();
    let opts = FitOptions::default();
    let mut g = c.benchmark_group("analysis");
    g.sample_size(10);
    g.bench_function("gamma_fit_sphere", |b| b.iter(|| gamma_fit(&k, Family::Sphere, black_box(&opts), &spec).unwrap()));
    let p = make_sphere(1.0, 100.0, 90.0).unwrap();
    g.bench_function("jacobian_level_set", |b| b.iter(|| compute_jacobian(black_box(&p), &JacobianOptions::default()).unwrap()));
    g.finish();
}

criterion_group!(benches, functionals, patch, analysis);
criterion_main!(benches);
