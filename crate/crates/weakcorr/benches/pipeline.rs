//! Backend comparison: the same inner-loop kernels on the sequential path
//! and the rayon pool, plus the full indicator pipeline end to end.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ndarray::{Array2, Axis};
use num_complex::Complex64;

use weakcorr::detector;
use weakcorr::exec::{self, Mode};
use weakcorr::state::StateSpec;
use weakcorr::{build_state, make_grid, GridSpec, Numerics, PhysicsParams};

const N: usize = 512;

fn test_field() -> Array2<Complex64> {
    let h = 16.0 / (N - 1) as f64;
    Array2::from_shape_fn((N, N), |(i, j)| {
        let x = -8.0 + i as f64 * h;
        let y = -8.0 + j as f64 * h;
        Complex64::new((-0.5 * (x * x + y * y)).exp(), 0.3 * x * y)
    })
}

fn fd4_central(src: &Array2<Complex64>, mode: Mode) -> Array2<Complex64> {
    let h = 16.0 / (N - 1) as f64;
    let c = 1.0 / (12.0 * h);
    exec::map_lanes(src, Axis(0), mode, |f, mut d| {
        let n = f.len();
        for i in 2..n - 2 {
            d[i] = (f[i - 2] - f[i + 2] + (f[i + 1] - f[i - 1]) * 8.0) * c;
        }
    })
}

fn bench_kernels(c: &mut Criterion) {
    let field = test_field();
    let other = test_field();

    let mut group = c.benchmark_group("fd4_lanes");
    for (label, mode) in [("seq", Mode::Seq), ("par", Mode::Par)] {
        group.bench_with_input(BenchmarkId::from_parameter(label), &mode, |b, &mode| {
            b.iter(|| fd4_central(std::hint::black_box(&field), mode))
        });
    }
    group.finish();

    let mut group = c.benchmark_group("pointwise_quotient");
    for (label, mode) in [("seq", Mode::Seq), ("par", Mode::Par)] {
        group.bench_with_input(BenchmarkId::from_parameter(label), &mode, |b, &mode| {
            b.iter(|| {
                exec::zip_map(
                    std::hint::black_box(&field),
                    std::hint::black_box(&other),
                    mode,
                    |a, b| if b.norm_sqr() > 0.0 { a / b } else { Complex64::default() },
                )
            })
        });
    }
    group.finish();

    let mut group = c.benchmark_group("build_state_kernel");
    for (label, mode) in [("seq", Mode::Seq), ("par", Mode::Par)] {
        let h = 16.0 / (N - 1) as f64;
        group.bench_with_input(BenchmarkId::from_parameter(label), &mode, |b, &mode| {
            b.iter(|| {
                exec::build(N, N, mode, |i, j| {
                    let x = -8.0 + i as f64 * h;
                    let y = -8.0 + j as f64 * h;
                    Complex64::new((-0.5 * (x * x + y * y) - 0.2 * x * y).exp(), 0.0)
                })
            })
        });
    }
    group.finish();
}

fn bench_pipeline(c: &mut Criterion) {
    let grid = make_grid(GridSpec::square(256, -8.0, 8.0)).unwrap();
    let wf = build_state(
        &StateSpec::GeneralGaussian {
            a: 0.5,
            b: 0.2,
            lambda: 0.3,
        },
        &grid,
        PhysicsParams::default(),
    )
    .unwrap();
    let num = Numerics::default();
    c.bench_function("indicators_256", |b| {
        b.iter(|| detector::indicators(std::hint::black_box(&wf), &num).unwrap())
    });
    c.bench_function("identity_suite_256", |b| {
        b.iter(|| detector::identity_suite(std::hint::black_box(&wf), &num, 1.0).unwrap())
    });
}

criterion_group!(benches, bench_kernels, bench_pipeline);
criterion_main!(benches);
