use criterion::{criterion_group, criterion_main, Criterion};
use nalgebra::DMatrix;
use std::hint::black_box;

use layerlq::riccati::{solve_are, solve_guaranteed, AreProblem, UncertaintyModel};
use layerlq::simulate::florentine_layers;

/// Stable banded drift with single-column actuation: a deterministic
/// stand-in for a typical well-conditioned design problem.
fn chain_problem(n: usize) -> AreProblem {
    let a = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            -1.0 - 0.1 * i as f64
        } else if i.abs_diff(j) == 1 {
            0.5
        } else {
            0.0
        }
    });
    let b = DMatrix::from_fn(n, 1, |i, _| if i == n - 1 { 1.0 } else { 0.0 });
    AreProblem::new(a, b, DMatrix::identity(n, n), DMatrix::identity(1, 1)).unwrap()
}

fn bench_riccati(c: &mut Criterion) {
    for n in [4usize, 8, 16] {
        let problem = chain_problem(n);
        c.bench_function(&format!("solve_are n={n}"), |b| {
            b.iter(|| black_box(solve_are(black_box(&problem)).unwrap()))
        });
    }

    // The guaranteed-cost fixed point on the bundled layer-1 problem: an
    // unstable-under-uncertainty 4-state plant with one direction at bound 2.
    let layers = florentine_layers(1).unwrap();
    let layer1 = &layers[0];
    let problem = AreProblem::new(
        layer1.a.clone(),
        layer1.b.clone().unwrap(),
        DMatrix::identity(4, 4),
        DMatrix::identity(1, 1),
    )
    .unwrap();
    c.bench_function("solve_guaranteed layer-1", |b| {
        b.iter(|| black_box(solve_guaranteed(black_box(&problem), &layer1.uncertainty).unwrap()))
    });
    let nominal = UncertaintyModel::default();
    c.bench_function("solve_guaranteed no-uncertainty", |b| {
        b.iter(|| black_box(solve_guaranteed(black_box(&problem), &nominal).unwrap()))
    });
}

criterion_group!(benches, bench_riccati);
criterion_main!(benches);
