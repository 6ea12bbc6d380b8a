use criterion::{criterion_group, criterion_main, Criterion};
use nalgebra::DMatrix;
use std::hint::black_box;

use layerlq::simulate::florentine_layers;
use layerlq::synthesis::{
    assemble, compose, default_certificates, verify_generalized_are, CertificateStrategy,
};

fn bench_synthesis(c: &mut Criterion) {
    for provinces in [1usize, 2] {
        let layers = florentine_layers(provinces).unwrap();
        let dim = 60 * provinces;

        c.bench_function(&format!("compose n={dim}"), |b| {
            b.iter(|| black_box(compose(black_box(&layers)).unwrap()))
        });

        // The full layered synthesis: layer-1 guaranteed solve, per-layer
        // certificates, and the Kronecker assembly of the composite design.
        let certs = default_certificates(&layers, CertificateStrategy::Identity).unwrap();
        c.bench_function(&format!("layered synthesis n={dim}"), |b| {
            b.iter(|| {
                let certs = default_certificates(&layers, CertificateStrategy::Identity).unwrap();
                black_box(
                    assemble(
                        &layers,
                        &certs,
                        DMatrix::identity(4, 4),
                        DMatrix::identity(1, 1),
                    )
                    .unwrap(),
                )
            })
        });

        let design = assemble(
            &layers,
            &certs,
            DMatrix::identity(4, 4),
            DMatrix::identity(1, 1),
        )
        .unwrap();
        let plant = compose(&layers).unwrap();
        let mut group = c.benchmark_group("verification");
        group.sample_size(10);
        group.bench_function(format!("verify n={dim}"), |b| {
            b.iter(|| black_box(verify_generalized_are(black_box(&design), &plant).unwrap()))
        });
        group.finish();
    }
}

criterion_group!(benches, bench_synthesis);
criterion_main!(benches);
