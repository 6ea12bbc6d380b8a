//! Seeded random-instance generators shared by the integration tests.

use layerlq::riccati::{controllability_rank, UncertaintyDirection, UncertaintyModel};
use layerlq::synthesis::{CertificateStrategy, LayerSpec};
use layerlq::Graph;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

pub fn random_vector(rng: &mut ChaCha8Rng, dim: usize) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| StandardNormal.sample(rng))
}

pub fn random_unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> DVector<f64> {
    let v = random_vector(rng, dim);
    let n = v.norm();
    v / n
}

pub fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let g = random_matrix(rng, n, n);
    &g * g.transpose() + DMatrix::identity(n, n) * 0.5
}

/// Random matrix kept away from singularity (regenerates on tiny
/// determinant) so inverse identities are well-conditioned.
pub fn random_invertible(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    loop {
        let m = random_matrix(rng, n, n);
        if m.determinant().abs() > 0.1 {
            return m;
        }
    }
}

/// Random connected unsigned graph: a random spanning tree plus a few extra
/// edges, unit weights.
pub fn random_connected_graph(rng: &mut ChaCha8Rng, n: usize) -> Graph {
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    for v in 1..n {
        let u = rng.random_range(0..v);
        edges.push((u, v, 1.0));
    }
    for _ in 0..rng.random_range(0..=n) {
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if u != v && !edges.iter().any(|&(a, b, _)| (a, b) == (u.min(v), u.max(v))) {
            edges.push((u.min(v), u.max(v), 1.0));
        }
    }
    Graph::undirected(n, &edges).expect("generated graph is valid")
}

/// Random unsigned graph that may be disconnected: each possible edge drawn
/// independently.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> Graph {
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.random_range(0.0..1.0) < 0.45 {
                edges.push((u, v, 1.0));
            }
        }
    }
    Graph::undirected(n, &edges).expect("generated graph is valid")
}

/// Random stable drift: symmetric negative definite part plus a shift, so
/// the spectrum sits safely in the left half plane.
pub fn random_stable_system(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let g = random_matrix(rng, n, n);
    -(&g * g.transpose()) / n as f64 - DMatrix::identity(n, n) * 0.5
}

/// Random controllable pair with a controllability margin: the smallest
/// normalized Krylov singular value must clear 1e-3, so the generated
/// problems are meaningfully controllable rather than borderline.
pub fn random_controllable_pair(
    rng: &mut ChaCha8Rng,
    n: usize,
    m: usize,
) -> (DMatrix<f64>, DMatrix<f64>) {
    loop {
        let a = random_matrix(rng, n, n);
        let b = random_matrix(rng, n, m);
        if controllability_rank(&a, &b) < n {
            continue;
        }
        let mut krylov = DMatrix::<f64>::zeros(n, n * m);
        let mut block = b.clone();
        for k in 0..n {
            let col_norm = block.norm().max(1e-300);
            krylov
                .view_mut((0, k * m), (n, m))
                .copy_from(&(&block / col_norm));
            block = &a * block;
        }
        let smallest = krylov
            .svd(false, false)
            .singular_values
            .iter()
            .fold(f64::INFINITY, |acc, &s| acc.min(s));
        if smallest >= 1e-3 {
            return (a, b);
        }
    }
}

/// A randomly generated layered instance that satisfies the certificate
/// hypotheses by construction.
pub struct RandomInstance {
    pub layers: Vec<LayerSpec>,
    pub q1: DMatrix<f64>,
    pub r1: DMatrix<f64>,
    pub strategy: CertificateStrategy,
}

fn random_layer1(rng: &mut ChaCha8Rng) -> LayerSpec {
    let n1 = rng.random_range(2..=4);
    loop {
        let g = random_matrix(rng, n1, n1);
        let a = -(&g * g.transpose()) / n1 as f64 - DMatrix::identity(n1, n1) * 0.5;
        let input_count = rng.random_range(1..=2);
        let b = random_matrix(rng, n1, input_count);
        if controllability_rank(&a, &b) < n1 {
            continue;
        }
        let direction_count = rng.random_range(1..=2);
        let mut directions = Vec::new();
        for _ in 0..direction_count {
            let s = random_matrix(rng, n1, n1);
            let mut s = (&s + s.transpose()) * 0.5;
            let spectral: f64 = s
                .symmetric_eigenvalues()
                .iter()
                .fold(0.0, |acc: f64, &v| acc.max(v.abs()));
            s /= spectral.max(1e-12);
            directions.push(UncertaintyDirection {
                direction: s,
                weight_bound: 0.25,
            });
        }
        return LayerSpec::new(a)
            .with_input(b)
            .with_uncertainty(UncertaintyModel { directions });
    }
}

fn random_higher_layer(rng: &mut ChaCha8Rng, strategy: CertificateStrategy, n: usize) -> LayerSpec {
    let graph = random_connected_graph(rng, n);
    let laplacian = layerlq::graphs::matrices_of(&graph).laplacian;
    let a = match strategy {
        CertificateStrategy::Identity => -laplacian,
        CertificateStrategy::Lyapunov => {
            let damping =
                DMatrix::from_diagonal(&DVector::from_fn(n, |_, _| rng.random_range(0.2..1.0)));
            -laplacian - damping
        }
    };
    LayerSpec::new(a)
}

/// Random valid layered instance: an uncertain, controllable first layer and
/// `layer_count − 1` higher layers compatible with the chosen certificate
/// strategy (negated Laplacians for the identity strategy, damped ones for
/// the Lyapunov strategy).
pub fn random_layered_instance(rng: &mut ChaCha8Rng, layer_count: usize) -> RandomInstance {
    let strategy = if rng.random_range(0..2) == 0 {
        CertificateStrategy::Identity
    } else {
        CertificateStrategy::Lyapunov
    };
    let mut layers = vec![random_layer1(rng)];
    for _ in 1..layer_count {
        let n = if layer_count > 2 {
            rng.random_range(2..=4)
        } else {
            rng.random_range(3..=6)
        };
        layers.push(random_higher_layer(rng, strategy, n));
    }
    let n1 = layers[0].a.nrows();
    let p1 = layers[0].b.as_ref().unwrap().ncols();
    RandomInstance {
        layers,
        q1: DMatrix::identity(n1, n1),
        r1: DMatrix::identity(p1, p1),
        strategy,
    }
}
