//! Deterministic random instances shared by unit, integration, and
//! acceptance tests. Not part of the public API.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::Graph;

/// Connected graph on `n` vertices: a random spanning tree plus roughly
/// `n/2` extra edges, weights in `[0.5, 1.5]`.
pub fn random_connected_graph(n: usize, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    for v in 1..n {
        let parent = rng.random_range(0..v);
        edges.push((parent, v, 0.5 + rng.random::<f64>()));
    }
    let extra = n / 2;
    let mut attempts = 0;
    while attempts < extra * 10 && edges.len() < n - 1 + extra {
        attempts += 1;
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if i == j {
            continue;
        }
        let key = (i.min(j), i.max(j));
        if edges.iter().any(|&(a, b, _)| (a.min(b), a.max(b)) == key) {
            continue;
        }
        edges.push((key.0, key.1, 0.5 + rng.random::<f64>()));
    }
    Graph::new(n, edges).expect("generated edges are valid")
}

/// Vector with independent entries uniform in `[-1, 1)`.
pub fn random_vector(n: usize, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DVector::from_fn(n, |_, _| 2.0 * rng.random::<f64>() - 1.0)
}
