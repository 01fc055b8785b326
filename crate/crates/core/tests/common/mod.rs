#![allow(dead_code)]

pub mod oracles;

use depmeter::gaussian::LinearSem;
use depmeter::structure::Dag;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random DAG on `n` nodes: a random causal order, each forward pair an edge
/// with probability `p`.
pub fn random_edges(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.random::<f64>() < p {
                edges.push((order[a], order[b]));
            }
        }
    }
    edges
}

pub fn random_dag(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Dag {
    Dag::with_default_names(n, &random_edges(rng, n, p)).unwrap()
}

/// Coefficient magnitude in [0.1, 3] with a random sign.
pub fn coefficient(rng: &mut ChaCha8Rng) -> f64 {
    let m = rng.random_range(0.1..=3.0);
    if rng.random::<bool>() {
        m
    } else {
        -m
    }
}

/// Linear SEM over `dag` with random coefficients and noise variances in [0.5, 2].
pub fn random_sem(rng: &mut ChaCha8Rng, dag: &Dag) -> LinearSem {
    let n = dag.n();
    let mut a = vec![vec![0.0; n]; n];
    for (from, to) in dag.edges() {
        a[to][from] = coefficient(rng);
    }
    let noise = (0..n).map(|_| rng.random_range(0.5..=2.0)).collect();
    LinearSem::new(a, noise).unwrap()
}

/// Every subset of `pool` (bitmask order).
pub fn all_subsets(pool: &[usize]) -> Vec<Vec<usize>> {
    (0..1u32 << pool.len())
        .map(|mask| pool.iter().enumerate().filter(|&(b, _)| mask >> b & 1 == 1).map(|(_, &v)| v).collect())
        .collect()
}
