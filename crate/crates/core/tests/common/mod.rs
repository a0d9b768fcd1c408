#![allow(dead_code)]

use gridshare::graph::CommGraph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random spanning tree plus extra edges with probability `extra`, weights in `weights`.
pub fn random_connected_graph(
    rng: &mut impl Rng,
    n: usize,
    extra: f64,
    weights: (f64, f64),
) -> CommGraph<f64> {
    let mut edges = Vec::new();
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    for pos in 1..n {
        let parent = order[rng.gen_range(0..pos)];
        let (a, b) = (order[pos].min(parent), order[pos].max(parent));
        edges.push((a, b, rng.gen_range(weights.0..weights.1)));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if !edges.iter().any(|&(a, b, _)| a == i && b == j) && rng.gen_bool(extra) {
                edges.push((i, j, rng.gen_range(weights.0..weights.1)));
            }
        }
    }
    CommGraph::new(n, &edges).expect("generated graph is valid")
}

/// Any graph, possibly disconnected.
pub fn random_graph(rng: &mut impl Rng, n: usize, p: f64) -> CommGraph<f64> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen_bool(p) {
                edges.push((i, j, rng.gen_range(0.1..5.0)));
            }
        }
    }
    CommGraph::new(n, &edges).expect("generated graph is valid")
}

pub fn to_nalgebra(m: &gridshare::matrix::Matrix<f64>) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_fn(m.rows(), m.cols(), |r, c| m[(r, c)])
}

/// Eigenvalues in ascending order from nalgebra's solver.
pub fn nalgebra_eigenvalues(m: &gridshare::matrix::Matrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = to_nalgebra(m)
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

/// `P̃_T·1 + exp(-(L+Δ)t)(-δ·1)` through nalgebra.
pub fn nalgebra_consensus(
    g: &CommGraph<f64>,
    k: usize,
    h: f64,
    p_t: f64,
    delta: f64,
    t: f64,
) -> Vec<f64> {
    let mut m = to_nalgebra(&g.laplacian());
    m[(k, k)] += h;
    let eig = m.symmetric_eigen();
    let n = g.n();
    let x0 = nalgebra::DVector::from_element(n, -delta);
    let coeffs = eig.eigenvectors.transpose() * x0;
    let scaled = nalgebra::DVector::from_fn(n, |i, _| coeffs[i] * (-eig.eigenvalues[i] * t).exp());
    let y = &eig.eigenvectors * scaled;
    y.iter().map(|v| p_t + delta + v).collect()
}
