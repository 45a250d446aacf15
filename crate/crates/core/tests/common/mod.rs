#![allow(dead_code)]

pub mod corpus;

use fem_oracle::{FemOptions, GraphInput};
use qgends::metric_graph::{Edge, MetricGraph};
use qgends::spectral::VertexCondition;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct RandomGraph {
    pub graph: MetricGraph,
    pub bc: Vec<VertexCondition>,
}

/// Connected simple graph with at most 12 edges and lengths in `[0.5, 2]`;
/// roughly a quarter of the vertices are Dirichlet.
pub fn random_graph(seed: u64) -> RandomGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=8usize);
    let mut pairs: Vec<(usize, usize)> = (1..n).map(|v| (rng.random_range(0..v), v)).collect();
    let extra = rng.random_range(0..=(12 - pairs.len()).min(4));
    for _ in 0..extra * 4 {
        if pairs.len() >= 12 || pairs.len() >= (n - 1) + extra {
            break;
        }
        let (u, v) = (rng.random_range(0..n), rng.random_range(0..n));
        let key = (u.min(v), u.max(v));
        if u != v && !pairs.iter().any(|&(a, b)| (a.min(b), a.max(b)) == key) {
            pairs.push((u, v));
        }
    }
    let edges = pairs
        .into_iter()
        .map(|(u, v)| Edge { u, v, length: rng.random_range(0.5..=2.0) })
        .collect();
    let graph = MetricGraph::from_edges(n, edges).unwrap();
    let bc = (0..n)
        .map(|_| if rng.random_bool(0.25) { VertexCondition::Dirichlet } else { VertexCondition::Kirchhoff })
        .collect();
    RandomGraph { graph, bc }
}

pub fn fem_input(g: &MetricGraph, bc: &[VertexCondition]) -> GraphInput {
    GraphInput {
        vertex_count: g.vertex_count(),
        edges: g.edges().iter().map(|e| (e.u, e.v, e.length)).collect(),
        dirichlet: bc.iter().map(|c| *c == VertexCondition::Dirichlet).collect(),
    }
}

pub fn fem_eigenvalues(g: &MetricGraph, bc: &[VertexCondition], count: usize) -> Vec<f64> {
    fem_oracle::eigenvalues(fem_input(g, bc), count, FemOptions::default())
}

/// `|a − b| ≤ tol · max(|b|, 1)`; the floor keeps the zero eigenvalue meaningful.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

pub fn star(edges: usize, length: f64) -> MetricGraph {
    MetricGraph::from_edges(edges + 1, (1..=edges).map(|v| Edge { u: 0, v, length }).collect()).unwrap()
}
