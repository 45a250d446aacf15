//! Finite element eigenvalue oracle for the Laplacian `-d²/dx²` on a finite
//! metric graph with continuity + flux (Kirchhoff) or Dirichlet conditions at
//! the vertices.
//!
//! Every edge is meshed with elements of size at most `mesh_size` carrying
//! Lagrange polynomials of degree `degree`. Eigenvalues of the discrete
//! pencil `K u = λ M u` are located by bisection on the Sylvester inertia of
//! `K - σ M`, computed by static condensation: element bubbles first, then
//! the chain of element end nodes along every edge, then the dense vertex
//! block. Condensation runs in double-double arithmetic because the pencil
//! is conditioned like `1/h²`.
//!
//! The crate shares no code with the secular solver it is meant to check.

mod dd;
mod reference;

use dd::Dd;
use reference::ReferenceElement;

#[derive(Debug, Clone)]
pub struct GraphInput {
    pub vertex_count: usize,
    /// `(u, v, length)`; the orientation is irrelevant to the oracle.
    pub edges: Vec<(usize, usize, f64)>,
    /// `true` marks a Dirichlet vertex, every other vertex is Kirchhoff.
    pub dirichlet: Vec<bool>,
}

#[derive(Debug, Clone, Copy)]
pub struct FemOptions {
    pub mesh_size: f64,
    pub degree: usize,
    /// Relative bisection tolerance on each eigenvalue.
    pub rel_tol: f64,
}

impl Default for FemOptions {
    fn default() -> Self {
        Self {
            mesh_size: 1e-3,
            degree: 4,
            rel_tol: 1e-13,
        }
    }
}

/// Symmetric 2x2 block `[[a, b], [b, c]]` coupling the two end nodes of a
/// chain whose interior has been eliminated; `negatives` counts the negative
/// pivots met while eliminating that interior.
#[derive(Debug, Clone, Copy)]
struct Port {
    a: Dd,
    b: Dd,
    c: Dd,
    negatives: usize,
}

fn safe_pivot(p: Dd) -> Dd {
    if p.is_zero() {
        Dd::new(f64::MIN_POSITIVE)
    } else {
        p
    }
}

impl Port {
    fn then(self, next: Port) -> Port {
        let pivot = safe_pivot(self.c + next.a);
        Port {
            a: self.a - self.b * self.b / pivot,
            b: -(self.b * next.b / pivot),
            c: next.c - next.b * next.b / pivot,
            negatives: self.negatives + next.negatives + usize::from(pivot.is_negative()),
        }
    }

    fn repeat(self, mut times: usize) -> Port {
        assert!(times >= 1);
        let mut base = self;
        let mut acc: Option<Port> = None;
        while times > 0 {
            if times & 1 == 1 {
                acc = Some(match acc {
                    None => base,
                    Some(p) => p.then(base),
                });
            }
            times >>= 1;
            if times > 0 {
                base = base.then(base);
            }
        }
        acc.expect("times >= 1")
    }
}

/// Negative inertia of a dense symmetric matrix by `LDLᵀ` with symmetric
/// 1x1 / 2x2 pivoting (Bunch–Kaufman style choice).
fn negative_count(mut a: Vec<Vec<Dd>>) -> usize {
    const ALPHA: f64 = 0.6404; // (1 + sqrt 17) / 8
    let mut active: Vec<usize> = (0..a.len()).collect();
    let mut negatives = 0;
    while !active.is_empty() {
        let (mut best_diag, mut diag_mag) = (active[0], -1.0);
        let (mut off_pair, mut off_mag) = ((active[0], active[0]), -1.0);
        for (x, &i) in active.iter().enumerate() {
            let d = a[i][i].to_f64().abs();
            if d > diag_mag {
                diag_mag = d;
                best_diag = i;
            }
            for &j in &active[x + 1..] {
                let o = a[i][j].to_f64().abs();
                if o > off_mag {
                    off_mag = o;
                    off_pair = (i, j);
                }
            }
        }
        if active.len() == 1 || diag_mag >= ALPHA * off_mag {
            let k = best_diag;
            let pivot = safe_pivot(a[k][k]);
            negatives += usize::from(pivot.is_negative());
            active.retain(|&i| i != k);
            for &i in &active {
                let factor = a[i][k] / pivot;
                for &j in &active {
                    a[i][j] = a[i][j] - factor * a[k][j];
                }
            }
        } else {
            let (p, q) = off_pair;
            let (app, apq, aqq) = (a[p][p], a[p][q], a[q][q]);
            let det = app * aqq - apq * apq;
            negatives += if det.is_negative() {
                1
            } else if (app + aqq).is_negative() {
                2
            } else {
                0
            };
            let det = safe_pivot(det);
            active.retain(|&i| i != p && i != q);
            // inverse of the 2x2 pivot block
            let (ipp, ipq, iqq) = (aqq / det, -(apq / det), app / det);
            let rows: Vec<(usize, Dd, Dd)> = active
                .iter()
                .map(|&i| (i, a[i][p] * ipp + a[i][q] * ipq, a[i][p] * ipq + a[i][q] * iqq))
                .collect();
            for &(i, wp, wq) in &rows {
                for &j in &active {
                    a[i][j] = a[i][j] - (wp * a[p][j] + wq * a[q][j]);
                }
            }
        }
    }
    negatives
}

pub struct FemOracle {
    graph: GraphInput,
    options: FemOptions,
    reference: ReferenceElement,
}

impl FemOracle {
    pub fn new(graph: GraphInput, options: FemOptions) -> Self {
        assert_eq!(graph.dirichlet.len(), graph.vertex_count);
        for &(u, v, len) in &graph.edges {
            assert!(u < graph.vertex_count && v < graph.vertex_count && u != v);
            assert!(len > 0.0 && len.is_finite());
        }
        let reference = ReferenceElement::new(options.degree);
        Self {
            graph,
            options,
            reference,
        }
    }

    /// `K_e - σ M_e` for one element of size `h`, with its bubbles eliminated.
    fn element_port(&self, h: f64, sigma: f64) -> Port {
        let p = self.reference.degree;
        let inv_h = Dd::new(1.0) / Dd::new(h);
        let sh = Dd::new(sigma) * Dd::new(h);
        // bubbles first, then the two end nodes
        let order: Vec<usize> = (1..p).chain([0, p]).collect();
        let n = p + 1;
        let mut a: Vec<Vec<Dd>> = order
            .iter()
            .map(|&i| {
                order
                    .iter()
                    .map(|&j| self.reference.stiffness[i][j] * inv_h - self.reference.mass[i][j] * sh)
                    .collect()
            })
            .collect();
        let mut negatives = 0;
        for k in 0..p.saturating_sub(1) {
            let pivot = safe_pivot(a[k][k]);
            negatives += usize::from(pivot.is_negative());
            for i in k + 1..n {
                let factor = a[i][k] / pivot;
                for j in k + 1..n {
                    a[i][j] = a[i][j] - factor * a[k][j];
                }
            }
        }
        Port {
            a: a[n - 2][n - 2],
            b: a[n - 2][n - 1],
            c: a[n - 1][n - 1],
            negatives,
        }
    }

    /// Number of discrete eigenvalues strictly below `sigma`.
    pub fn count_below(&self, sigma: f64) -> usize {
        let n = self.graph.vertex_count;
        let mut vertex_block = vec![vec![Dd::ZERO; n]; n];
        let mut negatives = 0;
        for &(u, v, len) in &self.graph.edges {
            let elements = (len / self.options.mesh_size).ceil().max(1.0) as usize;
            let h = len / elements as f64;
            let port = self.element_port(h, sigma).repeat(elements);
            negatives += port.negatives;
            vertex_block[u][u] = vertex_block[u][u] + port.a;
            vertex_block[v][v] = vertex_block[v][v] + port.c;
            vertex_block[u][v] = vertex_block[u][v] + port.b;
            vertex_block[v][u] = vertex_block[v][u] + port.b;
        }
        let free: Vec<usize> = (0..n).filter(|&i| !self.graph.dirichlet[i]).collect();
        let reduced: Vec<Vec<Dd>> = free
            .iter()
            .map(|&i| free.iter().map(|&j| vertex_block[i][j]).collect())
            .collect();
        negatives + negative_count(reduced)
    }

    /// The `count` smallest discrete eigenvalues, ascending, repeated
    /// according to multiplicity.
    pub fn eigenvalues(&self, count: usize) -> Vec<f64> {
        if count == 0 {
            return Vec::new();
        }
        let mut upper = 1.0;
        while self.count_below(upper) < count {
            upper *= 2.0;
            assert!(upper < 1e12, "eigenvalue bracket diverged");
        }
        let mut out = Vec::with_capacity(count);
        let mut lower_start = -1.0;
        for j in 1..=count {
            let (mut lo, mut hi) = (lower_start, upper);
            while hi - lo > self.options.rel_tol * hi.abs().max(1e-3) {
                let mid = 0.5 * (lo + hi);
                if self.count_below(mid) >= j {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            out.push(0.5 * (lo + hi));
            lower_start = lo;
        }
        out
    }
}

pub fn eigenvalues(graph: GraphInput, count: usize, options: FemOptions) -> Vec<f64> {
    FemOracle::new(graph, options).eigenvalues(count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn interval(len: f64, dirichlet: bool) -> GraphInput {
        GraphInput {
            vertex_count: 2,
            edges: vec![(0, 1, len)],
            dirichlet: vec![dirichlet, dirichlet],
        }
    }

    #[test]
    fn dirichlet_interval() {
        let ev = eigenvalues(interval(PI, true), 4, FemOptions::default());
        for (k, e) in ev.iter().enumerate() {
            let exact = ((k + 1) * (k + 1)) as f64;
            assert!((e - exact).abs() < 1e-11 * exact, "{e} vs {exact}");
        }
    }

    #[test]
    fn neumann_interval() {
        let ev = eigenvalues(interval(PI, false), 4, FemOptions::default());
        assert!(ev[0].abs() < 1e-12);
        for (k, e) in ev.iter().enumerate().skip(1) {
            let exact = (k * k) as f64;
            assert!((e - exact).abs() < 1e-11 * exact, "{e} vs {exact}");
        }
    }

    #[test]
    fn star_with_dirichlet_leaves_has_double_eigenvalue() {
        // three unit edges, Dirichlet leaves: k = pi/2 (simple), k = pi (double)
        let g = GraphInput {
            vertex_count: 4,
            edges: vec![(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)],
            dirichlet: vec![false, true, true, true],
        };
        let ev = eigenvalues(g, 3, FemOptions::default());
        assert!((ev[0] - PI * PI / 4.0).abs() < 1e-11);
        assert!((ev[1] - PI * PI).abs() < 1e-10);
        assert!((ev[2] - PI * PI).abs() < 1e-10);
    }

    #[test]
    fn short_and_long_edges_mix() {
        // path 0-1-2 with lengths 0.5 and 1.5 is an interval of length 2
        let g = GraphInput {
            vertex_count: 3,
            edges: vec![(0, 1, 0.5), (1, 2, 1.5)],
            dirichlet: vec![true, false, true],
        };
        let ev = eigenvalues(g, 5, FemOptions::default());
        for (k, e) in ev.iter().enumerate() {
            let exact = ((k + 1) as f64 * PI / 2.0).powi(2);
            assert!((e - exact).abs() < 1e-11 * exact, "{e} vs {exact}");
        }
    }
}
