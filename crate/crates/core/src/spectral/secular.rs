//! Eigenvalues of finite metric graphs with Kirchhoff or Dirichlet vertices.
//!
//! Roots are located with the counting function
//! `N(k) = #{λ < k²} = Σ_e (⌈k L_e/π⌉ − 1) + n₋(Λ(k))`, where `Λ(k)` is the
//! Dirichlet-to-Neumann form on the Kirchhoff vertices:
//! `Λ_vv = Σ_e k cot(k L_e)`, `Λ_uv = −Σ_e k / sin(k L_e)`.
//! Edges are subdivided at evaluation time so the first sum vanishes and
//! `Λ` stays well conditioned near edge resonances. `N` is monotone, so
//! bisection cannot lose roots. Multiplicities come from
//! the jumps of `N` and are cross-checked against the null space of the
//! `2|E| × 2|E|` matching-condition matrix, which also yields eigenfunctions.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use super::edge::{EdgeSolution, Mode};
use crate::error::{Error, Result};
use crate::metric_graph::MetricGraph;

/// Relative width below which a root bracket is accepted.
const ROOT_TOL: f64 = 1e-13;
/// Singular values below this (relative) count towards the null space.
const NULL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexCondition {
    Kirchhoff,
    Dirichlet,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Eigenpair {
    pub k: f64,
    pub lambda: f64,
    pub multiplicity: usize,
    /// An orthonormal-coefficient basis of the eigenspace, edge by edge.
    #[serde(skip)]
    pub eigenfunctions: Vec<Vec<EdgeSolution>>,
}

/// Kirchhoff everywhere except the marked boundary, which gets `boundary`.
pub fn boundary_conditions(g: &MetricGraph, boundary: VertexCondition) -> Vec<VertexCondition> {
    (0..g.vertex_count())
        .map(|v| {
            if g.is_boundary(v) {
                boundary
            } else {
                VertexCondition::Kirchhoff
            }
        })
        .collect()
}

struct Problem<'a> {
    g: &'a MetricGraph,
    bc: &'a [VertexCondition],
    /// Kirchhoff vertices, indexed into `Λ`.
    free: Vec<Option<usize>>,
    free_count: usize,
}

impl<'a> Problem<'a> {
    fn new(g: &'a MetricGraph, bc: &'a [VertexCondition]) -> Result<Self> {
        if bc.len() != g.vertex_count() {
            return Err(Error::InvalidArgument(format!(
                "{} vertex conditions for {} vertices",
                bc.len(),
                g.vertex_count()
            )));
        }
        if g.edges().is_empty() {
            return Err(Error::SingularAssembly("graph has no edges".into()));
        }
        let mut free = vec![None; bc.len()];
        let mut free_count = 0;
        for (v, c) in bc.iter().enumerate() {
            if *c == VertexCondition::Kirchhoff {
                free[v] = Some(free_count);
                free_count += 1;
            }
        }
        Ok(Problem {
            g,
            bc,
            free,
            free_count,
        })
    }

    fn has_dirichlet(&self) -> bool {
        self.free_count < self.bc.len()
    }

    /// Number of eigenvalues `λ < k²`, for `k > 0`.
    ///
    /// Each edge is split into `m` equal pieces with `k L/m ≤ π/2`, so no
    /// piece has a Dirichlet eigenvalue below `k²` and `Λ` has no poles.
    fn count(&self, k: f64) -> usize {
        let pieces: Vec<usize> = self
            .g
            .edges()
            .iter()
            .map(|e| ((2.0 * k * e.length / PI).ceil() as usize).max(1))
            .collect();
        let size = self.free_count + pieces.iter().map(|m| m - 1).sum::<usize>();
        if size == 0 {
            return 0;
        }
        let mut m = DMatrix::<f64>::zeros(size, size);
        let mut next = self.free_count;
        for (e, &parts) in self.g.edges().iter().zip(&pieces) {
            let x = k * e.length / parts as f64;
            let (s, c) = x.sin_cos();
            let diag = k * c / s;
            let off = -k / s;
            let mut prev = self.free[e.u];
            for j in 0..parts {
                let cur = if j + 1 == parts {
                    self.free[e.v]
                } else {
                    next += 1;
                    Some(next - 1)
                };
                if let Some(i) = prev {
                    m[(i, i)] += diag;
                }
                if let Some(i) = cur {
                    m[(i, i)] += diag;
                }
                if let (Some(i), Some(j)) = (prev, cur) {
                    m[(i, j)] += off;
                    m[(j, i)] += off;
                }
                prev = cur;
            }
        }
        m.symmetric_eigenvalues().iter().filter(|&&x| x < 0.0).count()
    }

    /// Matching conditions for `a_e cos(kx) + b_e sin(kx)`; derivative rows
    /// are divided by `k`.
    fn condition_matrix(&self, k: f64) -> DMatrix<f64> {
        let edges = self.g.edges();
        let m = edges.len();
        let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(2 * m);
        // (column of a, column of b) coefficients for value and derivative at an end
        let end = |ei: usize, w: usize| -> ([f64; 2], [f64; 2]) {
            let e = &edges[ei];
            if w == e.u {
                ([1.0, 0.0], [0.0, 1.0])
            } else {
                let (s, c) = (k * e.length).sin_cos();
                ([c, s], [s, -c])
            }
        };
        for v in 0..self.g.vertex_count() {
            let inc = self.g.incident(v);
            let ends: Vec<_> = inc.iter().map(|&(_, ei)| (ei, end(ei, v))).collect();
            match self.bc[v] {
                VertexCondition::Dirichlet => {
                    for &(ei, (val, _)) in &ends {
                        rows.push(vec![(2 * ei, val[0]), (2 * ei + 1, val[1])]);
                    }
                }
                VertexCondition::Kirchhoff => {
                    let (e0, (v0, _)) = ends[0];
                    for &(ei, (val, _)) in &ends[1..] {
                        rows.push(vec![
                            (2 * ei, val[0]),
                            (2 * ei + 1, val[1]),
                            (2 * e0, -v0[0]),
                            (2 * e0 + 1, -v0[1]),
                        ]);
                    }
                    rows.push(
                        ends.iter()
                            .flat_map(|&(ei, (_, d))| [(2 * ei, d[0]), (2 * ei + 1, d[1])])
                            .collect(),
                    );
                }
            }
        }
        let mut a = DMatrix::<f64>::zeros(rows.len(), 2 * m);
        for (r, row) in rows.iter().enumerate() {
            let norm = row.iter().map(|(_, x)| x * x).sum::<f64>().sqrt();
            for &(c, x) in row {
                a[(r, c)] += x / norm.max(f64::MIN_POSITIVE);
            }
        }
        a
    }

    /// Null space of the matching conditions at `k`.
    fn null_space(&self, k: f64) -> Result<Vec<DVector<f64>>> {
        let a = self.condition_matrix(k);
        let svd = a.try_svd(false, true, f64::EPSILON, 0).ok_or_else(|| {
            Error::SingularAssembly(format!("singular value decomposition failed at k = {k}"))
        })?;
        let vt = svd.v_t.expect("requested");
        let smax = svd.singular_values.max();
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
        Ok(order
            .into_iter()
            .take_while(|&i| svd.singular_values[i] < NULL_TOL * smax.max(1.0))
            .map(|i| vt.row(i).transpose())
            .collect())
    }

    fn eigenfunction(&self, k: f64, coeffs: &DVector<f64>) -> Vec<EdgeSolution> {
        self.g
            .edges()
            .iter()
            .enumerate()
            .map(|(i, e)| EdgeSolution {
                u: e.u,
                v: e.v,
                length: e.length,
                mode: Mode::Trig { k },
                a: coeffs[2 * i],
                b: coeffs[2 * i + 1],
            })
            .collect()
    }

    fn constant(&self) -> Vec<EdgeSolution> {
        self.g
            .edges()
            .iter()
            .map(|e| EdgeSolution {
                u: e.u,
                v: e.v,
                length: e.length,
                mode: Mode::Linear,
                a: 1.0,
                b: 0.0,
            })
            .collect()
    }

    /// Splits `[lo, hi)` until every bracket with a count jump is narrow.
    fn isolate(&self, lo: f64, hi: f64, n_lo: usize, n_hi: usize, out: &mut Vec<(f64, usize)>) {
        if n_hi <= n_lo {
            return;
        }
        if hi - lo <= ROOT_TOL * hi.max(1.0) {
            out.push((0.5 * (lo + hi), n_hi - n_lo));
            return;
        }
        let mid = 0.5 * (lo + hi);
        let n_mid = self.count(mid);
        self.isolate(lo, mid, n_lo, n_mid, out);
        self.isolate(mid, hi, n_mid, n_hi, out);
    }
}

/// All eigenvalues `λ = k²` with `0 ≤ k ≤ k_max`, ascending.
pub fn secular_eigenvalues(g: &MetricGraph, bc: &[VertexCondition], k_max: f64) -> Result<Vec<Eigenpair>> {
    if !(k_max >= 0.0 && k_max.is_finite()) {
        return Err(Error::InvalidArgument(format!("k_max = {k_max}")));
    }
    let p = Problem::new(g, bc)?;
    let mut pairs = Vec::new();
    if !p.has_dirichlet() {
        pairs.push(Eigenpair {
            k: 0.0,
            lambda: 0.0,
            multiplicity: 1,
            eigenfunctions: vec![p.constant()],
        });
    }
    if k_max == 0.0 {
        return Ok(pairs);
    }
    let step = PI / (4.0 * g.total_length());
    let top = k_max * (1.0 + 1e-12) + 1e-12;
    let cells = (top / step).ceil() as usize;
    let grid: Vec<f64> = (0..=cells).map(|j| (j as f64 * step).min(top)).collect();
    let counts: Vec<usize> = grid
        .par_iter()
        .map(|&k| if k == 0.0 { usize::from(!p.has_dirichlet()) } else { p.count(k) })
        .collect();
    let roots: Vec<Vec<(f64, usize)>> = (0..cells)
        .into_par_iter()
        .map(|j| {
            let mut out = Vec::new();
            p.isolate(grid[j], grid[j + 1], counts[j], counts[j + 1], &mut out);
            out
        })
        .collect();
    // a bisection point landing on a multiple root splits its jump
    let mut merged: Vec<(f64, usize)> = Vec::new();
    for (k, mult) in roots.into_iter().flatten() {
        match merged.last_mut() {
            Some((k0, m0)) if k - *k0 <= 4.0 * ROOT_TOL * k.max(1.0) => {
                *k0 = (*k0 * *m0 as f64 + k * mult as f64) / (*m0 + mult) as f64;
                *m0 += mult;
            }
            _ => merged.push((k, mult)),
        }
    }
    let found: Vec<Result<Eigenpair>> = merged
        .into_par_iter()
        .map(|(k, mult)| {
            let null = p.null_space(k)?;
            if null.len() != mult {
                return Err(Error::RootScanTooCoarse(k));
            }
            Ok(Eigenpair {
                k,
                lambda: k * k,
                multiplicity: mult,
                eigenfunctions: null.iter().map(|c| p.eigenfunction(k, c)).collect(),
            })
        })
        .collect();
    for pair in found {
        pairs.push(pair?);
    }
    Ok(pairs)
}

/// Eigenvalue list with multiplicities expanded.
pub fn expand(pairs: &[Eigenpair]) -> Vec<f64> {
    pairs
        .iter()
        .flat_map(|p| std::iter::repeat_n(p.lambda, p.multiplicity))
        .collect()
}

/// The lowest `count` eigenvalues, multiplicities expanded.
pub fn first_eigenvalues(g: &MetricGraph, bc: &[VertexCondition], count: usize) -> Result<Vec<f64>> {
    let mut k_max = PI * (count + g.vertex_count() + 1) as f64 / g.total_length();
    loop {
        let all = expand(&secular_eigenvalues(g, bc, k_max)?);
        if all.len() >= count {
            return Ok(all[..count].to_vec());
        }
        k_max *= 2.0;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedEigenvalue {
    pub index: usize,
    pub neumann: Option<f64>,
    pub dirichlet: Option<f64>,
}

/// Eigenvalues with Kirchhoff versus Dirichlet conditions on the boundary
/// marks, paired by index.
pub fn dirichlet_vs_neumann(g: &MetricGraph, k_max: f64) -> Result<Vec<PairedEigenvalue>> {
    if g.boundary_vertices().is_empty() {
        return Err(Error::InvalidArgument("graph has no boundary marks".into()));
    }
    let neumann = expand(&secular_eigenvalues(g, &boundary_conditions(g, VertexCondition::Kirchhoff), k_max)?);
    let dirichlet = expand(&secular_eigenvalues(g, &boundary_conditions(g, VertexCondition::Dirichlet), k_max)?);
    Ok((0..neumann.len().max(dirichlet.len()))
        .map(|i| PairedEigenvalue {
            index: i + 1,
            neumann: neumann.get(i).copied(),
            dirichlet: dirichlet.get(i).copied(),
        })
        .collect())
}
