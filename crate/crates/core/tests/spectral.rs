mod common;

use common::{close, fem_eigenvalues, random_graph, star};
use qgends::graphspec::parse_spec;
use qgends::metric_graph::truncate;
use qgends::spectral::{
    boundary_conditions, dirichlet_vs_neumann, expand, first_eigenvalues, secular_eigenvalues, sobolev_ratio,
    VertexCondition,
};

fn star_bc() -> Vec<VertexCondition> {
    let mut bc = vec![VertexCondition::Dirichlet; 4];
    bc[0] = VertexCondition::Kirchhoff;
    bc
}

fn binary_tree_depth3() -> qgends::metric_graph::MetricGraph {
    let spec = parse_spec(
        r#"{"variant":"RadialTree","b":{"kind":"constant","c":2},"ell":{"kind":"constant","c":1}}"#,
    )
    .unwrap();
    truncate(&spec, 3).unwrap()
}

#[test]
fn three_star_matches_fem() {
    let g = star(3, 1.0);
    let ours = first_eigenvalues(&g, &star_bc(), 10).unwrap();
    let fem = fem_eigenvalues(&g, &star_bc(), 10);
    for (a, b) in ours.iter().zip(&fem) {
        assert!(close(*a, *b, 1e-8), "{ours:?} vs {fem:?}");
    }
}

#[test]
fn binary_tree_truncation_matches_fem_both_ways() {
    let g = binary_tree_depth3();
    for cond in [VertexCondition::Kirchhoff, VertexCondition::Dirichlet] {
        let bc = boundary_conditions(&g, cond);
        let ours = first_eigenvalues(&g, &bc, 12).unwrap();
        let fem = fem_eigenvalues(&g, &bc, 12);
        for (a, b) in ours.iter().zip(&fem) {
            assert!(close(*a, *b, 1e-8), "{cond:?}: {ours:?} vs {fem:?}");
        }
    }
    for row in dirichlet_vs_neumann(&g, 6.0).unwrap() {
        if let (Some(n), Some(d)) = (row.neumann, row.dirichlet) {
            assert!(n <= d * (1.0 + 1e-12));
        }
    }
}

#[test]
fn three_star_neumann_below_dirichlet() {
    let mut g = star(3, 1.0);
    for v in 1..4 {
        g.set_boundary(v, true).unwrap();
    }
    let rows = dirichlet_vs_neumann(&g, 8.0).unwrap();
    assert!(rows.len() > 5);
    for row in rows {
        if let (Some(n), Some(d)) = (row.neumann, row.dirichlet) {
            assert!(n <= d * (1.0 + 1e-12));
        }
    }
}

#[test]
fn random_graphs_match_fem() {
    for seed in 0..5 {
        let r = random_graph(seed);
        let ours = first_eigenvalues(&r.graph, &r.bc, 10).unwrap();
        let fem = fem_eigenvalues(&r.graph, &r.bc, 10);
        for (a, b) in ours.iter().zip(&fem) {
            assert!(close(*a, *b, 1e-8), "seed {seed}: {ours:?} vs {fem:?}");
        }
    }
}

#[test]
fn eigenfunctions_satisfy_rayleigh_identity() {
    for seed in 0..10 {
        let r = random_graph(seed);
        for pair in secular_eigenvalues(&r.graph, &r.bc, 6.0).unwrap() {
            assert_eq!(pair.eigenfunctions.len(), pair.multiplicity);
            for f in &pair.eigenfunctions {
                let l2: f64 = f.iter().map(|p| p.l2_sq()).sum();
                let grad: f64 = f.iter().map(|p| p.grad_sq()).sum();
                assert!((grad - pair.lambda * l2).abs() <= 1e-9 * grad.max(pair.lambda * l2).max(1e-300), "seed {seed}");
                for v in 0..r.graph.vertex_count() {
                    let pieces: Vec<_> = f.iter().filter(|p| p.u == v || p.v == v).collect();
                    let scale = f.iter().map(|p| p.a.hypot(p.b)).fold(0.0, f64::max);
                    if r.bc[v] == VertexCondition::Dirichlet {
                        assert!(pieces.iter().all(|p| p.trace(v).abs() < 1e-8 * scale));
                    } else {
                        let flux: f64 = pieces.iter().map(|p| p.normal_derivative(v)).sum();
                        assert!(flux.abs() < 1e-7 * scale * pair.k.max(1.0), "seed {seed} flux {flux}");
                    }
                }
            }
        }
    }
}

#[test]
fn star_eigenfunction_ratio_is_lambda_over_one_plus_lambda_squared() {
    let g = star(3, 1.0);
    for pair in secular_eigenvalues(&g, &star_bc(), 7.0).unwrap() {
        for f in &pair.eigenfunctions {
            let r = sobolev_ratio(&g, f).unwrap();
            let l = pair.lambda;
            assert!((r - l / (1.0 + l * l)).abs() < 1e-9 * r);
        }
    }
}

#[test]
fn scaling_and_orientation() {
    for seed in 10..16 {
        let r = random_graph(seed);
        let base = first_eigenvalues(&r.graph, &r.bc, 10).unwrap();
        let scaled = first_eigenvalues(&r.graph.scaled(2.0), &r.bc, 10).unwrap();
        let flipped = first_eigenvalues(&r.graph.flipped(), &r.bc, 10).unwrap();
        for i in 0..10 {
            assert!(close(scaled[i], base[i] / 4.0, 1e-9), "seed {seed}");
            assert!(close(flipped[i], base[i], 1e-12), "seed {seed}");
        }
    }
}

#[test]
fn interval_spectra() {
    let mut g = star(1, std::f64::consts::PI);
    g.set_boundary(0, true).unwrap();
    g.set_boundary(1, true).unwrap();
    let d = expand(&secular_eigenvalues(&g, &boundary_conditions(&g, VertexCondition::Dirichlet), 3.0).unwrap());
    assert_eq!(d.len(), 3);
    let n = expand(&secular_eigenvalues(&g, &boundary_conditions(&g, VertexCondition::Kirchhoff), 2.0).unwrap());
    assert_eq!(n.len(), 3);
    assert!(n.iter().zip(&d).all(|(a, b)| a <= b));
}
