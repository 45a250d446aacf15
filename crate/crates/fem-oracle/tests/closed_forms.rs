use std::f64::consts::PI;

use fem_oracle::{eigenvalues, FemOptions, FemOracle, GraphInput};

fn cycle(n: usize, length: f64) -> GraphInput {
    GraphInput {
        vertex_count: n,
        edges: (0..n).map(|i| (i, (i + 1) % n, length)).collect(),
        dirichlet: vec![false; n],
    }
}

#[test]
fn cycle_spectrum_has_double_eigenvalues() {
    // circle of circumference 3: λ = (2πj/3)², each j ≥ 1 twice
    let ev = eigenvalues(cycle(3, 1.0), 7, FemOptions::default());
    assert!(ev[0].abs() < 1e-10);
    for j in 1..=3 {
        let want = (2.0 * PI * j as f64 / 3.0).powi(2);
        for i in [2 * j - 1, 2 * j] {
            assert!((ev[i] - want).abs() < 1e-9 * want, "{ev:?}");
        }
    }
}

#[test]
fn count_below_is_monotone_and_consistent() {
    let g = GraphInput {
        vertex_count: 4,
        edges: vec![(0, 1, 1.0), (1, 2, 0.7), (1, 3, 1.3)],
        dirichlet: vec![true, false, false, true],
    };
    let oracle = FemOracle::new(g, FemOptions::default());
    let ev = oracle.eigenvalues(6);
    let top = ev[5];
    let mut last = 0;
    for s in [0.5, 2.0, 10.0, 20.0, top * 0.999] {
        let c = oracle.count_below(s);
        assert!(c >= last);
        assert_eq!(c, ev.iter().filter(|&&e| e < s).count(), "sigma {s}");
        last = c;
    }
    for i in 0..ev.len() {
        if i == 0 || ev[i - 1] < ev[i] * (1.0 - 1e-6) {
            assert_eq!(oracle.count_below(ev[i] * (1.0 - 1e-9)), i);
        }
    }
}

#[test]
fn scaling_divides_by_square() {
    let base = eigenvalues(cycle(4, 1.0), 5, FemOptions::default());
    let big = eigenvalues(cycle(4, 3.0), 5, FemOptions::default());
    for (a, b) in base.iter().zip(&big) {
        assert!((b - a / 9.0).abs() <= 1e-10 * a.max(1.0));
    }
}
