//! Radial Sturm–Liouville problems `−(w f′)′ = λ w f` with a step weight.
//!
//! The state `(f, w f′)` is continuous across layers. On a layer of length
//! `ℓ` and weight `w`, with `λ = −κ²`, it is propagated by
//! `[[cosh κℓ, sinh κℓ/(κw)], [κw sinh κℓ, cosh κℓ]]`.
//!
//! Deficiency spaces are built on stars of such layered arms glued at a
//! common centre with Kirchhoff conditions. On each arm the finite-energy
//! solutions are detected by a ratio test on layer energies. A forward
//! pass handles arms where every solution has finite energy. Otherwise a
//! backward pass from the contracting eigenvector of the last layer
//! recovers the decaying solution stably.

use nalgebra::{DMatrix, Matrix2, SymmetricEigen, Vector2};
use serde::Serialize;

use super::edge::{EdgeSolution, FunctionNorms, Mode};
use crate::ends::count_finite_volume;
use crate::error::{Error, Result};
use crate::graphspec::{Family, GraphFamilySpec};
use crate::metric_graph::mu_sequence;
use crate::series::NormalForm;

pub const MAX_ARM_LAYERS: usize = 200;
/// Stop once `κ·x` has reached this on an arm.
pub const MAX_DECAY_EXPONENT: f64 = 12.0;
pub const RATIO_THRESHOLD: f64 = 0.999;
pub const RATIO_WINDOW: usize = 5;
pub const GRAM_MIN_EIGENVALUE: f64 = 1e-6;
/// Relative singular value cutoff for the centre constraints.
const NULL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Layer {
    pub length: f64,
    pub weight: f64,
}

/// Transfer matrix of `(f, w f′)` across one layer.
pub fn transfer_matrix(lambda: f64, layer: Layer) -> Matrix2<f64> {
    let (l, w) = (layer.length, layer.weight);
    match Mode::for_lambda(lambda) {
        Mode::Hyp { kappa } => {
            let (s, c) = ((kappa * l).sinh(), (kappa * l).cosh());
            Matrix2::new(c, s / (kappa * w), kappa * w * s, c)
        }
        Mode::Trig { k } => {
            let (s, c) = (k * l).sin_cos();
            Matrix2::new(c, s / (k * w), -k * w * s, c)
        }
        Mode::Linear => Matrix2::new(1.0, l / w, 0.0, 1.0),
    }
}

fn inverse_transfer(lambda: f64, layer: Layer) -> Matrix2<f64> {
    let t = transfer_matrix(lambda, layer);
    // unimodular
    Matrix2::new(t[(1, 1)], -t[(0, 1)], -t[(1, 0)], t[(0, 0)])
}

/// Edge solution on a layer started from state `(f, w f′)`.
pub fn layer_piece(lambda: f64, layer: Layer, state: Vector2<f64>) -> EdgeSolution {
    let mode = Mode::for_lambda(lambda);
    let slope = state[1] / layer.weight;
    let b = match mode {
        Mode::Hyp { kappa } => slope / kappa,
        Mode::Trig { k } => slope / k,
        Mode::Linear => slope,
    };
    EdgeSolution {
        u: 0,
        v: 1,
        length: layer.length,
        mode,
        a: state[0],
        b,
    }
}

fn layer_h1(lambda: f64, layer: Layer, state: Vector2<f64>) -> f64 {
    let p = layer_piece(lambda, layer, state);
    layer.weight * (p.l2_sq() + p.grad_sq())
}

/// Layer sequence of one arm, generated lazily.
#[derive(Debug, Clone)]
pub struct ArmSpec {
    pub ell: NormalForm,
    /// Weight per layer; `None` means constant 1.
    pub weight: Option<NormalForm>,
    /// Length and weight multipliers.
    pub length_scale: f64,
    pub weight_scale: f64,
    /// First layer index.
    pub offset: u64,
}

impl ArmSpec {
    pub fn unweighted(ell: NormalForm) -> Self {
        ArmSpec {
            ell,
            weight: None,
            length_scale: 1.0,
            weight_scale: 1.0,
            offset: 0,
        }
    }

    pub fn layer(&self, j: usize) -> Layer {
        let n = self.offset + j as u64;
        Layer {
            length: self.length_scale * self.ell.term_f64(n),
            weight: self.weight_scale * self.weight.as_ref().map_or(1.0, |w| w.term_f64(n)),
        }
    }
}

/// A solution on a star of arms, stored as the state at the start of each layer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayeredSolution {
    pub lambda: f64,
    pub arms: Vec<ArmSolution>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmSolution {
    pub layers: Vec<Layer>,
    /// `(f, w f′)` at the start of each layer.
    pub states: Vec<[f64; 2]>,
}

impl ArmSolution {
    fn pieces(&self, lambda: f64) -> impl Iterator<Item = (EdgeSolution, f64)> + '_ {
        self.layers
            .iter()
            .zip(&self.states)
            .map(move |(l, s)| (layer_piece(lambda, *l, Vector2::new(s[0], s[1])), l.weight))
    }

    /// `f(x)` with `x` measured from the centre.
    pub fn eval(&self, lambda: f64, x: f64) -> Option<f64> {
        let mut start = 0.0;
        for (p, _) in self.pieces(lambda) {
            if x < start + p.length {
                return Some(p.value((x - start).max(0.0)));
            }
            start += p.length;
        }
        None
    }

    pub fn extent(&self) -> f64 {
        self.layers.iter().map(|l| l.length).sum()
    }
}

impl LayeredSolution {
    /// `(piece, multiplicity weight)` for every layer of every arm.
    pub fn pieces(&self) -> Vec<(EdgeSolution, f64)> {
        self.arms.iter().flat_map(|a| a.pieces(self.lambda)).collect()
    }

    pub fn norms(&self) -> FunctionNorms {
        let pieces = self.pieces();
        FunctionNorms::from_weighted(pieces.iter().map(|(p, w)| (p, *w)))
    }

    pub fn h1_norm_sq(&self) -> f64 {
        let n = self.norms();
        n.l2_sq + n.grad_sq
    }

    pub fn eval(&self, arm: usize, x: f64) -> Option<f64> {
        self.arms.get(arm)?.eval(self.lambda, x)
    }

    /// `α·self + β·other`; both must share the layer structure.
    pub fn combine(&self, alpha: f64, other: &LayeredSolution, beta: f64) -> LayeredSolution {
        LayeredSolution {
            lambda: self.lambda,
            arms: self
                .arms
                .iter()
                .zip(&other.arms)
                .map(|(a, b)| {
                    let n = a.states.len().min(b.states.len());
                    ArmSolution {
                        layers: a.layers[..n].to_vec(),
                        states: (0..n)
                            .map(|i| {
                                [
                                    alpha * a.states[i][0] + beta * b.states[i][0],
                                    alpha * a.states[i][1] + beta * b.states[i][1],
                                ]
                            })
                            .collect(),
                    }
                })
                .collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> LayeredSolution {
        self.combine(c, self, 0.0)
    }

    /// `H¹` inner product by polarisation.
    pub fn h1_inner(&self, other: &LayeredSolution) -> f64 {
        0.25 * (self.combine(1.0, other, 1.0).h1_norm_sq() - self.combine(1.0, other, -1.0).h1_norm_sq())
    }
}

/// Propagates the state `s0` through the first `count` layers of `arm`.
pub fn propagate(lambda: f64, arm: &ArmSpec, s0: Vector2<f64>, count: usize) -> ArmSolution {
    let mut layers = Vec::with_capacity(count);
    let mut states = Vec::with_capacity(count);
    let mut s = s0;
    for j in 0..count {
        let l = arm.layer(j);
        layers.push(l);
        states.push([s[0], s[1]]);
        s = transfer_matrix(lambda, l) * s;
    }
    ArmSolution { layers, states }
}

/// Finite-energy solutions on one arm: 0, 1 or 2 columns of start states.
#[derive(Debug, Clone)]
struct ArmBasis {
    columns: Vec<ArmSolution>,
}

fn layer_count(lambda: f64, arm: &ArmSpec) -> usize {
    let kappa = (-lambda).max(0.0).sqrt();
    let mut x = 0.0;
    for j in 0..MAX_ARM_LAYERS {
        x += arm.layer(j).length;
        if kappa * x >= MAX_DECAY_EXPONENT {
            return (j + 1).max(RATIO_WINDOW + 1);
        }
    }
    MAX_ARM_LAYERS
}

fn ratio_test(energies: &[f64]) -> bool {
    let n = energies.len();
    if n < RATIO_WINDOW + 1 {
        return false;
    }
    energies[n - RATIO_WINDOW - 1..]
        .windows(2)
        .all(|w| w[0] == 0.0 && w[1] == 0.0 || w[1] < RATIO_THRESHOLD * w[0])
}

fn arm_basis(lambda: f64, arm: &ArmSpec) -> ArmBasis {
    let count = layer_count(lambda, arm);
    let fwd = [
        propagate(lambda, arm, Vector2::new(1.0, 0.0), count),
        propagate(lambda, arm, Vector2::new(0.0, 1.0), count),
    ];
    // largest layer energy over all start data: top eigenvalue of the 2×2 layer Gram
    let top: Vec<f64> = (0..count)
        .map(|j| {
            let l = fwd[0].layers[j];
            let s = |c: &ArmSolution| Vector2::new(c.states[j][0], c.states[j][1]);
            let (e1, e2) = (layer_h1(lambda, l, s(&fwd[0])), layer_h1(lambda, l, s(&fwd[1])));
            let e12 = 0.25 * (layer_h1(lambda, l, s(&fwd[0]) + s(&fwd[1])) - layer_h1(lambda, l, s(&fwd[0]) - s(&fwd[1])));
            let q = nalgebra::Matrix2::new(e1, e12, e12, e2);
            SymmetricEigen::new(q).eigenvalues.max()
        })
        .collect();
    if ratio_test(&top) {
        return ArmBasis {
            columns: fwd.to_vec(),
        };
    }
    // backward from the contracting direction of the last layer
    let last = arm.layer(count - 1);
    let t = transfer_matrix(lambda, last);
    let eig = t.complex_eigenvalues();
    let (mu_small, _) = if eig[0].norm() <= eig[1].norm() { (eig[0].re, 0) } else { (eig[1].re, 1) };
    // eigenvector of [[a, b], [c, d]] for eigenvalue m: (b, m − a)
    let mut s = Vector2::new(t[(0, 1)], mu_small - t[(0, 0)]);
    if s.norm() == 0.0 {
        s = Vector2::new(1.0, 0.0);
    }
    let mut states = vec![[0.0; 2]; count];
    let mut layers = Vec::with_capacity(count);
    for j in 0..count {
        layers.push(arm.layer(j));
    }
    // state at the end of the last layer is `s`
    for j in (0..count).rev() {
        s = inverse_transfer(lambda, layers[j]) * s;
        let norm = s.norm();
        states[j] = [s[0], s[1]];
        if norm > 1e100 {
            s /= norm;
            for st in &mut states[j..] {
                st[0] /= norm;
                st[1] /= norm;
            }
        }
    }
    let candidate = ArmSolution { layers, states };
    let energies: Vec<f64> = candidate
        .layers
        .iter()
        .zip(&candidate.states)
        .map(|(l, s)| layer_h1(lambda, *l, Vector2::new(s[0], s[1])))
        .collect();
    ArmBasis {
        columns: if ratio_test(&energies) { vec![candidate] } else { Vec::new() },
    }
}

/// Independent finite-energy solutions of `(τ − λ) f = 0` on a star.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeficiencySpace {
    pub lambda: f64,
    pub dimension: usize,
    /// `H¹`-normalised elements.
    pub elements: Vec<LayeredSolution>,
    /// Smallest eigenvalue of the Gram matrix of `elements`.
    pub gram_min_eigenvalue: Option<f64>,
}

/// Arms of the star for the families with a radial or path reduction.
pub fn star_arms(spec: &GraphFamilySpec) -> Result<Vec<ArmSpec>> {
    match &spec.family {
        Family::HalfLinePath { ell } => Ok(vec![ArmSpec::unweighted(ell.normal_form())]),
        Family::FullLinePath { ell_pos, ell_neg } => Ok(vec![
            ArmSpec::unweighted(ell_pos.normal_form()),
            ArmSpec::unweighted(ell_neg.normal_form()),
        ]),
        Family::RadialTree { b, ell } => Ok(vec![ArmSpec {
            weight: Some(mu_sequence(b)),
            ..ArmSpec::unweighted(ell.normal_form())
        }]),
        _ => Err(Error::UnsupportedFamily(format!(
            "{} has no star reduction",
            spec.variant_name()
        ))),
    }
}

/// All independent finite-energy solutions at `λ < 0` on the star of the
/// family (the radially symmetric channel for trees).
pub fn deficiency_space(spec: &GraphFamilySpec, lambda: f64) -> Result<DeficiencySpace> {
    if !(lambda < 0.0) {
        return Err(Error::InvalidArgument(format!("lambda must be negative, got {lambda}")));
    }
    let arms = star_arms(spec)?;
    let bases: Vec<ArmBasis> = arms.iter().map(|a| arm_basis(lambda, a)).collect();
    let cols: Vec<(usize, &ArmSolution)> = bases
        .iter()
        .enumerate()
        .flat_map(|(i, b)| b.columns.iter().map(move |c| (i, c)))
        .collect();
    let n_arms = arms.len();
    let n = cols.len();
    if n == 0 {
        return Ok(DeficiencySpace {
            lambda,
            dimension: 0,
            elements: Vec::new(),
            gram_min_eigenvalue: None,
        });
    }
    // rows: continuity with arm 0 for arms ≥ 1, then Kirchhoff; padded square
    let size = n.max(n_arms);
    let mut c = DMatrix::<f64>::zeros(size, n);
    for (j, (arm, col)) in cols.iter().enumerate() {
        let [f, p] = col.states[0];
        let scale = f.hypot(p);
        if *arm > 0 {
            c[(*arm - 1, j)] += f / scale;
        } else {
            for r in 0..n_arms - 1 {
                c[(r, j)] -= f / scale;
            }
        }
        c[(n_arms - 1, j)] += p / scale;
    }
    let svd = c.svd(false, true);
    let vt = svd.v_t.expect("requested");
    let smax = svd.singular_values.max();
    let null: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] <= NULL_TOL * smax.max(1.0))
        .collect();
    let elements: Vec<LayeredSolution> = null
        .iter()
        .map(|&i| {
            let coeff = vt.row(i);
            let arms_out = (0..n_arms)
                .map(|a| {
                    let mine: Vec<(f64, &ArmSolution)> = cols
                        .iter()
                        .enumerate()
                        .filter(|(_, (arm, _))| *arm == a)
                        .map(|(j, (_, col))| {
                            let [f, p] = col.states[0];
                            (coeff[j] / f.hypot(p), *col)
                        })
                        .collect();
                    match mine.as_slice() {
                        [] => ArmSolution {
                            layers: Vec::new(),
                            states: Vec::new(),
                        },
                        [(w, col), rest @ ..] => rest.iter().fold(
                            ArmSolution {
                                layers: col.layers.clone(),
                                states: col.states.iter().map(|s| [w * s[0], w * s[1]]).collect(),
                            },
                            |acc, (w2, col2)| ArmSolution {
                                states: acc
                                    .states
                                    .iter()
                                    .zip(&col2.states)
                                    .map(|(s, t)| [s[0] + w2 * t[0], s[1] + w2 * t[1]])
                                    .collect(),
                                layers: acc.layers,
                            },
                        ),
                    }
                })
                .collect();
            let f = LayeredSolution { lambda, arms: arms_out };
            let norm = f.h1_norm_sq().sqrt();
            f.scaled(1.0 / norm)
        })
        .collect();
    let gram_min_eigenvalue = (!elements.is_empty()).then(|| {
        let k = elements.len();
        let g = DMatrix::from_fn(k, k, |i, j| elements[i].h1_inner(&elements[j]));
        g.symmetric_eigenvalues().min()
    });
    let independent = gram_min_eigenvalue.is_none_or(|m| m > GRAM_MIN_EIGENVALUE);
    if !independent {
        return Err(Error::ShootingFailure("deficiency elements are numerically dependent".into()));
    }
    Ok(DeficiencySpace {
        lambda,
        dimension: elements.len(),
        elements,
        gram_min_eigenvalue,
    })
}

/// One `H¹`-normalised element of `ker(τ − λ)` on a family with a finite
/// volume end. At `λ = 0` this is the constant function 1.
pub fn deficiency_element(spec: &GraphFamilySpec, lambda: f64, channel: usize) -> Result<LayeredSolution> {
    if lambda > 0.0 {
        return Err(Error::InvalidArgument(format!("lambda must be non-positive, got {lambda}")));
    }
    let arms = star_arms(spec)?;
    if count_finite_volume(spec)?.is_zero() {
        return Err(Error::NoFiniteVolumeEnd);
    }
    if lambda == 0.0 {
        return Ok(LayeredSolution {
            lambda,
            arms: arms
                .iter()
                .map(|a| propagate(0.0, a, Vector2::new(1.0, 0.0), MAX_ARM_LAYERS))
                .collect(),
        });
    }
    let space = deficiency_space(spec, lambda)?;
    if space.dimension == 0 {
        return Err(Error::ShootingFailure("no finite-energy solution detected".into()));
    }
    space
        .elements
        .into_iter()
        .nth(channel)
        .ok_or_else(|| Error::InvalidArgument(format!("channel {channel} out of range 0..{}", space.dimension)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphspec::parse_spec;

    fn spec(s: &str) -> GraphFamilySpec {
        parse_spec(s).unwrap()
    }

    #[test]
    fn transfer_matches_closed_form() {
        let layer = Layer { length: 0.7, weight: 3.0 };
        let t = transfer_matrix(-2.25, layer);
        let (f0, p0) = (0.4, -1.3);
        let s = t * Vector2::new(f0, p0);
        let k: f64 = 1.5;
        let f = |x: f64| f0 * (k * x).cosh() + p0 / (3.0 * k) * (k * x).sinh();
        let df = |x: f64| f0 * k * (k * x).sinh() + p0 / 3.0 * (k * x).cosh();
        assert!((s[0] - f(0.7)).abs() < 1e-15);
        assert!((s[1] - 3.0 * df(0.7)).abs() < 1e-14);
        assert!((t.determinant() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn half_line_finite_length_gives_cosh() {
        let s = spec(r#"{"variant":"HalfLinePath","ell":{"kind":"geometric","a":"1/2","r":"1/2"}}"#);
        let space = deficiency_space(&s, -1.0).unwrap();
        assert_eq!(space.dimension, 1);
        let f = &space.elements[0];
        let r = f.eval(0, 0.9).unwrap() / f.eval(0, 0.0).unwrap();
        assert!((r - 0.9f64.cosh()).abs() < 1e-12);
        assert!((f.h1_norm_sq() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dimensions_follow_finite_volume_ends() {
        let cases = [
            (r#"{"variant":"HalfLinePath","ell":{"kind":"constant","c":1}}"#, 0),
            (
                r#"{"variant":"FullLinePath","ell_pos":{"kind":"geometric","a":1,"r":"1/2"},"ell_neg":{"kind":"geometric","a":1,"r":"1/3"}}"#,
                2,
            ),
            (
                r#"{"variant":"FullLinePath","ell_pos":{"kind":"geometric","a":1,"r":"1/2"},"ell_neg":{"kind":"constant","c":1}}"#,
                1,
            ),
            (
                r#"{"variant":"FullLinePath","ell_pos":{"kind":"constant","c":1},"ell_neg":{"kind":"constant","c":2}}"#,
                0,
            ),
            (
                r#"{"variant":"RadialTree","b":{"kind":"constant","c":2},"ell":{"kind":"geometric","a":1,"r":"1/2"}}"#,
                0,
            ),
            (
                r#"{"variant":"RadialTree","b":{"kind":"constant","c":2},"ell":{"kind":"geometric","a":1,"r":"1/4"}}"#,
                1,
            ),
        ];
        for (text, dim) in cases {
            let space = deficiency_space(&spec(text), -1.0).unwrap();
            assert_eq!(space.dimension, dim, "{text}");
            if let Some(m) = space.gram_min_eigenvalue {
                assert!(m > GRAM_MIN_EIGENVALUE);
            }
        }
    }

    #[test]
    fn element_errors_and_zero_lambda() {
        let tree = spec(r#"{"variant":"RadialTree","b":{"kind":"constant","c":2},"ell":{"kind":"geometric","a":1,"r":"1/2"}}"#);
        assert_eq!(deficiency_element(&tree, -1.0, 0), Err(Error::NoFiniteVolumeEnd));
        let half = spec(r#"{"variant":"HalfLinePath","ell":{"kind":"geometric","a":1,"r":"1/2"}}"#);
        let one = deficiency_element(&half, 0.0, 0).unwrap();
        assert_eq!(one.eval(0, 1.5), Some(1.0));
        assert_eq!(one.norms().grad_sq, 0.0);
        assert!(deficiency_element(&half, 1.0, 0).is_err());
    }
}
