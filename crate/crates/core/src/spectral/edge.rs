use serde::Serialize;

use crate::error::{Error, Result};
use crate::metric_graph::MetricGraph;

/// Shape of an edge solution of `−f″ = λ f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mode {
    /// `a·cos(kx) + b·sin(kx)`, `λ = k²`.
    Trig { k: f64 },
    /// `a·cosh(κx) + b·sinh(κx)`, `λ = −κ²`.
    Hyp { kappa: f64 },
    /// `a + b·x`, `λ = 0`.
    Linear,
}

impl Mode {
    pub fn for_lambda(lambda: f64) -> Mode {
        if lambda > 0.0 {
            Mode::Trig { k: lambda.sqrt() }
        } else if lambda < 0.0 {
            Mode::Hyp { kappa: (-lambda).sqrt() }
        } else {
            Mode::Linear
        }
    }

    pub fn lambda(&self) -> f64 {
        match *self {
            Mode::Trig { k } => k * k,
            Mode::Hyp { kappa } => -kappa * kappa,
            Mode::Linear => 0.0,
        }
    }
}

/// A solution on one edge, parametrised by `x ∈ [0, length]` from `u` to `v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EdgeSolution {
    pub u: usize,
    pub v: usize,
    pub length: f64,
    pub mode: Mode,
    pub a: f64,
    pub b: f64,
}

/// `x − sin x`, accurate for small `x`.
fn x_minus_sin(x: f64) -> f64 {
    if x.abs() < 0.5 {
        series_odd(x, -1.0)
    } else {
        x - x.sin()
    }
}

/// `sinh x − x`, accurate for small `x`.
fn sinh_minus_x(x: f64) -> f64 {
    if x.abs() < 0.5 {
        series_odd(x, 1.0)
    } else {
        x.sinh() - x
    }
}

/// `Σ_{j≥1} s^{j+1} x^{2j+1}/(2j+1)!` with `s = ±1`, i.e. `x − sin x` or `sinh x − x`.
fn series_odd(x: f64, s: f64) -> f64 {
    let x2 = x * x;
    let mut term = x * x2 / 6.0;
    let mut sum = term;
    for j in 2..12 {
        term *= s * x2 / ((2 * j) * (2 * j + 1)) as f64;
        sum += term;
    }
    sum
}

impl EdgeSolution {
    pub fn lambda(&self) -> f64 {
        self.mode.lambda()
    }

    pub fn value(&self, x: f64) -> f64 {
        match self.mode {
            Mode::Trig { k } => self.a * (k * x).cos() + self.b * (k * x).sin(),
            Mode::Hyp { kappa } => self.a * (kappa * x).cosh() + self.b * (kappa * x).sinh(),
            Mode::Linear => self.a + self.b * x,
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self.mode {
            Mode::Trig { k } => k * (-self.a * (k * x).sin() + self.b * (k * x).cos()),
            Mode::Hyp { kappa } => kappa * (self.a * (kappa * x).sinh() + self.b * (kappa * x).cosh()),
            Mode::Linear => self.b,
        }
    }

    /// Trace `f_e(w)` at endpoint `w`.
    pub fn trace(&self, w: usize) -> f64 {
        if w == self.u {
            self.value(0.0)
        } else {
            self.value(self.length)
        }
    }

    /// Derivative at endpoint `w` pointing into the edge.
    pub fn normal_derivative(&self, w: usize) -> f64 {
        if w == self.u {
            self.derivative(0.0)
        } else {
            -self.derivative(self.length)
        }
    }

    /// The same function on the reversed edge.
    pub fn flipped(&self) -> EdgeSolution {
        let l = self.length;
        let (a, b) = match self.mode {
            Mode::Trig { k } => {
                let (s, c) = (k * l).sin_cos();
                (self.a * c + self.b * s, self.a * s - self.b * c)
            }
            Mode::Hyp { kappa } => {
                let (s, c) = ((kappa * l).sinh(), (kappa * l).cosh());
                (self.a * c + self.b * s, -(self.a * s + self.b * c))
            }
            Mode::Linear => (self.a + self.b * l, -self.b),
        };
        EdgeSolution {
            u: self.v,
            v: self.u,
            a,
            b,
            ..*self
        }
    }

    /// `∫ f²`.
    pub fn l2_sq(&self) -> f64 {
        let (a, b, l) = (self.a, self.b, self.length);
        match self.mode {
            Mode::Trig { k } => {
                let y = 2.0 * k * l;
                // ∫cos² = (y + sin y)/(4k), ∫sin² = (y − sin y)/(4k)
                let sin_part = x_minus_sin(y) / (4.0 * k);
                let cos_part = l - sin_part;
                a * a * cos_part + b * b * sin_part + a * b * (k * l).sin().powi(2) / k
            }
            Mode::Hyp { kappa } => {
                let y = 2.0 * kappa * l;
                let sinh_part = sinh_minus_x(y) / (4.0 * kappa);
                let cosh_part = l + sinh_part;
                a * a * cosh_part + b * b * sinh_part + a * b * (kappa * l).sinh().powi(2) / kappa
            }
            Mode::Linear => a * a * l + a * b * l * l + b * b * l * l * l / 3.0,
        }
    }

    /// `∫ f′²`.
    pub fn grad_sq(&self) -> f64 {
        let (a, b, l) = (self.a, self.b, self.length);
        match self.mode {
            Mode::Trig { k } => {
                let y = 2.0 * k * l;
                let sin_part = x_minus_sin(y) / (4.0 * k);
                let cos_part = l - sin_part;
                k * k * (a * a * sin_part + b * b * cos_part - a * b * (k * l).sin().powi(2) / k)
            }
            Mode::Hyp { kappa } => {
                let y = 2.0 * kappa * l;
                let sinh_part = sinh_minus_x(y) / (4.0 * kappa);
                let cosh_part = l + sinh_part;
                kappa * kappa * (a * a * sinh_part + b * b * cosh_part + a * b * (kappa * l).sinh().powi(2) / kappa)
            }
            Mode::Linear => b * b * l,
        }
    }

    /// `∫ |Hf|² = λ² ∫ f²`.
    pub fn h_sq(&self) -> f64 {
        let lambda = self.lambda();
        lambda * lambda * self.l2_sq()
    }
}

/// Squared norms of a function assembled from edge pieces.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct FunctionNorms {
    pub l2_sq: f64,
    pub grad_sq: f64,
    pub h_sq: f64,
}

impl FunctionNorms {
    /// Norms of `Σ weight·piece`, each piece counted `weight` times.
    pub fn from_weighted<'a>(pieces: impl IntoIterator<Item = (&'a EdgeSolution, f64)>) -> FunctionNorms {
        pieces.into_iter().fold(FunctionNorms::default(), |acc, (p, w)| FunctionNorms {
            l2_sq: acc.l2_sq + w * p.l2_sq(),
            grad_sq: acc.grad_sq + w * p.grad_sq(),
            h_sq: acc.h_sq + w * p.h_sq(),
        })
    }

    pub fn scaled(&self, c: f64) -> FunctionNorms {
        let c2 = c * c;
        FunctionNorms {
            l2_sq: self.l2_sq * c2,
            grad_sq: self.grad_sq * c2,
            h_sq: self.h_sq * c2,
        }
    }

    /// `‖∇f‖² / (‖f‖² + ‖Hf‖²)`.
    pub fn ratio(&self) -> Result<f64> {
        let denom = self.l2_sq + self.h_sq;
        if denom == 0.0 && self.grad_sq == 0.0 {
            return Err(Error::ZeroFunction);
        }
        if self.grad_sq == 0.0 {
            return Ok(0.0);
        }
        Ok(self.grad_sq / denom)
    }
}

/// `‖∇f‖² / (‖f‖² + ‖Hf‖²)` for a function given edge by edge on `g`.
pub fn sobolev_ratio(g: &MetricGraph, f: &[EdgeSolution]) -> Result<f64> {
    if f.len() != g.edges().len() {
        return Err(Error::InvalidArgument(format!(
            "{} edge pieces for {} edges",
            f.len(),
            g.edges().len()
        )));
    }
    for (piece, e) in f.iter().zip(g.edges()) {
        if (piece.length - e.length).abs() > 1e-12 * e.length {
            return Err(Error::InvalidArgument(format!(
                "piece length {} does not match edge {}-{}",
                piece.length, e.u, e.v
            )));
        }
    }
    FunctionNorms::from_weighted(f.iter().map(|p| (p, 1.0))).ratio()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric_graph::Edge;
    use std::f64::consts::PI;

    fn quad(f: impl Fn(f64) -> f64, l: f64) -> f64 {
        // composite Simpson, plenty for smooth integrands
        let n = 20_000;
        let h = l / n as f64;
        let mut s = f(0.0) + f(l);
        for i in 1..n {
            s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn closed_forms_match_quadrature() {
        for mode in [Mode::Trig { k: 1.7 }, Mode::Hyp { kappa: 0.8 }, Mode::Linear, Mode::Hyp { kappa: 1e-3 }] {
            let e = EdgeSolution { u: 0, v: 1, length: 1.3, mode, a: 0.7, b: -1.1 };
            let l2 = quad(|x| e.value(x).powi(2), e.length);
            let g2 = quad(|x| e.derivative(x).powi(2), e.length);
            assert!((e.l2_sq() - l2).abs() < 1e-10 * l2, "{mode:?}");
            assert!((e.grad_sq() - g2).abs() < 1e-10 * g2.max(1e-3), "{mode:?}");
        }
    }

    #[test]
    fn flip_preserves_values_and_norms() {
        for mode in [Mode::Trig { k: 2.3 }, Mode::Hyp { kappa: 1.5 }, Mode::Linear] {
            let e = EdgeSolution { u: 3, v: 5, length: 0.9, mode, a: 1.2, b: 0.4 };
            let f = e.flipped();
            assert!((f.value(0.2) - e.value(0.7)).abs() < 1e-12);
            assert!((f.trace(5) - e.trace(5)).abs() < 1e-12);
            assert!((f.normal_derivative(3) - e.normal_derivative(3)).abs() < 1e-12);
            assert!((f.l2_sq() - e.l2_sq()).abs() < 1e-12);
            assert!((f.grad_sq() - e.grad_sq()).abs() < 1e-12);
        }
    }

    #[test]
    fn sobolev_ratio_examples() {
        let g = MetricGraph::from_edges(2, vec![Edge { u: 0, v: 1, length: PI }]).unwrap();
        let sine = EdgeSolution { u: 0, v: 1, length: PI, mode: Mode::Trig { k: 1.0 }, a: 0.0, b: 1.0 };
        assert!((sobolev_ratio(&g, &[sine]).unwrap() - 0.5).abs() < 1e-14);
        let constant = EdgeSolution { u: 0, v: 1, length: PI, mode: Mode::Linear, a: 2.0, b: 0.0 };
        assert_eq!(sobolev_ratio(&g, &[constant]).unwrap(), 0.0);
        let zero = EdgeSolution { a: 0.0, ..constant };
        assert_eq!(sobolev_ratio(&g, &[zero]), Err(Error::ZeroFunction));
    }
}
