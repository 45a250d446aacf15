//! Sturm–Liouville data of radially symmetric trees.
//!
//! The radial part lives on `[0, L)` with the step weight
//! `μ(s) = μ_n` on `[t_n, t_{n+1})`, where `μ_n = Π_{k≤n} b_k` and
//! `t_n = Σ_{k<n} ℓ_k`. Kernel functions `g_n(x) = ∫_{t_n}^x ds/μ(s)` are
//! kept in exact piecewise-linear form.
//!
//! The energy of `g_n` is `Σ_{k≥n} ℓ_k/μ_k`. Direct integration of the
//! step weight forces the index `μ_k` inside the sum.

use std::sync::Arc;

use num_bigint::BigInt;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graphspec::{Family, GraphFamilySpec};
use crate::metric_graph::mu_sequence;
use crate::scalar::Scalar;
use crate::series::{NormalForm, SeriesSum, SeriesValue};

/// Safety cap on layer walks toward a finite `L`.
const MAX_LAYERS: u64 = 1 << 20;

#[derive(Debug, Clone, PartialEq)]
pub enum Extent {
    Finite(SeriesValue),
    Infinite,
}

impl Extent {
    pub fn value(&self) -> Option<f64> {
        match self {
            Extent::Finite(v) => Some(v.value),
            Extent::Infinite => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialTreeData {
    b: NormalForm,
    ell: NormalForm,
    mu: NormalForm,
    /// `ℓ_n / μ_n`
    energy_terms: NormalForm,
    pub length: Extent,
    pub volume: SeriesSum,
}

pub fn build(spec: &GraphFamilySpec) -> Result<RadialTreeData> {
    let Family::RadialTree { b, ell } = &spec.family else {
        return Err(Error::UnsupportedFamily(format!(
            "{} has no radial reduction",
            spec.variant_name()
        )));
    };
    let mu = mu_sequence(b);
    let ell = ell.normal_form();
    let length = match ell.sum() {
        SeriesSum::Finite(v) => Extent::Finite(v),
        SeriesSum::Divergent => Extent::Infinite,
    };
    Ok(RadialTreeData {
        b: b.normal_form(),
        volume: mu.mul(&ell).sum(),
        energy_terms: ell.mul(&mu.recip()),
        ell,
        mu,
        length,
    })
}

impl RadialTreeData {
    pub fn b(&self, n: u64) -> Scalar {
        self.b.term(n)
    }

    pub fn ell(&self, n: u64) -> Scalar {
        self.ell.term(n)
    }

    pub fn mu(&self, n: u64) -> Scalar {
        self.mu.term(n)
    }

    /// `μ_{n−1}` with the convention `μ_{−1} = 1`.
    pub fn mu_before(&self, n: u64) -> Scalar {
        if n == 0 {
            Scalar::one()
        } else {
            self.mu(n - 1)
        }
    }

    pub fn t(&self, n: u64) -> Scalar {
        self.ell.partial_sum(n)
    }

    pub fn is_complete(&self) -> bool {
        self.length == Extent::Infinite
    }

    /// Number of copies of the generation-`n` operator in the orthogonal
    /// decomposition: `μ_n − μ_{n−1}`.
    pub fn decomposition_multiplicity(&self, n: u64) -> BigInt {
        self.mu(n)
            .sub(&self.mu_before(n))
            .to_integer()
            .expect("branching numbers are integers")
    }

    /// Index `n` of the layer `[t_n, t_{n+1})` containing `s`.
    pub fn layer_of(&self, s: f64) -> Result<u64> {
        if !(s >= 0.0) || self.length.value().is_some_and(|l| s >= l) {
            return Err(Error::OutOfDomain(s));
        }
        let mut t = 0.0;
        for n in 0..MAX_LAYERS {
            t += self.ell.term_f64(n);
            if s < t {
                return Ok(n);
            }
        }
        Err(Error::OutOfDomain(s))
    }

    /// `μ(s)`.
    pub fn weight_eval(&self, s: f64) -> Result<f64> {
        Ok(self.mu.term_f64(self.layer_of(s)?))
    }

    pub fn breakpoints(&self, count: u64) -> StepWeight {
        let mut t = Scalar::zero();
        let mut layers = Vec::with_capacity(count as usize);
        for n in 0..count {
            let next = t.add(&self.ell(n));
            layers.push(Layer {
                n,
                start: t.to_json(),
                end: next.to_json(),
                mu: self.mu(n).to_json(),
                jump: self.b(n).to_json(),
            });
            t = next;
        }
        StepWeight {
            length: self.length.value(),
            layers,
        }
    }

    /// `g_n`; only available when the tree has finite volume.
    pub fn kernel_g(&self, n: u64) -> Result<KernelG> {
        if !self.volume.is_finite() {
            return Err(Error::InfiniteVolumeRegime);
        }
        Ok(KernelG {
            data: Arc::new(self.clone()),
            n,
        })
    }

    /// `∫_{t_n}^L dx/μ(x) = Σ_{k≥n} ℓ_k/μ_k`.
    pub fn kernel_energy(&self, n: u64) -> SeriesSum {
        self.energy_terms.tail_sum(n)
    }

    /// Limit of a radial function at `L`; shared by every end.
    pub fn end_value(&self, f: &RadialFunction) -> Result<Scalar> {
        match f {
            RadialFunction::Constant(c) => Ok(c.clone()),
            RadialFunction::Kernel(g) => g.limit(),
            RadialFunction::Sampled(h) => self.sampled_limit(h.as_ref()),
        }
    }

    fn sampled_limit(&self, h: &(dyn Fn(f64) -> f64 + Send + Sync)) -> Result<Scalar> {
        let point = |j: i32| match self.length.value() {
            Some(l) => l * (1.0 - 0.5f64.powi(j)),
            None => 2f64.powi(j),
        };
        let samples: Vec<f64> = (30..52).map(|j| h(point(j))).collect();
        let last = *samples.last().expect("non-empty");
        let spread = samples[11..].iter().map(|v| (v - last).abs()).fold(0.0, f64::max);
        if !last.is_finite() || spread > 1e-9 * last.abs().max(1.0) {
            return Err(Error::NoLimit);
        }
        Ok(Scalar::Approx(last))
    }

    /// `(n, end value of g_n, energy, multiplicity)` for `n ≤ n_max`.
    pub fn kernel_rows(&self, n_max: u64) -> Vec<KernelRow> {
        (0..=n_max)
            .into_par_iter()
            .map(|n| KernelRow {
                n,
                end_value: self.kernel_g(n).ok().and_then(|g| g.limit().ok()),
                energy: self.kernel_energy(n),
                multiplicity: self.decomposition_multiplicity(n),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Layer {
    pub n: u64,
    pub start: serde_json::Value,
    pub end: serde_json::Value,
    pub mu: serde_json::Value,
    /// `μ_n / μ_{n−1}`
    pub jump: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepWeight {
    pub length: Option<f64>,
    pub layers: Vec<Layer>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelRow {
    pub n: u64,
    pub end_value: Option<Scalar>,
    pub energy: SeriesSum,
    pub multiplicity: BigInt,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelG {
    data: Arc<RadialTreeData>,
    n: u64,
}

impl KernelG {
    pub fn generation(&self) -> u64 {
        self.n
    }

    /// `g_n(x) = Σ_{k=n}^{j−1} ℓ_k/μ_k + (x − t_j)/μ_j` for `x ∈ [t_j, t_{j+1})`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        let j = self.data.layer_of(x)?;
        if j < self.n {
            return Err(Error::OutOfDomain(x));
        }
        let head: f64 = (self.n..j).map(|k| self.data.energy_terms.term_f64(k)).sum();
        let tj = self.data.ell.partial_sum_f64(j);
        Ok(head + (x - tj) / self.data.mu.term_f64(j))
    }

    /// `g_n` at the breakpoint `t_j`, exactly.
    pub fn at_breakpoint(&self, j: u64) -> Result<Scalar> {
        if j < self.n {
            return Err(Error::OutOfDomain(self.data.t(j).to_f64()));
        }
        Ok((self.n..j).fold(Scalar::zero(), |acc, k| acc.add(&self.data.energy_terms.term(k))))
    }

    /// `g_n′ = 1/μ`.
    pub fn derivative(&self, x: f64) -> Result<f64> {
        Ok(1.0 / self.data.weight_eval(x)?)
    }

    pub fn limit(&self) -> Result<Scalar> {
        match self.data.kernel_energy(self.n) {
            SeriesSum::Finite(v) => Ok(match v.exact {
                Some(q) => Scalar::Exact(q),
                None => Scalar::Approx(v.value),
            }),
            SeriesSum::Divergent => Err(Error::NoLimit),
        }
    }
}

pub type SampledFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Radial functions whose end value can be requested.
#[derive(Clone)]
pub enum RadialFunction {
    Constant(Scalar),
    Kernel(KernelG),
    /// Arbitrary function; the limit is estimated from samples approaching `L`.
    Sampled(SampledFn),
}

impl std::fmt::Debug for RadialFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RadialFunction::Constant(c) => write!(f, "Constant({c})"),
            RadialFunction::Kernel(g) => write!(f, "Kernel(g_{})", g.n),
            RadialFunction::Sampled(_) => write!(f, "Sampled"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphspec::parse_spec;

    fn tree(b: u32, ell: &str) -> RadialTreeData {
        build(
            &parse_spec(&format!(
                r#"{{"variant":"RadialTree","b":{{"kind":"constant","c":{b}}},"ell":{ell}}}"#
            ))
            .unwrap(),
        )
        .unwrap()
    }

    fn quarter() -> RadialTreeData {
        tree(2, r#"{"kind":"geometric","a":1,"r":"1/4"}"#)
    }

    fn exact(s: &SeriesSum) -> Scalar {
        match s {
            SeriesSum::Finite(v) => Scalar::Exact(v.exact.clone().unwrap()),
            SeriesSum::Divergent => panic!("divergent"),
        }
    }

    #[test]
    fn build_examples() {
        let d = quarter();
        assert_eq!(d.mu(2), Scalar::int(8));
        assert_eq!(d.t(2), Scalar::ratio(5, 4));
        let Extent::Finite(l) = &d.length else { panic!() };
        assert_eq!(Scalar::Exact(l.exact.clone().unwrap()), Scalar::ratio(4, 3));
        assert_eq!(exact(&d.volume), Scalar::int(4));
        let d = tree(2, r#"{"kind":"constant","c":1}"#);
        assert!(d.is_complete());
        assert!(!d.volume.is_finite());
        assert_eq!(tree(3, r#"{"kind":"constant","c":1}"#).mu(0), Scalar::int(3));
    }

    #[test]
    fn weight_lookup() {
        let d = quarter();
        assert_eq!(d.weight_eval(0.5).unwrap(), 2.0);
        assert_eq!(d.weight_eval(1.1).unwrap(), 4.0);
        assert_eq!(d.weight_eval(4.0 / 3.0), Err(Error::OutOfDomain(4.0 / 3.0)));
        assert!(d.weight_eval(-0.1).is_err());
        // right-continuous with jump b_n
        assert_eq!(d.weight_eval(1.0).unwrap(), 4.0);
        assert_eq!(d.weight_eval(1.0 - 1e-12).unwrap(), 2.0);
    }

    #[test]
    fn kernel_examples() {
        let d = quarter();
        let g0 = d.kernel_g(0).unwrap();
        assert_eq!(g0.at_breakpoint(1).unwrap(), Scalar::ratio(1, 2));
        assert_eq!(g0.eval(0.0).unwrap(), 0.0);
        assert_eq!(g0.limit().unwrap(), Scalar::ratio(4, 7));
        assert_eq!(exact(&d.kernel_energy(0)), Scalar::ratio(4, 7));
        assert_eq!(exact(&d.kernel_energy(1)), Scalar::ratio(1, 14));
        let partial: f64 = (0..60).map(|k| 0.5 * 8f64.powi(-k)).sum();
        assert!((partial - 4.0 / 7.0).abs() < 1e-12);
        let unit = tree(2, r#"{"kind":"constant","c":1}"#);
        assert_eq!(exact(&unit.kernel_energy(0)), Scalar::one());
        assert_eq!(unit.kernel_g(0), Err(Error::InfiniteVolumeRegime));
    }

    #[test]
    fn multiplicities() {
        let two = quarter();
        assert_eq!(two.decomposition_multiplicity(0), BigInt::from(1));
        assert_eq!(two.decomposition_multiplicity(2), BigInt::from(4));
        let three = tree(3, r#"{"kind":"constant","c":1}"#);
        assert_eq!(three.decomposition_multiplicity(1), BigInt::from(6));
    }

    #[test]
    fn end_values() {
        let d = quarter();
        assert_eq!(d.end_value(&RadialFunction::Constant(Scalar::one())).unwrap(), Scalar::one());
        let g = RadialFunction::Kernel(d.kernel_g(0).unwrap());
        assert_eq!(d.end_value(&g).unwrap(), Scalar::ratio(4, 7));
        let wobble: SampledFn = Arc::new(|x: f64| (1.0 / (4.0 / 3.0 - x)).sin());
        assert_eq!(d.end_value(&RadialFunction::Sampled(wobble)), Err(Error::NoLimit));
        let smooth: SampledFn = Arc::new(|x: f64| x * x);
        let v = d.end_value(&RadialFunction::Sampled(smooth)).unwrap().to_f64();
        assert!((v - 16.0 / 9.0).abs() < 1e-9);
    }

    #[test]
    fn breakpoint_export() {
        let w = quarter().breakpoints(3);
        let j = serde_json::to_value(&w).unwrap();
        assert_eq!(j["layers"][1]["start"], serde_json::json!(1));
        assert_eq!(j["layers"][1]["end"], serde_json::json!("5/4"));
        assert_eq!(j["layers"][2]["mu"], serde_json::json!(8));
    }
}
