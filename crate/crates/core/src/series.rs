//! Sequences in a closed normal form and their series sums.
//!
//! Every expressible sequence is a finite prefix followed by
//! a single tail term
//!
//! ```text
//! a(len(prefix) + m) = coef · ratio^m · Π_i (m + s_i)^(−p_i),   m ≥ 0,
//! ```
//!
//! with positive integer offsets `s_i`. The class is closed under shifts,
//! products and reciprocals, which covers the products `μ_n ℓ_n` and the
//! quotients `ℓ_n / μ_n` needed by the tree formulas, and convergence of
//! `Σ a(n)` is decided exactly from `ratio` and `Σ p_i`.

use std::cmp::Ordering;

use num_rational::BigRational;
use num_traits::Zero;

use crate::scalar::{is_one, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct PowerFactor {
    pub offset: u64,
    pub exponent: Scalar,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailTerm {
    pub coef: Scalar,
    pub ratio: Scalar,
    pub factors: Vec<PowerFactor>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalForm {
    pub prefix: Vec<Scalar>,
    pub tail: TailTerm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    /// Present when every input was exact and the sum has a rational closed form.
    pub exact: Option<BigRational>,
    pub abs_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SeriesSum {
    Finite(SeriesValue),
    Divergent,
}

/// Long-run behaviour of the terms `a(n)` as `n → ∞`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Asymptotics {
    TendsToZero,
    /// Bounded away from zero and infinity.
    Bounded,
    Unbounded,
}

impl SeriesValue {
    pub fn exact(q: BigRational) -> Self {
        SeriesValue {
            value: crate::scalar::rational_to_f64(&q),
            exact: Some(q),
            abs_error: 0.0,
        }
    }

    pub fn approx(value: f64, abs_error: f64) -> Self {
        SeriesValue {
            value,
            exact: None,
            abs_error,
        }
    }

    pub fn add(&self, o: &SeriesValue) -> SeriesValue {
        match (&self.exact, &o.exact) {
            (Some(a), Some(b)) => SeriesValue::exact(a + b),
            _ => {
                let value = self.value + o.value;
                SeriesValue::approx(value, self.abs_error + o.abs_error + f64::EPSILON * value.abs())
            }
        }
    }

    pub fn scale(&self, c: &Scalar) -> SeriesValue {
        match (&self.exact, c) {
            (Some(a), Scalar::Exact(q)) => SeriesValue::exact(a * q),
            _ => {
                let cf = c.to_f64();
                let value = self.value * cf;
                SeriesValue::approx(value, self.abs_error * cf.abs() + f64::EPSILON * value.abs())
            }
        }
    }
}

impl SeriesSum {
    pub fn is_finite(&self) -> bool {
        matches!(self, SeriesSum::Finite(_))
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            SeriesSum::Finite(v) => Some(v.value),
            SeriesSum::Divergent => None,
        }
    }

    /// Sum of two series of non-negative terms.
    pub fn add(&self, o: &SeriesSum) -> SeriesSum {
        match (self, o) {
            (SeriesSum::Finite(a), SeriesSum::Finite(b)) => SeriesSum::Finite(a.add(b)),
            _ => SeriesSum::Divergent,
        }
    }

    pub fn scale(&self, c: &Scalar) -> SeriesSum {
        match self {
            SeriesSum::Finite(v) => SeriesSum::Finite(v.scale(c)),
            SeriesSum::Divergent => SeriesSum::Divergent,
        }
    }
}

impl TailTerm {
    fn exponent_sum(&self) -> Scalar {
        self.factors
            .iter()
            .fold(Scalar::zero(), |acc, f| acc.add(&f.exponent))
    }

    fn eval(&self, m: u64) -> Scalar {
        let mut v = self.coef.mul(&self.ratio.pow(m));
        for f in &self.factors {
            let base = Scalar::int((m + f.offset) as i64);
            v = v.mul(&Scalar::pow_neg(&base, &f.exponent));
        }
        v
    }

    fn eval_f64(&self, m: u64) -> f64 {
        let mut v = self.coef.to_f64() * pow_u64(self.ratio.to_f64(), m);
        for f in &self.factors {
            v *= ((m + f.offset) as f64).powf(-f.exponent.to_f64());
        }
        v
    }

    fn shift(&self, k: u64) -> TailTerm {
        TailTerm {
            coef: self.coef.mul(&self.ratio.pow(k)),
            ratio: self.ratio.clone(),
            factors: self
                .factors
                .iter()
                .map(|f| PowerFactor {
                    offset: f.offset + k,
                    exponent: f.exponent.clone(),
                })
                .collect(),
        }
    }

    fn mul(&self, o: &TailTerm) -> TailTerm {
        let mut factors = self.factors.clone();
        for f in &o.factors {
            match factors.iter_mut().find(|g| g.offset == f.offset) {
                Some(g) => g.exponent = g.exponent.add(&f.exponent),
                None => factors.push(f.clone()),
            }
        }
        factors.retain(|f| !f.exponent.is_zero());
        factors.sort_by_key(|f| f.offset);
        TailTerm {
            coef: self.coef.mul(&o.coef),
            ratio: self.ratio.mul(&o.ratio),
            factors,
        }
    }

    fn recip(&self) -> TailTerm {
        TailTerm {
            coef: self.coef.recip(),
            ratio: self.ratio.recip(),
            factors: self
                .factors
                .iter()
                .map(|f| PowerFactor {
                    offset: f.offset,
                    exponent: f.exponent.neg(),
                })
                .collect(),
        }
    }

    fn asymptotics(&self) -> Asymptotics {
        if self.coef.is_zero() {
            return Asymptotics::TendsToZero;
        }
        match self.ratio.cmp_value(&Scalar::one()) {
            Ordering::Less => Asymptotics::TendsToZero,
            Ordering::Greater => Asymptotics::Unbounded,
            Ordering::Equal => match self.exponent_sum().cmp_value(&Scalar::zero()) {
                Ordering::Greater => Asymptotics::TendsToZero,
                Ordering::Equal => Asymptotics::Bounded,
                Ordering::Less => Asymptotics::Unbounded,
            },
        }
    }

    fn sum(&self) -> SeriesSum {
        if self.coef.is_zero() {
            return SeriesSum::Finite(SeriesValue::exact(BigRational::zero()));
        }
        match self.ratio.cmp_value(&Scalar::one()) {
            Ordering::Greater => SeriesSum::Divergent,
            Ordering::Less if self.factors.is_empty() => {
                let one_minus = Scalar::one().sub(&self.ratio);
                match self.coef.div(&one_minus) {
                    Scalar::Exact(q) => SeriesSum::Finite(SeriesValue::exact(q)),
                    Scalar::Approx(v) => {
                        SeriesSum::Finite(SeriesValue::approx(v, 4.0 * f64::EPSILON * v.abs()))
                    }
                }
            }
            Ordering::Less => SeriesSum::Finite(self.direct_sum()),
            Ordering::Equal => {
                if self.exponent_sum().cmp_value(&Scalar::one()) != Ordering::Greater {
                    return SeriesSum::Divergent;
                }
                let c = self.coef.to_f64();
                let (v, err) = power_product_sum(&self.factors);
                SeriesSum::Finite(SeriesValue::approx(c * v, (c * err).abs() + 4.0 * f64::EPSILON * (c * v).abs()))
            }
        }
    }

    /// Direct summation for `ratio < 1` with power factors, stopped by a
    /// geometric bound on the remainder.
    fn direct_sum(&self) -> SeriesValue {
        let r = self.ratio.to_f64();
        let mut sum = Neumaier::default();
        let mut abs_total = 0.0;
        let mut m: u64 = 0;
        loop {
            let t = self.eval_f64(m);
            // ratio bound valid for every index ≥ m
            let mut rho = r;
            for f in &self.factors {
                let p = f.exponent.to_f64();
                if p < 0.0 {
                    let base = (m + f.offset) as f64;
                    rho *= ((base + 1.0) / base).powf(-p);
                }
            }
            if rho < 1.0 {
                let remainder = t.abs() / (1.0 - rho);
                let total = sum.value().abs();
                if remainder <= 1e-17 * total || remainder < 1e-300 || m >= 200_000_000 {
                    return SeriesValue::approx(
                        sum.value(),
                        remainder + 4.0 * f64::EPSILON * abs_total,
                    );
                }
            }
            sum.add(t);
            abs_total += t.abs();
            m += 1;
        }
    }
}

#[derive(Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

fn pow_u64(x: f64, n: u64) -> f64 {
    match i32::try_from(n) {
        Ok(k) => x.powi(k),
        Err(_) => x.powf(n as f64),
    }
}

const BERNOULLI_2J: [f64; 12] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
    854513.0 / 138.0,
    -236364091.0 / 2730.0,
];

/// Hurwitz zeta `ζ(s, a) = Σ_{n≥0} (n + a)^(−s)` for `s > 1`, `a > 0`, with an
/// error estimate, by Euler–Maclaurin summation after shifting to `a + N ≥ 20 + s`.
pub fn hurwitz_zeta(s: f64, a: f64) -> (f64, f64) {
    assert!(s > 1.0 && a > 0.0, "hurwitz_zeta needs s > 1, a > 0");
    let target = 20.0 + s;
    let shift = if a >= target { 0 } else { (target - a).ceil() as u64 };
    let mut head = Neumaier::default();
    for k in 0..shift {
        head.add((a + k as f64).powf(-s));
    }
    let x = a + shift as f64;
    let xs = x.powf(-s);
    let mut tail = Neumaier::default();
    tail.add(x * xs / (s - 1.0));
    tail.add(0.5 * xs);
    // rising factorial s(s+1)…(s+2j−2) / (2j)!  times x^(−s−2j+1)
    let mut rising = s;
    let mut fact = 2.0;
    let mut xpow = xs / x;
    let mut last = 0.0;
    for (j, b) in BERNOULLI_2J.iter().enumerate() {
        let term = b / fact * rising * xpow;
        if j + 1 == BERNOULLI_2J.len() {
            last = term;
            break;
        }
        tail.add(term);
        let k = 2.0 * (j as f64 + 1.0);
        rising *= (s + k - 1.0) * (s + k);
        fact *= (k + 1.0) * (k + 2.0);
        xpow /= x * x;
    }
    let value = head.value() + tail.value();
    (value, last.abs() + 8.0 * f64::EPSILON * value)
}

/// `Σ_{n≥0} Π_i (n + s_i)^(−p_i)` for `Σ p_i > 1`.
fn power_product_sum(factors: &[PowerFactor]) -> (f64, f64) {
    if let [f] = factors {
        return hurwitz_zeta(f.exponent.to_f64(), f.offset as f64);
    }
    let total: f64 = factors.iter().map(|f| f.exponent.to_f64()).sum();
    let max_offset = factors.iter().map(|f| f.offset).max().unwrap_or(1) as f64;
    let n0 = (16.0 * max_offset).max(64.0).ceil() as u64;
    let mut head = Neumaier::default();
    for n in 0..n0 {
        let mut t = 1.0;
        for f in factors {
            t *= ((n + f.offset) as f64).powf(-f.exponent.to_f64());
        }
        head.add(t);
    }
    // Π (1 + s_i y)^(−p_i) = Σ_j c_j y^j, y = 1/n
    const TERMS: usize = 32;
    let mut coeffs = vec![0.0; TERMS];
    coeffs[0] = 1.0;
    for f in factors {
        let p = f.exponent.to_f64();
        let s = f.offset as f64;
        let mut binom = vec![0.0; TERMS];
        binom[0] = 1.0;
        for j in 1..TERMS {
            binom[j] = binom[j - 1] * (-p - (j as f64 - 1.0)) / j as f64 * s;
        }
        let mut next = vec![0.0; TERMS];
        for (i, ci) in coeffs.iter().enumerate() {
            for (j, bj) in binom.iter().enumerate().take(TERMS - i) {
                next[i + j] += ci * bj;
            }
        }
        coeffs = next;
    }
    let mut tail = Neumaier::default();
    let mut err = 0.0;
    for (j, c) in coeffs.iter().enumerate() {
        if *c == 0.0 {
            continue;
        }
        let (z, e) = hurwitz_zeta(total + j as f64, n0 as f64);
        tail.add(c * z);
        err += (c * e).abs();
        if j + 1 == TERMS {
            err += 2.0 * (c * z).abs();
        }
    }
    let value = head.value() + tail.value();
    (value, err + 8.0 * f64::EPSILON * value.abs())
}

impl NormalForm {
    pub fn constant(c: Scalar) -> Self {
        NormalForm {
            prefix: Vec::new(),
            tail: TailTerm {
                coef: c,
                ratio: Scalar::one(),
                factors: Vec::new(),
            },
        }
    }

    pub fn geometric(a: Scalar, r: Scalar) -> Self {
        NormalForm {
            prefix: Vec::new(),
            tail: TailTerm {
                coef: a,
                ratio: r,
                factors: Vec::new(),
            },
        }
    }

    /// `a · (n + 1)^(−p)`.
    pub fn power(a: Scalar, p: Scalar) -> Self {
        let factors = if p.is_zero() {
            Vec::new()
        } else {
            vec![PowerFactor {
                offset: 1,
                exponent: p,
            }]
        };
        NormalForm {
            prefix: Vec::new(),
            tail: TailTerm {
                coef: a,
                ratio: Scalar::one(),
                factors,
            },
        }
    }

    /// `prefix` followed by `tail` re-indexed from zero.
    pub fn explicit(prefix: Vec<Scalar>, tail: NormalForm) -> Self {
        let mut p = prefix;
        p.extend(tail.prefix);
        NormalForm {
            prefix: p,
            tail: tail.tail,
        }
    }

    pub fn term(&self, n: u64) -> Scalar {
        match usize::try_from(n).ok().and_then(|i| self.prefix.get(i)) {
            Some(v) => v.clone(),
            None => self.tail.eval(n - self.prefix.len() as u64),
        }
    }

    pub fn term_f64(&self, n: u64) -> f64 {
        match usize::try_from(n).ok().and_then(|i| self.prefix.get(i)) {
            Some(v) => v.to_f64(),
            None => self.tail.eval_f64(n - self.prefix.len() as u64),
        }
    }

    /// Whether every term is computed in exact rational arithmetic.
    pub fn is_exact(&self) -> bool {
        self.prefix.iter().all(Scalar::is_exact)
            && self.tail.coef.is_exact()
            && self.tail.ratio.is_exact()
            && self
                .tail
                .factors
                .iter()
                .all(|f| f.exponent.as_exact().is_some_and(|q| q.is_integer()))
    }

    /// The sequence `n ↦ a(n + k)`.
    pub fn shift(&self, k: u64) -> NormalForm {
        let len = self.prefix.len() as u64;
        if k <= len {
            NormalForm {
                prefix: self.prefix[k as usize..].to_vec(),
                tail: self.tail.clone(),
            }
        } else {
            NormalForm {
                prefix: Vec::new(),
                tail: self.tail.shift(k - len),
            }
        }
    }

    fn with_prefix_len(&self, len: usize) -> NormalForm {
        if len <= self.prefix.len() {
            return self.clone();
        }
        let extra = (len - self.prefix.len()) as u64;
        let mut prefix = self.prefix.clone();
        prefix.extend((0..extra).map(|m| self.tail.eval(m)));
        NormalForm {
            prefix,
            tail: self.tail.shift(extra),
        }
    }

    pub fn mul(&self, o: &NormalForm) -> NormalForm {
        let len = self.prefix.len().max(o.prefix.len());
        let a = self.with_prefix_len(len);
        let b = o.with_prefix_len(len);
        NormalForm {
            prefix: a.prefix.iter().zip(&b.prefix).map(|(x, y)| x.mul(y)).collect(),
            tail: a.tail.mul(&b.tail),
        }
    }

    /// Termwise reciprocal. Terms must be non-zero.
    pub fn recip(&self) -> NormalForm {
        NormalForm {
            prefix: self.prefix.iter().map(Scalar::recip).collect(),
            tail: self.tail.recip(),
        }
    }

    pub fn scale(&self, c: &Scalar) -> NormalForm {
        NormalForm {
            prefix: self.prefix.iter().map(|x| x.mul(c)).collect(),
            tail: TailTerm {
                coef: self.tail.coef.mul(c),
                ..self.tail.clone()
            },
        }
    }

    /// The value `c` when the tail is the constant sequence `c`.
    pub fn eventual_constant(&self) -> Option<Scalar> {
        if is_one(&self.tail.ratio) && self.tail.factors.is_empty() {
            Some(self.tail.coef.clone())
        } else {
            None
        }
    }

    /// Cumulative products `Π_{k≤n} a(k)`; representable when the tail is constant.
    pub fn cumulative_product(&self) -> Option<NormalForm> {
        let c = self.eventual_constant()?;
        let mut prefix = Vec::with_capacity(self.prefix.len());
        let mut acc = Scalar::one();
        for v in &self.prefix {
            acc = acc.mul(v);
            prefix.push(acc.clone());
        }
        Some(NormalForm {
            prefix,
            tail: TailTerm {
                coef: acc.mul(&c),
                ratio: c,
                factors: Vec::new(),
            },
        })
    }

    pub fn asymptotics(&self) -> Asymptotics {
        self.tail.asymptotics()
    }

    pub fn sum(&self) -> SeriesSum {
        let tail = self.tail.sum();
        let SeriesSum::Finite(tail) = tail else {
            return SeriesSum::Divergent;
        };
        let head = self
            .prefix
            .iter()
            .fold(Scalar::zero(), |acc, x| acc.add(x));
        let head = match head {
            Scalar::Exact(q) => SeriesValue::exact(q),
            Scalar::Approx(v) => SeriesValue::approx(v, self.prefix.len() as f64 * f64::EPSILON * v.abs()),
        };
        SeriesSum::Finite(head.add(&tail))
    }

    /// `Σ_{k≥n} a(k)`.
    pub fn tail_sum(&self, n: u64) -> SeriesSum {
        self.shift(n).sum()
    }

    /// `Σ_{k<n} a(k)` in exact arithmetic when the terms are exact.
    pub fn partial_sum(&self, n: u64) -> Scalar {
        (0..n).fold(Scalar::zero(), |acc, k| acc.add(&self.term(k)))
    }

    pub fn partial_sum_f64(&self, n: u64) -> f64 {
        let mut s = Neumaier::default();
        for k in 0..n {
            s.add(self.term_f64(k));
        }
        s.value()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn finite(s: SeriesSum) -> SeriesValue {
        match s {
            SeriesSum::Finite(v) => v,
            SeriesSum::Divergent => panic!("expected a finite sum"),
        }
    }

    #[test]
    fn geometric_quarter_sums_to_four_thirds() {
        let v = finite(NormalForm::geometric(Scalar::one(), Scalar::ratio(1, 4)).sum());
        assert_eq!(v.exact, Some(BigRational::new(4.into(), 3.into())));
        assert_eq!(v.abs_error, 0.0);
    }

    #[test]
    fn constant_and_harmonic_diverge() {
        assert_eq!(NormalForm::constant(Scalar::one()).sum(), SeriesSum::Divergent);
        assert_eq!(NormalForm::power(Scalar::one(), Scalar::one()).sum(), SeriesSum::Divergent);
        assert_eq!(
            NormalForm::geometric(Scalar::one(), Scalar::ratio(3, 2)).sum(),
            SeriesSum::Divergent
        );
    }

    #[test]
    fn basel_and_hurwitz_values() {
        let v = finite(NormalForm::power(Scalar::one(), Scalar::int(2)).sum());
        assert!((v.value - PI * PI / 6.0).abs() < 1e-14, "{}", v.value);
        assert!(v.abs_error < 1e-12);
        // ζ(4) = π⁴/90
        let (z, _) = hurwitz_zeta(4.0, 1.0);
        assert!((z - PI.powi(4) / 90.0).abs() < 1e-14);
        // ζ(2, 1/2) = π²/2
        let (z, _) = hurwitz_zeta(2.0, 0.5);
        assert!((z - PI * PI / 2.0).abs() < 1e-13);
    }

    #[test]
    fn mixed_power_factors_against_brute_force() {
        // Σ 1/((n+1)(n+2)) = 1 telescoping
        let a = NormalForm::power(Scalar::one(), Scalar::one());
        let b = NormalForm::power(Scalar::one(), Scalar::one()).shift(1);
        let v = finite(a.mul(&b).sum());
        assert!((v.value - 1.0).abs() < 1e-13, "{}", v.value);
        // Σ (n+1)^3 / (n+2)^5 via expansion against direct summation + integral tail
        let num = NormalForm::power(Scalar::one(), Scalar::int(-3));
        let den = NormalForm::power(Scalar::one(), Scalar::int(5)).shift(1);
        let v = finite(num.mul(&den).sum());
        let mut brute = 0.0;
        let n_max = 2_000_000u64;
        for n in 0..n_max {
            let x = n as f64;
            brute += (x + 1.0).powi(3) / (x + 2.0).powi(5);
        }
        // remainder ≈ ∫_{N}^{∞} x^{-2} dx
        brute += 1.0 / (n_max as f64 + 1.5);
        assert!((v.value - brute).abs() < 1e-9, "{} vs {}", v.value, brute);
    }

    #[test]
    fn geometric_with_power_uses_direct_sum() {
        // Σ (1/2)^n / (n+1) = 2 ln 2
        let nf = NormalForm::geometric(Scalar::one(), Scalar::ratio(1, 2))
            .mul(&NormalForm::power(Scalar::one(), Scalar::one()));
        let v = finite(nf.sum());
        assert!((v.value - 2.0 * 2f64.ln()).abs() < 1e-14);
        assert!(v.abs_error < 1e-12);
    }

    #[test]
    fn explicit_prefix_and_shift() {
        let nf = NormalForm::explicit(vec![Scalar::int(5)], NormalForm::constant(Scalar::one()));
        assert_eq!(nf.term(0), Scalar::int(5));
        assert_eq!(nf.term(1), Scalar::int(1));
        let g = NormalForm::geometric(Scalar::one(), Scalar::ratio(1, 2));
        assert_eq!(g.term(3), Scalar::ratio(1, 8));
        assert_eq!(g.shift(3).term(0), Scalar::ratio(1, 8));
        let v = finite(g.tail_sum(1));
        assert_eq!(v.exact, Some(BigRational::from_integer(1.into())));
    }

    #[test]
    fn cumulative_product_of_branching() {
        let b = NormalForm::explicit(vec![Scalar::int(3)], NormalForm::constant(Scalar::int(2)));
        let mu = b.cumulative_product().unwrap();
        assert_eq!(mu.term(0), Scalar::int(3));
        assert_eq!(mu.term(1), Scalar::int(6));
        assert_eq!(mu.term(4), Scalar::int(48));
        assert!(NormalForm::geometric(Scalar::one(), Scalar::int(2)).cumulative_product().is_none());
    }

    #[test]
    fn float_inputs_carry_small_error_bounds() {
        let v = finite(NormalForm::geometric(Scalar::Approx(1.0), Scalar::Approx(0.25)).sum());
        assert!(v.exact.is_none());
        assert!((v.value - 4.0 / 3.0).abs() <= v.abs_error.max(1e-15));
        assert!(v.abs_error <= 1e-12);
    }
}
