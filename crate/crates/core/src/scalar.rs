//! Numbers that stay exact when the input was exact.
//!
//! Integers and `"p/q"` / decimal strings in a spec parse to [`Scalar::Exact`];
//! JSON floating point literals parse to [`Scalar::Approx`]. Any operation with
//! an approximate operand yields an approximate result.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

#[derive(Debug, Clone, PartialEq)]
pub enum Scalar {
    Exact(BigRational),
    Approx(f64),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot parse {0:?} as a number")]
pub struct ParseScalarError(pub String);

impl Scalar {
    pub fn int(v: i64) -> Self {
        Scalar::Exact(BigRational::from_integer(BigInt::from(v)))
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        Scalar::Exact(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn zero() -> Self {
        Scalar::int(0)
    }

    pub fn one() -> Self {
        Scalar::int(1)
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Scalar::Exact(_))
    }

    pub fn as_exact(&self) -> Option<&BigRational> {
        match self {
            Scalar::Exact(q) => Some(q),
            Scalar::Approx(_) => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Scalar::Exact(q) => rational_to_f64(q),
            Scalar::Approx(x) => *x,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Scalar::Exact(q) => q.is_zero(),
            Scalar::Approx(x) => *x == 0.0,
        }
    }

    pub fn is_positive(&self) -> bool {
        match self {
            Scalar::Exact(q) => q.is_positive(),
            Scalar::Approx(x) => *x > 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            Scalar::Exact(_) => true,
            Scalar::Approx(x) => x.is_finite(),
        }
    }

    /// The integer value, if this scalar is one (approximate values qualify
    /// when they are integral floats).
    pub fn to_integer(&self) -> Option<BigInt> {
        match self {
            Scalar::Exact(q) if q.is_integer() => Some(q.to_integer()),
            Scalar::Exact(_) => None,
            Scalar::Approx(x) if x.is_finite() && x.fract() == 0.0 => Some(BigInt::from(*x as i128)),
            Scalar::Approx(_) => None,
        }
    }

    /// Promote integral floats to exact integers.
    pub fn exact_if_integral(self) -> Self {
        match &self {
            Scalar::Approx(_) => match self.to_integer() {
                Some(i) => Scalar::Exact(BigRational::from_integer(i)),
                None => self,
            },
            Scalar::Exact(_) => self,
        }
    }

    pub fn add(&self, o: &Scalar) -> Scalar {
        match (self, o) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(a + b),
            _ => Scalar::Approx(self.to_f64() + o.to_f64()),
        }
    }

    pub fn sub(&self, o: &Scalar) -> Scalar {
        match (self, o) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(a - b),
            _ => Scalar::Approx(self.to_f64() - o.to_f64()),
        }
    }

    pub fn mul(&self, o: &Scalar) -> Scalar {
        match (self, o) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(a * b),
            _ => Scalar::Approx(self.to_f64() * o.to_f64()),
        }
    }

    /// Panics on division by an exact zero.
    pub fn div(&self, o: &Scalar) -> Scalar {
        match (self, o) {
            (Scalar::Exact(a), Scalar::Exact(b)) => {
                assert!(!b.is_zero(), "exact division by zero");
                Scalar::Exact(a / b)
            }
            _ => Scalar::Approx(self.to_f64() / o.to_f64()),
        }
    }

    pub fn recip(&self) -> Scalar {
        Scalar::one().div(self)
    }

    pub fn neg(&self) -> Scalar {
        match self {
            Scalar::Exact(a) => Scalar::Exact(-a),
            Scalar::Approx(x) => Scalar::Approx(-x),
        }
    }

    /// `self^n` for a non-negative integer power.
    pub fn pow(&self, n: u64) -> Scalar {
        match self {
            Scalar::Exact(q) => {
                let e = i32::try_from(n).expect("exact power exponent too large");
                Scalar::Exact(q.pow(e))
            }
            Scalar::Approx(x) => Scalar::Approx(pow_f64(*x, n)),
        }
    }

    /// `base^(-exponent)` where exact results are produced only for exact
    /// integer exponents.
    pub fn pow_neg(base: &Scalar, exponent: &Scalar) -> Scalar {
        if let (Scalar::Exact(b), Scalar::Exact(e)) = (base, exponent) {
            if e.is_integer() {
                if let Some(k) = e.to_integer().to_i32() {
                    if b.is_zero() {
                        return Scalar::Exact(b.clone());
                    }
                    return Scalar::Exact(b.pow(-k));
                }
            }
        }
        Scalar::Approx(base.to_f64().powf(-exponent.to_f64()))
    }

    pub fn cmp_value(&self, o: &Scalar) -> Ordering {
        match (self, o) {
            (Scalar::Exact(a), Scalar::Exact(b)) => a.cmp(b),
            _ => self
                .to_f64()
                .partial_cmp(&o.to_f64())
                .unwrap_or(Ordering::Equal),
        }
    }

    pub fn max(self, o: Scalar) -> Scalar {
        if self.cmp_value(&o) == Ordering::Less {
            o
        } else {
            self
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Scalar::Exact(q) if q.is_integer() => {
                let i = q.to_integer();
                match i.to_i64() {
                    Some(v) => serde_json::Value::from(v),
                    None => serde_json::Value::String(i.to_string()),
                }
            }
            Scalar::Exact(q) => serde_json::Value::String(format!("{}/{}", q.numer(), q.denom())),
            Scalar::Approx(x) => serde_json::Value::from(*x),
        }
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Scalar, ParseScalarError> {
        match v {
            serde_json::Value::Number(n) => {
                if let Some(i) = n.as_i64() {
                    Ok(Scalar::int(i))
                } else if let Some(u) = n.as_u64() {
                    Ok(Scalar::Exact(BigRational::from_integer(BigInt::from(u))))
                } else {
                    n.as_f64()
                        .map(Scalar::Approx)
                        .ok_or_else(|| ParseScalarError(n.to_string()))
                }
            }
            serde_json::Value::String(s) => s.parse(),
            other => Err(ParseScalarError(other.to_string())),
        }
    }
}

fn pow_f64(x: f64, n: u64) -> f64 {
    match i32::try_from(n) {
        Ok(k) => x.powi(k),
        Err(_) => x.powf(n as f64),
    }
}

pub fn rational_to_f64(q: &BigRational) -> f64 {
    if let Some(v) = q.to_f64() {
        if v.is_finite() {
            return v;
        }
    }
    // fall back to scaled integer division for extreme magnitudes
    let n = q.numer().to_f64().unwrap_or(f64::INFINITY);
    let d = q.denom().to_f64().unwrap_or(f64::INFINITY);
    n / d
}

impl FromStr for Scalar {
    type Err = ParseScalarError;

    /// Accepts `"p/q"`, integers and finite decimals (`"0.25"`, `"-1.5e-3"`
    /// is rejected: exponents only through JSON numbers).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseScalarError(s.to_string());
        let t = s.trim();
        if let Some((n, d)) = t.split_once('/') {
            let n = BigInt::from_str(n.trim()).map_err(|_| err())?;
            let d = BigInt::from_str(d.trim()).map_err(|_| err())?;
            if d.is_zero() {
                return Err(err());
            }
            return Ok(Scalar::Exact(BigRational::new(n, d)));
        }
        if let Ok(i) = BigInt::from_str(t) {
            return Ok(Scalar::Exact(BigRational::from_integer(i)));
        }
        if let Some((int_part, frac)) = t.split_once('.') {
            if !frac.is_empty() && frac.chars().all(|c| c.is_ascii_digit()) {
                let negative = int_part.starts_with('-');
                let int_digits = int_part.trim_start_matches(['-', '+']);
                if int_digits.chars().all(|c| c.is_ascii_digit()) {
                    let digits = format!("{}{}", if int_digits.is_empty() { "0" } else { int_digits }, frac);
                    let mut num = BigInt::from_str(&digits).map_err(|_| err())?;
                    if negative {
                        num = -num;
                    }
                    let den = num_traits::pow(BigInt::from(10), frac.len());
                    return Ok(Scalar::Exact(BigRational::new(num, den)));
                }
            }
        }
        Err(err())
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Exact(q) if q.is_integer() => write!(f, "{}", q.numer()),
            Scalar::Exact(q) => write!(f, "{}/{}", q.numer(), q.denom()),
            Scalar::Approx(x) => write!(f, "{x}"),
        }
    }
}

impl From<BigRational> for Scalar {
    fn from(q: BigRational) -> Self {
        Scalar::Exact(q)
    }
}

pub fn is_one(s: &Scalar) -> bool {
    match s {
        Scalar::Exact(q) => q.is_one(),
        Scalar::Approx(x) => *x == 1.0,
    }
}
