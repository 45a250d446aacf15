//! Exact reference stiffness and mass matrices for Lagrange elements with
//! equispaced nodes on `[0, 1]`.
//!
//! Entries are rationals computed in `i128`; rounding them only once keeps
//! the row sums of the stiffness matrix at zero to working precision, which
//! matters because any residual acts like a potential of size `1/h²`.

use crate::dd::Dd;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Q {
    num: i128,
    den: i128,
}

fn gcd(mut a: i128, mut b: i128) -> i128 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl Q {
    fn new(num: i128, den: i128) -> Self {
        assert!(den != 0);
        let g = gcd(num, den).max(1);
        let s = if den < 0 { -1 } else { 1 };
        Q {
            num: s * num / g,
            den: s * den / g,
        }
    }
    fn int(v: i128) -> Self {
        Q { num: v, den: 1 }
    }
    fn add(self, o: Q) -> Q {
        Q::new(self.num * o.den + o.num * self.den, self.den * o.den)
    }
    fn mul(self, o: Q) -> Q {
        Q::new(self.num * o.num, self.den * o.den)
    }
}

/// Polynomial with rational coefficients, lowest degree first.
#[derive(Debug, Clone)]
struct Poly(Vec<Q>);

impl Poly {
    fn mul(&self, o: &Poly) -> Poly {
        let mut out = vec![Q::int(0); self.0.len() + o.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in o.0.iter().enumerate() {
                out[i + j] = out[i + j].add(a.mul(*b));
            }
        }
        Poly(out)
    }
    fn derivative(&self) -> Poly {
        if self.0.len() <= 1 {
            return Poly(vec![Q::int(0)]);
        }
        Poly(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| c.mul(Q::int(k as i128)))
                .collect(),
        )
    }
    /// Integral over `[0, upper]`.
    fn integrate_to(&self, upper: i128) -> Q {
        let mut total = Q::int(0);
        let mut pow = upper;
        for (k, c) in self.0.iter().enumerate() {
            total = total.add(c.mul(Q::new(pow, k as i128 + 1)));
            pow *= upper;
        }
        total
    }
}

/// Lagrange basis on integer nodes `0..=p` in the variable `t = p ξ`.
fn basis(p: usize, i: usize) -> Poly {
    let mut poly = Poly(vec![Q::int(1)]);
    for j in 0..=p {
        if j == i {
            continue;
        }
        let den = i as i128 - j as i128;
        poly = poly.mul(&Poly(vec![Q::new(-(j as i128), den), Q::new(1, den)]));
    }
    poly
}

pub struct ReferenceElement {
    pub degree: usize,
    pub stiffness: Vec<Vec<Dd>>,
    pub mass: Vec<Vec<Dd>>,
}

impl ReferenceElement {
    pub fn new(degree: usize) -> Self {
        assert!((1..=6).contains(&degree), "supported degrees are 1..=6");
        let p = degree as i128;
        let phis: Vec<Poly> = (0..=degree).map(|i| basis(degree, i)).collect();
        let ders: Vec<Poly> = phis.iter().map(Poly::derivative).collect();
        let n = degree + 1;
        let mut stiffness = vec![vec![Dd::ZERO; n]; n];
        let mut mass = vec![vec![Dd::ZERO; n]; n];
        for i in 0..n {
            for j in 0..n {
                // dξ = dt / p and d/dξ = p d/dt
                let m = phis[i].mul(&phis[j]).integrate_to(p).mul(Q::new(1, p));
                let k = ders[i].mul(&ders[j]).integrate_to(p).mul(Q::int(p));
                mass[i][j] = Dd::ratio(m.num, m.den);
                stiffness[i][j] = Dd::ratio(k.num, k.den);
            }
        }
        Self {
            degree,
            stiffness,
            mass,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_element_matrices() {
        let r = ReferenceElement::new(1);
        assert_eq!(r.stiffness[0][0].to_f64(), 1.0);
        assert_eq!(r.stiffness[0][1].to_f64(), -1.0);
        assert!((r.mass[0][0].to_f64() - 1.0 / 3.0).abs() < 1e-16);
        assert!((r.mass[0][1].to_f64() - 1.0 / 6.0).abs() < 1e-16);
    }

    #[test]
    fn stiffness_rows_sum_to_zero_and_mass_sums_to_one() {
        for p in 1..=5 {
            let r = ReferenceElement::new(p);
            let mut total_mass = Dd::ZERO;
            for i in 0..=p {
                let mut row = Dd::ZERO;
                for j in 0..=p {
                    row = row + r.stiffness[i][j];
                    total_mass = total_mass + r.mass[i][j];
                }
                assert!(row.to_f64().abs() < 1e-28, "degree {p} row {i}");
            }
            assert!((total_mass.to_f64() - 1.0).abs() < 1e-28);
        }
    }
}
