//! Trivariate polynomials with exact rational coefficients.
//!
//! Coefficients are `Ratio<i128>`; all arithmetic is checked in debug and test
//! builds, so an overflow panics instead of silently corrupting a coefficient.
//! [`RealPoly`] is the flattened `f64` form used on hot evaluation paths.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rational = Ratio<i128>;

/// Exponent triple `(i, j, k)` of the monomial `x^i y^j z^k`.
pub type Exponent = [u8; 3];

pub fn rat(num: i128, den: i128) -> Rational {
    Rational::new(num, den)
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    r.numer().to_f64().unwrap() / r.denom().to_f64().unwrap()
}

fn factorial(n: usize) -> i128 {
    (1..=n as i128).product()
}

#[derive(Clone, Default, PartialEq, Eq)]
pub struct Polynomial3 {
    terms: BTreeMap<Exponent, Rational>,
}

impl Polynomial3 {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: Rational) -> Self {
        Self::monomial([0, 0, 0], c)
    }

    pub fn monomial(e: Exponent, c: Rational) -> Self {
        let mut p = Self::zero();
        p.add_term(e, c);
        p
    }

    /// The coordinate function `x_axis`.
    pub fn var(axis: usize) -> Self {
        let mut e = [0u8; 3];
        e[axis] = 1;
        Self::monomial(e, Rational::one())
    }

    /// Affine function `c0 + c[0] x + c[1] y + c[2] z`.
    pub fn linear(c0: Rational, c: [Rational; 3]) -> Self {
        let mut p = Self::constant(c0);
        for (axis, ci) in c.into_iter().enumerate() {
            let mut e = [0u8; 3];
            e[axis] = 1;
            p.add_term(e, ci);
        }
        p
    }

    pub fn from_terms<I: IntoIterator<Item = (Exponent, Rational)>>(terms: I) -> Self {
        let mut p = Self::zero();
        for (e, c) in terms {
            p.add_term(e, c);
        }
        p
    }

    pub fn add_term(&mut self, e: Exponent, c: Rational) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(e).or_insert_with(Rational::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&e);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponent, &Rational)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, e: Exponent) -> Rational {
        self.terms.get(&e).copied().unwrap_or_else(Rational::zero)
    }

    pub fn set_coeff(&mut self, e: Exponent, c: Rational) {
        if c.is_zero() {
            self.terms.remove(&e);
        } else {
            self.terms.insert(e, c);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree, `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.terms.keys().map(|e| e.iter().map(|&d| d as usize).sum()).max()
    }

    /// Largest exponent of a single variable.
    pub fn degree_in(&self, axis: usize) -> Option<usize> {
        self.terms.keys().map(|e| e[axis] as usize).max()
    }

    pub fn scale(&self, c: Rational) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        Self {
            terms: self.terms.iter().map(|(e, v)| (*e, v * c)).collect(),
        }
    }

    pub fn derivative(&self, axis: usize) -> Self {
        let mut out = Self::zero();
        for (e, c) in &self.terms {
            if e[axis] == 0 {
                continue;
            }
            let mut d = *e;
            d[axis] -= 1;
            out.add_term(d, c * Rational::from_integer(e[axis] as i128));
        }
        out
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut acc = Self::constant(Rational::one());
        for _ in 0..n {
            acc = &acc * self;
        }
        acc
    }

    /// Substitute `x_i -> subs[i]` and expand.
    pub fn compose(&self, subs: &[Polynomial3; 3]) -> Self {
        let max_deg = self.degree().unwrap_or(0) as u32;
        let powers: Vec<Vec<Polynomial3>> = subs
            .iter()
            .map(|s| {
                let mut v = vec![Self::constant(Rational::one())];
                for k in 1..=max_deg as usize {
                    let next = &v[k - 1] * s;
                    v.push(next);
                }
                v
            })
            .collect();
        let mut out = Self::zero();
        for (e, c) in &self.terms {
            let term = &(&powers[0][e[0] as usize] * &powers[1][e[1] as usize]) * &powers[2][e[2] as usize];
            out = &out + &term.scale(*c);
        }
        out
    }

    pub fn eval_exact(&self, p: [Rational; 3]) -> Rational {
        let mut acc = Rational::zero();
        for (e, c) in &self.terms {
            let mut m = *c;
            for axis in 0..3 {
                for _ in 0..e[axis] {
                    m *= p[axis];
                }
            }
            acc += m;
        }
        acc
    }

    pub fn eval(&self, p: [f64; 3]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| rational_to_f64(c) * p[0].powi(e[0] as i32) * p[1].powi(e[1] as i32) * p[2].powi(e[2] as i32))
            .sum()
    }

    /// Exact integral over the reference tetrahedron, using
    /// `∫ x^i y^j z^k = i! j! k! / (i + j + k + 3)!`.
    pub fn integrate_ref_tet(&self) -> Rational {
        self.terms
            .iter()
            .map(|(e, c)| c * tet_monomial_integral(*e))
            .fold(Rational::zero(), |a, b| a + b)
    }

    /// Exact integral over the reference triangle `{x, y >= 0, x + y <= 1}`
    /// of a polynomial in `(x, y)`. Panics if a `z` exponent is present.
    pub fn integrate_ref_triangle(&self) -> Rational {
        self.terms
            .iter()
            .map(|(e, c)| {
                assert_eq!(e[2], 0, "triangle integrand depends on z");
                c * triangle_monomial_integral(e[0], e[1])
            })
            .fold(Rational::zero(), |a, b| a + b)
    }

    pub fn max_abs_coeff(&self) -> Rational {
        self.terms
            .values()
            .map(|c| c.abs())
            .max()
            .unwrap_or_else(Rational::zero)
    }

    pub fn to_real(&self) -> RealPoly {
        RealPoly::from_poly(self)
    }
}

pub fn tet_monomial_integral(e: Exponent) -> Rational {
    let (i, j, k) = (e[0] as usize, e[1] as usize, e[2] as usize);
    Rational::new(factorial(i) * factorial(j) * factorial(k), factorial(i + j + k + 3))
}

pub fn triangle_monomial_integral(i: u8, j: u8) -> Rational {
    let (i, j) = (i as usize, j as usize);
    Rational::new(factorial(i) * factorial(j), factorial(i + j + 2))
}

/// Common denominator and integer numerators of a polynomial.
fn integer_form(p: &Polynomial3) -> (i128, Vec<(Exponent, i128)>) {
    let den = p.terms.values().fold(1i128, |acc, c| acc.lcm(c.denom()));
    let nums = p
        .terms
        .iter()
        .map(|(e, c)| (*e, c.numer() * (den / c.denom())))
        .collect();
    (den, nums)
}

/// Exact `∫_T̂ p q` without forming the product polynomial. The sum runs in
/// integers over a common denominator, then reduces once.
pub fn integrate_product_ref_tet(p: &Polynomial3, q: &Polynomial3) -> Rational {
    if p.is_zero() || q.is_zero() {
        return Rational::zero();
    }
    let d = p.degree().unwrap() + q.degree().unwrap();
    let big = factorial(d + 3);
    let (dp, np) = integer_form(p);
    let (dq, nq) = integer_form(q);
    let mut sum: i128 = 0;
    for (ep, cp) in &np {
        for (eq, cq) in &nq {
            let (i, j, k) = (
                (ep[0] + eq[0]) as usize,
                (ep[1] + eq[1]) as usize,
                (ep[2] + eq[2]) as usize,
            );
            let weight = factorial(i) * factorial(j) * factorial(k) * (big / factorial(i + j + k + 3));
            sum += cp * cq * weight;
        }
    }
    Rational::new(sum, dp * dq * big)
}

impl fmt::Debug for Polynomial3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in self.terms.iter().rev() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({c})")?;
            for (axis, name) in ['x', 'y', 'z'].iter().enumerate() {
                match e[axis] {
                    0 => {}
                    1 => write!(f, "{name}")?,
                    n => write!(f, "{name}^{n}")?,
                }
            }
        }
        Ok(())
    }
}

impl Add for &Polynomial3 {
    type Output = Polynomial3;
    fn add(self, rhs: &Polynomial3) -> Polynomial3 {
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(*e, *c);
        }
        out
    }
}

impl Sub for &Polynomial3 {
    type Output = Polynomial3;
    fn sub(self, rhs: &Polynomial3) -> Polynomial3 {
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(*e, -c);
        }
        out
    }
}

impl Neg for &Polynomial3 {
    type Output = Polynomial3;
    fn neg(self) -> Polynomial3 {
        self.scale(-Rational::one())
    }
}

impl Mul for &Polynomial3 {
    type Output = Polynomial3;
    fn mul(self, rhs: &Polynomial3) -> Polynomial3 {
        let mut out = Polynomial3::zero();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &rhs.terms {
                out.add_term([ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2]], ca * cb);
            }
        }
        out
    }
}

/// Floating-point copy of a [`Polynomial3`] for fast evaluation.
#[derive(Clone, Debug, Default)]
pub struct RealPoly {
    terms: Vec<(Exponent, f64)>,
    max_exp: usize,
}

impl RealPoly {
    pub fn from_poly(p: &Polynomial3) -> Self {
        let terms: Vec<_> = p.terms().map(|(e, c)| (*e, rational_to_f64(c))).collect();
        let max_exp = terms
            .iter()
            .flat_map(|(e, _)| e.iter().map(|&d| d as usize))
            .max()
            .unwrap_or(0);
        Self { terms, max_exp }
    }

    pub fn eval(&self, p: [f64; 3]) -> f64 {
        let mut pw = [[1.0f64; 9]; 3];
        debug_assert!(self.max_exp < 9);
        for axis in 0..3 {
            for k in 1..=self.max_exp {
                pw[axis][k] = pw[axis][k - 1] * p[axis];
            }
        }
        self.terms
            .iter()
            .map(|(e, c)| c * pw[0][e[0] as usize] * pw[1][e[1] as usize] * pw[2][e[2] as usize])
            .sum()
    }
}
