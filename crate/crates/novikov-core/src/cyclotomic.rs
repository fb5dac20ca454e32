//! Exact coefficient fields `Q(zeta_d)` and the splitting of the group
//! algebra `Q[Z/n]` into cyclotomic fields, one summand per divisor of `n`.
//!
//! Elements are polynomials in a primitive d-th root of unity `z`, reduced
//! modulo the d-th cyclotomic polynomial. All arithmetic is exact rational
//! with arbitrary-precision integers.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Mutex, OnceLock};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::grading::{format_rational, parse_rational};

pub type Rat = BigRational;

fn rat(n: i64) -> Rat {
    Rat::from(BigInt::from(n))
}

/// Euler's totient by trial division.
pub fn euler_phi(d: u32) -> u32 {
    let mut n = d;
    let mut result = d;
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            while n % p == 0 {
                n /= p;
            }
            result -= result / p;
        }
        p += 1;
    }
    if n > 1 {
        result -= result / n;
    }
    result
}

pub fn divisors(n: u32) -> Vec<u32> {
    let mut out: Vec<u32> = (1..=n).filter(|d| n % d == 0).collect();
    if out.is_empty() {
        out.push(1);
    }
    out
}

// ---- dense rational polynomials (index = degree) ----

fn poly_trim(p: &mut Vec<Rat>) {
    while p.last().is_some_and(|c| c.is_zero()) {
        p.pop();
    }
}

fn poly_mul(a: &[Rat], b: &[Rat]) -> Vec<Rat> {
    if a.is_empty() || b.is_empty() {
        return vec![];
    }
    let mut out = vec![Rat::zero(); a.len() + b.len() - 1];
    for (i, ca) in a.iter().enumerate() {
        if ca.is_zero() {
            continue;
        }
        for (j, cb) in b.iter().enumerate() {
            if !cb.is_zero() {
                out[i + j] = &out[i + j] + ca * cb;
            }
        }
    }
    poly_trim(&mut out);
    out
}

fn poly_sub(a: &[Rat], b: &[Rat]) -> Vec<Rat> {
    let mut out = vec![Rat::zero(); a.len().max(b.len())];
    for (i, c) in a.iter().enumerate() {
        out[i] = c.clone();
    }
    for (i, c) in b.iter().enumerate() {
        out[i] = &out[i] - c;
    }
    poly_trim(&mut out);
    out
}

/// Long division: returns (quotient, remainder).
fn poly_divrem(a: &[Rat], b: &[Rat]) -> (Vec<Rat>, Vec<Rat>) {
    assert!(!b.is_empty(), "division by zero polynomial");
    let mut rem = a.to_vec();
    poly_trim(&mut rem);
    let db = b.len() - 1;
    let lead = b[db].clone();
    if rem.len() <= db {
        return (vec![], rem);
    }
    let mut quot = vec![Rat::zero(); rem.len() - db];
    while rem.len() > db {
        let da = rem.len() - 1;
        let c = &rem[da] / &lead;
        quot[da - db] = c.clone();
        for i in 0..=db {
            let sub = &c * &b[i];
            rem[da - db + i] = &rem[da - db + i] - sub;
        }
        poly_trim(&mut rem);
        if rem.len() <= db {
            break;
        }
    }
    poly_trim(&mut quot);
    (quot, rem)
}

/// The d-th cyclotomic polynomial, by dividing `x^d - 1` by the cyclotomic
/// polynomials of the proper divisors. Cached.
pub fn cyclotomic_polynomial(d: u32) -> Vec<Rat> {
    static CACHE: OnceLock<Mutex<BTreeMap<u32, Vec<Rat>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(BTreeMap::new()));
    if let Some(p) = cache.lock().unwrap().get(&d) {
        return p.clone();
    }
    let poly = compute_cyclotomic(d);
    cache.lock().unwrap().insert(d, poly.clone());
    poly
}

fn compute_cyclotomic(d: u32) -> Vec<Rat> {
    assert!(d >= 1);
    if d == 1 {
        return vec![rat(-1), rat(1)]; // x - 1
    }
    let mut num = vec![Rat::zero(); d as usize + 1];
    num[0] = rat(-1);
    num[d as usize] = rat(1);
    let mut den = vec![rat(1)];
    for e in divisors(d) {
        if e < d {
            den = poly_mul(&den, &cyclotomic_polynomial(e));
        }
    }
    let (q, r) = poly_divrem(&num, &den);
    debug_assert!(r.is_empty(), "cyclotomic division must be exact");
    q
}

/// An element of `Q(zeta_d)`, stored as a polynomial in `z = zeta_d` of
/// degree below `phi(d)`. Order 1 is plain `Q`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CyclotomicNumber {
    order: u32,
    coeffs: Vec<Rat>,
}

impl CyclotomicNumber {
    pub fn zero(order: u32) -> Self {
        CyclotomicNumber { order, coeffs: vec![Rat::zero(); euler_phi(order) as usize] }
    }

    pub fn one(order: u32) -> Self {
        Self::from_rational(order, rat(1))
    }

    pub fn from_rational(order: u32, r: Rat) -> Self {
        let mut c = Self::zero(order);
        c.coeffs[0] = r;
        c
    }

    pub fn from_int(order: u32, n: i64) -> Self {
        Self::from_rational(order, rat(n))
    }

    /// `zeta_order^power`, reduced.
    pub fn root_power(order: u32, power: i64) -> Self {
        let d = order as i64;
        let j = power.rem_euclid(d.max(1)) as usize;
        let phi = euler_phi(order) as usize;
        if j < phi {
            let mut c = Self::zero(order);
            c.coeffs[j] = rat(1);
            return c;
        }
        // Reduce x^j mod Phi_d.
        let mut poly = vec![Rat::zero(); j + 1];
        poly[j] = rat(1);
        let (_, r) = poly_divrem(&poly, &cyclotomic_polynomial(order));
        Self::from_poly(order, r)
    }

    fn from_poly(order: u32, mut poly: Vec<Rat>) -> Self {
        let phi = euler_phi(order) as usize;
        if poly.len() > phi {
            let (_, r) = poly_divrem(&poly, &cyclotomic_polynomial(order));
            poly = r;
        }
        poly.resize(phi, Rat::zero());
        CyclotomicNumber { order, coeffs: poly }
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn coeffs(&self) -> &[Rat] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn is_one(&self) -> bool {
        self.coeffs[0].is_one() && self.coeffs[1..].iter().all(|c| c.is_zero())
    }

    /// True when the element lies in `Q`.
    pub fn is_rational(&self) -> bool {
        self.coeffs[1..].iter().all(|c| c.is_zero())
    }

    pub fn as_rational(&self) -> Option<&Rat> {
        if self.is_rational() {
            Some(&self.coeffs[0])
        } else {
            None
        }
    }

    fn check_order(&self, other: &Self) -> Result<()> {
        if self.order != other.order {
            return Err(Error::FieldMismatch(self.order, other.order));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_order(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a + b)
            .collect();
        Ok(CyclotomicNumber { order: self.order, coeffs })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_order(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a - b)
            .collect();
        Ok(CyclotomicNumber { order: self.order, coeffs })
    }

    pub fn neg(&self) -> Self {
        CyclotomicNumber { order: self.order, coeffs: self.coeffs.iter().map(|c| -c).collect() }
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_order(other)?;
        if self.order == 1 {
            return Ok(CyclotomicNumber {
                order: 1,
                coeffs: vec![&self.coeffs[0] * &other.coeffs[0]],
            });
        }
        Ok(Self::from_poly(self.order, poly_mul(&self.coeffs, &other.coeffs)))
    }

    pub fn scale(&self, r: &Rat) -> Self {
        CyclotomicNumber { order: self.order, coeffs: self.coeffs.iter().map(|c| c * r).collect() }
    }

    /// Multiplicative inverse via the extended Euclidean algorithm against
    /// the cyclotomic polynomial.
    pub fn inverse(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::ZeroCoefficient);
        }
        if self.order == 1 {
            return Ok(CyclotomicNumber { order: 1, coeffs: vec![self.coeffs[0].recip()] });
        }
        let modulus = cyclotomic_polynomial(self.order);
        let mut a = self.coeffs.clone();
        poly_trim(&mut a);
        // Invariants: r0 = s0*a + t0*m, r1 = s1*a + t1*m (t's not tracked).
        let mut r0 = modulus;
        let mut r1 = a;
        let mut s0: Vec<Rat> = vec![];
        let mut s1: Vec<Rat> = vec![rat(1)];
        while !r1.is_empty() {
            let (q, r) = poly_divrem(&r0, &r1);
            let s = poly_sub(&s0, &poly_mul(&q, &s1));
            r0 = std::mem::replace(&mut r1, r);
            s0 = std::mem::replace(&mut s1, s);
        }
        // r0 is a nonzero constant (Phi_d is irreducible over Q).
        debug_assert_eq!(r0.len(), 1, "gcd with an irreducible modulus is a unit");
        let inv_lead = r0[0].recip();
        let coeffs = s0.iter().map(|c| c * &inv_lead).collect();
        Ok(Self::from_poly(self.order, coeffs))
    }

    /// Reinterpret in `Q(zeta_target)` where `order | target`;
    /// `zeta_d = zeta_target^(target/d)`.
    pub fn embed(&self, target: u32) -> Result<Self> {
        if target == self.order {
            return Ok(self.clone());
        }
        if target % self.order != 0 {
            return Err(Error::FieldMismatch(self.order, target));
        }
        let step = (target / self.order) as i64;
        let mut acc = CyclotomicNumber::zero(target);
        for (j, c) in self.coeffs.iter().enumerate() {
            if !c.is_zero() {
                let m = CyclotomicNumber::root_power(target, step * j as i64).scale(c);
                acc = acc.add(&m)?;
            }
        }
        Ok(acc)
    }

    /// Express an element of `Q(zeta_L)` in `Q(zeta_d)` for `d | L`, or fail
    /// when it does not lie in the subfield.
    pub fn descend(&self, target: u32) -> Result<Self> {
        if target == self.order {
            return Ok(self.clone());
        }
        if self.order % target != 0 {
            return Err(Error::FieldMismatch(self.order, target));
        }
        let phi_l = euler_phi(self.order) as usize;
        let phi_d = euler_phi(target) as usize;
        // Columns: images of the subfield basis in the big field.
        let mut cols: Vec<Vec<Rat>> = Vec::with_capacity(phi_d);
        for j in 0..phi_d {
            let mut basis = CyclotomicNumber::zero(target);
            basis.coeffs[j] = rat(1);
            cols.push(basis.embed(self.order)?.coeffs);
        }
        match solve_rational(&cols, &self.coeffs, phi_l) {
            Some(x) => Ok(CyclotomicNumber { order: target, coeffs: x }),
            None => Err(Error::DescentFailed(format!(
                "{} does not lie in Q(zeta_{})",
                self, target
            ))),
        }
    }

    /// Parse `"1 - 2*z + z^2"`, `"3/2"`, `"-z"`.
    pub fn parse(order: u32, text: &str) -> Result<Self> {
        let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        if s.is_empty() {
            return Err(Error::Parse("empty coefficient".into()));
        }
        let mut acc = CyclotomicNumber::zero(order);
        let mut term = String::new();
        let mut terms: Vec<String> = Vec::new();
        for (i, c) in s.chars().enumerate() {
            if (c == '+' || c == '-') && i > 0 {
                terms.push(term.clone());
                term.clear();
            }
            term.push(c);
        }
        terms.push(term);
        for t in terms {
            let (sign, body) = match t.strip_prefix('-') {
                Some(b) => (rat(-1), b),
                None => (rat(1), t.strip_prefix('+').unwrap_or(&t)),
            };
            let (coeff_str, power) = if let Some(idx) = body.find('z') {
                let head = &body[..idx];
                let tail = &body[idx + 1..];
                let coeff = head.strip_suffix('*').unwrap_or(head);
                let p: i64 = if let Some(e) = tail.strip_prefix('^') {
                    e.parse().map_err(|_| Error::Parse(format!("bad exponent in `{t}`")))?
                } else if tail.is_empty() {
                    1
                } else {
                    return Err(Error::Parse(format!("malformed term `{t}`")));
                };
                (coeff.to_string(), p)
            } else {
                (body.to_string(), 0)
            };
            let c = if coeff_str.is_empty() { rat(1) } else { parse_rational(&coeff_str)? };
            let mono = CyclotomicNumber::root_power(order, power).scale(&(&c * &sign));
            acc = acc.add(&mono)?;
        }
        Ok(acc)
    }
}

impl fmt::Display for CyclotomicNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (j, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let mag = c.abs();
            if first {
                if c.is_negative() {
                    write!(f, "-")?;
                }
                first = false;
            } else if c.is_negative() {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            if j == 0 {
                write!(f, "{}", format_rational(&mag))?;
            } else {
                if !mag.is_one() {
                    write!(f, "{}*", format_rational(&mag))?;
                }
                if j == 1 {
                    write!(f, "z")?;
                } else {
                    write!(f, "z^{j}")?;
                }
            }
        }
        Ok(())
    }
}

/// Solve `A x = b` exactly where `A` is given by columns; `None` when
/// inconsistent. Used for descending between cyclotomic fields.
fn solve_rational(cols: &[Vec<Rat>], b: &[Rat], rows: usize) -> Option<Vec<Rat>> {
    let ncols = cols.len();
    let mut m: Vec<Vec<Rat>> = (0..rows)
        .map(|r| {
            let mut row: Vec<Rat> = cols.iter().map(|c| c[r].clone()).collect();
            row.push(b[r].clone());
            row
        })
        .collect();
    let mut pivot_cols = Vec::new();
    let mut rank = 0;
    for col in 0..ncols {
        let Some(p) = (rank..rows).find(|&r| !m[r][col].is_zero()) else { continue };
        m.swap(rank, p);
        let inv = m[rank][col].recip();
        for c in col..=ncols {
            m[rank][c] = &m[rank][c] * &inv;
        }
        for r in 0..rows {
            if r != rank && !m[r][col].is_zero() {
                let f = m[r][col].clone();
                for c in col..=ncols {
                    let sub = &f * &m[rank][c];
                    m[r][c] = &m[r][c] - sub;
                }
            }
        }
        pivot_cols.push(col);
        rank += 1;
        if rank == rows {
            break;
        }
    }
    // Inconsistent if a zero row has nonzero rhs.
    for r in rank..rows {
        if !m[r][ncols].is_zero() {
            return None;
        }
    }
    let mut x = vec![Rat::zero(); ncols];
    for (i, &col) in pivot_cols.iter().enumerate() {
        x[col] = m[i][ncols].clone();
    }
    Some(x)
}

/// One cyclotomic summand of `Q[Z/n]`: the torsion generator maps to
/// `zeta_d`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldSummand {
    pub order: u32,
}

impl FieldSummand {
    /// Projection of the group-algebra basis element `s^j`.
    pub fn project_torsion(&self, residue: u32) -> CyclotomicNumber {
        CyclotomicNumber::root_power(self.order, residue as i64)
    }
}

/// The decomposition of `Q[Z/n]` into cyclotomic fields, one per divisor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldSplit {
    pub torsion_order: u32,
    pub summands: Vec<FieldSummand>,
}

/// Summands of `Q[Z/n]`; `n = 0` (no torsion factor) gives the single
/// summand `Q`.
pub fn split_group_algebra(torsion_order: u32) -> FieldSplit {
    let n = torsion_order.max(1);
    let summands = divisors(n).into_iter().map(|order| FieldSummand { order }).collect();
    FieldSplit { torsion_order, summands }
}

impl FieldSplit {
    /// Restrict to a chosen set of divisors (scenario "summands" filter).
    pub fn restrict(&self, orders: &[u32]) -> FieldSplit {
        FieldSplit {
            torsion_order: self.torsion_order,
            summands: self
                .summands
                .iter()
                .filter(|s| orders.contains(&s.order))
                .cloned()
                .collect(),
        }
    }
}
