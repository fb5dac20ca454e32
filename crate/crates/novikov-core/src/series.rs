//! Truncated elements of the Novikov ring `Nov(H; N)` and its quotient-field
//! arithmetic: ring operations, inversion through the leading monomial,
//! `exp`/`log` on positively graded series, and canonical representatives
//! modulo `+-1` and `+-H`.
//!
//! A series carries the group it lives over, a coefficient-field tag (the
//! order `d` of `Q(zeta_d)`; 1 means plain rationals with torsion kept in
//! the monomials), finitely many terms below the truncation grade, and the
//! truncation itself. `O(R)` discipline: all identities hold modulo terms
//! of grade >= R, and binary operations propagate the conservative
//! `min(R_a, R_b)` window (shifted by valuations when one operand reaches
//! below grade zero).

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::cyclotomic::{CyclotomicNumber, FieldSummand, Rat};
use crate::error::{Error, Result};
use crate::grading::{Grade, GradedGroup, GroupElement};

/// Truncation window: all terms of grade below the bound are known.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Trunc {
    Finite(Grade),
    Infinite,
}

impl Trunc {
    pub fn finite(g: i64) -> Trunc {
        Trunc::Finite(Grade::from_int(g))
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Trunc::Finite(_))
    }

    pub fn meet(&self, other: &Trunc) -> Trunc {
        match (self, other) {
            (Trunc::Infinite, t) => t.clone(),
            (t, Trunc::Infinite) => t.clone(),
            (Trunc::Finite(a), Trunc::Finite(b)) => Trunc::Finite(a.clone().min(b.clone())),
        }
    }

    /// Shift the window by a grade (used when translating by a monomial).
    pub fn shift(&self, by: &Grade) -> Trunc {
        match self {
            Trunc::Infinite => Trunc::Infinite,
            Trunc::Finite(a) => Trunc::Finite(a.clone() + by.clone()),
        }
    }

    /// Is the given grade inside the window?
    pub fn admits(&self, g: &Grade) -> bool {
        match self {
            Trunc::Infinite => true,
            Trunc::Finite(r) => g < r,
        }
    }
}

impl PartialOrd for Trunc {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Trunc {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Trunc::Infinite, Trunc::Infinite) => Ordering::Equal,
            (Trunc::Infinite, _) => Ordering::Greater,
            (_, Trunc::Infinite) => Ordering::Less,
            (Trunc::Finite(a), Trunc::Finite(b)) => a.cmp(b),
        }
    }
}

impl fmt::Display for Trunc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Trunc::Infinite => write!(f, "inf"),
            Trunc::Finite(g) => write!(f, "{g}"),
        }
    }
}

/// Term key ordered by (grade, free part, torsion residue). The grading is
/// injective on the free part, so distinct monomials of a field summand
/// never tie in grade and the order is total and deterministic.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct TermKey {
    grade: Grade,
    elem: GroupElement,
}

/// A truncated Novikov series.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NovikovSeries {
    group: Arc<GradedGroup>,
    coeff_order: u32,
    terms: BTreeMap<TermKey, CyclotomicNumber>,
    trunc: Trunc,
}

impl NovikovSeries {
    pub fn zero(group: &Arc<GradedGroup>, coeff_order: u32, trunc: Trunc) -> Self {
        NovikovSeries { group: group.clone(), coeff_order, terms: BTreeMap::new(), trunc }
    }

    pub fn one(group: &Arc<GradedGroup>, coeff_order: u32, trunc: Trunc) -> Self {
        Self::constant(group, CyclotomicNumber::one(coeff_order), trunc)
    }

    pub fn constant(group: &Arc<GradedGroup>, c: CyclotomicNumber, trunc: Trunc) -> Self {
        let mut s = Self::zero(group, c.order(), trunc);
        s.add_term(GroupElement::identity(group.free_rank()), c);
        s
    }

    pub fn monomial(
        group: &Arc<GradedGroup>,
        elem: GroupElement,
        c: CyclotomicNumber,
        trunc: Trunc,
    ) -> Result<Self> {
        group.check_element(&elem)?;
        let mut s = Self::zero(group, c.order(), trunc);
        s.add_term(elem, c);
        Ok(s)
    }

    pub fn from_terms(
        group: &Arc<GradedGroup>,
        coeff_order: u32,
        terms: Vec<(GroupElement, CyclotomicNumber)>,
        trunc: Trunc,
    ) -> Result<Self> {
        let mut s = Self::zero(group, coeff_order, trunc);
        for (elem, c) in terms {
            group.check_element(&elem)?;
            if c.order() != coeff_order {
                return Err(Error::FieldMismatch(coeff_order, c.order()));
            }
            s.add_term(elem, c);
        }
        Ok(s)
    }

    /// Add a single term, folding it into an existing coefficient and
    /// dropping it when it is zero or beyond the window.
    fn add_term(&mut self, elem: GroupElement, c: CyclotomicNumber) {
        if c.is_zero() {
            return;
        }
        let grade = self.group.grade(&elem).expect("element checked against group");
        if !self.trunc.admits(&grade) {
            return;
        }
        let key = TermKey { grade, elem };
        match self.terms.get_mut(&key) {
            Some(existing) => {
                let sum = existing.add(&c).expect("coefficient orders agree");
                if sum.is_zero() {
                    self.terms.remove(&key);
                } else {
                    *existing = sum;
                }
            }
            None => {
                self.terms.insert(key, c);
            }
        }
    }

    pub fn group(&self) -> &Arc<GradedGroup> {
        &self.group
    }

    pub fn coeff_order(&self) -> u32 {
        self.coeff_order
    }

    pub fn trunc(&self) -> &Trunc {
        &self.trunc
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&GroupElement, &Grade, &CyclotomicNumber)> {
        self.terms.iter().map(|(k, c)| (&k.elem, &k.grade, c))
    }

    /// Smallest grade carrying a term.
    pub fn valuation(&self) -> Option<Grade> {
        self.terms.keys().next().map(|k| k.grade.clone())
    }

    pub fn leading(&self) -> Option<(&GroupElement, &CyclotomicNumber)> {
        self.terms.iter().next().map(|(k, c)| (&k.elem, c))
    }

    pub fn coeff_of(&self, elem: &GroupElement) -> CyclotomicNumber {
        let grade = self.group.grade(elem).expect("element checked against group");
        let key = TermKey { grade, elem: elem.clone() };
        self.terms.get(&key).cloned().unwrap_or_else(|| CyclotomicNumber::zero(self.coeff_order))
    }

    /// All terms have strictly positive grade (the domain of exp/log).
    pub fn is_lambda_plus(&self) -> bool {
        self.terms.keys().all(|k| k.grade.is_positive())
    }

    /// Unit of the form `1 + (positive-grade terms)`.
    pub fn is_one_plus(&self) -> bool {
        match self.terms.iter().next() {
            Some((k, c)) => {
                k.elem.is_identity() && c.is_one() && self.terms.keys().skip(1).all(|k| k.grade.is_positive())
            }
            None => false,
        }
    }

    /// All coefficients are integers (used for the zeta integrality check).
    pub fn has_integer_coeffs(&self) -> bool {
        self.terms.values().all(|c| {
            c.coeffs().iter().all(|r| r.denom().is_one())
        })
    }

    fn check_compatible(&self, other: &Self) {
        assert_eq!(
            self.group, other.group,
            "series operands must live over the same group"
        );
        assert_eq!(
            self.coeff_order, other.coeff_order,
            "series operands must share their coefficient field"
        );
    }

    pub fn add(&self, other: &Self) -> Self {
        self.check_compatible(other);
        let trunc = self.trunc.meet(&other.trunc);
        let mut out = Self::zero(&self.group, self.coeff_order, trunc);
        for (k, c) in &self.terms {
            out.add_term(k.elem.clone(), c.clone());
        }
        for (k, c) in &other.terms {
            out.add_term(k.elem.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        NovikovSeries {
            group: self.group.clone(),
            coeff_order: self.coeff_order,
            terms: self.terms.iter().map(|(k, c)| (k.clone(), c.neg())).collect(),
            trunc: self.trunc.clone(),
        }
    }

    /// Convolution product. The output window is `min(R_a, R_b)`, further
    /// shifted by a negative valuation of the other factor when one is
    /// truncated, which keeps the rule sound for Laurent-type inputs.
    pub fn mul(&self, other: &Self) -> Self {
        self.check_compatible(other);
        let mut trunc = self.trunc.meet(&other.trunc);
        if let (Trunc::Finite(ra), Some(vb)) = (&self.trunc, other.valuation()) {
            if vb.is_negative() {
                trunc = trunc.meet(&Trunc::Finite(ra.clone() + vb));
            }
        }
        if let (Trunc::Finite(rb), Some(va)) = (&other.trunc, self.valuation()) {
            if va.is_negative() {
                trunc = trunc.meet(&Trunc::Finite(rb.clone() + va));
            }
        }
        let mut out = Self::zero(&self.group, self.coeff_order, trunc);
        for (ka, ca) in &self.terms {
            for (kb, cb) in &other.terms {
                let grade = ka.grade.clone() + kb.grade.clone();
                if !out.trunc.admits(&grade) {
                    break; // kb ascends, later terms only larger
                }
                let elem = self.group.add(&ka.elem, &kb.elem);
                out.add_term(elem, ca.mul(cb).expect("orders agree"));
            }
        }
        out
    }

    pub fn scale(&self, c: &CyclotomicNumber) -> Self {
        assert_eq!(c.order(), self.coeff_order, "scalar must live in the coefficient field");
        let mut out = Self::zero(&self.group, self.coeff_order, self.trunc.clone());
        for (k, v) in &self.terms {
            out.add_term(k.elem.clone(), v.mul(c).expect("orders agree"));
        }
        out
    }

    pub fn scale_rat(&self, r: &Rat) -> Self {
        self.scale(&CyclotomicNumber::from_rational(self.coeff_order, r.clone()))
    }

    /// Multiply by the exact monomial `h`: keys shift and the window shifts
    /// by `N(h)`, with no precision loss.
    pub fn translate(&self, h: &GroupElement) -> Self {
        let shift = self.group.grade(h).expect("element checked against group");
        let mut out = Self::zero(&self.group, self.coeff_order, self.trunc.shift(&shift));
        for (k, c) in &self.terms {
            out.add_term(self.group.add(&k.elem, h), c.clone());
        }
        out
    }

    /// Forget terms at or above the bound and cap the window.
    pub fn truncate_to(&self, bound: &Trunc) -> Self {
        let trunc = self.trunc.meet(bound);
        let mut out = Self::zero(&self.group, self.coeff_order, trunc);
        for (k, c) in &self.terms {
            out.add_term(k.elem.clone(), c.clone());
        }
        out
    }

    /// Equality modulo `O(min(R_a, R_b, bound))`.
    pub fn eq_mod(&self, other: &Self, bound: &Trunc) -> bool {
        self.truncate_to(bound).sub(&other.truncate_to(bound)).is_zero()
    }

    /// Project to the field summand tagged by `d`: torsion residues fold
    /// into the coefficient as powers of `zeta_d`, leaving a series
    /// supported on the free part.
    pub fn project_summand(&self, summand: &FieldSummand) -> Self {
        assert_eq!(self.coeff_order, 1, "projection starts from a plain group-ring series");
        let mut out = Self::zero(&self.group, summand.order, self.trunc.clone());
        for (k, c) in &self.terms {
            let root = summand.project_torsion(k.elem.torsion);
            let rat_c = c.as_rational().expect("order-1 coefficients are rational").clone();
            let mut elem = k.elem.clone();
            elem.torsion = 0;
            out.add_term(elem, root.scale(&rat_c));
        }
        out
    }

    /// Invert through the leading monomial: `a = c g (1 + u)` gives
    /// `a^{-1} = c^{-1} g^{-1} sum (-u)^k`. Requires the leading slice to be
    /// a single monomial with an invertible coefficient. The certified
    /// output window is the input window shifted down by twice the leading
    /// grade.
    pub fn invert(&self, window: &Trunc) -> Result<FieldElement> {
        let fe = FieldElement::from_series(self)?;
        fe.inverse(window)
    }

    /// `exp` on strictly positively graded series.
    pub fn exp_plus(&self, window: &Trunc) -> Result<NovikovSeries> {
        if !self.is_lambda_plus() {
            return Err(Error::NotLambdaPlus);
        }
        let w = self.trunc.meet(window);
        if !w.is_finite() && !self.is_zero() {
            return Err(Error::TruncationTooSmall { available: "inf requested".into() });
        }
        let x = self.truncate_to(&w);
        let mut acc = NovikovSeries::one(&self.group, self.coeff_order, w.clone());
        let mut term = NovikovSeries::one(&self.group, self.coeff_order, w);
        let mut k: i64 = 1;
        loop {
            term = term.mul(&x).scale_rat(&Rat::new(BigInt::one(), BigInt::from(k)));
            if term.is_zero() {
                break;
            }
            acc = acc.add(&term);
            k += 1;
        }
        Ok(acc)
    }

    /// `log(1 + x)` for strictly positively graded `x`.
    pub fn log_one_plus(&self, window: &Trunc) -> Result<NovikovSeries> {
        if !self.is_lambda_plus() {
            return Err(Error::NotLambdaPlus);
        }
        let w = self.trunc.meet(window);
        if !w.is_finite() && !self.is_zero() {
            return Err(Error::TruncationTooSmall { available: "inf requested".into() });
        }
        let x = self.truncate_to(&w);
        let mut acc = NovikovSeries::zero(&self.group, self.coeff_order, w);
        let mut pow = x.clone();
        let mut k: i64 = 1;
        while !pow.is_zero() {
            let sign = if k % 2 == 1 { 1 } else { -1 };
            acc = acc.add(&pow.scale_rat(&Rat::new(BigInt::from(sign), BigInt::from(k))));
            pow = pow.mul(&x);
            k += 1;
        }
        Ok(acc)
    }

    /// Geometric inverse of a `1 + u` unit, `u` strictly positive.
    pub fn invert_one_plus(&self, window: &Trunc) -> Result<NovikovSeries> {
        if !self.is_one_plus() {
            return Err(Error::NotAUnit);
        }
        if self.term_count() == 1 {
            // Exactly 1: the inverse keeps the input window.
            return Ok(self.clone());
        }
        let w = self.trunc.meet(window);
        if !w.is_finite() && self.term_count() > 1 {
            return Err(Error::TruncationTooSmall { available: "inf requested".into() });
        }
        let one = NovikovSeries::one(&self.group, self.coeff_order, w.clone());
        let minus_u = one.sub(&self.truncate_to(&w));
        let mut acc = one.clone();
        let mut pow = minus_u.clone();
        while !pow.is_zero() {
            acc = acc.add(&pow);
            pow = pow.mul(&minus_u);
        }
        Ok(acc)
    }
}

impl fmt::Display for NovikovSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", crate::text::render_series(self))
    }
}

impl std::ops::Add for &NovikovSeries {
    type Output = NovikovSeries;
    fn add(self, rhs: &NovikovSeries) -> NovikovSeries {
        NovikovSeries::add(self, rhs)
    }
}

impl std::ops::Sub for &NovikovSeries {
    type Output = NovikovSeries;
    fn sub(self, rhs: &NovikovSeries) -> NovikovSeries {
        NovikovSeries::sub(self, rhs)
    }
}

impl std::ops::Mul for &NovikovSeries {
    type Output = NovikovSeries;
    fn mul(self, rhs: &NovikovSeries) -> NovikovSeries {
        NovikovSeries::mul(self, rhs)
    }
}

impl std::ops::Neg for &NovikovSeries {
    type Output = NovikovSeries;
    fn neg(self) -> NovikovSeries {
        NovikovSeries::neg(self)
    }
}

/// Declared ambiguity of a torsion-like value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ambiguity {
    /// Sign only (lifts fixed by an Euler-structure representative).
    PlusMinusOne,
    /// Sign and translation by any group element.
    PlusMinusH,
}

impl fmt::Display for Ambiguity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ambiguity::PlusMinusOne => write!(f, "+-1"),
            Ambiguity::PlusMinusH => write!(f, "+-H"),
        }
    }
}

/// A nonzero element of a quotient-field summand in leading-unit form
/// `c * g * unit` with `unit = 1 + (positive-grade terms)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldElement {
    coeff: CyclotomicNumber,
    monomial: GroupElement,
    unit: NovikovSeries,
}

impl FieldElement {
    pub fn one(group: &Arc<GradedGroup>, coeff_order: u32, trunc: Trunc) -> Self {
        FieldElement {
            coeff: CyclotomicNumber::one(coeff_order),
            monomial: GroupElement::identity(group.free_rank()),
            unit: NovikovSeries::one(group, coeff_order, trunc),
        }
    }

    /// Factor a series into leading-unit form. Exactness is preserved; a
    /// finite window only enters later, when a geometric expansion is
    /// actually needed.
    pub fn from_series(s: &NovikovSeries) -> Result<Self> {
        let Some(val) = s.valuation() else {
            return match s.trunc() {
                Trunc::Infinite => Err(Error::ZeroSeries),
                Trunc::Finite(r) => Err(Error::TruncationTooSmall { available: r.to_string() }),
            };
        };
        // The leading slice must be a single monomial.
        let leaders: Vec<&GroupElement> = s
            .terms()
            .take_while(|(_, g, _)| **g == val)
            .map(|(e, _, _)| e)
            .collect();
        if leaders.len() != 1 {
            return Err(Error::LeadingNotMonomial);
        }
        let monomial = leaders[0].clone();
        let coeff = s.coeff_of(&monomial);
        let c_inv = coeff.inverse()?;
        let unit = s.translate(&s.group().neg(&monomial)).scale(&c_inv);
        debug_assert!(unit.is_one_plus() || unit.term_count() == 1);
        Ok(FieldElement { coeff, monomial, unit })
    }

    pub fn coeff(&self) -> &CyclotomicNumber {
        &self.coeff
    }

    pub fn monomial(&self) -> &GroupElement {
        &self.monomial
    }

    pub fn unit(&self) -> &NovikovSeries {
        &self.unit
    }

    pub fn group(&self) -> &Arc<GradedGroup> {
        self.unit.group()
    }

    pub fn coeff_order(&self) -> u32 {
        self.unit.coeff_order()
    }

    /// Window of the reconstructed series (unit window shifted by `N(g)`).
    pub fn abs_trunc(&self) -> Trunc {
        let shift = self.group().grade(&self.monomial).expect("monomial valid");
        self.unit.trunc().shift(&shift)
    }

    /// Expand back to a series.
    pub fn to_series(&self) -> NovikovSeries {
        self.unit.translate(&self.monomial).scale(&self.coeff)
    }

    pub fn mul(&self, other: &Self) -> Self {
        FieldElement {
            coeff: self.coeff.mul(&other.coeff).expect("orders agree"),
            monomial: self.group().add(&self.monomial, &other.monomial),
            unit: self.unit.mul(&other.unit),
        }
    }

    pub fn inverse(&self, window: &Trunc) -> Result<Self> {
        Ok(FieldElement {
            coeff: self.coeff.inverse()?,
            monomial: self.group().neg(&self.monomial),
            unit: self.unit.invert_one_plus(window)?,
        })
    }

    pub fn div(&self, other: &Self, window: &Trunc) -> Result<Self> {
        Ok(self.mul(&other.inverse(window)?))
    }

    pub fn pow(&self, e: i64, window: &Trunc) -> Result<Self> {
        let base = if e < 0 { self.inverse(window)? } else { self.clone() };
        let mut acc = FieldElement::one(self.group(), self.coeff_order(), base.unit.trunc().clone());
        for _ in 0..e.unsigned_abs() {
            acc = acc.mul(&base);
        }
        Ok(acc)
    }

    pub fn scale(&self, c: &CyclotomicNumber) -> Result<Self> {
        if c.is_zero() {
            return Err(Error::ZeroCoefficient);
        }
        Ok(FieldElement {
            coeff: self.coeff.mul(c).expect("orders agree"),
            monomial: self.monomial.clone(),
            unit: self.unit.clone(),
        })
    }

    /// Equality modulo `O(bound)` (and both windows).
    pub fn eq_mod(&self, other: &Self, bound: &Trunc) -> bool {
        self.to_series().eq_mod(&other.to_series(), bound)
    }

    /// Canonical representative modulo the declared ambiguity.
    ///
    /// Under `+-H` the monomial translates to the identity and the leading
    /// coefficient is normalized over all `+- zeta_d^j` twists (torsion
    /// translations act on a summand through `zeta_d`); under `+-1` only the
    /// sign is fixed. The representative is the candidate whose coefficient
    /// vector is lexicographically largest, which makes the map idempotent
    /// and constant on orbits.
    pub fn canonicalize(&self, ambiguity: Ambiguity) -> Self {
        match ambiguity {
            Ambiguity::PlusMinusOne => {
                let c = if coeff_vector_negative(&self.coeff) { self.coeff.neg() } else { self.coeff.clone() };
                FieldElement { coeff: c, monomial: self.monomial.clone(), unit: self.unit.clone() }
            }
            Ambiguity::PlusMinusH => {
                let d = self.coeff_order();
                let mut best: Option<CyclotomicNumber> = None;
                for j in 0..d.max(1) {
                    let root = CyclotomicNumber::root_power(d, j as i64);
                    for sign in [1i64, -1] {
                        let cand = self
                            .coeff
                            .mul(&root)
                            .expect("orders agree")
                            .scale(&Rat::from(BigInt::from(sign)));
                        best = Some(match best {
                            None => cand,
                            Some(b) => {
                                if coeff_vector_cmp(&cand, &b) == Ordering::Greater {
                                    cand
                                } else {
                                    b
                                }
                            }
                        });
                    }
                }
                FieldElement {
                    coeff: best.expect("at least one candidate"),
                    monomial: GroupElement::identity(self.group().free_rank()),
                    unit: self.unit.clone(),
                }
            }
        }
    }
}

fn coeff_vector_cmp(a: &CyclotomicNumber, b: &CyclotomicNumber) -> Ordering {
    for (x, y) in a.coeffs().iter().zip(b.coeffs()) {
        match x.cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

fn coeff_vector_negative(c: &CyclotomicNumber) -> bool {
    for x in c.coeffs() {
        if x.is_zero() {
            continue;
        }
        return x.is_negative();
    }
    false
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_series())
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;

    /// `Z((t))`-style series over the infinite cyclic group.
    pub fn zt(pairs: &[(i64, i64)], trunc: Trunc) -> NovikovSeries {
        let g = GradedGroup::infinite_cyclic();
        let terms = pairs
            .iter()
            .map(|&(e, c)| (GroupElement { free: vec![e], torsion: 0 }, CyclotomicNumber::from_int(1, c)))
            .collect();
        NovikovSeries::from_terms(&g, 1, terms, trunc).unwrap()
    }

    pub fn geom(trunc: i64) -> NovikovSeries {
        let pairs: Vec<(i64, i64)> = (0..trunc).map(|k| (k, 1)).collect();
        zt(&pairs, Trunc::finite(trunc))
    }
}
