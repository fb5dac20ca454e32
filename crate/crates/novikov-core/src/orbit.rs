//! Closed-orbit bookkeeping and the zeta function in its three faces:
//! the exponential sum over orbits, the product over irreducible orbits,
//! and the Lefschetz/mapping-torus form. Assembly of the invariant
//! `I = T_m * zeta`.
//!
//! Orbit lists are stored with multiplicities: an entry `(class, period,
//! sign) x count` contributes `count * sign / period * class` to
//! `log zeta`. Summing ordered tuples with weight `1/k` and summing
//! necklaces with their periods give the same logs, so downstream algebra
//! never distinguishes the two bookkeepings.

use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::complex::{BasedComplex, TorsionSummand, TorsionValue};
use crate::cyclotomic::split_group_algebra;
use crate::error::{Error, Result};
use crate::grading::{Grade, GradedGroup, GroupElement};
use crate::matrix::Mat;
use crate::series::{Ambiguity, FieldElement, NovikovSeries, Trunc};
use crate::text::render_monomial;

/// A closed orbit: homology class, period, Lefschetz sign.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClosedOrbit {
    pub class: GroupElement,
    pub period: u32,
    pub sign: i8,
}

/// An orbit with multiplicity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrbitEntry {
    pub orbit: ClosedOrbit,
    pub count: u64,
}

/// A finite list of closed orbits, complete below the stated grade.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrbitSet {
    group: Arc<GradedGroup>,
    entries: Vec<OrbitEntry>,
    complete_below: Trunc,
}

impl OrbitSet {
    pub fn empty(group: &Arc<GradedGroup>, complete_below: Trunc) -> Self {
        OrbitSet { group: group.clone(), entries: vec![], complete_below }
    }

    pub fn new(group: &Arc<GradedGroup>, entries: Vec<OrbitEntry>, complete_below: Trunc) -> Result<Self> {
        for e in &entries {
            group.check_element(&e.orbit.class)?;
            if e.orbit.period == 0 {
                return Err(Error::Scenario("orbit period must be positive".into()));
            }
            if e.orbit.sign != 1 && e.orbit.sign != -1 {
                return Err(Error::Scenario("orbit sign must be +1 or -1".into()));
            }
            let g = group.grade(&e.orbit.class)?;
            if !g.is_positive() {
                return Err(Error::OrbitNotPositive(render_monomial(group, &e.orbit.class)));
            }
        }
        Ok(OrbitSet { group: group.clone(), entries, complete_below })
    }

    pub fn group(&self) -> &Arc<GradedGroup> {
        &self.group
    }

    pub fn entries(&self) -> &[OrbitEntry] {
        &self.entries
    }

    pub fn complete_below(&self) -> &Trunc {
        &self.complete_below
    }

    pub fn is_empty(&self) -> bool {
        self.entries.iter().all(|e| e.count == 0)
    }

    /// Append entries (the completeness window drops to the meet).
    pub fn union(&self, other: &OrbitSet) -> OrbitSet {
        assert_eq!(self.group, other.group, "orbit sets over one group");
        let mut entries = self.entries.clone();
        entries.extend(other.entries.iter().cloned());
        OrbitSet {
            group: self.group.clone(),
            entries: normalize_entries(entries),
            complete_below: self.complete_below.meet(&other.complete_below),
        }
    }

    /// Remove the other set's entries as a multiset; fails when something
    /// is missing (used by birth as the formal inverse of death).
    pub fn subtract(&self, other: &OrbitSet) -> Result<OrbitSet> {
        assert_eq!(self.group, other.group, "orbit sets over one group");
        let mut entries = normalize_entries(self.entries.clone());
        for rem in normalize_entries(other.entries.clone()) {
            let found = entries.iter_mut().find(|e| e.orbit == rem.orbit);
            match found {
                Some(e) if e.count >= rem.count => {
                    e.count -= rem.count;
                }
                _ => {
                    return Err(Error::BirthMismatch(format!(
                        "orbit {} x{} (period {}, sign {}) not present",
                        render_monomial(&self.group, &rem.orbit.class),
                        rem.count,
                        rem.orbit.period,
                        rem.orbit.sign
                    )));
                }
            }
        }
        entries.retain(|e| e.count > 0);
        Ok(OrbitSet { group: self.group.clone(), entries, complete_below: self.complete_below.clone() })
    }

    /// `sum count * sign / period * class`, truncated at the completeness
    /// grade.
    pub fn log_series(&self) -> Result<NovikovSeries> {
        let mut acc = NovikovSeries::zero(&self.group, 1, self.complete_below.clone());
        for e in &self.entries {
            if e.count == 0 {
                continue;
            }
            let num = BigInt::from(e.orbit.sign) * BigInt::from(e.count);
            let coeff = BigRational::new(num, BigInt::from(e.orbit.period));
            let mono = NovikovSeries::monomial(
                &self.group,
                e.orbit.class.clone(),
                crate::cyclotomic::CyclotomicNumber::from_rational(1, coeff),
                self.complete_below.clone(),
            )?;
            acc = acc.add(&mono);
        }
        Ok(acc)
    }

    /// The zeta function `exp(sum sign/period * class)`; all coefficients
    /// must come out integral, anything else signals an inconsistent orbit
    /// set.
    pub fn zeta(&self, window: &Trunc) -> Result<NovikovSeries> {
        let log = self.log_series()?;
        let z = log.exp_plus(window)?;
        for (elem, _, coeff) in z.terms() {
            let bad = coeff.coeffs().iter().any(|r| !r.denom().is_one());
            if bad {
                return Err(Error::NonIntegerZeta {
                    class: render_monomial(&self.group, elem),
                    coeff: coeff.to_string(),
                });
            }
        }
        Ok(z)
    }

    /// Equality as weighted orbit multisets below the joint completeness
    /// window.
    pub fn eq_below(&self, other: &OrbitSet) -> bool {
        if self.group != other.group {
            return false;
        }
        let bound = self.complete_below.meet(&other.complete_below);
        let filter = |s: &OrbitSet| -> Vec<OrbitEntry> {
            normalize_entries(
                s.entries
                    .iter()
                    .filter(|e| {
                        let g = s.group.grade(&e.orbit.class).expect("valid class");
                        bound.admits(&g)
                    })
                    .cloned()
                    .collect(),
            )
        };
        filter(self) == filter(other)
    }
}

fn normalize_entries(entries: Vec<OrbitEntry>) -> Vec<OrbitEntry> {
    let mut out: Vec<OrbitEntry> = Vec::new();
    for e in entries {
        if e.count == 0 {
            continue;
        }
        match out.iter_mut().find(|x| x.orbit == e.orbit) {
            Some(x) => x.count += e.count,
            None => out.push(e),
        }
    }
    out.sort_by(|a, b| {
        (a.orbit.class.clone(), a.orbit.period, a.orbit.sign)
            .cmp(&(b.orbit.class.clone(), b.orbit.period, b.orbit.sign))
    });
    out
}

/// One factor `(1 +- h)^{+-1}` of the orbit product formula.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IrreducibleOrbitFactor {
    pub class: GroupElement,
    /// `true` for `1 + h`, `false` for `1 - h`.
    pub plus: bool,
    /// The outer exponent, `+1` or `-1`.
    pub exponent: i8,
}

impl IrreducibleOrbitFactor {
    pub fn type_str(&self) -> String {
        format!(
            "(1{}h)^{}",
            if self.plus { '+' } else { '-' },
            if self.exponent > 0 { "+1" } else { "-1" }
        )
    }

    pub fn parse_type(text: &str) -> Result<(bool, i8)> {
        let t: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        let (plus, rest) = if let Some(r) = t.strip_prefix("(1+h)^") {
            (true, r)
        } else if let Some(r) = t.strip_prefix("(1-h)^") {
            (false, r)
        } else {
            return Err(Error::Parse(format!("bad factor type `{text}`")));
        };
        let exponent = match rest {
            "1" | "+1" => 1,
            "-1" => -1,
            _ => return Err(Error::Parse(format!("bad factor exponent `{text}`"))),
        };
        Ok((plus, exponent))
    }
}

/// Expand a product of irreducible factors to `O(window)`.
pub fn zeta_product(
    group: &Arc<GradedGroup>,
    factors: &[IrreducibleOrbitFactor],
    window: &Trunc,
) -> Result<NovikovSeries> {
    let mut acc = NovikovSeries::one(group, 1, window.clone());
    for f in factors {
        let g = group.grade(&f.class)?;
        if !g.is_positive() {
            return Err(Error::OrbitNotPositive(render_monomial(group, &f.class)));
        }
        let sign = if f.plus { 1 } else { -1 };
        let base = NovikovSeries::one(group, 1, window.clone()).add(&NovikovSeries::monomial(
            group,
            f.class.clone(),
            crate::cyclotomic::CyclotomicNumber::from_int(1, sign),
            window.clone(),
        )?);
        let factor = if f.exponent > 0 { base } else { base.invert_one_plus(window)? };
        acc = acc.mul(&factor);
    }
    Ok(acc)
}

/// Read the k-cover orbits off the logarithm of one factor:
/// `log (1 + s h)^e = e * sum (-1)^{k+1} s^k h^k / k`, so the k-cover orbit
/// has sign `e * s^k * (-1)^{k+1}`.
pub fn expand_factor_to_orbits(
    group: &Arc<GradedGroup>,
    factor: &IrreducibleOrbitFactor,
    window: &Trunc,
) -> Result<OrbitSet> {
    let g = group.grade(&factor.class)?;
    if !g.is_positive() {
        return Err(Error::OrbitNotPositive(render_monomial(group, &factor.class)));
    }
    let s: i64 = if factor.plus { 1 } else { -1 };
    let e = factor.exponent as i64;
    let mut entries = Vec::new();
    let mut k: u32 = 1;
    loop {
        let class = group.scale(&factor.class, k as i64);
        let grade = group.grade(&class)?;
        if !window.admits(&grade) {
            break;
        }
        let sk = if k % 2 == 0 { 1 } else { s };
        let parity = if k % 2 == 0 { -1 } else { 1 };
        let sign = (e * sk * parity) as i8;
        entries.push(OrbitEntry { orbit: ClosedOrbit { class, period: k, sign }, count: 1 });
        k += 1;
    }
    OrbitSet::new(group, entries, window.clone())
}

pub type IntMatrix = Vec<Vec<i64>>;

fn big_mat(m: &IntMatrix) -> Vec<Vec<BigInt>> {
    m.iter().map(|row| row.iter().map(|&x| BigInt::from(x)).collect()).collect()
}

fn big_mat_mul(a: &[Vec<BigInt>], b: &[Vec<BigInt>]) -> Vec<Vec<BigInt>> {
    let n = a.len();
    let m = b[0].len();
    let k = b.len();
    let mut out = vec![vec![BigInt::zero(); m]; n];
    for i in 0..n {
        for j in 0..m {
            let mut acc = BigInt::zero();
            for l in 0..k {
                acc += &a[i][l] * &b[l][j];
            }
            out[i][j] = acc;
        }
    }
    out
}

fn big_trace(a: &[Vec<BigInt>]) -> BigInt {
    (0..a.len()).map(|i| a[i][i].clone()).sum()
}

fn check_square(maps: &[IntMatrix]) -> Result<()> {
    for m in maps {
        let n = m.len();
        for row in m {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: row.len() });
            }
        }
    }
    Ok(())
}

/// Lefschetz zeta function of fiber homology maps: `exp sum L(phi^k) t^k/k`
/// with `L(phi^k) = sum_i (-1)^i tr(H_i^k)`, over `H = Z` with weight one.
pub fn lefschetz_zeta(group: &Arc<GradedGroup>, maps: &[IntMatrix], window: &Trunc) -> Result<NovikovSeries> {
    if group.free_rank() != 1 || group.torsion_order() != 0 {
        return Err(Error::Scenario("fiber data needs the infinite cyclic group".into()));
    }
    check_square(maps)?;
    let mut powers: Vec<Vec<Vec<BigInt>>> = maps.iter().map(big_mat).collect();
    let originals = powers.clone();
    let mut log = NovikovSeries::zero(group, 1, window.clone());
    let mut k: i64 = 1;
    loop {
        let grade = Grade::from_int(k);
        if !window.admits(&grade) {
            break;
        }
        let mut lefschetz = BigInt::zero();
        for (i, p) in powers.iter().enumerate() {
            if p.is_empty() {
                continue;
            }
            let tr = big_trace(p);
            if i % 2 == 0 {
                lefschetz += tr;
            } else {
                lefschetz -= tr;
            }
        }
        if !lefschetz.is_zero() {
            let coeff = BigRational::new(lefschetz, BigInt::from(k));
            log = log.add(&NovikovSeries::monomial(
                group,
                GroupElement { free: vec![k], torsion: 0 },
                crate::cyclotomic::CyclotomicNumber::from_rational(1, coeff),
                window.clone(),
            )?);
        }
        for (p, orig) in powers.iter_mut().zip(&originals) {
            if !p.is_empty() {
                *p = big_mat_mul(p, orig);
            }
        }
        k += 1;
    }
    log.exp_plus(window)
}

/// The alternating determinant product `prod det(1 - t H_i)^{(-1)^{i+1}}`
/// expanded to the window.
pub fn mapping_torus_torsion(
    group: &Arc<GradedGroup>,
    maps: &[IntMatrix],
    window: &Trunc,
) -> Result<FieldElement> {
    if group.free_rank() != 1 || group.torsion_order() != 0 {
        return Err(Error::Scenario("fiber data needs the infinite cyclic group".into()));
    }
    check_square(maps)?;
    let mut acc = FieldElement::one(group, 1, Trunc::Infinite);
    for (i, m) in maps.iter().enumerate() {
        let n = m.len();
        if n == 0 {
            continue;
        }
        let mut mat = Mat::zero(group, 1, n, n);
        for r in 0..n {
            for c in 0..n {
                let mut terms = Vec::new();
                if r == c {
                    terms.push((GroupElement { free: vec![0], torsion: 0 }, crate::cyclotomic::CyclotomicNumber::from_int(1, 1)));
                }
                if m[r][c] != 0 {
                    terms.push((
                        GroupElement { free: vec![1], torsion: 0 },
                        crate::cyclotomic::CyclotomicNumber::from_int(1, -m[r][c]),
                    ));
                }
                mat.set(r, c, NovikovSeries::from_terms(group, 1, terms, Trunc::Infinite)?);
            }
        }
        let det = mat.det(window)?;
        if det.is_zero() {
            return Err(Error::ZeroSeries);
        }
        let fe = FieldElement::from_series(&det)?;
        // Exponent (-1)^{i+1}: odd homology contributes positively.
        acc = if i % 2 == 1 { acc.mul(&fe) } else { acc.mul(&fe.inverse(window)?) };
    }
    Ok(acc)
}

/// The invariant `I = T_m * zeta`, one value per field summand.
#[derive(Debug, Clone)]
pub struct InvariantI {
    pub ambiguity: Ambiguity,
    pub summands: Vec<TorsionSummand>,
}

impl InvariantI {
    pub fn summand(&self, order: u32) -> Option<&TorsionSummand> {
        self.summands.iter().find(|s| s.order == order)
    }

    pub fn eq_mod(&self, other: &InvariantI, bound: &Trunc, ambiguity: Ambiguity) -> bool {
        if self.summands.len() != other.summands.len() {
            return false;
        }
        self.summands.iter().zip(&other.summands).all(|(a, b)| {
            a.order == b.order
                && match (&a.value, &b.value) {
                    (None, None) => true,
                    (Some(x), Some(y)) => {
                        x.canonicalize(ambiguity).eq_mod(&y.canonicalize(ambiguity), bound)
                    }
                    _ => false,
                }
        })
    }
}

/// Per-summand product of torsion and zeta.
pub fn invariant_i(complex: &BasedComplex, orbits: &OrbitSet) -> Result<InvariantI> {
    if complex.group() != orbits.group() {
        return Err(Error::GroupMismatch);
    }
    let torsion = complex.torsion()?;
    let zeta = orbits.zeta(complex.trunc())?;
    combine_invariant(&torsion, &zeta, complex.trunc())
}

/// Combine an already computed torsion with a zeta series.
pub fn combine_invariant(torsion: &TorsionValue, zeta: &NovikovSeries, window: &Trunc) -> Result<InvariantI> {
    let split = split_group_algebra(zeta.group().torsion_order());
    let mut summands = Vec::new();
    for (ts, summand) in torsion.summands.iter().zip(&split.summands) {
        debug_assert_eq!(ts.order, summand.order);
        let value = match &ts.value {
            None => None,
            Some(t) => {
                let z = zeta.project_summand(summand).truncate_to(window);
                let zf = FieldElement::from_series(&z)?;
                Some(t.mul(&zf))
            }
        };
        summands.push(TorsionSummand { order: ts.order, value });
    }
    Ok(InvariantI { ambiguity: torsion.ambiguity, summands })
}

/// Lift closed-orbit data off integer fixed-point counts: grade-k entries
/// `(t^k, period k, sign L_k)` with multiplicity `|L_k|`.
pub fn orbits_from_lefschetz(group: &Arc<GradedGroup>, maps: &[IntMatrix], window: &Trunc) -> Result<OrbitSet> {
    check_square(maps)?;
    let mut powers: Vec<Vec<Vec<BigInt>>> = maps.iter().map(big_mat).collect();
    let originals = powers.clone();
    let mut entries = Vec::new();
    let mut k: i64 = 1;
    loop {
        let grade = Grade::from_int(k);
        if !window.admits(&grade) {
            break;
        }
        let mut lefschetz = BigInt::zero();
        for (i, p) in powers.iter().enumerate() {
            if p.is_empty() {
                continue;
            }
            let tr = big_trace(p);
            if i % 2 == 0 {
                lefschetz += tr;
            } else {
                lefschetz -= tr;
            }
        }
        if !lefschetz.is_zero() {
            let sign: i8 = if lefschetz >= BigInt::zero() { 1 } else { -1 };
            let count: u64 = lefschetz
                .magnitude()
                .try_into()
                .map_err(|_| Error::Scenario("fixed-point count overflow".into()))?;
            entries.push(OrbitEntry {
                orbit: ClosedOrbit {
                    class: GroupElement { free: vec![k], torsion: 0 },
                    period: k as u32,
                    sign,
                },
                count,
            });
        }
        for (p, orig) in powers.iter_mut().zip(&originals) {
            if !p.is_empty() {
                *p = big_mat_mul(p, orig);
            }
        }
        k += 1;
    }
    OrbitSet::new(group, entries, window.clone())
}
