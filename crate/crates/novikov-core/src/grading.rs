//! Finitely generated abelian groups `Z^r (+) Z/n` carrying a real-valued
//! grading homomorphism, and the quotient/kernel data needed for finite
//! cyclic covers.
//!
//! Grades are kept exact: a weight is `a + b*sqrt(2)` with rational `a, b`,
//! which is enough for every scenario we support while keeping comparisons
//! deterministic. The grading must be injective on the free part, so the
//! leading term of any nonzero series is a single monomial.

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// An exact element of `Q + Q*sqrt(2)`, used for grading weights and grades.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Grade {
    rat: BigRational,
    rt2: BigRational,
}

impl Grade {
    pub fn new(rat: BigRational, rt2: BigRational) -> Self {
        Grade { rat, rt2 }
    }

    pub fn zero() -> Self {
        Grade { rat: BigRational::zero(), rt2: BigRational::zero() }
    }

    pub fn from_int(n: i64) -> Self {
        Grade { rat: BigRational::from(BigInt::from(n)), rt2: BigRational::zero() }
    }

    pub fn from_rational(r: BigRational) -> Self {
        Grade { rat: r, rt2: BigRational::zero() }
    }

    /// The rational part `a` of `a + b*sqrt(2)`.
    pub fn rational_part(&self) -> &BigRational {
        &self.rat
    }

    /// The coefficient `b` of `sqrt(2)`.
    pub fn sqrt2_part(&self) -> &BigRational {
        &self.rt2
    }

    pub fn is_zero(&self) -> bool {
        self.rat.is_zero() && self.rt2.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.signum() > 0
    }

    pub fn is_negative(&self) -> bool {
        self.signum() < 0
    }

    /// Exact sign of `a + b*sqrt(2)`.
    ///
    /// For mixed signs the comparison reduces to `a^2` against `2 b^2`;
    /// equality there would force `sqrt(2)` rational, so it cannot occur
    /// for nonzero entries.
    pub fn signum(&self) -> i32 {
        let sa = rational_sign(&self.rat);
        let sb = rational_sign(&self.rt2);
        match (sa, sb) {
            (0, 0) => 0,
            (a, b) if a >= 0 && b >= 0 => 1,
            (a, b) if a <= 0 && b <= 0 => -1,
            _ => {
                // One part positive, one negative: compare |a| with |b|*sqrt(2).
                let a2 = &self.rat * &self.rat;
                let b2 = BigRational::from(BigInt::from(2)) * &self.rt2 * &self.rt2;
                match a2.cmp(&b2) {
                    Ordering::Greater => sa,
                    Ordering::Less => sb,
                    Ordering::Equal => 0, // unreachable for nonzero parts
                }
            }
        }
    }

    pub fn scale_int(&self, n: i64) -> Grade {
        let f = BigRational::from(BigInt::from(n));
        Grade { rat: &self.rat * &f, rt2: &self.rt2 * &f }
    }

    pub fn to_f64(&self) -> f64 {
        self.rat.to_f64().unwrap_or(f64::NAN)
            + self.rt2.to_f64().unwrap_or(f64::NAN) * std::f64::consts::SQRT_2
    }

    /// Parse `"3"`, `"1/2"`, `"3+2r2"`, `"-r2"`, `"1-1/2r2"` where `r2`
    /// stands for `sqrt(2)`.
    pub fn parse(text: &str) -> Result<Grade> {
        let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        if s.is_empty() {
            return Err(Error::Parse("empty grade".into()));
        }
        // Split into at most two signed parts.
        let mut parts: Vec<String> = Vec::new();
        let mut cur = String::new();
        for (i, c) in s.chars().enumerate() {
            if (c == '+' || c == '-') && i > 0 && !cur.is_empty() {
                parts.push(cur.clone());
                cur.clear();
            }
            cur.push(c);
        }
        parts.push(cur);
        if parts.len() > 2 {
            return Err(Error::Parse(format!("malformed grade `{text}`")));
        }
        let mut rat = BigRational::zero();
        let mut rt2 = BigRational::zero();
        for p in parts {
            if let Some(head) = p.strip_suffix("r2") {
                let coeff = match head {
                    "" | "+" => BigRational::from(BigInt::from(1)),
                    "-" => BigRational::from(BigInt::from(-1)),
                    other => parse_rational(other)?,
                };
                if !rt2.is_zero() {
                    return Err(Error::Parse(format!("repeated r2 part in `{text}`")));
                }
                rt2 = coeff;
            } else {
                if !rat.is_zero() {
                    return Err(Error::Parse(format!("repeated rational part in `{text}`")));
                }
                rat = parse_rational(&p)?;
            }
        }
        Ok(Grade { rat, rt2 })
    }
}

pub(crate) fn parse_rational(text: &str) -> Result<BigRational> {
    let s = text.trim();
    let s = s.strip_prefix('+').unwrap_or(s);
    if let Some((num, den)) = s.split_once('/') {
        let n: BigInt = num.trim().parse().map_err(|_| Error::Parse(format!("bad numerator `{num}`")))?;
        let d: BigInt = den.trim().parse().map_err(|_| Error::Parse(format!("bad denominator `{den}`")))?;
        if d.is_zero() {
            return Err(Error::Parse("zero denominator".into()));
        }
        Ok(BigRational::new(n, d))
    } else {
        let n: BigInt = s.parse().map_err(|_| Error::Parse(format!("bad rational `{s}`")))?;
        Ok(BigRational::from(n))
    }
}

pub(crate) fn format_rational(r: &BigRational) -> String {
    if r.denom() == &BigInt::from(1) {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn rational_sign(r: &BigRational) -> i32 {
    if r.is_zero() {
        0
    } else if r.is_positive() {
        1
    } else {
        -1
    }
}

impl fmt::Display for Grade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.rt2.is_zero() {
            return write!(f, "{}", format_rational(&self.rat));
        }
        let rt2_str = format!("{}r2", format_rational(&self.rt2.abs()));
        if self.rat.is_zero() {
            if self.rt2.is_negative() {
                write!(f, "-{rt2_str}")
            } else {
                write!(f, "{rt2_str}")
            }
        } else {
            let sign = if self.rt2.is_negative() { '-' } else { '+' };
            write!(f, "{}{}{}", format_rational(&self.rat), sign, rt2_str)
        }
    }
}

impl PartialOrd for Grade {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Grade {
    fn cmp(&self, other: &Self) -> Ordering {
        let diff = self.clone() - other.clone();
        match diff.signum() {
            0 => Ordering::Equal,
            s if s < 0 => Ordering::Less,
            _ => Ordering::Greater,
        }
    }
}

impl std::ops::Add for Grade {
    type Output = Grade;
    fn add(self, rhs: Grade) -> Grade {
        Grade { rat: self.rat + rhs.rat, rt2: self.rt2 + rhs.rt2 }
    }
}

impl std::ops::Sub for Grade {
    type Output = Grade;
    fn sub(self, rhs: Grade) -> Grade {
        Grade { rat: self.rat - rhs.rat, rt2: self.rt2 - rhs.rt2 }
    }
}

impl std::ops::Neg for Grade {
    type Output = Grade;
    fn neg(self) -> Grade {
        Grade { rat: -self.rat, rt2: -self.rt2 }
    }
}

/// An element of `Z^r (+) Z/n`, written additively.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupElement {
    pub free: Vec<i64>,
    pub torsion: u32,
}

impl GroupElement {
    pub fn identity(rank: usize) -> Self {
        GroupElement { free: vec![0; rank], torsion: 0 }
    }

    pub fn is_identity(&self) -> bool {
        self.torsion == 0 && self.free.iter().all(|&c| c == 0)
    }
}

/// `Z^r (+) Z/n` with grading weights on the free generators.
///
/// `torsion_order == 0` means there is no torsion factor; the grading is
/// forced to vanish on torsion and must be injective on the free part.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GradedGroup {
    free_rank: usize,
    torsion_order: u32,
    weights: Vec<Grade>,
}

impl GradedGroup {
    pub fn new(free_rank: usize, torsion_order: u32, weights: Vec<Grade>) -> Result<Arc<Self>> {
        if weights.len() != free_rank {
            return Err(Error::DimensionMismatch { expected: free_rank, got: weights.len() });
        }
        let g = GradedGroup { free_rank, torsion_order, weights };
        if !g.grading_injective() {
            return Err(Error::GradingNotInjective);
        }
        Ok(Arc::new(g))
    }

    /// `Z` with weight 1, the workhorse group of the worked examples.
    pub fn infinite_cyclic() -> Arc<Self> {
        GradedGroup::new(1, 0, vec![Grade::from_int(1)]).expect("Z with weight 1 is valid")
    }

    pub fn free_rank(&self) -> usize {
        self.free_rank
    }

    pub fn torsion_order(&self) -> u32 {
        self.torsion_order
    }

    pub fn weights(&self) -> &[Grade] {
        &self.weights
    }

    /// Injectivity of the grading on `Z^r`: the kernel of the rational
    /// 2 x r matrix (rational parts; sqrt2 parts) must be trivial, i.e. the
    /// matrix has rank r. This caps r at 2, which covers every supported
    /// weight family.
    fn grading_injective(&self) -> bool {
        let r = self.free_rank;
        if r == 0 {
            return true;
        }
        // Rows: rational parts, sqrt2 parts.
        let mut m: Vec<Vec<BigRational>> = vec![
            self.weights.iter().map(|w| w.rational_part().clone()).collect(),
            self.weights.iter().map(|w| w.sqrt2_part().clone()).collect(),
        ];
        let mut rank = 0;
        for col in 0..r {
            let pivot = (rank..2).find(|&i| !m[i][col].is_zero());
            let Some(p) = pivot else { return false };
            m.swap(rank, p);
            let inv = m[rank][col].recip();
            for c in col..r {
                m[rank][c] = &m[rank][c] * &inv;
            }
            for i in 0..2 {
                if i != rank && !m[i][col].is_zero() {
                    let f = m[i][col].clone();
                    for c in col..r {
                        let sub = &f * &m[rank][c];
                        m[i][c] = &m[i][c] - sub;
                    }
                }
            }
            rank += 1;
        }
        rank == r
    }

    pub fn check_element(&self, h: &GroupElement) -> Result<()> {
        if h.free.len() != self.free_rank {
            return Err(Error::DimensionMismatch { expected: self.free_rank, got: h.free.len() });
        }
        Ok(())
    }

    pub fn element(&self, free: Vec<i64>, torsion: i64) -> Result<GroupElement> {
        if free.len() != self.free_rank {
            return Err(Error::DimensionMismatch { expected: self.free_rank, got: free.len() });
        }
        Ok(GroupElement { free, torsion: self.reduce_torsion(torsion) })
    }

    pub fn reduce_torsion(&self, t: i64) -> u32 {
        if self.torsion_order == 0 {
            0
        } else {
            t.rem_euclid(self.torsion_order as i64) as u32
        }
    }

    /// The grading homomorphism: dot product of weights with the free part.
    pub fn grade(&self, h: &GroupElement) -> Result<Grade> {
        self.check_element(h)?;
        let mut acc = Grade::zero();
        for (w, &c) in self.weights.iter().zip(&h.free) {
            if c != 0 {
                acc = acc + w.scale_int(c);
            }
        }
        Ok(acc)
    }

    pub fn add(&self, a: &GroupElement, b: &GroupElement) -> GroupElement {
        debug_assert_eq!(a.free.len(), self.free_rank);
        debug_assert_eq!(b.free.len(), self.free_rank);
        let free = a.free.iter().zip(&b.free).map(|(x, y)| x + y).collect();
        GroupElement { free, torsion: self.reduce_torsion(a.torsion as i64 + b.torsion as i64) }
    }

    pub fn neg(&self, a: &GroupElement) -> GroupElement {
        let free = a.free.iter().map(|x| -x).collect();
        GroupElement { free, torsion: self.reduce_torsion(-(a.torsion as i64)) }
    }

    pub fn sub(&self, a: &GroupElement, b: &GroupElement) -> GroupElement {
        self.add(a, &self.neg(b))
    }

    pub fn scale(&self, a: &GroupElement, n: i64) -> GroupElement {
        let free = a.free.iter().map(|x| x * n).collect();
        GroupElement { free, torsion: self.reduce_torsion(a.torsion as i64 * n) }
    }
}

/// A surjection `m: H -> Z/k` given by residues of the generators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CyclicQuotient {
    pub modulus: u32,
    pub free_weights: Vec<u32>,
    pub torsion_weight: u32,
}

impl CyclicQuotient {
    pub fn new(group: &GradedGroup, modulus: u32, free_weights: Vec<i64>, torsion_weight: i64) -> Result<Self> {
        if modulus == 0 {
            return Err(Error::Scenario("cover modulus must be positive".into()));
        }
        if free_weights.len() != group.free_rank() {
            return Err(Error::DimensionMismatch { expected: group.free_rank(), got: free_weights.len() });
        }
        let k = modulus as i64;
        let fw: Vec<u32> = free_weights.iter().map(|w| w.rem_euclid(k) as u32).collect();
        let tw = torsion_weight.rem_euclid(k) as u32;
        let n = group.torsion_order();
        if n > 0 && (n as i64 * tw as i64) % k != 0 {
            return Err(Error::IllDefinedQuotient { order: n, residue: tw, modulus });
        }
        let q = CyclicQuotient { modulus, free_weights: fw, torsion_weight: tw };
        if !q.is_surjective(group) {
            return Err(Error::NotSurjective(modulus));
        }
        Ok(q)
    }

    fn is_surjective(&self, group: &GradedGroup) -> bool {
        let mut g = self.modulus as i64;
        for &w in &self.free_weights {
            g = g.gcd(&(w as i64));
        }
        if group.torsion_order() > 0 {
            g = g.gcd(&(self.torsion_weight as i64));
        }
        g == 1
    }

    /// Whether `m` annihilates the torsion subgroup (required by the cover
    /// operations on fractions).
    pub fn annihilates_torsion(&self, group: &GradedGroup) -> bool {
        group.torsion_order() == 0 || self.torsion_weight == 0
    }

    pub fn apply(&self, group: &GradedGroup, h: &GroupElement) -> Result<u32> {
        group.check_element(h)?;
        let k = self.modulus as i64;
        let mut acc: i64 = 0;
        for (&w, &c) in self.free_weights.iter().zip(&h.free) {
            acc = (acc + (w as i64 * (c.rem_euclid(k))).rem_euclid(k)).rem_euclid(k);
        }
        if group.torsion_order() > 0 {
            acc = (acc + self.torsion_weight as i64 * h.torsion as i64).rem_euclid(k);
        }
        Ok(acc as u32)
    }
}

/// Kernel `K = ker(m)` together with its embedding into `H` and a section.
#[derive(Debug, Clone)]
pub struct KernelData {
    /// `K` as an abstract graded group.
    pub group: Arc<GradedGroup>,
    /// Images in `H` of the free generators of `K`.
    pub free_embedding: Vec<GroupElement>,
    /// Image in `H` of the torsion generator of `K` (identity if none).
    pub torsion_embedding: GroupElement,
    /// Coset representatives `c_0..c_{k-1}` with `m(c_j) = j`.
    pub section: Vec<GroupElement>,
}

impl KernelData {
    /// Push a `K`-element forward into `H`.
    pub fn embed(&self, host: &GradedGroup, x: &GroupElement) -> GroupElement {
        let mut acc = GroupElement::identity(host.free_rank());
        for (img, &c) in self.free_embedding.iter().zip(&x.free) {
            if c != 0 {
                acc = host.add(&acc, &host.scale(img, c));
            }
        }
        if x.torsion != 0 {
            acc = host.add(&acc, &host.scale(&self.torsion_embedding, x.torsion as i64));
        }
        acc
    }
}

/// Compute `K = ker(m)` with inherited grading, a basis of `K` in
/// `H`-coordinates and coset representatives for `H/K`.
pub fn kernel_of_quotient(group: &Arc<GradedGroup>, m: &CyclicQuotient) -> Result<KernelData> {
    let r = group.free_rank();
    let n = group.torsion_order();
    let k = m.modulus as i64;
    let has_torsion_coord = n > 0;
    let s = r + usize::from(has_torsion_coord);

    // Weight row of the lift of m to Z^s (last coordinate = torsion generator).
    let mut w: Vec<i64> = m.free_weights.iter().map(|&x| x as i64).collect();
    if has_torsion_coord {
        w.push(m.torsion_weight as i64);
    }

    if s == 0 {
        // H trivial; surjectivity forces k = 1.
        return Ok(KernelData {
            group: group.clone(),
            free_embedding: vec![],
            torsion_embedding: GroupElement::identity(0),
            section: vec![GroupElement::identity(0)],
        });
    }

    // Lattice L = { v in Z^s : w.v = 0 mod k }, via the kernel of the row
    // [w_1 .. w_s k] projected away from the auxiliary coordinate.
    let mut row = w.clone();
    row.push(k);
    let kernel = integer_row_kernel(&row);
    let basis: Vec<Vec<i64>> = kernel.into_iter().map(|mut v| {
        v.truncate(s);
        v
    }).collect();
    debug_assert_eq!(basis.len(), s);
    let basis = column_hnf(basis, s);

    // Section: u with w.u = 1 mod k.
    let u = congruence_section(&w, k);
    let elem_of = |v: &[i64]| -> GroupElement {
        let free = v[..r].to_vec();
        let tors = if has_torsion_coord { v[r] } else { 0 };
        GroupElement { free, torsion: group.reduce_torsion(tors) }
    };
    let section: Vec<GroupElement> = (0..m.modulus)
        .map(|j| {
            let scaled: Vec<i64> = u.iter().map(|&c| c * j as i64).collect();
            elem_of(&scaled)
        })
        .collect();

    let grade_of = |v: &[i64]| -> Grade {
        let mut acc = Grade::zero();
        for (wt, &c) in group.weights().iter().zip(&v[..r]) {
            if c != 0 {
                acc = acc + wt.scale_int(c);
            }
        }
        acc
    };

    // Orient free generators toward positive grade so kernel
    // presentations print stably.
    let orient = |v: &mut Vec<i64>| {
        if grade_of(v).is_negative() {
            for c in v.iter_mut() {
                *c = -*c;
            }
        }
    };

    if !has_torsion_coord {
        let mut basis = basis;
        for v in basis.iter_mut() {
            orient(v);
        }
        let weights: Vec<Grade> = basis.iter().map(|v| grade_of(v)).collect();
        let kg = GradedGroup::new(s, 0, weights)?;
        let free_embedding: Vec<GroupElement> = basis.iter().map(|v| elem_of(v)).collect();
        return Ok(KernelData {
            group: kg,
            free_embedding,
            torsion_embedding: GroupElement::identity(r),
            section,
        });
    }

    // Torsion relation n*e_s expressed in the lattice basis, then split off
    // as a single invariant factor.
    let mut rel = vec![0i64; s];
    rel[s - 1] = n as i64;
    let x = solve_lower_triangular(&basis, &rel)
        .expect("n*e_s lies in the congruence lattice by well-definedness");
    let g = x.iter().fold(0i64, |acc, &c| acc.gcd(&c));
    debug_assert!(g > 0);
    let primitive: Vec<i64> = x.iter().map(|&c| c / g).collect();
    let v = unimodular_with_first_column(&primitive);

    // New basis C = B * V; torsion generator is C e_1, free generators the rest.
    let mut c_basis: Vec<Vec<i64>> = Vec::with_capacity(s);
    for col in 0..s {
        let mut vec_col = vec![0i64; s];
        for (j, b) in basis.iter().enumerate() {
            let f = v[j][col];
            if f != 0 {
                for (idx, val) in b.iter().enumerate() {
                    vec_col[idx] += f * val;
                }
            }
        }
        c_basis.push(vec_col);
    }

    let torsion_order = if g == 1 { 0 } else { g as u32 };
    for v in c_basis[1..].iter_mut() {
        orient(v);
    }
    let free_cols = &c_basis[1..];
    let weights: Vec<Grade> = free_cols.iter().map(|v| grade_of(v)).collect();
    let kg = GradedGroup::new(s - 1, torsion_order, weights)?;
    let free_embedding: Vec<GroupElement> = free_cols.iter().map(|v| elem_of(v)).collect();
    let torsion_embedding = elem_of(&c_basis[0]);
    Ok(KernelData { group: kg, free_embedding, torsion_embedding, section })
}

/// Basis of the kernel of a single integer row, by extended-gcd column
/// reduction of the identity.
fn integer_row_kernel(row: &[i64]) -> Vec<Vec<i64>> {
    let m = row.len();
    let mut vals = row.to_vec();
    let mut u: Vec<Vec<i64>> = (0..m)
        .map(|i| (0..m).map(|j| i64::from(i == j)).collect())
        .collect(); // u[i][j]: row i, column j
    for j in 1..m {
        let (a, b) = (vals[0], vals[j]);
        if b == 0 {
            continue;
        }
        let ext = extended_gcd(a, b);
        let (g, x, y) = (ext.0, ext.1, ext.2);
        let (p, q) = (a / g, b / g);
        for r in 0..m {
            let c0 = u[r][0];
            let cj = u[r][j];
            u[r][0] = x * c0 + y * cj;
            u[r][j] = -q * c0 + p * cj;
        }
        vals[0] = g;
        vals[j] = 0;
    }
    (1..m).map(|j| (0..m).map(|r| u[r][j]).collect()).collect()
}

fn extended_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    if b == 0 {
        if a >= 0 {
            (a, 1, 0)
        } else {
            (-a, -1, 0)
        }
    } else {
        let (g, x, y) = extended_gcd(b, a.rem_euclid(b));
        (g, y, x - (a.div_euclid(b)) * y)
    }
}

/// Column Hermite normal form of a nonsingular set of lattice vectors:
/// lower triangular, positive diagonal, entries left of the diagonal
/// reduced modulo it. Deterministic, so kernel bases print stably.
fn column_hnf(cols: Vec<Vec<i64>>, dim: usize) -> Vec<Vec<i64>> {
    let mut cols = cols;
    for i in 0..dim {
        // Clear row i across columns > i by gcd steps.
        loop {
            let mut nonzero: Vec<usize> = (i..cols.len()).filter(|&j| cols[j][i] != 0).collect();
            if nonzero.len() <= 1 {
                break;
            }
            nonzero.sort_by_key(|&j| cols[j][i].abs());
            let (ja, jb) = (nonzero[0], nonzero[1]);
            let q = cols[jb][i] / cols[ja][i];
            for row in 0..dim {
                cols[jb][row] -= q * cols[ja][row];
            }
        }
        let j = (i..cols.len()).find(|&j| cols[j][i] != 0).expect("full-rank lattice basis");
        cols.swap(i, j);
        if cols[i][i] < 0 {
            for row in 0..dim {
                cols[i][row] = -cols[i][row];
            }
        }
        // Reduce earlier columns in row i.
        for j in 0..i {
            let q = cols[j][i].div_euclid(cols[i][i]);
            if q != 0 {
                for row in 0..dim {
                    cols[j][row] -= q * cols[i][row];
                }
            }
        }
    }
    cols
}

/// Solve `B x = v` over the integers for a lower-triangular column basis `B`;
/// `None` when `v` is not in the lattice.
pub(crate) fn solve_lower_triangular(cols: &[Vec<i64>], v: &[i64]) -> Option<Vec<i64>> {
    let dim = v.len();
    let mut rem = v.to_vec();
    let mut x = vec![0i64; cols.len()];
    for i in 0..dim.min(cols.len()) {
        let d = cols[i][i];
        if d == 0 {
            if rem[i] != 0 {
                return None;
            }
            continue;
        }
        if rem[i] % d != 0 {
            return None;
        }
        let c = rem[i] / d;
        x[i] = c;
        for row in 0..dim {
            rem[row] -= c * cols[i][row];
        }
    }
    if rem.iter().all(|&c| c == 0) {
        Some(x)
    } else {
        None
    }
}

/// A vector `u` with `w.u = 1 (mod k)`; requires `gcd(w, k) = 1`.
fn congruence_section(w: &[i64], k: i64) -> Vec<i64> {
    let s = w.len();
    // Accumulate gcd with coefficients over the weights.
    let mut g = k;
    let mut coeffs = vec![0i64; s];
    for i in 0..s {
        if w[i] == 0 {
            continue;
        }
        let (g2, x, y) = extended_gcd(g, w[i]);
        for c in coeffs.iter_mut() {
            *c *= x;
        }
        coeffs[i] += y;
        g = g2;
        if g == 1 {
            break;
        }
    }
    debug_assert_eq!(g, 1, "section requires surjectivity");
    // Reduce the section entries mod k for tidiness.
    coeffs.iter().map(|&c| c.rem_euclid(k)).collect()
}

/// A unimodular matrix (rows) whose first column is the given primitive vector.
fn unimodular_with_first_column(x: &[i64]) -> Vec<Vec<i64>> {
    let s = x.len();
    // Row-reduce x to e_1 by 2x2 elementary steps, tracking the inverse.
    let mut v = x.to_vec();
    let mut inv: Vec<Vec<i64>> = (0..s)
        .map(|i| (0..s).map(|j| i64::from(i == j)).collect())
        .collect();
    for i in 1..s {
        if v[i] == 0 {
            continue;
        }
        let (g, a, b) = extended_gcd(v[0], v[i]);
        let (p, q) = (v[0] / g, v[i] / g);
        // W block: rows 0,i become (a*r0 + b*ri, -q*r0 + p*ri); inverse block
        // is [[p, -b], [q, a]].
        let new0 = g;
        let newi = 0;
        for col in 0..s {
            let c0 = inv[0][col];
            let ci = inv[i][col];
            inv[0][col] = p * c0 - b * ci;
            inv[i][col] = q * c0 + a * ci;
        }
        v[0] = new0;
        v[i] = newi;
    }
    debug_assert_eq!(v[0].abs(), 1);
    if v[0] == -1 {
        for col in 0..s {
            inv[0][col] = -inv[0][col];
        }
    }
    // inv is W^{-1} composed with the sign fix; its first column is x.
    let mut out: Vec<Vec<i64>> = vec![vec![0; s]; s];
    for (i, row) in inv.iter().enumerate() {
        for (j, &val) in row.iter().enumerate() {
            out[i][j] = val;
        }
    }
    debug_assert_eq!((0..s).map(|i| out[i][0]).collect::<Vec<_>>(), x.to_vec());
    out
}
