//! Finite cyclic covers: the Norm and Trace of multiplication on the
//! Novikov ring viewed as a rank-k module over the subcover's ring,
//! covers of complexes and orbit sets, and the exact-form embedding trick.
//!
//! `Norm(y) = prod sigma_i(y)` and `Tr(y) = sum sigma_i(y)` where
//! `sigma_i(h) = h * theta^{i m(h)}` with `theta` a primitive k-th root of
//! unity; coefficients are temporarily extended by `zeta_k` and the result
//! must descend back, which doubles as an internal consistency check. The
//! fraction-level Norm requires the quotient to annihilate the torsion
//! subgroup, so that the field decompositions on both sides line up.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_integer::Integer;
use num_rational::BigRational;
use num_traits::One;

use crate::complex::{BasedComplex, Generator};
use crate::cyclotomic::CyclotomicNumber;
use crate::error::{Error, Result};
use crate::grading::{kernel_of_quotient, CyclicQuotient, GradedGroup, GroupElement, KernelData};
use crate::matrix::Mat;
use crate::moves::FlowState;
use crate::orbit::{ClosedOrbit, OrbitEntry, OrbitSet};
use crate::series::{FieldElement, NovikovSeries, Trunc};
use crate::text::render_monomial;

/// A cyclic quotient together with its kernel data, ready to push
/// invariants down to the subcover.
#[derive(Debug, Clone)]
pub struct CoverContext {
    host: Arc<GradedGroup>,
    pub quotient: CyclicQuotient,
    pub kernel: KernelData,
}

impl CoverContext {
    pub fn new(host: &Arc<GradedGroup>, quotient: CyclicQuotient) -> Result<Self> {
        if !quotient.annihilates_torsion(host) {
            return Err(Error::CoverAssumption);
        }
        let kernel = kernel_of_quotient(host, &quotient)?;
        Ok(CoverContext { host: host.clone(), quotient, kernel })
    }

    pub fn host(&self) -> &Arc<GradedGroup> {
        &self.host
    }

    pub fn subgroup(&self) -> &Arc<GradedGroup> {
        &self.kernel.group
    }

    pub fn modulus(&self) -> u32 {
        self.quotient.modulus
    }

    /// Express a kernel element of `H` in `K`-coordinates.
    pub fn pullback_element(&self, h: &GroupElement) -> Result<GroupElement> {
        if self.quotient.apply(&self.host, h)? != 0 {
            return Err(Error::DescentFailed(format!(
                "{} is not in the kernel of the quotient",
                render_monomial(&self.host, h)
            )));
        }
        let r = self.host.free_rank();
        let cols: Vec<Vec<BigRational>> = self
            .kernel
            .free_embedding
            .iter()
            .map(|e| e.free.iter().map(|&c| BigRational::from_integer(c.into())).collect())
            .collect();
        let rhs: Vec<BigRational> =
            h.free.iter().map(|&c| BigRational::from_integer(c.into())).collect();
        let sol = solve_exact(&cols, &rhs, r).ok_or_else(|| {
            Error::DescentFailed(format!(
                "{} does not lie in the kernel lattice",
                render_monomial(&self.host, h)
            ))
        })?;
        let mut free = Vec::with_capacity(sol.len());
        for x in &sol {
            if !x.denom().is_one() {
                return Err(Error::DescentFailed(format!(
                    "{} has fractional kernel coordinates",
                    render_monomial(&self.host, h)
                )));
            }
            let v: i64 = x
                .numer()
                .try_into()
                .map_err(|_| Error::DescentFailed("kernel coordinate overflow".into()))?;
            free.push(v);
        }
        // Under the torsion assumption the kernel keeps the torsion factor
        // and its generator on the nose.
        Ok(GroupElement { free, torsion: h.torsion })
    }

    /// Pull a series back along the inclusion: keep the kernel-supported
    /// terms, in `K`-coordinates.
    pub fn pullback_series(&self, y: &NovikovSeries) -> Result<NovikovSeries> {
        let mut out = NovikovSeries::zero(self.subgroup(), y.coeff_order(), y.trunc().clone());
        for (elem, _, coeff) in y.terms() {
            if self.quotient.apply(&self.host, elem)? == 0 {
                let k_elem = self.pullback_element(elem)?;
                out = out.add(&NovikovSeries::monomial(
                    self.subgroup(),
                    k_elem,
                    coeff.clone(),
                    y.trunc().clone(),
                )?);
            }
        }
        Ok(out)
    }

    /// `sigma_i`: twist each monomial by `theta^{i m(h)}`, extending the
    /// coefficients to `Q(zeta_L)` for `L = lcm(d, k)`.
    fn sigma(&self, y: &NovikovSeries, i: u32, big_order: u32) -> Result<NovikovSeries> {
        let k = self.modulus();
        let step = (big_order / k) as i64;
        let mut out = NovikovSeries::zero(&self.host, big_order, y.trunc().clone());
        for (elem, _, coeff) in y.terms() {
            let m_h = self.quotient.apply(&self.host, elem)? as i64;
            let twist = CyclotomicNumber::root_power(big_order, step * (i as i64) * m_h);
            let c = coeff.embed(big_order)?.mul(&twist)?;
            out = out.add(&NovikovSeries::monomial(&self.host, elem.clone(), c, y.trunc().clone())?);
        }
        Ok(out)
    }

    /// `Norm(y) = prod_{i<k} sigma_i(y)`, recognized as a series over `K`.
    pub fn norm_series(&self, y: &NovikovSeries) -> Result<NovikovSeries> {
        let k = self.modulus();
        let d = y.coeff_order();
        let big = lcm(d.max(1), k);
        let mut acc = NovikovSeries::one(&self.host, big, Trunc::Infinite);
        for i in 0..k {
            acc = acc.mul(&self.sigma(y, i, big)?);
        }
        self.descend_series(&acc, d)
    }

    /// `Tr(y) = sum_{i<k} sigma_i(y)`; equals `k * pullback(y)`.
    pub fn trace_series(&self, y: &NovikovSeries) -> Result<NovikovSeries> {
        let k = self.modulus();
        let d = y.coeff_order();
        let big = lcm(d.max(1), k);
        let mut acc = NovikovSeries::zero(&self.host, big, y.trunc().clone());
        for i in 0..k {
            acc = acc.add(&self.sigma(y, i, big)?);
        }
        self.descend_series(&acc, d)
    }

    /// Check theta-freeness and kernel support, and rewrite over `K`.
    fn descend_series(&self, y: &NovikovSeries, target_order: u32) -> Result<NovikovSeries> {
        let mut out = NovikovSeries::zero(self.subgroup(), target_order, y.trunc().clone());
        for (elem, _, coeff) in y.terms() {
            let c = coeff.descend(target_order)?;
            let k_elem = self.pullback_element(elem)?;
            out = out.add(&NovikovSeries::monomial(self.subgroup(), k_elem, c, y.trunc().clone())?);
        }
        Ok(out)
    }

    /// Push a `K`-series forward along the inclusion into `H` (renders
    /// subcover values in host coordinates).
    pub fn pushforward_series(&self, y: &NovikovSeries) -> Result<NovikovSeries> {
        let mut out = NovikovSeries::zero(&self.host, y.coeff_order(), y.trunc().clone());
        for (elem, _, coeff) in y.terms() {
            let h = self.kernel.embed(&self.host, elem);
            out = out.add(&NovikovSeries::monomial(&self.host, h, coeff.clone(), y.trunc().clone())?);
        }
        Ok(out)
    }

    /// Norm of a leading-unit factorization (used summand-wise on torsion
    /// and invariant values).
    pub fn norm_field_element(&self, fe: &FieldElement, window: &Trunc) -> Result<FieldElement> {
        let series = fe.to_series().truncate_to(window);
        let normed = self.norm_series(&series)?;
        FieldElement::from_series(&normed)
    }

    /// The covering complex: every generator splits into `k` copies indexed
    /// by the coset representatives, and each boundary entry decomposes
    /// along `Lambda = (+) c_j * iota(Lambda-hat)`.
    pub fn cover_complex(&self, c: &BasedComplex) -> Result<BasedComplex> {
        if c.group() != &self.host {
            return Err(Error::GroupMismatch);
        }
        let k = self.modulus() as usize;
        let sub = self.subgroup().clone();
        let mut generators = Vec::with_capacity(c.generators().len() * k);
        for g in c.generators() {
            for j in 0..k {
                generators.push(Generator {
                    name: format!("{}@{}", g.name, j),
                    degree: g.degree,
                    lift: GroupElement::identity(sub.free_rank()),
                });
            }
        }
        let mut boundary: BTreeMap<i64, Mat> = BTreeMap::new();
        for (&deg, m) in c.boundary.iter() {
            let rows = m.rows() * k;
            let cols = m.cols() * k;
            let mut out = Mat::zero(&sub, 1, rows, cols);
            for col in 0..m.cols() {
                for row in 0..m.rows() {
                    let entry = m.get(row, col);
                    if entry.is_zero() {
                        continue;
                    }
                    for j in 0..k {
                        let c_j = &self.kernel.section[j];
                        for (h, _, coeff) in entry.terms() {
                            let target = (self.quotient.apply(&self.host, h)? as usize + j) % k;
                            let c_t = &self.kernel.section[target];
                            let shifted = self.host.sub(&self.host.add(h, c_j), c_t);
                            let kappa = self.pullback_element(&shifted)?;
                            let mono = NovikovSeries::monomial(
                                &sub,
                                kappa,
                                coeff.clone(),
                                entry.trunc().clone(),
                            )?;
                            let slot = out.get(row * k + target, col * k + j).add(&mono);
                            out.set(row * k + target, col * k + j, slot);
                        }
                    }
                }
            }
            boundary.insert(deg, out);
        }
        BasedComplex::new(sub, generators, boundary, c.trunc().clone())
    }

    /// Lift an orbit set: an orbit survives iff its class lies in the
    /// kernel; it then contributes `k/l` lifts of period `p/l`, where `l`
    /// is the order of the quotient of its irreducible class.
    pub fn cover_orbits(&self, s: &OrbitSet) -> Result<OrbitSet> {
        if s.group() != &self.host {
            return Err(Error::GroupMismatch);
        }
        let k = self.modulus();
        let mut entries = Vec::new();
        for e in s.entries() {
            let class = &e.orbit.class;
            if self.quotient.apply(&self.host, class)? != 0 {
                continue;
            }
            let p = e.orbit.period as i64;
            let mut base_free = Vec::with_capacity(class.free.len());
            for &c in &class.free {
                if c % p != 0 {
                    return Err(Error::OrbitNotDivisible {
                        class: render_monomial(&self.host, class),
                        period: e.orbit.period,
                    });
                }
                base_free.push(c / p);
            }
            // Order of m(class / p) in Z/k; the quotient ignores torsion
            // under the standing assumption.
            let base = GroupElement { free: base_free, torsion: 0 };
            let m_base = self.quotient.apply(&self.host, &base)? as i64;
            let l = (k as i64) / (k as i64).gcd(&m_base);
            debug_assert_eq!(p % l, 0, "l divides the period");
            let k_class = self.pullback_element(class)?;
            entries.push(OrbitEntry {
                orbit: ClosedOrbit {
                    class: k_class,
                    period: (p / l) as u32,
                    sign: e.orbit.sign,
                },
                count: e.count * (k as u64 / l as u64),
            });
        }
        OrbitSet::new(self.subgroup(), entries, s.complete_below().clone())
    }

    /// Cover a full state.
    pub fn cover_state(&self, state: &FlowState) -> Result<FlowState> {
        FlowState::new(self.cover_complex(&state.complex)?, self.cover_orbits(&state.orbits)?)
    }
}

fn lcm(a: u32, b: u32) -> u32 {
    a / a.gcd(&b) * b
}

/// Solve `A x = b` over the rationals (columns given); `None` when
/// inconsistent.
fn solve_exact(cols: &[Vec<BigRational>], b: &[BigRational], rows: usize) -> Option<Vec<BigRational>> {
    use num_traits::Zero;
    let n = cols.len();
    let mut m: Vec<Vec<BigRational>> = (0..rows)
        .map(|r| {
            let mut row: Vec<BigRational> = cols.iter().map(|c| c[r].clone()).collect();
            row.push(b[r].clone());
            row
        })
        .collect();
    let mut rank = 0;
    let mut pivots = Vec::new();
    for col in 0..n {
        let Some(p) = (rank..rows).find(|&r| !m[r][col].is_zero()) else { continue };
        m.swap(rank, p);
        let inv = m[rank][col].recip();
        for c in col..=n {
            m[rank][c] = &m[rank][c] * &inv;
        }
        for r in 0..rows {
            if r != rank && !m[r][col].is_zero() {
                let f = m[r][col].clone();
                for c in col..=n {
                    let sub = &f * &m[rank][c];
                    m[r][c] = &m[r][c] - sub;
                }
            }
        }
        pivots.push(col);
        rank += 1;
    }
    for r in rank..rows {
        if !m[r][n].is_zero() {
            return None;
        }
    }
    let mut x = vec![BigRational::zero(); n];
    for (i, &col) in pivots.iter().enumerate() {
        x[col] = m[i][n].clone();
    }
    Some(x)
}

/// The exact-form reduction: reinterpret a polynomial group-ring complex
/// over the Novikov ring with the target grading, paired with the empty
/// orbit set (a steep exact form has no closed orbits). Torsion computed
/// on the embedded side equals the image of the group-ring torsion.
pub fn latour_embed(c_df: &BasedComplex, target: &Arc<GradedGroup>) -> Result<FlowState> {
    let src = c_df.group();
    if src.free_rank() != target.free_rank() || src.torsion_order() != target.torsion_order() {
        return Err(Error::GroupMismatch);
    }
    for m in c_df.boundary.values() {
        for r in 0..m.rows() {
            for c in 0..m.cols() {
                if m.get(r, c).trunc().is_finite() {
                    return Err(Error::NotPolynomial);
                }
            }
        }
    }
    let generators: Vec<Generator> = c_df.generators().to_vec();
    let mut boundary: BTreeMap<i64, Mat> = BTreeMap::new();
    for (&d, m) in c_df.boundary.iter() {
        let mut out = Mat::zero(target, 1, m.rows(), m.cols());
        for r in 0..m.rows() {
            for c in 0..m.cols() {
                let entry = m.get(r, c);
                let terms: Vec<(GroupElement, CyclotomicNumber)> =
                    entry.terms().map(|(e, _, co)| (e.clone(), co.clone())).collect();
                out.set(r, c, NovikovSeries::from_terms(target, 1, terms, Trunc::Infinite)?);
            }
        }
        boundary.insert(d, out);
    }
    let complex = BasedComplex::new(target.clone(), generators, boundary, c_df.trunc().clone())?;
    let orbits = OrbitSet::empty(target, c_df.trunc().clone());
    FlowState::new(complex, orbits)
}
