//! The five bifurcation moves as exact transformations on a
//! (complex, orbit set) state, and the invariance checker for
//! `I = T_m * zeta`.
//!
//! Each move transforms the state and predicts the exact ratios by which
//! torsion and zeta change; verification recomputes both invariants from
//! scratch and never trusts the predictions. Flow-line and orbit
//! cancellations change nothing and are modeled as no-ops with report-only
//! verification.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};

use crate::complex::{BasedComplex, Generator};
use crate::cyclotomic::{split_group_algebra, CyclotomicNumber};
use crate::error::{Error, Result};
use crate::grading::GroupElement;
use crate::matrix::Mat;
use crate::orbit::{invariant_i, ClosedOrbit, OrbitEntry, OrbitSet};
use crate::series::{Ambiguity, FieldElement, NovikovSeries, Trunc};
use crate::text::{render_monomial, render_series};

/// A Novikov complex paired with the closed orbits of the same flow.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub complex: BasedComplex,
    pub orbits: OrbitSet,
}

impl FlowState {
    pub fn new(complex: BasedComplex, orbits: OrbitSet) -> Result<Self> {
        if complex.group() != orbits.group() {
            return Err(Error::GroupMismatch);
        }
        Ok(FlowState { complex, orbits })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoOpKind {
    FlowLineCancel,
    OrbitCancel,
}

/// Data needed to undo a death (and to perform a standalone birth).
#[derive(Debug, Clone)]
pub struct BirthData {
    pub p: Generator,
    pub q: Generator,
    pub mu: u8,
    pub eta: NovikovSeries,
    /// Row of the pivot generator `q` over the surviving degree-(i-1)...
    /// no: entries `<d p', q'>`-style keyed by generator name.
    /// `v`: the row of `q` over the surviving degree-i columns.
    pub v: Vec<(String, NovikovSeries)>,
    /// `w`: the column of `p` over the surviving degree-(i-1) rows.
    pub w: Vec<(String, NovikovSeries)>,
    /// Row of `p` in the degree-(i+1) boundary, keyed by column name.
    pub upper_row: Vec<(String, NovikovSeries)>,
    /// Column of `q` in the degree-(i-1) boundary, keyed by row name.
    pub lower_col: Vec<(String, NovikovSeries)>,
}

/// One bifurcation event.
#[derive(Debug, Clone)]
pub enum BifurcationMove {
    /// Cancellation of flow lines or of closed orbits: nothing changes.
    NoOp(NoOpKind),
    /// Slide of `p` over a distinct critical point `q` of the same degree.
    Slide { p: String, q: String, sign: i8 },
    /// Slide of `p` over its own translate: conjugation by `A_p(x)`.
    SelfSlide { p: String, x: NovikovSeries, class: Option<GroupElement> },
    /// Death of the pair (p, q); `eta` is read off the complex.
    Death { p: String, q: String, mu: u8 },
    /// Birth, the formal inverse of a death.
    Birth(Box<BirthData>),
    /// Fault injection for negative controls: negate one orbit sign while
    /// claiming nothing changed.
    CorruptOrbit { index: usize },
}

impl fmt::Display for BifurcationMove {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BifurcationMove::NoOp(NoOpKind::FlowLineCancel) => write!(f, "noop(flow-line-cancel)"),
            BifurcationMove::NoOp(NoOpKind::OrbitCancel) => write!(f, "noop(orbit-cancel)"),
            BifurcationMove::Slide { p, q, sign } => {
                write!(f, "slide {p} over {}{q}", if *sign >= 0 { '+' } else { '-' })
            }
            BifurcationMove::SelfSlide { p, x, .. } => write!(f, "self-slide {p} by {}", render_series(x)),
            BifurcationMove::Death { p, q, mu } => write!(f, "death of ({p}, {q}), mu = {mu}"),
            BifurcationMove::Birth(data) => write!(f, "birth of ({}, {})", data.p.name, data.q.name),
            BifurcationMove::CorruptOrbit { index } => write!(f, "corrupt-orbit {index}"),
        }
    }
}

/// Exact predicted change: `T+ / T-` and `zeta+ / zeta-` as series.
#[derive(Debug, Clone)]
pub struct MovePrediction {
    pub torsion_ratio: NovikovSeries,
    pub zeta_ratio: NovikovSeries,
}

impl MovePrediction {
    fn identity(state: &FlowState) -> Self {
        let one = NovikovSeries::one(state.complex.group(), 1, Trunc::Infinite);
        MovePrediction { torsion_ratio: one.clone(), zeta_ratio: one }
    }
}

/// Result of applying one move.
#[derive(Debug, Clone)]
pub struct MoveOutcome {
    pub state: FlowState,
    pub prediction: MovePrediction,
    /// The move that undoes this one, when it exists.
    pub inverse: Option<BifurcationMove>,
}

pub fn apply_move(state: &FlowState, mv: &BifurcationMove) -> Result<MoveOutcome> {
    match mv {
        BifurcationMove::NoOp(kind) => Ok(MoveOutcome {
            state: state.clone(),
            prediction: MovePrediction::identity(state),
            inverse: Some(BifurcationMove::NoOp(*kind)),
        }),
        BifurcationMove::Slide { p, q, sign } => apply_slide(state, p, q, *sign),
        BifurcationMove::SelfSlide { p, x, class } => apply_self_slide(state, p, x, class.as_ref()),
        BifurcationMove::Death { p, q, mu } => apply_death(state, p, q, *mu),
        BifurcationMove::Birth(data) => apply_birth(state, data),
        BifurcationMove::CorruptOrbit { index } => {
            // Mis-sign a zeta factor: negate the indexed entry and every
            // cover of its irreducible class, which flips the factor while
            // keeping the zeta function integral.
            let mut entries = state.orbits.entries().to_vec();
            let target = entries
                .get(*index)
                .ok_or_else(|| Error::Scenario(format!("no orbit entry {index}")))?
                .orbit
                .clone();
            let group = state.orbits.group().clone();
            let base: Vec<i64> = target.class.free.iter().map(|c| c / target.period as i64).collect();
            let irreducible = GroupElement { free: base, torsion: 0 };
            for (idx, e) in entries.iter_mut().enumerate() {
                let covers = !irreducible.is_identity()
                    && (1..=64).any(|k| group.scale(&irreducible, k).free == e.orbit.class.free);
                if covers || idx == *index {
                    e.orbit.sign = -e.orbit.sign;
                }
            }
            let orbits = OrbitSet::new(&group, entries, state.orbits.complete_below().clone())?;
            Ok(MoveOutcome {
                state: FlowState { complex: state.complex.clone(), orbits },
                prediction: MovePrediction::identity(state),
                inverse: None,
            })
        }
    }
}

/// Slide bifurcation: conjugate by the elementary automorphism sending
/// `p -> p +- q`; the orbit set is untouched and both invariant factors are
/// predicted to stay fixed (the basis change has determinant one).
fn apply_slide(state: &FlowState, p: &str, q: &str, sign: i8) -> Result<MoveOutcome> {
    if sign != 1 && sign != -1 {
        return Err(Error::Scenario("slide sign must be +1 or -1".into()));
    }
    let group = state.complex.group().clone();
    let factor = NovikovSeries::constant(&group, CyclotomicNumber::from_int(1, sign as i64), Trunc::Infinite);
    let complex = state.complex.apply_transvection(p, q, &factor)?;
    Ok(MoveOutcome {
        state: FlowState { complex, orbits: state.orbits.clone() },
        prediction: MovePrediction::identity(state),
        inverse: Some(BifurcationMove::Slide { p: p.into(), q: q.into(), sign: -sign }),
    })
}

/// Find `k >= 1` with `elem = k * h`.
fn multiple_of(group: &crate::grading::GradedGroup, elem: &GroupElement, h: &GroupElement) -> Option<i64> {
    let j = h.free.iter().position(|&c| c != 0)?;
    if elem.free[j] % h.free[j] != 0 {
        return None;
    }
    let k = elem.free[j] / h.free[j];
    if k < 1 {
        return None;
    }
    if *elem == group.scale(h, k) {
        Some(k)
    } else {
        None
    }
}

/// Validate the unit `x = 1 + a_1 h + a_2 h^2 + ...` and return `h` with
/// the list of `(k, a_k)` pairs. Coefficients must be integers: they count
/// flow lines.
fn self_slide_shape(
    x: &NovikovSeries,
    class: Option<&GroupElement>,
) -> Result<(GroupElement, Vec<(i64, BigInt)>)> {
    let group = x.group().clone();
    let mut terms = x.terms();
    let Some((e0, _, c0)) = terms.next() else { return Err(Error::NotAUnit) };
    if !e0.is_identity() || !c0.is_one() {
        return Err(Error::NotAUnit);
    }
    let rest: Vec<(GroupElement, CyclotomicNumber)> =
        terms.map(|(e, _, c)| (e.clone(), c.clone())).collect();
    let h = match class {
        Some(h) => h.clone(),
        None => match rest.first() {
            Some((e, _)) => e.clone(),
            None => {
                // x = 1 exactly; any positive class will do.
                return Ok((GroupElement::identity(group.free_rank()), vec![]));
            }
        },
    };
    if !rest.is_empty() && !group.grade(&h)?.is_positive() {
        return Err(Error::NotAUnit);
    }
    let mut shape = Vec::new();
    for (e, c) in rest {
        let Some(k) = multiple_of(&group, &e, &h) else {
            return Err(Error::Scenario(format!(
                "self-slide unit supported outside the powers of {}",
                render_monomial(&group, &h)
            )));
        };
        let r = c.as_rational().ok_or_else(|| Error::NonIntegerFlowCount(c.to_string()))?;
        if !num_traits::One::is_one(r.denom()) {
            return Err(Error::NonIntegerFlowCount(r.to_string()));
        }
        shape.push((k, r.numer().clone()));
    }
    Ok((h, shape))
}

/// Self-slide: conjugate by `A_p(x)`; zeta picks up `x^{(-1)^{i+1}}`, the
/// unique factor keeping `I` invariant, realized on the orbit side by
/// integer multiples of the covers of the slide class.
fn apply_self_slide(
    state: &FlowState,
    p: &str,
    x: &NovikovSeries,
    class: Option<&GroupElement>,
) -> Result<MoveOutcome> {
    let (_, _shape) = self_slide_shape(x, class)?;
    let pi = state.complex.gen_index(p)?;
    let degree = state.complex.generators()[pi].degree;
    let window = state.complex.trunc().clone();
    let complex = state.complex.apply_unit_scale(p, x)?;

    let zeta_exponent: i64 = if degree.rem_euclid(2) == 0 { -1 } else { 1 }; // (-1)^{i+1}
    let x_fe = FieldElement::from_series(x)?;
    let zeta_ratio = x_fe.pow(zeta_exponent, &window)?.to_series();
    let torsion_ratio = x_fe.pow(-zeta_exponent, &window)?.to_series();

    // Orbit delta: log(zeta ratio) has k * r_k integral, so each class
    // h^k contributes |k r_k| covers of period k with sign sgn(r_k).
    let orbit_window = state.orbits.complete_below().clone();
    let one = NovikovSeries::one(state.complex.group(), 1, Trunc::Infinite);
    let ratio_for_orbits = x_fe.pow(zeta_exponent, &orbit_window)?.to_series();
    let delta_log = ratio_for_orbits.sub(&one).log_one_plus(&orbit_window)?;
    let mut new_entries = state.orbits.entries().to_vec();
    let group = state.complex.group().clone();
    let (h, _) = self_slide_shape(x, class)?;
    for (elem, _, coeff) in delta_log.terms() {
        let r = coeff
            .as_rational()
            .ok_or_else(|| Error::NonIntegerFlowCount(coeff.to_string()))?;
        let k = multiple_of(&group, elem, &h)
            .ok_or_else(|| Error::Scenario("zeta delta outside the slide class powers".into()))?;
        let weighted = r * num_rational::BigRational::from(BigInt::from(k));
        if !num_traits::One::is_one(weighted.denom()) {
            return Err(Error::NonIntegerFlowCount(weighted.to_string()));
        }
        let numer = weighted.numer().clone();
        if numer.is_zero() {
            continue;
        }
        let sign: i8 = if numer.is_negative() { -1 } else { 1 };
        let count: u64 = numer
            .magnitude()
            .try_into()
            .map_err(|_| Error::Scenario("orbit multiplicity overflow".into()))?;
        new_entries.push(OrbitEntry {
            orbit: ClosedOrbit { class: elem.clone(), period: k as u32, sign },
            count,
        });
    }
    let orbits = OrbitSet::new(&group, new_entries, orbit_window)?;

    let x_inv = x_fe.inverse(&window)?.to_series();
    Ok(MoveOutcome {
        state: FlowState { complex, orbits },
        prediction: MovePrediction { torsion_ratio, zeta_ratio },
        inverse: Some(BifurcationMove::SelfSlide { p: p.into(), x: x_inv, class: Some(h) }),
    })
}

/// Closed orbits created by a death: for each `k >= 1` the ordered
/// k-tuples of flow lines from the degenerate point to itself, summed with
/// weight `1/k`; aggregated per class through the coefficients of
/// `eta^k`, with sign `(-1)^{mu k + k + i + 1}` on top of the tuple signs.
pub fn necklace_orbits(
    eta: &NovikovSeries,
    mu: u8,
    degree: i64,
    window: &Trunc,
) -> Result<OrbitSet> {
    if !eta.is_lambda_plus() {
        return Err(Error::NotLambdaPlus);
    }
    let group = eta.group().clone();
    let mut entries: Vec<OrbitEntry> = Vec::new();
    let bounded = eta.truncate_to(window);
    let mut power = bounded.clone();
    let mut k: u32 = 1;
    while !power.is_zero() {
        for (elem, _, coeff) in power.terms() {
            let r = coeff
                .as_rational()
                .ok_or_else(|| Error::NonIntegerFlowCount(coeff.to_string()))?;
            if !num_traits::One::is_one(r.denom()) {
                return Err(Error::NonIntegerFlowCount(r.to_string()));
            }
            let tuples = r.numer().clone();
            if tuples.is_zero() {
                continue;
            }
            // (-1)^{mu k + k + i + 1}
            let exponent = (mu as i64) * (k as i64) + k as i64 + degree + 1;
            let base_sign: i64 = if exponent.rem_euclid(2) == 0 { 1 } else { -1 };
            let tuple_sign: i64 = if tuples.is_negative() { -1 } else { 1 };
            let sign = (base_sign * tuple_sign) as i8;
            let count: u64 = tuples
                .magnitude()
                .try_into()
                .map_err(|_| Error::Scenario("orbit multiplicity overflow".into()))?;
            entries.push(OrbitEntry {
                orbit: ClosedOrbit { class: elem.clone(), period: k, sign },
                count,
            });
        }
        power = power.mul(&bounded);
        k += 1;
    }
    OrbitSet::new(&group, entries, window.clone())
}

/// Death of the pair (p, q): the pivot `<d p, q>` must be `(-1)^mu + eta`
/// with `eta` strictly positive; the surviving degree-i boundary becomes
/// the Schur complement `N - w ((-1)^mu + eta)^{-1} v`, and the necklace
/// orbits of `eta` join the orbit set.
fn apply_death(state: &FlowState, p: &str, q: &str, mu: u8) -> Result<MoveOutcome> {
    let c = &state.complex;
    let group = c.group().clone();
    let window = c.trunc().clone();
    let pi = c.gen_index(p)?;
    let qi = c.gen_index(q)?;
    let i = c.generators()[pi].degree;
    if c.generators()[qi].degree != i - 1 {
        return Err(Error::DegreeMismatch(p.into(), q.into()));
    }
    let pivot = c.entry(p, q)?;
    let unit_sign: i64 = if mu % 2 == 0 { 1 } else { -1 };
    let unit = NovikovSeries::constant(&group, CyclotomicNumber::from_int(1, unit_sign), Trunc::Infinite);
    let eta = pivot.sub(&unit);
    if !eta.is_lambda_plus() {
        return Err(Error::PivotNotUnit {
            p: p.into(),
            q: q.into(),
            pivot: render_series(&pivot),
        });
    }

    let pl = c.local_index(pi);
    let ql = c.local_index(qi);
    let di = c.boundary_matrix(i).expect("boundary present").clone();
    let pivot_inv = pivot.invert(&window)?.to_series();

    // Surviving generator name lists, in order.
    let row_names: Vec<String> = c
        .degree_gens(i - 1)
        .iter()
        .filter(|&&g| g != qi)
        .map(|&g| c.generators()[g].name.clone())
        .collect();
    let col_names: Vec<String> = c
        .degree_gens(i)
        .iter()
        .filter(|&&g| g != pi)
        .map(|&g| c.generators()[g].name.clone())
        .collect();

    // Record the data a birth needs to restore the state.
    let mut v = Vec::new();
    for (slot, name) in col_names.iter().enumerate() {
        let src = if slot < pl { slot } else { slot + 1 };
        v.push((name.clone(), di.get(ql, src).clone()));
    }
    let mut w = Vec::new();
    for (slot, name) in row_names.iter().enumerate() {
        let src = if slot < ql { slot } else { slot + 1 };
        w.push((name.clone(), di.get(src, pl).clone()));
    }
    let upper_row: Vec<(String, NovikovSeries)> = match c.boundary_matrix(i + 1) {
        Some(m) => c
            .degree_gens(i + 1)
            .iter()
            .enumerate()
            .map(|(slot, &g)| (c.generators()[g].name.clone(), m.get(pl, slot).clone()))
            .collect(),
        None => vec![],
    };
    let lower_col: Vec<(String, NovikovSeries)> = match c.boundary_matrix(i - 1) {
        Some(m) => c
            .degree_gens(i - 2)
            .iter()
            .enumerate()
            .map(|(slot, &g)| (c.generators()[g].name.clone(), m.get(slot, ql).clone()))
            .collect(),
        None => vec![],
    };

    // New complex: drop p and q, replace the degree-i block by the Schur
    // complement, and strike the dead row/column elsewhere.
    let mut generators = Vec::new();
    for (idx, g) in c.generators().iter().enumerate() {
        if idx != pi && idx != qi {
            generators.push(g.clone());
        }
    }
    let mut boundary: BTreeMap<i64, Mat> = BTreeMap::new();
    for (&d, m) in &c.boundary {
        if d == i {
            let reduced = m.delete_row_col(Some(ql), Some(pl));
            let mut out = reduced.clone();
            for (r, wn) in w.iter().enumerate() {
                if wn.1.is_zero() {
                    continue;
                }
                let correction = wn.1.mul(&pivot_inv);
                for (cc, vn) in v.iter().enumerate() {
                    if vn.1.is_zero() {
                        continue;
                    }
                    let delta = correction.mul(&vn.1).neg();
                    out.set(r, cc, out.get(r, cc).add(&delta));
                }
            }
            boundary.insert(d, out);
        } else if d == i + 1 {
            boundary.insert(d, m.delete_row_col(Some(pl), None));
        } else if d == i - 1 {
            boundary.insert(d, m.delete_row_col(None, Some(ql)));
        } else {
            boundary.insert(d, m.clone());
        }
    }
    let complex = BasedComplex::new(group.clone(), generators, boundary, window.clone())?;

    let necklaces = necklace_orbits(&eta, mu, i, state.orbits.complete_below())?;
    let orbits = state.orbits.union(&necklaces);

    // Predicted ratios from the death corollary: T-/T+ = pivot^{(-1)^i},
    // zeta+/zeta- = (1 + (-1)^mu eta)^{(-1)^i}.
    let sign_i: i64 = if i.rem_euclid(2) == 0 { 1 } else { -1 };
    let pivot_fe = FieldElement::from_series(&pivot)?;
    let torsion_ratio = pivot_fe.pow(-sign_i, &window)?.to_series();
    let zeta_base = {
        let signed_eta = if mu % 2 == 0 { eta.clone() } else { eta.neg() };
        NovikovSeries::one(&group, 1, Trunc::Infinite).add(&signed_eta)
    };
    let zeta_ratio = FieldElement::from_series(&zeta_base)?.pow(sign_i, &window)?.to_series();

    let birth = BirthData {
        p: c.generators()[pi].clone(),
        q: c.generators()[qi].clone(),
        mu,
        eta,
        v,
        w,
        upper_row,
        lower_col,
    };
    Ok(MoveOutcome {
        state: FlowState { complex, orbits },
        prediction: MovePrediction { torsion_ratio, zeta_ratio },
        inverse: Some(BifurcationMove::Birth(Box::new(birth))),
    })
}

/// Birth: insert the pair back with the prescribed pivot and block data,
/// and remove the necklace orbits (the formal inverse of a death).
fn apply_birth(state: &FlowState, data: &BirthData) -> Result<MoveOutcome> {
    let c = &state.complex;
    let group = c.group().clone();
    let window = c.trunc().clone();
    let i = data.p.degree;
    if data.q.degree != i - 1 {
        return Err(Error::DegreeMismatch(data.p.name.clone(), data.q.name.clone()));
    }
    if c.gen_index(&data.p.name).is_ok() || c.gen_index(&data.q.name).is_ok() {
        return Err(Error::BirthMismatch("generator name already present".into()));
    }
    if !data.eta.is_lambda_plus() {
        return Err(Error::NotLambdaPlus);
    }
    let unit_sign: i64 = if data.mu % 2 == 0 { 1 } else { -1 };
    let pivot = NovikovSeries::constant(&group, CyclotomicNumber::from_int(1, unit_sign), Trunc::Infinite)
        .add(&data.eta);
    let pivot_inv = pivot.invert(&window)?.to_series();

    let col_names: Vec<String> = c
        .degree_gens(i)
        .iter()
        .map(|&g| c.generators()[g].name.clone())
        .collect();
    let row_names: Vec<String> = c
        .degree_gens(i - 1)
        .iter()
        .map(|&g| c.generators()[g].name.clone())
        .collect();
    let lookup = |pairs: &[(String, NovikovSeries)], name: &str| -> Result<NovikovSeries> {
        pairs
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, s)| s.clone())
            .ok_or_else(|| Error::BirthMismatch(format!("missing entry for generator `{name}`")))
    };

    // New generator list: p appended to degree i, q to degree i-1 (their
    // matrices gain a last column / last row respectively).
    let mut generators = c.generators().to_vec();
    generators.push(data.p.clone());
    generators.push(data.q.clone());

    let zero = NovikovSeries::zero(&group, 1, Trunc::Infinite);
    let mut boundary: BTreeMap<i64, Mat> = BTreeMap::new();
    for (&d, m) in &c.boundary {
        if d == i {
            // (rows + q) x (cols + p): restore N + w pivot^{-1} v in the
            // old block, w in p's column, v in q's row. Empty vectors mean
            // a standalone birth with no flow lines to the old generators.
            let mut out = Mat::zero(&group, 1, m.rows() + 1, m.cols() + 1);
            for r in 0..m.rows() {
                let wr = if data.w.is_empty() { zero.clone() } else { lookup(&data.w, &row_names[r])? };
                for cc in 0..m.cols() {
                    let vc = if data.v.is_empty() { zero.clone() } else { lookup(&data.v, &col_names[cc])? };
                    let restored = m.get(r, cc).add(&wr.mul(&pivot_inv).mul(&vc));
                    out.set(r, cc, restored);
                }
                out.set(r, m.cols(), wr);
            }
            for cc in 0..m.cols() {
                let vc = if data.v.is_empty() { zero.clone() } else { lookup(&data.v, &col_names[cc])? };
                out.set(m.rows(), cc, vc);
            }
            out.set(m.rows(), m.cols(), pivot.clone());
            boundary.insert(d, out);
        } else if d == i + 1 {
            let mut out = Mat::zero(&group, 1, m.rows() + 1, m.cols());
            for r in 0..m.rows() {
                for cc in 0..m.cols() {
                    out.set(r, cc, m.get(r, cc).clone());
                }
            }
            let upper_names: Vec<String> = c
                .degree_gens(i + 1)
                .iter()
                .map(|&g| c.generators()[g].name.clone())
                .collect();
            for (cc, name) in upper_names.iter().enumerate() {
                let entry = if data.upper_row.is_empty() {
                    zero.clone()
                } else {
                    lookup(&data.upper_row, name)?
                };
                out.set(m.rows(), cc, entry);
            }
            boundary.insert(d, out);
        } else if d == i - 1 {
            let mut out = Mat::zero(&group, 1, m.rows(), m.cols() + 1);
            for r in 0..m.rows() {
                for cc in 0..m.cols() {
                    out.set(r, cc, m.get(r, cc).clone());
                }
            }
            let lower_names: Vec<String> = c
                .degree_gens(i - 2)
                .iter()
                .map(|&g| c.generators()[g].name.clone())
                .collect();
            for (r, name) in lower_names.iter().enumerate() {
                let entry = if data.lower_col.is_empty() {
                    zero.clone()
                } else {
                    lookup(&data.lower_col, name)?
                };
                out.set(r, m.cols(), entry);
            }
            boundary.insert(d, out);
        } else {
            boundary.insert(d, m.clone());
        }
    }
    // Degrees that did not exist yet (a birth into an empty complex).
    boundary.entry(i).or_insert_with(|| {
        let rows = c.degree_gens(i - 1).len() + 1;
        let cols = c.degree_gens(i).len() + 1;
        let mut out = Mat::zero(&group, 1, rows, cols);
        out.set(rows - 1, cols - 1, pivot.clone());
        out
    });
    let complex = BasedComplex::new(group.clone(), generators, boundary, window.clone())?;

    let necklaces = necklace_orbits(&data.eta, data.mu, i, state.orbits.complete_below())?;
    let orbits = state.orbits.subtract(&necklaces)?;

    let sign_i: i64 = if i.rem_euclid(2) == 0 { 1 } else { -1 };
    let pivot_fe = FieldElement::from_series(&pivot)?;
    let torsion_ratio = pivot_fe.pow(sign_i, &window)?.to_series();
    let zeta_base = {
        let signed_eta = if data.mu % 2 == 0 { data.eta.clone() } else { data.eta.neg() };
        NovikovSeries::one(&group, 1, Trunc::Infinite).add(&signed_eta)
    };
    let zeta_ratio = FieldElement::from_series(&zeta_base)?.pow(-sign_i, &window)?.to_series();

    Ok(MoveOutcome {
        state: FlowState { complex, orbits },
        prediction: MovePrediction { torsion_ratio, zeta_ratio },
        inverse: Some(BifurcationMove::Death {
            p: data.p.name.clone(),
            q: data.q.name.clone(),
            mu: data.mu,
        }),
    })
}

/// Per-summand verification record.
#[derive(Debug, Clone)]
pub struct SummandReport {
    pub order: u32,
    pub torsion_before: String,
    pub torsion_after: String,
    pub zeta_before: String,
    pub zeta_after: String,
    pub invariant_before: String,
    pub invariant_after: String,
    pub invariant_ok: bool,
    pub torsion_ratio_ok: Option<bool>,
    pub zeta_ratio_ok: Option<bool>,
}

/// Full verification report for one move.
#[derive(Debug, Clone)]
pub struct MoveReport {
    pub description: String,
    pub predicted_torsion_ratio: String,
    pub predicted_zeta_ratio: String,
    pub summands: Vec<SummandReport>,
    pub invariant_ok: bool,
    pub ratios_ok: bool,
}

impl MoveReport {
    pub fn verdict(&self) -> &'static str {
        if self.invariant_ok && self.ratios_ok {
            "invariant"
        } else {
            "violated"
        }
    }

    /// Summands whose invariant comparison failed.
    pub fn violated_summands(&self) -> Vec<u32> {
        self.summands
            .iter()
            .filter(|s| !s.invariant_ok || s.torsion_ratio_ok == Some(false) || s.zeta_ratio_ok == Some(false))
            .map(|s| s.order)
            .collect()
    }
}

fn fmt_opt(fe: &Option<FieldElement>) -> String {
    match fe {
        None => "0".into(),
        Some(f) => render_series(&f.to_series()),
    }
}

/// Recompute `T_m`, `zeta`, and `I` for both states independently (no use
/// of the predicted ratios) and compare canonicalized per-summand values
/// modulo the joint window; predictions, when given, are checked on top.
pub fn verify_invariance(
    before: &FlowState,
    after: &FlowState,
    prediction: Option<&MovePrediction>,
    description: &str,
) -> Result<MoveReport> {
    let window = before.complex.trunc().meet(after.complex.trunc());
    let t_before = before.complex.torsion()?;
    let t_after = after.complex.torsion()?;
    let z_before = before.orbits.zeta(&window)?;
    let z_after = after.orbits.zeta(&window)?;
    let i_before = invariant_i(&before.complex, &before.orbits)?;
    let i_after = invariant_i(&after.complex, &after.orbits)?;

    let split = split_group_algebra(before.complex.group().torsion_order());
    let mut summands = Vec::new();
    for (idx, summand) in split.summands.iter().enumerate() {
        let tb = &t_before.summands[idx].value;
        let ta = &t_after.summands[idx].value;
        let ib = &i_before.summands[idx].value;
        let ia = &i_after.summands[idx].value;
        let zb = z_before.project_summand(summand);
        let za = z_after.project_summand(summand);

        let invariant_ok = match (ib, ia) {
            (None, None) => true,
            (Some(x), Some(y)) => x
                .canonicalize(Ambiguity::PlusMinusOne)
                .eq_mod(&y.canonicalize(Ambiguity::PlusMinusOne), &window),
            _ => false,
        };

        let (torsion_ratio_ok, zeta_ratio_ok) = match prediction {
            None => (None, None),
            Some(pred) => {
                // The computed torsion representative carries the +-1
                // subbasis ambiguity, so the ratio law holds modulo sign.
                let t_ok = match (tb, ta) {
                    (Some(x), Some(y)) => {
                        let ratio = pred.torsion_ratio.project_summand(summand);
                        match FieldElement::from_series(&ratio) {
                            Ok(rf) => Some(
                                y.canonicalize(Ambiguity::PlusMinusOne).eq_mod(
                                    &x.mul(&rf).canonicalize(Ambiguity::PlusMinusOne),
                                    &window,
                                ),
                            ),
                            Err(_) => Some(false),
                        }
                    }
                    _ => None,
                };
                let ratio_z = pred.zeta_ratio.project_summand(summand);
                let z_ok = Some(za.eq_mod(&zb.mul(&ratio_z), &window));
                (t_ok, z_ok)
            }
        };

        summands.push(SummandReport {
            order: summand.order,
            torsion_before: fmt_opt(&tb.as_ref().map(|f| f.canonicalize(Ambiguity::PlusMinusOne))),
            torsion_after: fmt_opt(&ta.as_ref().map(|f| f.canonicalize(Ambiguity::PlusMinusOne))),
            zeta_before: render_series(&zb),
            zeta_after: render_series(&za),
            invariant_before: fmt_opt(&ib.as_ref().map(|f| f.canonicalize(Ambiguity::PlusMinusOne))),
            invariant_after: fmt_opt(&ia.as_ref().map(|f| f.canonicalize(Ambiguity::PlusMinusOne))),
            invariant_ok,
            torsion_ratio_ok,
            zeta_ratio_ok,
        });
    }
    let invariant_ok = summands.iter().all(|s| s.invariant_ok);
    let ratios_ok = summands
        .iter()
        .all(|s| s.torsion_ratio_ok != Some(false) && s.zeta_ratio_ok != Some(false));
    Ok(MoveReport {
        description: description.into(),
        predicted_torsion_ratio: prediction.map_or("1".into(), |p| render_series(&p.torsion_ratio)),
        predicted_zeta_ratio: prediction.map_or("1".into(), |p| render_series(&p.zeta_ratio)),
        summands,
        invariant_ok,
        ratios_ok,
    })
}

/// Apply a script of moves, verifying each step; returns the final state
/// and the per-move reports.
pub fn run_script(state: &FlowState, script: &[BifurcationMove]) -> Result<(FlowState, Vec<MoveReport>)> {
    let mut cur = state.clone();
    let mut reports = Vec::new();
    for mv in script {
        let outcome = apply_move(&cur, mv)?;
        let report = verify_invariance(&cur, &outcome.state, Some(&outcome.prediction), &mv.to_string())?;
        reports.push(report);
        cur = outcome.state;
    }
    Ok((cur, reports))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::testutil::circle_complex;
    use crate::grading::GradedGroup;
    use crate::series::testutil::zt;
    use crate::text::parse_series;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn circle_state(r: i64) -> FlowState {
        let complex = circle_complex(r);
        let orbits = OrbitSet::empty(complex.group(), Trunc::finite(r));
        FlowState::new(complex, orbits).unwrap()
    }

    /// Two-term complex [[pivot, v], [w, N]] in degrees (i, i-1) with a unit
    /// pivot at (q0, p0); always acyclic by construction.
    fn death_state(rng: &mut ChaCha8Rng, i: i64, mu: u8, eta_terms: usize, r: i64) -> FlowState {
        let g = GradedGroup::infinite_cyclic();
        let m = rng.gen_range(1..3usize);
        let mut gens = Vec::new();
        for j in 0..=m {
            gens.push(Generator { name: format!("q{j}"), degree: i - 1, lift: GroupElement::identity(1) });
        }
        for j in 0..=m {
            gens.push(Generator { name: format!("p{j}"), degree: i, lift: GroupElement::identity(1) });
        }
        let unit: i64 = if mu % 2 == 0 { 1 } else { -1 };
        let mut pivot_pairs = vec![(0i64, unit)];
        for _ in 0..eta_terms {
            pivot_pairs.push((rng.gen_range(1..4), *[-2i64, -1, 1, 2].get(rng.gen_range(0..4)).unwrap()));
        }
        let mut mat = Mat::zero(&g, 1, m + 1, m + 1);
        mat.set(0, 0, zt(&pivot_pairs, Trunc::Infinite));
        for j in 1..=m {
            // Unit diagonal block plus small positive-grade noise.
            mat.set(j, j, zt(&[(0, 1), (rng.gen_range(1..3), rng.gen_range(-2..=2))], Trunc::Infinite));
            if rng.gen_bool(0.6) {
                mat.set(0, j, zt(&[(rng.gen_range(1..3), rng.gen_range(-2..=2))], Trunc::Infinite));
            }
            if rng.gen_bool(0.6) {
                mat.set(j, 0, zt(&[(rng.gen_range(1..3), rng.gen_range(-2..=2))], Trunc::Infinite));
            }
        }
        let mut boundary = BTreeMap::new();
        boundary.insert(i, mat);
        let complex = BasedComplex::new(g.clone(), gens, boundary, Trunc::finite(r)).unwrap();
        let orbits = OrbitSet::empty(&g, Trunc::finite(r));
        FlowState::new(complex, orbits).unwrap()
    }

    #[test]
    fn noop_moves_are_invariant() {
        let state = circle_state(12);
        let out = apply_move(&state, &BifurcationMove::NoOp(NoOpKind::FlowLineCancel)).unwrap();
        let report = verify_invariance(&state, &out.state, Some(&out.prediction), "noop").unwrap();
        assert_eq!(report.verdict(), "invariant");
    }

    #[test]
    fn slide_and_inverse_restore_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let state = {
            let complex = crate::complex::testutil::random_acyclic(&mut rng, 3, 12);
            let orbits = OrbitSet::empty(complex.group(), Trunc::finite(12));
            FlowState::new(complex, orbits).unwrap()
        };
        let idxs = state.complex.degree_gens(1).to_vec();
        let p = state.complex.generators()[idxs[0]].name.clone();
        let q = state.complex.generators()[idxs[1]].name.clone();
        let mv = BifurcationMove::Slide { p: p.clone(), q: q.clone(), sign: 1 };
        let out = apply_move(&state, &mv).unwrap();
        let back = apply_move(&out.state, out.inverse.as_ref().unwrap()).unwrap();
        for g1 in state.complex.generators() {
            for g2 in state.complex.generators() {
                if g1.degree == g2.degree + 1 {
                    let e1 = state.complex.entry(&g1.name, &g2.name).unwrap();
                    let e2 = back.state.complex.entry(&g1.name, &g2.name).unwrap();
                    assert!(e1.eq_mod(&e2, &Trunc::finite(12)), "entry <d {}, {}>", g1.name, g2.name);
                }
            }
        }
        assert!(back.state.orbits.eq_below(&state.orbits));
    }

    #[test]
    fn slide_keeps_both_invariant_factors() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..50 {
            let complex = crate::complex::testutil::random_acyclic(&mut rng, 3, 12);
            let orbits = crate::orbit::expand_factor_to_orbits(
                complex.group(),
                &crate::orbit::IrreducibleOrbitFactor {
                    class: GroupElement { free: vec![1], torsion: 0 },
                    plus: false,
                    exponent: -1,
                },
                &Trunc::finite(12),
            )
            .unwrap();
            let state = FlowState::new(complex, orbits).unwrap();
            let d = 1i64;
            let idxs = state.complex.degree_gens(d).to_vec();
            if idxs.len() < 2 {
                continue;
            }
            let p = state.complex.generators()[idxs[0]].name.clone();
            let q = state.complex.generators()[idxs[1]].name.clone();
            let sign = if rng.gen_bool(0.5) { 1 } else { -1 };
            let out = apply_move(&state, &BifurcationMove::Slide { p, q, sign }).unwrap();
            let report =
                verify_invariance(&state, &out.state, Some(&out.prediction), "slide").unwrap();
            assert_eq!(report.verdict(), "invariant");
            // Torsion and zeta are individually unchanged.
            for s in &report.summands {
                assert_eq!(s.zeta_before, s.zeta_after);
                assert_eq!(s.torsion_ratio_ok, Some(true));
            }
        }
    }

    #[test]
    fn slide_on_non_acyclic_complex_keeps_zero_torsion() {
        // d p = (1 - t) r, d q = 0: degree-1 homology survives, both
        // torsions are the zero summand before and after the slide.
        let g = GradedGroup::infinite_cyclic();
        let gens = vec![
            Generator { name: "r".into(), degree: 0, lift: GroupElement::identity(1) },
            Generator { name: "p".into(), degree: 1, lift: GroupElement::identity(1) },
            Generator { name: "q".into(), degree: 1, lift: GroupElement::identity(1) },
        ];
        let mut boundary = BTreeMap::new();
        boundary.insert(
            1,
            Mat::from_rows(
                vec![vec![zt(&[(0, 1), (1, -1)], Trunc::Infinite), zt(&[], Trunc::Infinite)]],
                &g,
                1,
                2,
            )
            .unwrap(),
        );
        let complex = BasedComplex::new(g.clone(), gens, boundary, Trunc::finite(10)).unwrap();
        let state = FlowState::new(complex, OrbitSet::empty(&g, Trunc::finite(10))).unwrap();
        let out = apply_move(&state, &BifurcationMove::Slide { p: "p".into(), q: "q".into(), sign: 1 }).unwrap();
        assert!(out.state.complex.check_boundary().ok());
        let t_before = state.complex.torsion().unwrap();
        let t_after = out.state.complex.torsion().unwrap();
        assert!(t_before.summands[0].value.is_none());
        assert!(t_after.summands[0].value.is_none());
        let report = verify_invariance(&state, &out.state, Some(&out.prediction), "slide").unwrap();
        assert_eq!(report.verdict(), "invariant");
    }

    #[test]
    fn self_slide_with_trivial_unit_is_noop() {
        let state = circle_state(12);
        let x = zt(&[(0, 1)], Trunc::Infinite);
        let out = apply_move(&state, &BifurcationMove::SelfSlide { p: "p".into(), x, class: None }).unwrap();
        assert_eq!(out.state.complex, state.complex);
        assert!(out.state.orbits.eq_below(&state.orbits));
    }

    #[test]
    fn circle_self_slide_matches_hand_computation() {
        // d p = (1 - t) q, slide p by x = 1 + t in degree 1:
        // T -> (1+t)^{-1} (1-t)^{-1}, zeta -> (1 + t), I fixed.
        let state = circle_state(16);
        let x = zt(&[(0, 1), (1, 1)], Trunc::Infinite);
        let out =
            apply_move(&state, &BifurcationMove::SelfSlide { p: "p".into(), x: x.clone(), class: None })
                .unwrap();
        let report = verify_invariance(&state, &out.state, Some(&out.prediction), "self-slide").unwrap();
        assert_eq!(report.verdict(), "invariant");
        let z_after = out.state.orbits.zeta(&Trunc::finite(16)).unwrap();
        assert!(z_after.eq_mod(&x, &Trunc::finite(16)));
        let t_after = out.state.complex.torsion().unwrap();
        let expected = x
            .invert(&Trunc::finite(16))
            .unwrap()
            .to_series()
            .mul(&zt(&[(0, 1), (1, -1)], Trunc::Infinite).invert(&Trunc::finite(16)).unwrap().to_series());
        assert!(t_after.summands[0]
            .value
            .as_ref()
            .unwrap()
            .to_series()
            .eq_mod(&expected, &Trunc::finite(14)));
    }

    #[test]
    fn self_slide_first_order_zeta_coefficient() {
        // x = 1 - t in degree 1: b_1 = (-1)^{i+1} a_1 = -1.
        let state = circle_state(12);
        let x = zt(&[(0, 1), (1, -1)], Trunc::Infinite);
        let out = apply_move(&state, &BifurcationMove::SelfSlide { p: "p".into(), x, class: None }).unwrap();
        let t1 = GroupElement { free: vec![1], torsion: 0 };
        let b1 = out.prediction.zeta_ratio.coeff_of(&t1);
        assert_eq!(b1, CyclotomicNumber::from_int(1, -1));
    }

    #[test]
    fn self_slide_rejects_bad_units() {
        let state = circle_state(12);
        // Constant term not 1.
        let bad = zt(&[(0, 2), (1, 1)], Trunc::Infinite);
        assert!(apply_move(&state, &BifurcationMove::SelfSlide { p: "p".into(), x: bad, class: None }).is_err());
        // Non-integer coefficient.
        let g = GradedGroup::infinite_cyclic();
        let half = parse_series(&g, 1, "1 + 1/2*t^1").unwrap();
        assert!(matches!(
            apply_move(&state, &BifurcationMove::SelfSlide { p: "p".into(), x: half, class: None }),
            Err(Error::NonIntegerFlowCount(_))
        ));
    }

    #[test]
    fn necklace_log_matches_closed_form() {
        // eta = t, mu even, i = 1: emitted logs sum to -log(1 + t).
        let g = GradedGroup::infinite_cyclic();
        let eta = zt(&[(1, 1)], Trunc::Infinite);
        let orbits = necklace_orbits(&eta, 0, 1, &Trunc::finite(10)).unwrap();
        let log = orbits.log_series().unwrap();
        let one = NovikovSeries::one(&g, 1, Trunc::Infinite);
        let expected = one
            .add(&eta)
            .sub(&one)
            .log_one_plus(&Trunc::finite(10))
            .unwrap()
            .neg();
        assert!(log.eq_mod(&expected, &Trunc::finite(10)));
        // eta = 0: nothing is created.
        let empty = necklace_orbits(&zt(&[], Trunc::Infinite), 0, 1, &Trunc::finite(8)).unwrap();
        assert!(empty.is_empty());
        // Two parallel flow lines, even degree: zeta factor begins 1 + 2t.
        let eta2 = zt(&[(1, 2)], Trunc::Infinite);
        let orbits2 = necklace_orbits(&eta2, 0, 2, &Trunc::finite(8)).unwrap();
        let z = orbits2.zeta(&Trunc::finite(8)).unwrap();
        let t1 = GroupElement { free: vec![1], torsion: 0 };
        assert_eq!(z.coeff_of(&t1), CyclotomicNumber::from_int(1, 2));
    }

    #[test]
    fn minimal_death_example() {
        // {p deg 1, q deg 0}, d p = (1 + t) q, mu = 0: death empties the
        // complex; T- = (1+t)^{-1}, zeta+/zeta- = (1+t)^{-1}, I invariant.
        let g = GradedGroup::infinite_cyclic();
        let gens = vec![
            Generator { name: "q".into(), degree: 0, lift: GroupElement::identity(1) },
            Generator { name: "p".into(), degree: 1, lift: GroupElement::identity(1) },
        ];
        let mut boundary = BTreeMap::new();
        boundary.insert(
            1,
            Mat::from_rows(vec![vec![zt(&[(0, 1), (1, 1)], Trunc::Infinite)]], &g, 1, 1).unwrap(),
        );
        let complex = BasedComplex::new(g.clone(), gens, boundary, Trunc::finite(12)).unwrap();
        let state = FlowState::new(complex, OrbitSet::empty(&g, Trunc::finite(12))).unwrap();
        let out = apply_move(&state, &BifurcationMove::Death { p: "p".into(), q: "q".into(), mu: 0 }).unwrap();
        assert!(out.state.complex.is_empty());
        let report = verify_invariance(&state, &out.state, Some(&out.prediction), "death").unwrap();
        assert_eq!(report.verdict(), "invariant");
        let expected_ratio = zt(&[(0, 1), (1, 1)], Trunc::Infinite)
            .invert(&Trunc::finite(12))
            .unwrap()
            .to_series();
        assert!(out.prediction.zeta_ratio.eq_mod(&expected_ratio, &Trunc::finite(12)));
    }

    #[test]
    fn death_with_zero_eta_changes_no_orbits() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let state = death_state(&mut rng, 1, 1, 0, 12);
        let before_orbits = state.orbits.clone();
        let out = apply_move(&state, &BifurcationMove::Death { p: "p0".into(), q: "q0".into(), mu: 1 }).unwrap();
        assert!(out.state.orbits.eq_below(&before_orbits));
        let report = verify_invariance(&state, &out.state, Some(&out.prediction), "death").unwrap();
        assert_eq!(report.verdict(), "invariant");
    }

    #[test]
    fn death_rejects_non_unit_pivot() {
        let g = GradedGroup::infinite_cyclic();
        let gens = vec![
            Generator { name: "q".into(), degree: 0, lift: GroupElement::identity(1) },
            Generator { name: "p".into(), degree: 1, lift: GroupElement::identity(1) },
        ];
        let mut boundary = BTreeMap::new();
        boundary.insert(1, Mat::from_rows(vec![vec![zt(&[(1, 1)], Trunc::Infinite)]], &g, 1, 1).unwrap());
        let complex = BasedComplex::new(g.clone(), gens, boundary, Trunc::finite(8)).unwrap();
        let state = FlowState::new(complex, OrbitSet::empty(&g, Trunc::finite(8))).unwrap();
        assert!(matches!(
            apply_move(&state, &BifurcationMove::Death { p: "p".into(), q: "q".into(), mu: 0 }),
            Err(Error::PivotNotUnit { .. })
        ));
    }

    #[test]
    fn randomized_death_ratio_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(2718);
        for trial in 0..50 {
            let i = rng.gen_range(0..3i64);
            let mu = rng.gen_range(0..2u8);
            let eta_terms = rng.gen_range(0..4usize);
            let state = death_state(&mut rng, i, mu, eta_terms, 10);
            let out = apply_move(&state, &BifurcationMove::Death { p: "p0".into(), q: "q0".into(), mu })
                .unwrap();
            let report = verify_invariance(&state, &out.state, Some(&out.prediction), "death").unwrap();
            assert_eq!(report.verdict(), "invariant", "trial {trial}: {report:?}");
            for s in &report.summands {
                assert_eq!(s.torsion_ratio_ok, Some(true), "trial {trial}");
                assert_eq!(s.zeta_ratio_ok, Some(true), "trial {trial}");
            }
        }
    }

    #[test]
    fn death_then_birth_restores_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(31415);
        for _ in 0..10 {
            let i = rng.gen_range(0..3i64);
            let mu = rng.gen_range(0..2u8);
            let eta_terms = rng.gen_range(0..3usize);
            let state = death_state(&mut rng, i, mu, eta_terms, 10);
            let out = apply_move(&state, &BifurcationMove::Death { p: "p0".into(), q: "q0".into(), mu })
                .unwrap();
            let back = apply_move(&out.state, out.inverse.as_ref().unwrap()).unwrap();
            // Same generators (possibly reordered) and equal entries.
            for g1 in state.complex.generators() {
                for g2 in state.complex.generators() {
                    if g1.degree == g2.degree + 1 {
                        let e1 = state.complex.entry(&g1.name, &g2.name).unwrap();
                        let e2 = back.state.complex.entry(&g1.name, &g2.name).unwrap();
                        assert!(
                            e1.eq_mod(&e2, &Trunc::finite(10)),
                            "entry <d {}, {}>",
                            g1.name,
                            g2.name
                        );
                    }
                }
            }
            assert!(back.state.orbits.eq_below(&state.orbits));
        }
    }

    #[test]
    fn death_schur_complement_matches_tuple_enumeration() {
        // With eta of valuation 2 and window 8, concatenations of at most
        // three loops already exhaust the window:
        // d+ = N + sum_k (-1)^{(mu+1)(k+1)} w eta^k v.
        let mut rng = ChaCha8Rng::seed_from_u64(500);
        for mu in [0u8, 1] {
            let g = GradedGroup::infinite_cyclic();
            let unit: i64 = if mu % 2 == 0 { 1 } else { -1 };
            let eta = zt(&[(2, rng.gen_range(-2..=2i64)), (3, rng.gen_range(-2..=2))], Trunc::Infinite);
            let pivot = zt(&[(0, unit)], Trunc::Infinite).add(&eta);
            let v = zt(&[(1, 1)], Trunc::Infinite);
            let w = zt(&[(1, -1)], Trunc::Infinite);
            let n = zt(&[(0, 1)], Trunc::Infinite);
            let gens = vec![
                Generator { name: "q0".into(), degree: 0, lift: GroupElement::identity(1) },
                Generator { name: "q1".into(), degree: 0, lift: GroupElement::identity(1) },
                Generator { name: "p0".into(), degree: 1, lift: GroupElement::identity(1) },
                Generator { name: "p1".into(), degree: 1, lift: GroupElement::identity(1) },
            ];
            let mut mat = Mat::zero(&g, 1, 2, 2);
            mat.set(0, 0, pivot.clone());
            mat.set(0, 1, v.clone());
            mat.set(1, 0, w.clone());
            mat.set(1, 1, n.clone());
            let mut boundary = BTreeMap::new();
            boundary.insert(1, mat);
            let complex = BasedComplex::new(g.clone(), gens, boundary, Trunc::finite(8)).unwrap();
            let state = FlowState::new(complex, OrbitSet::empty(&g, Trunc::finite(8))).unwrap();
            let out = apply_move(&state, &BifurcationMove::Death { p: "p0".into(), q: "q0".into(), mu })
                .unwrap();
            let closed_form = out.state.complex.entry("p1", "q1").unwrap();
            // Enumerate k = 0..3 concatenations.
            let mut enumerated = n.clone();
            let mut eta_pow = NovikovSeries::one(&g, 1, Trunc::Infinite);
            for k in 0..4i64 {
                let exponent = (mu as i64 + 1) * (k + 1);
                let term = w.mul(&eta_pow).mul(&v);
                let signed = if exponent.rem_euclid(2) == 0 { term } else { term.neg() };
                enumerated = enumerated.add(&signed);
                eta_pow = eta_pow.mul(&eta);
            }
            assert!(
                closed_form.eq_mod(&enumerated, &Trunc::finite(8)),
                "mu = {mu}: geometric series matches concatenation count"
            );
        }
    }

    #[test]
    fn block_determinant_identity() {
        // det [[alpha, beta], [gamma, delta]] = det(alpha) det(delta - gamma alpha^{-1} beta)
        // on a 3x3 instance over truncated series.
        let g = GradedGroup::infinite_cyclic();
        let alpha = zt(&[(0, 1), (1, 1)], Trunc::Infinite);
        let entries = vec![
            vec![alpha.clone(), zt(&[(1, 1)], Trunc::Infinite), zt(&[(2, -1)], Trunc::Infinite)],
            vec![zt(&[(1, -1)], Trunc::Infinite), zt(&[(0, 1)], Trunc::Infinite), zt(&[(1, 1)], Trunc::Infinite)],
            vec![zt(&[(2, 1)], Trunc::Infinite), zt(&[], Trunc::Infinite), zt(&[(0, 1), (2, 1)], Trunc::Infinite)],
        ];
        let full = Mat::from_rows(entries.clone(), &g, 1, 3).unwrap();
        let lhs = full.det(&Trunc::finite(10)).unwrap();
        // Schur side.
        let alpha_inv = alpha.invert(&Trunc::finite(10)).unwrap().to_series();
        let mut schur = Mat::zero(&g, 1, 2, 2);
        for r in 0..2 {
            for c in 0..2 {
                let delta = entries[r + 1][c + 1].clone();
                let corr = entries[r + 1][0].mul(&alpha_inv).mul(&entries[0][c + 1]);
                schur.set(r, c, delta.sub(&corr));
            }
        }
        let rhs = alpha.mul(&schur.det(&Trunc::finite(10)).unwrap());
        assert!(lhs.eq_mod(&rhs, &Trunc::finite(10)));
    }

    #[test]
    fn corrupt_orbit_is_caught_with_summand_named() {
        let g = GradedGroup::infinite_cyclic();
        let complex = circle_complex(12);
        let orbits = crate::orbit::expand_factor_to_orbits(
            &g,
            &crate::orbit::IrreducibleOrbitFactor {
                class: GroupElement { free: vec![1], torsion: 0 },
                plus: true,
                exponent: 1,
            },
            &Trunc::finite(12),
        )
        .unwrap();
        let state = FlowState::new(complex, orbits).unwrap();
        let out = apply_move(&state, &BifurcationMove::CorruptOrbit { index: 0 }).unwrap();
        let report = verify_invariance(&state, &out.state, Some(&out.prediction), "corrupt").unwrap();
        assert_eq!(report.verdict(), "violated");
        assert_eq!(report.violated_summands(), vec![1]);
    }

    #[test]
    fn random_composite_scripts_keep_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(606);
        for _ in 0..5 {
            let mut state = {
                let complex = crate::complex::testutil::random_acyclic(&mut rng, 2, 12);
                let orbits = crate::orbit::expand_factor_to_orbits(
                    complex.group(),
                    &crate::orbit::IrreducibleOrbitFactor {
                        class: GroupElement { free: vec![1], torsion: 0 },
                        plus: false,
                        exponent: -1,
                    },
                    &Trunc::finite(12),
                )
                .unwrap();
                FlowState::new(complex, orbits).unwrap()
            };
            let initial = state.clone();
            let mut inverses = Vec::new();
            let mut applied = 0;
            let mut guard = 0;
            while applied < 10 && guard < 100 {
                guard += 1;
                let kind = rng.gen_range(0..4);
                let mv = match kind {
                    0 => {
                        let d = rng.gen_range(0..3i64);
                        let idxs = state.complex.degree_gens(d).to_vec();
                        if idxs.len() < 2 {
                            continue;
                        }
                        let a = rng.gen_range(0..idxs.len());
                        let mut b = rng.gen_range(0..idxs.len());
                        while b == a {
                            b = rng.gen_range(0..idxs.len());
                        }
                        BifurcationMove::Slide {
                            p: state.complex.generators()[idxs[a]].name.clone(),
                            q: state.complex.generators()[idxs[b]].name.clone(),
                            sign: if rng.gen_bool(0.5) { 1 } else { -1 },
                        }
                    }
                    1 => {
                        let gens = state.complex.generators();
                        if gens.is_empty() {
                            continue;
                        }
                        let gidx = rng.gen_range(0..gens.len());
                        let x = zt(
                            &[(0, 1), (rng.gen_range(1..3), *[-1i64, 1, 2].get(rng.gen_range(0..3)).unwrap())],
                            Trunc::Infinite,
                        );
                        BifurcationMove::SelfSlide {
                            p: gens[gidx].name.clone(),
                            x,
                            class: None,
                        }
                    }
                    2 => BifurcationMove::NoOp(NoOpKind::OrbitCancel),
                    _ => {
                        // Death of any pair with a unit pivot.
                        let mut found = None;
                        'outer: for p in state.complex.generators() {
                            for q in state.complex.generators() {
                                if q.degree != p.degree - 1 {
                                    continue;
                                }
                                let pivot = state.complex.entry(&p.name, &q.name).unwrap();
                                for mu in [0u8, 1] {
                                    let unit: i64 = if mu % 2 == 0 { 1 } else { -1 };
                                    let e = pivot.sub(&zt(&[(0, unit)], Trunc::Infinite));
                                    if e.is_lambda_plus() {
                                        found = Some(BifurcationMove::Death {
                                            p: p.name.clone(),
                                            q: q.name.clone(),
                                            mu,
                                        });
                                        break 'outer;
                                    }
                                }
                            }
                        }
                        match found {
                            Some(mv) => mv,
                            None => continue,
                        }
                    }
                };
                let Ok(out) = apply_move(&state, &mv) else { continue };
                let report =
                    verify_invariance(&state, &out.state, Some(&out.prediction), &mv.to_string())
                        .unwrap();
                assert_eq!(report.verdict(), "invariant", "move {mv}");
                if let Some(inv) = out.inverse.clone() {
                    inverses.push(inv);
                }
                state = out.state;
                applied += 1;
            }
            assert!(applied >= 5, "enough moves applied");
            // The end-to-end invariant also matches the starting one.
            let report = verify_invariance(&initial, &state, None, "composite").unwrap();
            assert!(report.invariant_ok, "composite of {applied} moves");
        }
    }
}
