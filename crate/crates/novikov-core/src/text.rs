//! Canonical text form for series and monomials.
//!
//! Monomials are powers of the named free generators `t, u, v` and the
//! torsion generator `s`. Rank-one groups print `t^3`; higher ranks print
//! the packed vector form `t^(1,0)`. Truncated series carry a mandatory
//! `+ O(R)` suffix, with `R` in the same syntax as grading weights.
//!
//! Examples: `1 - 1*t^1 + O(8)`, `t^(1,-1)*s^1`, `(1 - z)*t^2 + O(3+2r2)`.

use std::sync::Arc;

use num_traits::Signed;

use crate::cyclotomic::{CyclotomicNumber, Rat};
use crate::error::{Error, Result};
use crate::grading::{format_rational, parse_rational, Grade, GradedGroup, GroupElement};
use crate::series::{NovikovSeries, Trunc};

const FREE_NAMES: [char; 3] = ['t', 'u', 'v'];

pub fn free_generator_name(index: usize) -> char {
    FREE_NAMES[index]
}

/// Render a group element as a monomial; the identity renders as `1`.
pub fn render_monomial(group: &GradedGroup, elem: &GroupElement) -> String {
    let mut parts: Vec<String> = Vec::new();
    let rank = group.free_rank();
    if rank == 1 {
        if elem.free[0] != 0 {
            parts.push(format!("t^{}", elem.free[0]));
        }
    } else if rank > 1 && elem.free.iter().any(|&c| c != 0) {
        let inner: Vec<String> = elem.free.iter().map(|c| c.to_string()).collect();
        parts.push(format!("t^({})", inner.join(",")));
    }
    if elem.torsion != 0 {
        parts.push(format!("s^{}", elem.torsion));
    }
    if parts.is_empty() {
        "1".into()
    } else {
        parts.join("*")
    }
}

/// Canonical rendering: terms ascending by (grade, monomial), explicit
/// coefficients, `O(R)` suffix for truncated series.
pub fn render_series(s: &NovikovSeries) -> String {
    let mut out = String::new();
    let group = s.group();
    for (elem, _, coeff) in s.terms() {
        let mono = render_monomial(group, elem);
        if let Some(r) = coeff.as_rational() {
            let mag = format_rational(&r.abs());
            let neg = r.is_negative();
            if out.is_empty() {
                if neg {
                    out.push('-');
                }
            } else if neg {
                out.push_str(" - ");
            } else {
                out.push_str(" + ");
            }
            if mono == "1" {
                out.push_str(&mag);
            } else {
                out.push_str(&format!("{mag}*{mono}"));
            }
        } else {
            if !out.is_empty() {
                out.push_str(" + ");
            }
            if mono == "1" {
                out.push_str(&format!("({coeff})"));
            } else {
                out.push_str(&format!("({coeff})*{mono}"));
            }
        }
    }
    if out.is_empty() {
        out.push('0');
    }
    if let Trunc::Finite(r) = s.trunc() {
        out.push_str(&format!(" + O({r})"));
    }
    out
}

/// Split a series string into top-level signed chunks, respecting
/// parentheses.
fn split_terms(text: &str) -> Result<Vec<(i32, String)>> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return Err(Error::Parse("empty series".into()));
    }
    let mut chunks: Vec<(i32, String)> = Vec::new();
    let mut depth = 0i32;
    let mut sign = 1i32;
    let mut cur = String::new();
    let mut at_term_start = true;
    for c in s.chars() {
        match c {
            '(' => {
                depth += 1;
                cur.push(c);
                at_term_start = false;
            }
            ')' => {
                depth -= 1;
                if depth < 0 {
                    return Err(Error::Parse(format!("unbalanced parentheses in `{text}`")));
                }
                cur.push(c);
            }
            '+' | '-' if depth == 0 && !at_term_start => {
                // An exponent like t^-2 keeps its sign inline.
                if cur.ends_with('^') {
                    cur.push(c);
                } else {
                    if !cur.is_empty() {
                        chunks.push((sign, cur.clone()));
                        cur.clear();
                    }
                    sign = if c == '-' { -1 } else { 1 };
                    at_term_start = true;
                }
            }
            '+' | '-' if at_term_start => {
                if c == '-' {
                    sign = -sign;
                }
                at_term_start = true;
            }
            _ => {
                cur.push(c);
                at_term_start = false;
            }
        }
    }
    if depth != 0 {
        return Err(Error::Parse(format!("unbalanced parentheses in `{text}`")));
    }
    if !cur.is_empty() {
        chunks.push((sign, cur));
    }
    Ok(chunks)
}

/// Split a term into `*`-separated factors, respecting parentheses.
fn split_factors(term: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for c in term.chars() {
        match c {
            '(' => {
                depth += 1;
                cur.push(c);
            }
            ')' => {
                depth -= 1;
                cur.push(c);
            }
            '*' if depth == 0 => {
                out.push(std::mem::take(&mut cur));
            }
            _ => cur.push(c),
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

struct ParsedTerm {
    coeff: CyclotomicNumber,
    elem: GroupElement,
}

fn parse_term(group: &GradedGroup, coeff_order: u32, term: &str) -> Result<ParsedTerm> {
    let mut coeff = CyclotomicNumber::one(coeff_order);
    let mut elem = GroupElement::identity(group.free_rank());
    for factor in split_factors(term) {
        if factor.is_empty() {
            return Err(Error::Parse(format!("empty factor in `{term}`")));
        }
        let first = factor.chars().next().unwrap();
        if factor.starts_with('(') && factor.ends_with(')') {
            let inner = &factor[1..factor.len() - 1];
            let c = CyclotomicNumber::parse(coeff_order, inner)?;
            coeff = coeff.mul(&c)?;
        } else if first.is_ascii_digit() {
            let r = parse_rational(&factor)?;
            coeff = coeff.scale(&r);
        } else if first == 's' {
            let rest = &factor[1..];
            let power: i64 = if rest.is_empty() {
                1
            } else if let Some(e) = rest.strip_prefix('^') {
                e.parse().map_err(|_| Error::Parse(format!("bad torsion exponent `{factor}`")))?
            } else {
                return Err(Error::Parse(format!("malformed factor `{factor}`")));
            };
            if group.torsion_order() == 0 && power != 0 {
                return Err(Error::Parse(
                    "torsion generator `s` used but the group has no torsion factor".into(),
                ));
            }
            let mut step = GroupElement::identity(group.free_rank());
            step.torsion = group.reduce_torsion(power);
            elem = group.add(&elem, &step);
        } else if let Some(idx) = FREE_NAMES.iter().position(|&n| n == first) {
            let rest = &factor[1..];
            if idx >= group.free_rank() {
                return Err(Error::Parse(format!(
                    "generator `{first}` exceeds free rank {}",
                    group.free_rank()
                )));
            }
            let mut step = GroupElement::identity(group.free_rank());
            if rest.is_empty() {
                step.free[idx] = 1;
            } else if let Some(e) = rest.strip_prefix('^') {
                if let Some(vector) = e.strip_prefix('(').and_then(|v| v.strip_suffix(')')) {
                    if idx != 0 {
                        return Err(Error::Parse(format!(
                            "vector exponent only allowed on `t`, got `{factor}`"
                        )));
                    }
                    let comps: Vec<&str> = vector.split(',').collect();
                    if comps.len() != group.free_rank() {
                        return Err(Error::DimensionMismatch {
                            expected: group.free_rank(),
                            got: comps.len(),
                        });
                    }
                    for (i, c) in comps.iter().enumerate() {
                        step.free[i] = c
                            .parse()
                            .map_err(|_| Error::Parse(format!("bad exponent `{c}` in `{factor}`")))?;
                    }
                } else {
                    step.free[idx] = e
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad exponent in `{factor}`")))?;
                }
            } else {
                return Err(Error::Parse(format!("malformed factor `{factor}`")));
            }
            elem = group.add(&elem, &step);
        } else {
            return Err(Error::Parse(format!("unknown factor `{factor}`")));
        }
    }
    Ok(ParsedTerm { coeff, elem })
}

/// Parse a series against a declared group. Exact unless an `O(R)` chunk
/// appears; terms at or beyond the window are folded away.
pub fn parse_series(group: &Arc<GradedGroup>, coeff_order: u32, text: &str) -> Result<NovikovSeries> {
    let chunks = split_terms(text)?;
    let mut trunc = Trunc::Infinite;
    let mut terms: Vec<(i32, String)> = Vec::new();
    for (sign, chunk) in chunks {
        if let Some(inner) = chunk.strip_prefix("O(").and_then(|c| c.strip_suffix(')')) {
            if sign < 0 {
                return Err(Error::Parse("O(R) cannot be subtracted".into()));
            }
            let g = Grade::parse(inner)?;
            trunc = trunc.meet(&Trunc::Finite(g));
        } else {
            terms.push((sign, chunk));
        }
    }
    let mut parsed = Vec::new();
    for (sign, chunk) in terms {
        if chunk == "0" {
            continue;
        }
        let t = parse_term(group, coeff_order, &chunk)?;
        let coeff = if sign < 0 { t.coeff.neg() } else { t.coeff };
        parsed.push((t.elem, coeff));
    }
    NovikovSeries::from_terms(group, coeff_order, parsed, trunc)
}

/// Parse a single monomial (used for lifts and orbit classes).
pub fn parse_monomial(group: &GradedGroup, text: &str) -> Result<GroupElement> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if s == "1" || s == "0" || s.is_empty() {
        return Ok(GroupElement::identity(group.free_rank()));
    }
    let t = parse_term(group, 1, &s)?;
    if !t.coeff.is_one() {
        return Err(Error::Parse(format!("`{text}` is not a bare monomial")));
    }
    Ok(t.elem)
}

/// Parse a rational scalar series coefficient list is not needed here;
/// grades share the weight grammar.
pub fn parse_grade(text: &str) -> Result<Grade> {
    Grade::parse(text)
}

pub fn render_rat(r: &Rat) -> String {
    format_rational(r)
}
