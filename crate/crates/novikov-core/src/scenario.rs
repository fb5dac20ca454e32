//! Scenario files: one self-describing UTF-8 JSON document per scenario,
//! with series in the canonical text form. Everything a run needs lives in
//! the file (group, truncation, complex, orbits, factor lists, fiber
//! matrices, move scripts, cover data), so results are reproducible from
//! files under version control. All randomness flows from the recorded
//! 64-bit seed.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::complex::{BasedComplex, Generator};
use crate::cover::CoverContext;
use crate::error::{Error, Result};
use crate::grading::{CyclicQuotient, Grade, GradedGroup, GroupElement};
use crate::matrix::Mat;
use crate::moves::{BifurcationMove, BirthData, NoOpKind};
use crate::orbit::{orbits_from_lefschetz, ClosedOrbit, IntMatrix, IrreducibleOrbitFactor, OrbitEntry, OrbitSet};
use crate::series::{NovikovSeries, Trunc};
use crate::text::{parse_monomial, parse_series, render_monomial, render_series};

pub const DEFAULT_TRUNCATION: i64 = 16;

// ---- document schema ----

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScenarioDoc {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation: Option<String>,
    pub group: GroupSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summands: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub complex: Option<ComplexSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub orbits: Option<OrbitSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub factors: Option<Vec<FactorSpec>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fiber_maps: Option<Vec<IntMatrix>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub moves: Option<Vec<MoveSpec>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cover: Option<CoverSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GroupSpec {
    pub free_rank: usize,
    #[serde(default)]
    pub torsion: u32,
    pub weights: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ComplexSpec {
    pub generators: Vec<GenSpec>,
    /// Degree -> matrix of series strings; row per degree-(i-1) generator,
    /// column per degree-i generator, in listed order.
    pub boundary: BTreeMap<String, Vec<Vec<String>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GenSpec {
    pub name: String,
    pub degree: i64,
    #[serde(default = "default_lift")]
    pub lift: String,
}

fn default_lift() -> String {
    "1".into()
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct OrbitSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub complete_below: Option<String>,
    pub list: Vec<OrbitRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct OrbitRecord {
    pub class: String,
    pub period: u32,
    pub sign: i8,
    #[serde(default = "default_count")]
    pub count: u64,
}

fn default_count() -> u64 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FactorSpec {
    pub class: String,
    #[serde(rename = "type")]
    pub factor_type: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MoveSpec {
    #[serde(rename = "move")]
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sign: Option<i8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degree: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CoverSpec {
    pub k: u32,
    pub weights: Vec<i64>,
    #[serde(default)]
    pub torsion_weight: i64,
}

// ---- validated scenario ----

/// A fully validated scenario, ready to run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub trunc: Trunc,
    pub group: Arc<GradedGroup>,
    pub summands: Option<Vec<u32>>,
    pub complex: Option<BasedComplex>,
    pub orbits: Option<OrbitSet>,
    pub factors: Option<Vec<IrreducibleOrbitFactor>>,
    pub fiber_maps: Option<Vec<IntMatrix>>,
    pub moves: Vec<BifurcationMove>,
    pub cover: Option<CyclicQuotient>,
    doc: ScenarioDoc,
}

/// Parse just the document structure (callers may edit it before full
/// validation, e.g. to override the truncation).
pub fn parse_doc(text: &str) -> Result<ScenarioDoc> {
    serde_json::from_str(text).map_err(|e| Error::Parse(format!("scenario JSON: {e}")))
}

impl Scenario {
    /// Parse and validate a scenario document. The boundary-square check is
    /// deliberately deferred to the commands: a corrupted complex is a
    /// mathematical failure, not a parse error.
    pub fn from_json(text: &str, default_trunc: Option<Trunc>) -> Result<Scenario> {
        let doc: ScenarioDoc =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("scenario JSON: {e}")))?;
        Scenario::from_doc(doc, default_trunc)
    }

    pub fn from_doc(doc: ScenarioDoc, default_trunc: Option<Trunc>) -> Result<Scenario> {
        let mut weights = Vec::with_capacity(doc.group.weights.len());
        for w in &doc.group.weights {
            weights.push(Grade::parse(w)?);
        }
        let group = GradedGroup::new(doc.group.free_rank, doc.group.torsion, weights)?;
        let trunc = match &doc.truncation {
            Some(t) => Trunc::Finite(Grade::parse(t)?),
            None => default_trunc.unwrap_or(Trunc::finite(DEFAULT_TRUNCATION)),
        };
        if !matches!(trunc, Trunc::Finite(ref g) if g.is_positive()) {
            return Err(Error::Scenario("truncation must be positive".into()));
        }

        if let Some(orders) = &doc.summands {
            let n = group.torsion_order().max(1);
            for d in orders {
                if *d == 0 || n % d != 0 {
                    return Err(Error::Scenario(format!("summand order {d} does not divide {n}")));
                }
            }
        }

        let complex = match &doc.complex {
            None => None,
            Some(spec) => {
                let mut gens = Vec::with_capacity(spec.generators.len());
                for g in &spec.generators {
                    gens.push(Generator {
                        name: g.name.clone(),
                        degree: g.degree,
                        lift: parse_monomial(&group, &g.lift)?,
                    });
                }
                let mut by_degree: BTreeMap<i64, usize> = BTreeMap::new();
                for g in &gens {
                    *by_degree.entry(g.degree).or_default() += 1;
                }
                let mut boundary = BTreeMap::new();
                for (key, rows) in &spec.boundary {
                    let degree: i64 = key
                        .parse()
                        .map_err(|_| Error::Parse(format!("boundary degree `{key}`")))?;
                    let cols = by_degree.get(&degree).copied().unwrap_or(0);
                    let mut parsed_rows = Vec::with_capacity(rows.len());
                    for row in rows {
                        let mut parsed = Vec::with_capacity(row.len());
                        for entry in row {
                            parsed.push(parse_series(&group, 1, entry)?);
                        }
                        parsed_rows.push(parsed);
                    }
                    boundary.insert(degree, Mat::from_rows(parsed_rows, &group, 1, cols)?);
                }
                Some(BasedComplex::new_unchecked(group.clone(), gens, boundary, trunc.clone())?)
            }
        };

        let orbits = match &doc.orbits {
            None => None,
            Some(spec) => {
                let below = match &spec.complete_below {
                    Some(s) => Trunc::Finite(Grade::parse(s)?),
                    None => trunc.clone(),
                };
                let mut entries = Vec::with_capacity(spec.list.len());
                for rec in &spec.list {
                    entries.push(OrbitEntry {
                        orbit: ClosedOrbit {
                            class: parse_monomial(&group, &rec.class)?,
                            period: rec.period,
                            sign: rec.sign,
                        },
                        count: rec.count,
                    });
                }
                Some(OrbitSet::new(&group, entries, below)?)
            }
        };

        let factors = match &doc.factors {
            None => None,
            Some(list) => {
                let mut out = Vec::with_capacity(list.len());
                for f in list {
                    let (plus, exponent) = IrreducibleOrbitFactor::parse_type(&f.factor_type)?;
                    out.push(IrreducibleOrbitFactor {
                        class: parse_monomial(&group, &f.class)?,
                        plus,
                        exponent,
                    });
                }
                Some(out)
            }
        };

        let moves = match &doc.moves {
            None => vec![],
            Some(specs) => {
                let mut out = Vec::with_capacity(specs.len());
                for m in specs {
                    out.push(parse_move(&group, m)?);
                }
                out
            }
        };

        let cover = match &doc.cover {
            None => None,
            Some(spec) => Some(CyclicQuotient::new(&group, spec.k, spec.weights.clone(), spec.torsion_weight)?),
        };

        // Cross checks: moves need a complex; cover weights sized already
        // checked by CyclicQuotient::new.
        if !moves.is_empty() && complex.is_none() {
            return Err(Error::Scenario("move script requires a complex".into()));
        }

        Ok(Scenario {
            name: doc.name.clone(),
            seed: doc.seed,
            trunc,
            group,
            summands: doc.summands.clone(),
            complex,
            orbits,
            factors,
            fiber_maps: doc.fiber_maps.clone(),
            moves,
            cover,
            doc,
        })
    }

    pub fn doc(&self) -> &ScenarioDoc {
        &self.doc
    }

    /// Deterministic pretty-printed document.
    pub fn render(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.doc).expect("document serializes");
        s.push('\n');
        s
    }

    /// The orbit set a run should use: explicit orbits, else expanded
    /// factors, else fixed-point counts from fiber data, else empty.
    pub fn effective_orbits(&self) -> Result<OrbitSet> {
        if let Some(o) = &self.orbits {
            return Ok(o.clone());
        }
        if let Some(factors) = &self.factors {
            let mut acc = OrbitSet::empty(&self.group, self.trunc.clone());
            for f in factors {
                acc = acc.union(&crate::orbit::expand_factor_to_orbits(&self.group, f, &self.trunc)?);
            }
            return Ok(acc);
        }
        if let Some(maps) = &self.fiber_maps {
            return orbits_from_lefschetz(&self.group, maps, &self.trunc);
        }
        Ok(OrbitSet::empty(&self.group, self.trunc.clone()))
    }

    /// The complex a run should use (empty when none is declared).
    pub fn effective_complex(&self) -> Result<BasedComplex> {
        match &self.complex {
            Some(c) => Ok(c.clone()),
            None => BasedComplex::new(self.group.clone(), vec![], BTreeMap::new(), self.trunc.clone()),
        }
    }

    pub fn cover_context(&self) -> Result<Option<CoverContext>> {
        match &self.cover {
            None => Ok(None),
            Some(q) => Ok(Some(CoverContext::new(&self.group, q.clone())?)),
        }
    }
}

fn parse_move(group: &Arc<GradedGroup>, spec: &MoveSpec) -> Result<BifurcationMove> {
    let need = |field: &Option<String>, name: &str| -> Result<String> {
        field.clone().ok_or_else(|| Error::Scenario(format!("move `{}` needs `{name}`", spec.kind)))
    };
    match spec.kind.as_str() {
        "noop" => {
            let kind = match spec.h.as_deref() {
                Some("orbit-cancel") => NoOpKind::OrbitCancel,
                _ => NoOpKind::FlowLineCancel,
            };
            Ok(BifurcationMove::NoOp(kind))
        }
        "flow-line-cancel" => Ok(BifurcationMove::NoOp(NoOpKind::FlowLineCancel)),
        "orbit-cancel" => Ok(BifurcationMove::NoOp(NoOpKind::OrbitCancel)),
        "slide" => Ok(BifurcationMove::Slide {
            p: need(&spec.p, "p")?,
            q: need(&spec.q, "q")?,
            sign: spec.sign.unwrap_or(1),
        }),
        "self_slide" => {
            let x = parse_series(group, 1, &need(&spec.x, "x")?)?;
            let class = match &spec.h {
                Some(h) => Some(parse_monomial(group, h)?),
                None => None,
            };
            Ok(BifurcationMove::SelfSlide { p: need(&spec.p, "p")?, x, class })
        }
        "death" => Ok(BifurcationMove::Death {
            p: need(&spec.p, "p")?,
            q: need(&spec.q, "q")?,
            mu: spec.mu.unwrap_or(0),
        }),
        "birth" => {
            let degree = spec
                .degree
                .ok_or_else(|| Error::Scenario("move `birth` needs `degree`".into()))?;
            let eta = match &spec.eta {
                Some(e) => parse_series(group, 1, e)?,
                None => NovikovSeries::zero(group, 1, Trunc::Infinite),
            };
            let data = BirthData {
                p: Generator {
                    name: need(&spec.p, "p")?,
                    degree,
                    lift: GroupElement::identity(group.free_rank()),
                },
                q: Generator {
                    name: need(&spec.q, "q")?,
                    degree: degree - 1,
                    lift: GroupElement::identity(group.free_rank()),
                },
                mu: spec.mu.unwrap_or(0),
                eta,
                v: vec![],
                w: vec![],
                upper_row: vec![],
                lower_col: vec![],
            };
            Ok(BifurcationMove::Birth(Box::new(data)))
        }
        "corrupt-orbit" => Ok(BifurcationMove::CorruptOrbit {
            index: spec.index.ok_or_else(|| Error::Scenario("move `corrupt-orbit` needs `index`".into()))?,
        }),
        other => Err(Error::Scenario(format!("unknown move `{other}`"))),
    }
}

// ---- built-in generators ----

fn z_group_spec() -> GroupSpec {
    GroupSpec { free_rank: 1, torsion: 0, weights: vec!["1".into()] }
}

fn doc_to_scenario(doc: ScenarioDoc, trunc: Option<Trunc>) -> Scenario {
    Scenario::from_doc(doc, trunc).expect("built-in scenarios are valid")
}

/// Circle with no critical points: empty complex, geometric orbit family.
pub fn generate_circle_flow(trunc: i64) -> Scenario {
    let list: Vec<OrbitRecord> = (1..trunc)
        .map(|k| OrbitRecord { class: format!("t^{k}"), period: k as u32, sign: 1, count: 1 })
        .collect();
    let doc = ScenarioDoc {
        name: "circle-flow".into(),
        seed: 0,
        truncation: Some(trunc.to_string()),
        group: z_group_spec(),
        summands: None,
        complex: Some(ComplexSpec { generators: vec![], boundary: BTreeMap::new() }),
        orbits: Some(OrbitSpec { complete_below: Some(trunc.to_string()), list }),
        factors: None,
        fiber_maps: None,
        moves: None,
        cover: None,
    };
    doc_to_scenario(doc, None)
}

/// Circle with a cancelling pair of critical points: `d p = (1 - t) q`.
pub fn generate_circle_morse(trunc: i64) -> Scenario {
    let mut boundary = BTreeMap::new();
    boundary.insert("1".to_string(), vec![vec!["1 - 1*t^1".to_string()]]);
    let doc = ScenarioDoc {
        name: "circle-morse".into(),
        seed: 0,
        truncation: Some(trunc.to_string()),
        group: z_group_spec(),
        summands: None,
        complex: Some(ComplexSpec {
            generators: vec![
                GenSpec { name: "q".into(), degree: 0, lift: "1".into() },
                GenSpec { name: "p".into(), degree: 1, lift: "1".into() },
            ],
            boundary,
        }),
        orbits: Some(OrbitSpec { complete_below: Some(trunc.to_string()), list: vec![] }),
        factors: None,
        fiber_maps: None,
        moves: None,
        cover: None,
    };
    doc_to_scenario(doc, None)
}

/// Mapping torus of a torus diffeomorphism with the given homology matrix:
/// fiber maps `{[1], A, [1]}`, empty complex, orbits from fixed-point counts.
pub fn generate_mapping_torus(matrix: &[i64; 4], trunc: i64) -> Scenario {
    let a = vec![vec![matrix[0], matrix[1]], vec![matrix[2], matrix[3]]];
    let maps = vec![vec![vec![1]], a, vec![vec![1]]];
    let group = GradedGroup::infinite_cyclic();
    let orbits = orbits_from_lefschetz(&group, &maps, &Trunc::finite(trunc))
        .expect("integer fixed-point counts");
    let list: Vec<OrbitRecord> = orbits
        .entries()
        .iter()
        .map(|e| OrbitRecord {
            class: render_monomial(&group, &e.orbit.class),
            period: e.orbit.period,
            sign: e.orbit.sign,
            count: e.count,
        })
        .collect();
    let doc = ScenarioDoc {
        name: format!("mapping-torus({},{},{},{})", matrix[0], matrix[1], matrix[2], matrix[3]),
        seed: 0,
        truncation: Some(trunc.to_string()),
        group: z_group_spec(),
        summands: None,
        complex: Some(ComplexSpec { generators: vec![], boundary: BTreeMap::new() }),
        orbits: Some(OrbitSpec { complete_below: Some(trunc.to_string()), list }),
        factors: None,
        fiber_maps: Some(maps),
        moves: None,
        cover: None,
    };
    doc_to_scenario(doc, None)
}

/// Reinterpret an exact (polynomial) scenario over the Novikov ring with
/// the same declared grading, paired with the empty orbit set.
pub fn generate_latour(from: &Scenario) -> Result<Scenario> {
    let complex = from
        .complex
        .as_ref()
        .ok_or_else(|| Error::Scenario("latour needs a source complex".into()))?;
    let state = crate::cover::latour_embed(complex, &from.group)?;
    let _ = state; // validation only: entries must be polynomial
    let mut doc = from.doc().clone();
    doc.name = format!("latour({})", from.name);
    doc.orbits = Some(OrbitSpec {
        complete_below: doc.truncation.clone(),
        list: vec![],
    });
    doc.factors = None;
    doc.fiber_maps = None;
    doc.moves = None;
    Scenario::from_doc(doc, Some(from.trunc.clone()))
}

/// Seeded random acyclic complex with a compatible random orbit set: a
/// block acyclic seed scrambled by exact transvections and unit scalings,
/// with random lift shifts. `density` in [0, 1] scales how much scrambling
/// happens; byte-identical output for equal parameters.
pub fn generate_random_complex(degrees: usize, density: f64, seed: u64, trunc: i64) -> Result<Scenario> {
    let degrees = degrees.clamp(2, 4);
    let density = density.clamp(0.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let group = GradedGroup::infinite_cyclic();

    // pairs[d] cancelling pairs sit between degrees d+1 and d; generator
    // counts stay at three or fewer per degree.
    let mut pairs = vec![0usize; degrees];
    for d in 0..degrees - 1 {
        let cap = if d == 0 { 2 } else { 2.min(3 - pairs[d - 1]) };
        pairs[d] = rng.gen_range(1..=cap.max(1));
    }
    let size = |d: usize| -> usize {
        let prev = if d == 0 { 0 } else { pairs[d - 1] };
        prev + pairs[d]
    };

    let mut gens = Vec::new();
    for d in 0..degrees {
        for j in 0..size(d) {
            gens.push(Generator {
                name: format!("g{d}_{j}"),
                degree: d as i64,
                lift: GroupElement::identity(1),
            });
        }
    }
    // Degree-d generators list the pairs[d-1] "kill-down" ones first, then
    // the pairs[d] killed-from-above ones; the boundary pairs column j with
    // the j-th killed-from-above generator one degree down.
    let mut boundary: BTreeMap<i64, Mat> = BTreeMap::new();
    let one = NovikovSeries::one(&group, 1, Trunc::Infinite);
    for d in 1..degrees {
        let rows = size(d - 1);
        let cols = size(d);
        let offset = if d >= 2 { pairs[d - 2] } else { 0 };
        let mut m = Mat::zero(&group, 1, rows, cols);
        for j in 0..pairs[d - 1] {
            m.set(offset + j, j, one.clone());
        }
        boundary.insert(d as i64, m);
    }
    let mut complex = BasedComplex::new(group.clone(), gens, boundary, Trunc::finite(trunc))?;

    // Scramble.
    let ops = 2 + (10.0 * density) as usize;
    for _ in 0..ops {
        let d = rng.gen_range(0..degrees) as i64;
        let idxs = complex.degree_gens(d).to_vec();
        if idxs.is_empty() {
            continue;
        }
        if idxs.len() >= 2 && rng.gen_bool(0.6) {
            let a = rng.gen_range(0..idxs.len());
            let mut b = rng.gen_range(0..idxs.len());
            while b == a {
                b = rng.gen_range(0..idxs.len());
            }
            let coeff = *[-2i64, -1, 1, 2].get(rng.gen_range(0..4)).unwrap();
            let k = rng.gen_range(0..3i64);
            let factor = NovikovSeries::monomial(
                &group,
                GroupElement { free: vec![k], torsion: 0 },
                crate::cyclotomic::CyclotomicNumber::from_int(1, coeff),
                Trunc::Infinite,
            )?;
            let p = complex.generators()[idxs[a]].name.clone();
            let q = complex.generators()[idxs[b]].name.clone();
            complex = complex.apply_transvection(&p, &q, &factor)?;
        } else {
            let a = rng.gen_range(0..idxs.len());
            let coeff = *[-2i64, -1, 1, 2].get(rng.gen_range(0..4)).unwrap();
            let k = rng.gen_range(1..4i64);
            let x = one.add(&NovikovSeries::monomial(
                &group,
                GroupElement { free: vec![k], torsion: 0 },
                crate::cyclotomic::CyclotomicNumber::from_int(1, coeff),
                Trunc::Infinite,
            )?);
            let p = complex.generators()[idxs[a]].name.clone();
            complex = complex.apply_unit_scale(&p, &x)?;
        }
    }
    let names: Vec<String> = complex.generators().iter().map(|g| g.name.clone()).collect();
    for n in &names {
        if rng.gen_bool(0.3) {
            let h = GroupElement { free: vec![rng.gen_range(-2..3)], torsion: 0 };
            complex = complex.shift_lift(n, &h)?;
        }
    }

    // A compatible random orbit family from irreducible factors.
    let mut factor_specs = Vec::new();
    for _ in 0..rng.gen_range(1..3) {
        let class = rng.gen_range(1..3i64);
        let plus = rng.gen_bool(0.5);
        let exponent = if rng.gen_bool(0.5) { 1 } else { -1 };
        factor_specs.push(FactorSpec {
            class: format!("t^{class}"),
            factor_type: format!("(1{}h)^{}", if plus { '+' } else { '-' }, if exponent > 0 { "+1" } else { "-1" }),
        });
    }

    let complex_spec = complex_to_spec(&complex);
    let doc = ScenarioDoc {
        name: format!("random-complex(seed={seed})"),
        seed,
        truncation: Some(trunc.to_string()),
        group: z_group_spec(),
        summands: None,
        complex: Some(complex_spec),
        orbits: None,
        factors: Some(factor_specs),
        fiber_maps: None,
        moves: None,
        cover: None,
    };
    Scenario::from_doc(doc, None)
}

/// Serialize a complex back into its scenario section.
pub fn complex_to_spec(c: &BasedComplex) -> ComplexSpec {
    let group = c.group();
    let generators: Vec<GenSpec> = c
        .generators()
        .iter()
        .map(|g| GenSpec {
            name: g.name.clone(),
            degree: g.degree,
            lift: render_monomial(group, &g.lift),
        })
        .collect();
    let mut boundary = BTreeMap::new();
    let degrees: Vec<i64> = {
        let mut ds: Vec<i64> = c.generators().iter().map(|g| g.degree).collect();
        ds.sort_unstable();
        ds.dedup();
        ds
    };
    for d in degrees {
        if let Some(m) = c.boundary_matrix(d) {
            if m.rows() == 0 || m.cols() == 0 {
                continue;
            }
            let rows: Vec<Vec<String>> = (0..m.rows())
                .map(|r| (0..m.cols()).map(|cc| render_series(m.get(r, cc))).collect())
                .collect();
            boundary.insert(d.to_string(), rows);
        }
    }
    ComplexSpec { generators, boundary }
}

/// Serialize an orbit set back into its scenario section.
pub fn orbits_to_spec(s: &OrbitSet) -> OrbitSpec {
    let group = s.group();
    let below = match s.complete_below() {
        Trunc::Finite(g) => Some(g.to_string()),
        Trunc::Infinite => None,
    };
    OrbitSpec {
        complete_below: below,
        list: s
            .entries()
            .iter()
            .map(|e| OrbitRecord {
                class: render_monomial(group, &e.orbit.class),
                period: e.orbit.period,
                sign: e.orbit.sign,
                count: e.count,
            })
            .collect(),
    }
}

/// Dispatch for the CLI `generate` command.
pub fn generate(name: &str, matrix: Option<[i64; 4]>, from: Option<&Scenario>, degrees: usize, density: f64, seed: u64, trunc: i64) -> Result<Scenario> {
    match name {
        "circle-flow" => Ok(generate_circle_flow(trunc)),
        "circle-morse" => Ok(generate_circle_morse(trunc)),
        "mapping-torus" => {
            let m = matrix.ok_or_else(|| Error::Scenario("mapping-torus needs --matrix a,b,c,d".into()))?;
            Ok(generate_mapping_torus(&m, trunc))
        }
        "latour" => {
            let src = from.ok_or_else(|| Error::Scenario("latour needs --from <scenario file>".into()))?;
            generate_latour(src)
        }
        "random-complex" => generate_random_complex(degrees, density, seed, trunc),
        other => Err(Error::Scenario(format!("unknown built-in `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbit::invariant_i;
    use crate::series::Ambiguity;

    #[test]
    fn builtin_scenarios_roundtrip() {
        let morse = generate_circle_morse(16);
        let flow = generate_circle_flow(16);
        let torus = generate_mapping_torus(&[2, 1, 1, 1], 8);
        for s in [&morse, &flow, &torus] {
            let text = s.render();
            let back = Scenario::from_json(&text, None).unwrap();
            assert_eq!(back.render(), text, "roundtrip of {}", s.name);
        }
    }

    #[test]
    fn random_scenarios_roundtrip_and_are_deterministic() {
        for seed in 0..50u64 {
            let s = generate_random_complex(3, 0.5, seed, 12).unwrap();
            let text = s.render();
            let again = generate_random_complex(3, 0.5, seed, 12).unwrap();
            assert_eq!(again.render(), text, "seed {seed} determinism");
            let back = Scenario::from_json(&text, None).unwrap();
            assert_eq!(back.render(), text, "seed {seed} roundtrip");
        }
    }

    #[test]
    fn random_complexes_check_and_are_acyclic() {
        for seed in [1u64, 7, 23] {
            let s = generate_random_complex(3, 0.7, seed, 12).unwrap();
            let c = s.effective_complex().unwrap();
            assert!(c.check_boundary().ok(), "seed {seed}");
            let t = c.torsion().unwrap();
            assert!(t.summands[0].value.is_some(), "seed {seed} acyclic");
        }
    }

    #[test]
    fn circle_scenarios_agree_on_invariant() {
        let morse = generate_circle_morse(16);
        let flow = generate_circle_flow(16);
        let im = invariant_i(&morse.effective_complex().unwrap(), &morse.effective_orbits().unwrap()).unwrap();
        let fl = invariant_i(&flow.effective_complex().unwrap(), &flow.effective_orbits().unwrap()).unwrap();
        assert!(im.eq_mod(&fl, &Trunc::finite(16), Ambiguity::PlusMinusH));
    }

    #[test]
    fn latour_of_circle_morse() {
        let morse = generate_circle_morse(16);
        let lat = generate_latour(&morse).unwrap();
        assert!(lat.effective_orbits().unwrap().is_empty());
        assert_eq!(lat.name, "latour(circle-morse)");
        // Flow scenarios cannot be embedded (no complex entries are fine,
        // but a truncated complex is rejected upstream).
    }

    #[test]
    fn move_script_parses() {
        let text = r#"{
            "name": "moves",
            "group": {"free_rank": 1, "torsion": 0, "weights": ["1"]},
            "truncation": "12",
            "complex": {
                "generators": [
                    {"name": "q", "degree": 0, "lift": "1"},
                    {"name": "p", "degree": 1, "lift": "1"}
                ],
                "boundary": {"1": [["1 - 1*t^1"]]}
            },
            "moves": [
                {"move": "self_slide", "p": "p", "x": "1 + t"},
                {"move": "noop"}
            ]
        }"#;
        let s = Scenario::from_json(text, None).unwrap();
        assert_eq!(s.moves.len(), 2);
        let (final_state, reports) = crate::moves::run_script(
            &crate::moves::FlowState::new(s.effective_complex().unwrap(), s.effective_orbits().unwrap()).unwrap(),
            &s.moves,
        )
        .unwrap();
        assert!(reports.iter().all(|r| r.verdict() == "invariant"));
        assert_eq!(final_state.complex.generators().len(), 2);
    }

    #[test]
    fn standalone_birth_then_death_is_invariant() {
        let text = r#"{
            "name": "birth-script",
            "group": {"free_rank": 1, "torsion": 0, "weights": ["1"]},
            "truncation": "12",
            "complex": {
                "generators": [
                    {"name": "q", "degree": 0, "lift": "1"},
                    {"name": "p", "degree": 1, "lift": "1"}
                ],
                "boundary": {"1": [["1 - 1*t^1"]]}
            },
            "orbits": {"complete_below": "12", "list": [
                {"class": "t^2", "period": 1, "sign": 1},
                {"class": "t^4", "period": 2, "sign": 1},
                {"class": "t^6", "period": 3, "sign": 1},
                {"class": "t^8", "period": 4, "sign": 1},
                {"class": "t^10", "period": 5, "sign": 1}
            ]},
            "moves": [
                {"move": "birth", "p": "p2", "q": "q2", "degree": 1, "mu": 1, "eta": "t^2"},
                {"move": "death", "p": "p2", "q": "q2", "mu": 1}
            ]
        }"#;
        let s = Scenario::from_json(text, None).unwrap();
        let state = crate::moves::FlowState::new(
            s.effective_complex().unwrap(),
            s.effective_orbits().unwrap(),
        )
        .unwrap();
        let (final_state, reports) = crate::moves::run_script(&state, &s.moves).unwrap();
        assert!(reports.iter().all(|r| r.verdict() == "invariant"), "{reports:?}");
        assert_eq!(final_state.complex.generators().len(), 2);
        assert!(final_state.orbits.eq_below(&state.orbits));
    }

    /// Full pipeline over Z^2 with weights (1, sqrt 2): parsing, torsion,
    /// moves, and verification all run on irrational grades.
    #[test]
    fn rank_two_irrational_grading_end_to_end() {
        let text = r#"{
            "name": "rank2",
            "group": {"free_rank": 2, "torsion": 0, "weights": ["1", "r2"]},
            "truncation": "8",
            "complex": {
                "generators": [
                    {"name": "q", "degree": 0, "lift": "1"},
                    {"name": "p", "degree": 1, "lift": "t^(0,1)"}
                ],
                "boundary": {"1": [["1 - 1*t^(1,1)"]]}
            },
            "orbits": {"complete_below": "8", "list": [
                {"class": "t^(1,1)", "period": 1, "sign": 1},
                {"class": "t^(2,2)", "period": 2, "sign": 1},
                {"class": "t^(3,3)", "period": 3, "sign": 1}
            ]},
            "moves": [
                {"move": "self_slide", "p": "p", "x": "1 - 1*t^(1,0)"},
                {"move": "death", "p": "p", "q": "q", "mu": 0}
            ]
        }"#;
        let s = Scenario::from_json(text, None).unwrap();
        let complex = s.effective_complex().unwrap();
        assert!(complex.check_boundary().ok());
        // Torsion of d p = (1 - tu) q is the geometric series in tu, with
        // grades k (1 + sqrt 2) < 8, i.e. k <= 3.
        let tau = complex.torsion().unwrap().summands[0].value.clone().unwrap();
        let series = tau.to_series();
        for k in 0..4i64 {
            let c = series.coeff_of(&GroupElement { free: vec![k, k], torsion: 0 });
            assert!(c.is_one(), "coefficient of (tu)^{k}");
        }
        // Script: a self-slide by 1 - t, then death of (p, q) with
        // eta = -tu read off the pivot.
        let state = crate::moves::FlowState::new(complex, s.effective_orbits().unwrap()).unwrap();
        let (final_state, reports) = crate::moves::run_script(&state, &s.moves).unwrap();
        assert!(reports.iter().all(|r| r.verdict() == "invariant"), "{reports:?}");
        assert!(final_state.complex.is_empty());
    }

    #[test]
    fn rejects_malformed_documents() {
        assert!(matches!(Scenario::from_json("{", None).unwrap_err(), Error::Parse(_)));
        let bad_series = r#"{
            "name": "bad",
            "group": {"free_rank": 1, "torsion": 0, "weights": ["1"]},
            "complex": {
                "generators": [{"name": "q", "degree": 0, "lift": "1"},
                               {"name": "p", "degree": 1, "lift": "1"}],
                "boundary": {"1": [["1 - w^3"]]}
            }
        }"#;
        assert!(matches!(Scenario::from_json(bad_series, None).unwrap_err(), Error::Parse(_)));
        let bad_group = r#"{
            "name": "bad",
            "group": {"free_rank": 2, "torsion": 0, "weights": ["1", "2"]}
        }"#;
        assert_eq!(
            Scenario::from_json(bad_group, None).unwrap_err(),
            Error::GradingNotInjective
        );
    }

    #[test]
    fn corrupted_boundary_parses_but_fails_check() {
        let text = r#"{
            "name": "corrupt",
            "group": {"free_rank": 1, "torsion": 0, "weights": ["1"]},
            "truncation": "8",
            "complex": {
                "generators": [
                    {"name": "a", "degree": 0, "lift": "1"},
                    {"name": "b", "degree": 1, "lift": "1"},
                    {"name": "c", "degree": 2, "lift": "1"}
                ],
                "boundary": {"1": [["1"]], "2": [["t^1"]]}
            }
        }"#;
        let s = Scenario::from_json(text, None).unwrap();
        let report = s.complex.as_ref().unwrap().check_boundary();
        assert!(!report.ok());
        assert_eq!(report.failures[0].degree, 2);
    }
}
