//! Command implementations behind the `novikov` binary.
//!
//! Every command returns its exit code together with the full report text,
//! which keeps the commands directly testable. Exit codes: 0 on success,
//! 1 on a mathematical failure (broken boundary square, violated
//! invariance, failed cover identity), 2 on parse or validation errors.

use std::fmt::Write as _;

use novikov_core::error::Error;
use novikov_core::moves::{run_script, FlowState};
use novikov_core::orbit::{invariant_i, lefschetz_zeta, mapping_torus_torsion};
use novikov_core::scenario::{Scenario, ScenarioDoc, DEFAULT_TRUNCATION};
use novikov_core::series::{Ambiguity, FieldElement, Trunc};
use novikov_core::text::render_series;

pub const EXIT_OK: i32 = 0;
pub const EXIT_MATH: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Machine,
}

impl Format {
    pub fn parse(s: &str) -> Result<Format, Error> {
        match s {
            "text" => Ok(Format::Text),
            "machine" => Ok(Format::Machine),
            other => Err(Error::Scenario(format!("unknown format `{other}`"))),
        }
    }
}

/// Map an error to the exit-code contract: scenario-shape problems are
/// validation (2), everything that went wrong inside the mathematics is a
/// mathematical failure (1).
pub fn exit_class(e: &Error) -> i32 {
    match e {
        Error::Parse(_)
        | Error::Scenario(_)
        | Error::DimensionMismatch { .. }
        | Error::GroupMismatch
        | Error::FieldMismatch(_, _)
        | Error::GradingNotInjective
        | Error::InvalidWeights(_)
        | Error::NotSurjective(_)
        | Error::IllDefinedQuotient { .. }
        | Error::UnknownGenerator(_)
        | Error::DegreeMismatch(_, _)
        | Error::OrbitNotPositive(_)
        | Error::CoverAssumption => EXIT_INVALID,
        _ => EXIT_MATH,
    }
}

/// Parse a scenario, resolving the truncation as: explicit flag, then the
/// file's own value, then `NOVIKOV_DEFAULT_R`, then 16.
pub fn load_scenario(text: &str, truncation_flag: Option<&str>) -> Result<Scenario, Error> {
    load_scenario_with_seed(text, truncation_flag, None)
}

/// Same, additionally overriding the scenario's recorded seed.
pub fn load_scenario_with_seed(
    text: &str,
    truncation_flag: Option<&str>,
    seed: Option<u64>,
) -> Result<Scenario, Error> {
    let mut doc: ScenarioDoc = novikov_core::scenario::parse_doc(text)?;
    if let Some(t) = truncation_flag {
        doc.truncation = Some(t.to_string());
    }
    if let Some(s) = seed {
        doc.seed = s;
    }
    let default = default_truncation()?;
    Scenario::from_doc(doc, Some(default))
}

pub fn default_truncation() -> Result<Trunc, Error> {
    match std::env::var("NOVIKOV_DEFAULT_R") {
        Ok(v) if !v.trim().is_empty() => {
            let g = novikov_core::grading::Grade::parse(v.trim())?;
            Ok(Trunc::Finite(g))
        }
        _ => Ok(Trunc::finite(DEFAULT_TRUNCATION)),
    }
}

struct Report {
    format: Format,
    out: String,
}

impl Report {
    fn new(format: Format, scenario: &Scenario) -> Self {
        let mut r = Report { format, out: String::new() };
        match format {
            Format::Text => {
                let _ = writeln!(r.out, "scenario: {} (seed {})", scenario.name, scenario.seed);
                let _ = writeln!(r.out, "truncation: O({})", trunc_str(&scenario.trunc));
            }
            Format::Machine => {
                let _ = writeln!(r.out, "scenario={}", scenario.name);
                let _ = writeln!(r.out, "seed={}", scenario.seed);
                let _ = writeln!(r.out, "truncation={}", trunc_str(&scenario.trunc));
            }
        }
        r
    }

    fn kv(&mut self, key: &str, value: &str) {
        match self.format {
            Format::Text => {
                let _ = writeln!(self.out, "{key}: {value}");
            }
            Format::Machine => {
                let key = key.replace([' ', ':'], ".");
                let _ = writeln!(self.out, "{key}={value}");
            }
        }
    }

    fn finish(self) -> String {
        self.out
    }
}

fn trunc_str(t: &Trunc) -> String {
    match t {
        Trunc::Finite(g) => g.to_string(),
        Trunc::Infinite => "inf".into(),
    }
}

fn fmt_summand_value(v: &Option<FieldElement>, ambiguity: Ambiguity) -> String {
    match v {
        None => "0".into(),
        Some(f) => render_series(&f.canonicalize(ambiguity).to_series()),
    }
}

/// `check`: boundary square, orbit-set consistency, factor validity.
pub fn cmd_check(scenario: &Scenario, format: Format) -> (i32, String) {
    let mut report = Report::new(format, scenario);
    let mut code = EXIT_OK;

    match scenario.effective_complex() {
        Ok(complex) => {
            let b = complex.check_boundary();
            if b.ok() {
                report.kv(
                    "check boundary",
                    &format!("ok ({} generators)", complex.generators().len()),
                );
            } else {
                code = EXIT_MATH;
                for f in &b.failures {
                    report.kv(
                        "check boundary",
                        &format!(
                            "FAIL degree {} entry ({}, {}) = {}",
                            f.degree, f.row, f.col, f.value
                        ),
                    );
                }
            }
        }
        Err(e) => {
            report.kv("check boundary", &format!("FAIL {e}"));
            return (exit_class(&e), report.finish());
        }
    }

    match scenario.effective_orbits() {
        Ok(orbits) => match orbits.zeta(&scenario.trunc) {
            Ok(_) => {
                report.kv("check orbits", &format!("ok ({} entries)", orbits.entries().len()));
            }
            Err(e) => {
                code = EXIT_MATH;
                report.kv("check orbits", &format!("FAIL {e}"));
            }
        },
        Err(e) => {
            report.kv("check orbits", &format!("FAIL {e}"));
            return (exit_class(&e), report.finish());
        }
    }

    report.kv("verdict", if code == EXIT_OK { "pass" } else { "fail" });
    (code, report.finish())
}

/// `invariant`: torsion, zeta, and `I` per field summand in canonical form.
pub fn cmd_invariant(scenario: &Scenario, format: Format) -> (i32, String) {
    let mut report = Report::new(format, scenario);
    let run = || -> Result<Report, Error> {
        let complex = scenario.effective_complex()?;
        if !complex.check_boundary().ok() {
            return Err(Error::BoundarySquareNonzero {
                degree: complex.check_boundary().failures[0].degree,
                row: complex.check_boundary().failures[0].row.clone(),
                col: complex.check_boundary().failures[0].col.clone(),
                value: complex.check_boundary().failures[0].value.clone(),
            });
        }
        let orbits = scenario.effective_orbits()?;
        let torsion = complex.torsion()?;
        let zeta = orbits.zeta(&scenario.trunc)?;
        let invariant = invariant_i(&complex, &orbits)?;
        let mut r = Report::new(format, scenario);
        let split = novikov_core::cyclotomic::split_group_algebra(scenario.group.torsion_order());
        for (idx, ts) in torsion.summands.iter().enumerate() {
            if let Some(filter) = &scenario.summands {
                if !filter.contains(&ts.order) {
                    continue;
                }
            }
            let d = ts.order;
            r.kv(
                &format!("summand {d} torsion"),
                &fmt_summand_value(&ts.value, Ambiguity::PlusMinusOne),
            );
            let z_d = zeta.project_summand(&split.summands[idx]);
            r.kv(&format!("summand {d} zeta"), &render_series(&z_d));
            let iv = &invariant.summands[idx];
            r.kv(
                &format!("summand {d} invariant"),
                &fmt_summand_value(&iv.value, Ambiguity::PlusMinusOne),
            );
            r.kv(
                &format!("summand {d} invariant mod H"),
                &fmt_summand_value(&iv.value, Ambiguity::PlusMinusH),
            );
        }
        // Fibration cross-check when fiber data is present.
        if let Some(maps) = &scenario.fiber_maps {
            let lz = lefschetz_zeta(&scenario.group, maps, &scenario.trunc)?;
            let mt = mapping_torus_torsion(&scenario.group, maps, &scenario.trunc)?;
            r.kv("fibration lefschetz zeta", &render_series(&lz));
            r.kv("fibration torsion product", &render_series(&mt.to_series()));
            let ok = lz.eq_mod(&mt.to_series(), &scenario.trunc);
            r.kv("fibration match", if ok { "pass" } else { "fail" });
            if !ok {
                return Err(Error::Scenario("fibration identity failed".into()));
            }
        }
        Ok(r)
    };
    match run() {
        Ok(r) => (EXIT_OK, r.finish()),
        Err(e) => {
            report.kv("error", &e.to_string());
            (exit_class(&e), report.finish())
        }
    }
}

/// `moves`: apply the script, verifying each step independently.
pub fn cmd_moves(scenario: &Scenario, format: Format) -> (i32, String) {
    let mut report = Report::new(format, scenario);
    let run = || -> Result<(Report, bool), Error> {
        let complex = scenario.effective_complex()?;
        if !complex.check_boundary().ok() {
            let f = &complex.check_boundary().failures[0];
            return Err(Error::BoundarySquareNonzero {
                degree: f.degree,
                row: f.row.clone(),
                col: f.col.clone(),
                value: f.value.clone(),
            });
        }
        let orbits = scenario.effective_orbits()?;
        let state = FlowState::new(complex, orbits)?;
        let (_, reports) = run_script(&state, &scenario.moves)?;
        let mut r = Report::new(format, scenario);
        let mut all_ok = true;
        for (i, mr) in reports.iter().enumerate() {
            r.kv(&format!("move {i}"), &mr.description);
            r.kv(&format!("move {i} torsion ratio"), &mr.predicted_torsion_ratio);
            r.kv(&format!("move {i} zeta ratio"), &mr.predicted_zeta_ratio);
            let verdict = mr.verdict();
            if verdict != "invariant" {
                all_ok = false;
                let bad = mr
                    .violated_summands()
                    .iter()
                    .map(|d| d.to_string())
                    .collect::<Vec<_>>()
                    .join(",");
                r.kv(&format!("move {i} verdict"), &format!("{verdict} (summand {bad})"));
            } else {
                r.kv(&format!("move {i} verdict"), verdict);
            }
        }
        r.kv("invariance", if all_ok { "pass" } else { "violated" });
        Ok((r, all_ok))
    };
    match run() {
        Ok((r, all_ok)) => (if all_ok { EXIT_OK } else { EXIT_MATH }, r.finish()),
        Err(e) => {
            report.kv("error", &e.to_string());
            (exit_class(&e), report.finish())
        }
    }
}

/// `cover`: Norm/Trace identities and the covered invariant.
pub fn cmd_cover(scenario: &Scenario, format: Format) -> (i32, String) {
    let mut report = Report::new(format, scenario);
    let run = || -> Result<(Report, bool), Error> {
        let Some(ctx) = scenario.cover_context()? else {
            return Err(Error::Scenario("cover command needs a `cover` section".into()));
        };
        let complex = scenario.effective_complex()?;
        if !complex.check_boundary().ok() {
            let f = &complex.check_boundary().failures[0];
            return Err(Error::BoundarySquareNonzero {
                degree: f.degree,
                row: f.row.clone(),
                col: f.col.clone(),
                value: f.value.clone(),
            });
        }
        let orbits = scenario.effective_orbits()?;
        let state = FlowState::new(complex, orbits)?;
        let hat = ctx.cover_state(&state)?;

        let mut r = Report::new(format, scenario);
        let mut ok = true;
        r.kv("cover k", &ctx.modulus().to_string());

        // zeta(cover) = Norm(zeta).
        let zeta = state.orbits.zeta(&scenario.trunc)?;
        let zeta_hat = hat.orbits.zeta(&scenario.trunc)?;
        let norm_zeta = ctx.norm_series(&zeta)?;
        // Report subcover series in host coordinates.
        r.kv("Norm(zeta)", &render_series(&ctx.pushforward_series(&norm_zeta)?));
        r.kv("zeta(cover)", &render_series(&ctx.pushforward_series(&zeta_hat)?));
        let z_ok = zeta_hat.eq_mod(&norm_zeta, &scenario.trunc);
        r.kv("zeta functoriality", if z_ok { "pass" } else { "fail" });
        ok &= z_ok;

        // Trace identity on the zeta function: Tr log = log Norm.
        let one = novikov_core::series::NovikovSeries::one(&scenario.group, 1, Trunc::Infinite);
        let x = zeta.sub(&one);
        let lhs = ctx.trace_series(&x.log_one_plus(&scenario.trunc)?)?;
        let sub_one = novikov_core::series::NovikovSeries::one(ctx.subgroup(), 1, Trunc::Infinite);
        let rhs = norm_zeta.sub(&sub_one).log_one_plus(&scenario.trunc)?;
        let t_ok = lhs.eq_mod(&rhs, &scenario.trunc);
        r.kv("trace log identity", if t_ok { "pass" } else { "fail" });
        ok &= t_ok;

        // Per-summand torsion and invariant functoriality.
        let tau = state.complex.torsion()?;
        let tau_hat = hat.complex.torsion()?;
        let inv = invariant_i(&state.complex, &state.orbits)?;
        let inv_hat = invariant_i(&hat.complex, &hat.orbits)?;
        for (idx, ts) in tau.summands.iter().enumerate() {
            if let Some(filter) = &scenario.summands {
                if !filter.contains(&ts.order) {
                    continue;
                }
            }
            let d = ts.order;
            let t_verdict = match (&ts.value, &tau_hat.summands[idx].value) {
                (None, None) => true,
                (Some(down), Some(up)) => {
                    let normed = ctx.norm_field_element(down, &scenario.trunc)?;
                    up.canonicalize(Ambiguity::PlusMinusOne)
                        .eq_mod(&normed.canonicalize(Ambiguity::PlusMinusOne), &scenario.trunc)
                }
                _ => false,
            };
            r.kv(&format!("summand {d} torsion functoriality"), if t_verdict { "pass" } else { "fail" });
            ok &= t_verdict;
            let i_verdict = match (&inv.summands[idx].value, &inv_hat.summands[idx].value) {
                (None, None) => true,
                (Some(down), Some(up)) => {
                    let normed = ctx.norm_field_element(down, &scenario.trunc)?;
                    up.canonicalize(Ambiguity::PlusMinusOne)
                        .eq_mod(&normed.canonicalize(Ambiguity::PlusMinusOne), &scenario.trunc)
                }
                _ => false,
            };
            r.kv(
                &format!("summand {d} invariant functoriality"),
                if i_verdict { "pass" } else { "fail" },
            );
            r.kv(
                &format!("summand {d} I(cover)"),
                &fmt_summand_value(&inv_hat.summands[idx].value, Ambiguity::PlusMinusOne),
            );
            ok &= i_verdict;
        }
        r.kv("verdict", if ok { "pass" } else { "fail" });
        Ok((r, ok))
    };
    match run() {
        Ok((r, ok)) => (if ok { EXIT_OK } else { EXIT_MATH }, r.finish()),
        Err(e) => {
            report.kv("error", &e.to_string());
            (exit_class(&e), report.finish())
        }
    }
}
