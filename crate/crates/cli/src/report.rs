//! Rendering of command results as JSON, CSV or text.

use qres_core::optimizer::CertifiedBound;
use qres_core::qmath::ComplexMatrix;
use qres_core::ranktest::DetectionVerdict;
use qres_core::scenario::CorrelationTable;
use qres_core::witnesses::{BoundProvenance, Evaluation, WitnessSpec};
use serde_json::{json, Value};

use crate::table;
use crate::Format;

/// Agreement tolerance between a certified value and its documented bound.
const AGREEMENT_TOL: f64 = 1e-6;
/// Documented bounds quoted to two decimals are compared at this tolerance.
const PUBLISHED_TOL: f64 = 0.01;

pub struct Report {
    json: Value,
    csv: String,
    text: String,
}

impl Report {
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(&self.json).expect("JSON values serialize");
                s.push('\n');
                s
            }
            Format::Csv => self.csv.clone(),
            Format::Text => self.text.clone(),
        }
    }
}

/// Six decimals with trailing zeros removed: `4`, `0.5`, `4.325141`.
fn short(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn matrix_json(m: &ComplexMatrix) -> Value {
    Value::Array(
        m.rows()
            .iter()
            .map(|row| Value::Array(row.iter().map(|z| json!([z.re, z.im])).collect()))
            .collect(),
    )
}

fn matrix_text(m: &ComplexMatrix) -> String {
    let rows: Vec<String> = m
        .rows()
        .iter()
        .map(|row| {
            let entries: Vec<String> = row.iter().map(|z| format!("{:.6}{:+.6}i", z.re, z.im)).collect();
            format!("[{}]", entries.join(", "))
        })
        .collect();
    format!("[{}]", rows.join(", "))
}

fn provenance(p: BoundProvenance) -> (String, Value) {
    match p {
        BoundProvenance::Analytic => ("analytic".into(), json!("analytic")),
        BoundProvenance::AnalyticUpperBound => ("analytic upper bound".into(), json!("analytic-upper-bound")),
        BoundProvenance::CertifiedNumeric { published } => (
            format!("certified-numeric, published {}", short(published)),
            json!({"certified-numeric": {"published": published}}),
        ),
        BoundProvenance::Margin => ("margin".into(), json!("margin")),
    }
}

pub fn table(t: &CorrelationTable, dimension: usize) -> Report {
    Report { json: table::to_json(t, Some(dimension)), csv: table::to_csv(t), text: table::to_text(t) }
}

pub fn evaluation(e: &Evaluation, nominal: Option<f64>) -> Report {
    let (prov_text, prov_json) = provenance(e.provenance);
    let verdict = serde_json::to_value(e.verdict).expect("verdict serializes");
    let verdict_str = verdict.as_str().unwrap_or_default().to_string();
    let mut text = format!(
        "witness: {}\nvalue: {:.6}\nfree bound: {} ({prov_text})\nverdict: {verdict_str}\n",
        e.witness,
        e.value,
        short(e.free_bound)
    );
    for w in &e.warnings {
        text.push_str(&format!("warning: {w}\n"));
    }
    Report {
        json: json!({
            "witness": e.witness,
            "value": e.value,
            "free_bound": e.free_bound,
            "nominal_bound": nominal,
            "provenance": prov_json,
            "verdict": verdict,
            "warnings": e.warnings,
        }),
        csv: format!("witness,value,free_bound,verdict\n{},{},{},{verdict_str}\n", e.witness, e.value, e.free_bound),
        text,
    }
}

const HYPOTHESIS_WARNING: &str =
    "rank budget N is not below d², so the rank comparison cannot certify a resource (hypothesis N < d² unmet)";

pub fn detection(v: &DetectionVerdict, free_set: &str, dim: usize) -> Report {
    let verdict = serde_json::to_value(v.verdict).expect("verdict serializes");
    let verdict_str = verdict.as_str().unwrap_or_default().to_string();
    let mode = serde_json::to_value(v.mode).expect("mode serializes");
    let mut text = format!(
        "free set: {free_set} (d={dim})\nmode: {}\nrank tolerance: {:e}\n",
        mode.as_str().unwrap_or_default(),
        v.tolerance_used
    );
    let mut csv = String::from("side,rank,budget,hypothesis_met,fires\n");
    let mut checks = Vec::new();
    for c in &v.checks {
        let side = serde_json::to_value(c.side).expect("side serializes");
        let side = side.as_str().unwrap_or_default();
        let sv: Vec<String> = c.singular_values.iter().map(|s| format!("{s:.6e}")).collect();
        text.push_str(&format!(
            "{side}: rank {} vs budget N = {}{}\n  singular values: {}\n",
            c.rank,
            c.budget,
            if c.fires() { " (exceeds)" } else { "" },
            sv.join(" ")
        ));
        csv.push_str(&format!("{side},{},{},{},{}\n", c.rank, c.budget, c.hypothesis_met, c.fires()));
        checks.push(json!({
            "side": side,
            "rank": c.rank,
            "budget": c.budget,
            "singular_values": c.singular_values,
            "hypothesis_met": c.hypothesis_met,
            "fires": c.fires(),
        }));
    }
    if v.hypothesis_warning {
        text.push_str(&format!("warning: {HYPOTHESIS_WARNING}\n"));
    }
    text.push_str(&format!("verdict: {verdict_str}\n"));
    Report {
        json: json!({
            "free_set": free_set,
            "dimension": dim,
            "mode": mode,
            "rank_tolerance": v.tolerance_used,
            "checks": checks,
            "verdict": verdict,
            "warning": v.hypothesis_warning.then_some(HYPOTHESIS_WARNING),
        }),
        csv,
        text,
    }
}

/// How the certified value relates to the documented bound.
fn status(b: &CertifiedBound, spec: &WitnessSpec) -> &'static str {
    let Some(nominal) = b.nominal_bound else {
        return "NO_REFERENCE";
    };
    match spec.free_bound.provenance {
        BoundProvenance::AnalyticUpperBound => {
            if b.value <= nominal + AGREEMENT_TOL {
                "CONSISTENT"
            } else {
                "EXCEEDS"
            }
        }
        p => {
            let tol = if matches!(p, BoundProvenance::CertifiedNumeric { .. }) { PUBLISHED_TOL } else { AGREEMENT_TOL };
            if (b.value - nominal).abs() <= tol {
                "AGREES"
            } else if b.value > nominal {
                "EXCEEDS"
            } else {
                "BELOW"
            }
        }
    }
}

pub fn certified(b: &CertifiedBound, spec: &WitnessSpec, method: &str) -> Report {
    let status = status(b, spec);
    let diff = b.nominal_bound.map(|n| (b.value - n).abs());
    let search = serde_json::to_value(b.search).expect("search serializes");
    let cfg = &b.config_used;
    let semantics = "lower bound on the free maximum: the value is attained by the exhibited free realization";

    let mut text = format!(
        "witness: {}\nfree set: {} (d={}), constraint {}\nmethod: {method} ({}), {} restarts, seed {}\n",
        b.witness,
        b.free_set,
        b.argmax_states.dim(),
        b.constraint,
        search.as_str().unwrap_or_default(),
        b.restarts,
        cfg.seed
    );
    text.push_str(&format!("certified value: {:.6} ({semantics})\n", b.value));
    if let (Some(n), Some(d)) = (b.nominal_bound, diff) {
        text.push_str(&format!("documented bound: {}\n|difference|: {:.6}\n", short(n), d));
    }
    text.push_str(&format!(
        "status: {status}\nrestarts agreeing within {AGREEMENT_TOL:e}: {}/{}; converged: {}\n",
        b.restarts_agreeing, b.restarts, b.converged_restarts
    ));
    text.push_str("argmax states:\n");
    for (y, s) in b.argmax_states.states().iter().enumerate() {
        text.push_str(&format!("  y={y}: {}\n", matrix_text(s.matrix())));
    }
    text.push_str("argmax effects:\n");
    for (x, inst) in b.argmax_effects.instruments().iter().enumerate() {
        for (j, e) in inst.iter().enumerate() {
            text.push_str(&format!("  x={x} j={j}: {}\n", matrix_text(e.matrix())));
        }
    }

    let json = json!({
        "witness": b.witness,
        "free_set": b.free_set,
        "dimension": b.argmax_states.dim(),
        "constraint": b.constraint.to_string(),
        "method": method,
        "search": search,
        "value": b.value,
        "semantics": semantics,
        "documented_bound": b.nominal_bound,
        "difference": diff,
        "status": status,
        "restarts": b.restarts,
        "restarts_agreeing": b.restarts_agreeing,
        "converged_restarts": b.converged_restarts,
        "seed": cfg.seed,
        "max_seesaw_rounds": cfg.max_seesaw_rounds,
        "convergence_tol": cfg.convergence_tol,
        "argmax": {
            "states": b.argmax_states.states().iter().map(|s| matrix_json(s.matrix())).collect::<Vec<_>>(),
            "instruments": b.argmax_effects.instruments().iter()
                .map(|inst| inst.iter().map(|e| matrix_json(e.matrix())).collect::<Vec<_>>())
                .collect::<Vec<_>>(),
        },
    });
    let csv = format!(
        "witness,free_set,constraint,value,documented_bound,difference,status,restarts,restarts_agreeing,converged_restarts,seed\n{},{},{},{},{},{},{status},{},{},{},{}\n",
        b.witness,
        b.free_set,
        b.constraint,
        b.value,
        b.nominal_bound.map(|n| n.to_string()).unwrap_or_default(),
        diff.map(|d| d.to_string()).unwrap_or_default(),
        b.restarts,
        b.restarts_agreeing,
        b.converged_restarts,
        cfg.seed
    );
    Report { json, csv, text }
}

pub fn list(witnesses: &[&str], free_sets: &[&str]) -> Report {
    let mut text = String::from("witnesses:\n");
    for w in witnesses {
        text.push_str(&format!("  {w}\n"));
    }
    text.push_str("free sets:\n");
    for f in free_sets {
        text.push_str(&format!("  {f}\n"));
    }
    let mut csv = String::from("kind,name\n");
    csv.extend(witnesses.iter().map(|w| format!("witness,{w}\n")));
    csv.extend(free_sets.iter().map(|f| format!("free-set,{f}\n")));
    Report { json: json!({"witnesses": witnesses, "free_sets": free_sets}), csv, text }
}
