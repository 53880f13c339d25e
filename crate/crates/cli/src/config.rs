//! Experiment configuration files.
//!
//! Complex numbers are `[re, im]` pairs (a bare number is read as real),
//! matrices are row-major arrays of rows. States, effects and instruments may
//! also be named constructors such as `"ket 0"`, `"bar1"`,
//! `"qrac d=3 y0=1 y1=2"` or `"basis computational"`.

use std::path::Path;

use num_complex::Complex64;
use qres_core::freesets::{self, FreeSetSpec};
use qres_core::optimizer::{InnerSearch, OptimizationConfig};
use qres_core::qmath::{
    kets, qrac_measurement_basis, qrac_state, spanning_pure_states, ComplexMatrix, DensityMatrix, Effect, PureState,
};
use qres_core::ranktest::DetectionMode;
use qres_core::scenario::{OperationBox, PreparationBox};
use qres_core::{Error, Result};
use serde_json::Value;

#[derive(Debug, Clone)]
pub struct WitnessChoice {
    pub name: String,
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct OptimizerOverrides {
    pub restarts: Option<usize>,
    pub max_seesaw_rounds: Option<usize>,
    pub convergence_tol: Option<f64>,
    pub seed: Option<u64>,
    pub inner_search: Option<InnerSearch>,
}

impl OptimizerOverrides {
    pub fn apply(&self, mut cfg: OptimizationConfig) -> OptimizationConfig {
        if let Some(v) = self.restarts {
            cfg.restarts = v;
        }
        if let Some(v) = self.max_seesaw_rounds {
            cfg.max_seesaw_rounds = v;
        }
        if let Some(v) = self.convergence_tol {
            cfg.convergence_tol = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.inner_search {
            cfg.inner_search = v;
        }
        cfg
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub dimension: usize,
    pub preparations: PreparationBox,
    pub instruments: OperationBox,
    pub witness: Option<WitnessChoice>,
    pub free_set: Option<String>,
    pub detection_mode: Option<DetectionMode>,
    pub rank_tolerance: Option<f64>,
    pub optimizer: OptimizerOverrides,
}

fn field_err(path: &str, msg: impl std::fmt::Display) -> Error {
    Error::InvalidInput(format!("{path}: {msg}"))
}

/// Re-labels a library error with the config field it came from, keeping its kind.
fn at(path: &str, e: Error) -> Error {
    match e {
        Error::ContractViolation(m) => Error::ContractViolation(format!("{path}: {m}")),
        Error::InvalidInput(m) => Error::InvalidInput(format!("{path}: {m}")),
        Error::DataValidation(m) => Error::DataValidation(format!("{path}: {m}")),
        other => Error::InvalidInput(format!("{path}: {other}")),
    }
}

pub fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        Error::InvalidInput(format!("{}: line {}, column {}: {e}", path.display(), e.line(), e.column()))
    })
}

pub fn load(path: &Path) -> Result<ExperimentConfig> {
    parse(&read_json(path)?)
}

fn as_usize(v: &Value, path: &str) -> Result<usize> {
    v.as_u64().map(|n| n as usize).ok_or_else(|| field_err(path, "expected a non-negative integer"))
}

fn as_f64(v: &Value, path: &str) -> Result<f64> {
    v.as_f64().ok_or_else(|| field_err(path, "expected a number"))
}

fn as_array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| field_err(path, "expected an array"))
}

pub fn parse(root: &Value) -> Result<ExperimentConfig> {
    let obj = root.as_object().ok_or_else(|| field_err("config", "expected a JSON object"))?;
    const KNOWN: [&str; 8] = [
        "dimension",
        "preparations",
        "instruments",
        "witness",
        "free_set",
        "detection_mode",
        "rank_tolerance",
        "optimizer",
    ];
    if let Some(k) = obj.keys().find(|k| !KNOWN.contains(&k.as_str()) && !k.starts_with('_')) {
        return Err(field_err(k, "unknown field"));
    }
    let dimension = as_usize(obj.get("dimension").ok_or_else(|| field_err("dimension", "missing"))?, "dimension")?;
    if dimension < 2 {
        return Err(field_err("dimension", Error::InvalidDimension(dimension)));
    }

    let preps = as_array(obj.get("preparations").ok_or_else(|| field_err("preparations", "missing"))?, "preparations")?;
    let states = preps
        .iter()
        .enumerate()
        .map(|(y, v)| parse_state(v, dimension, &format!("preparations[{y}]")))
        .collect::<Result<Vec<_>>>()?;
    let preparations = PreparationBox::new(states).map_err(|e| at("preparations", e))?;

    let insts = as_array(obj.get("instruments").ok_or_else(|| field_err("instruments", "missing"))?, "instruments")?;
    let instruments = insts
        .iter()
        .enumerate()
        .map(|(x, v)| parse_instrument(v, dimension, &format!("instruments[{x}]")))
        .collect::<Result<Vec<_>>>()?;
    let instruments = OperationBox::new(instruments).map_err(|e| at("instruments", e))?;

    let witness = match obj.get("witness") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(WitnessChoice { name: s.clone(), epsilon: None }),
        Some(Value::Object(w)) => Some(WitnessChoice {
            name: w
                .get("name")
                .and_then(Value::as_str)
                .ok_or_else(|| field_err("witness.name", "expected a string"))?
                .to_string(),
            epsilon: w.get("epsilon").map(|v| as_f64(v, "witness.epsilon")).transpose()?,
        }),
        Some(_) => return Err(field_err("witness", "expected a name or an object")),
    };
    let free_set = obj
        .get("free_set")
        .map(|v| v.as_str().map(str::to_string).ok_or_else(|| field_err("free_set", "expected a string")))
        .transpose()?;
    let detection_mode = obj
        .get("detection_mode")
        .map(|v| {
            v.as_str()
                .ok_or_else(|| field_err("detection_mode", "expected a string"))?
                .parse::<DetectionMode>()
                .map_err(|e| at("detection_mode", e))
        })
        .transpose()?;
    let rank_tolerance = obj.get("rank_tolerance").map(|v| as_f64(v, "rank_tolerance")).transpose()?;
    let optimizer = match obj.get("optimizer") {
        None | Some(Value::Null) => OptimizerOverrides::default(),
        Some(v) => parse_optimizer(v)?,
    };

    Ok(ExperimentConfig {
        dimension,
        preparations,
        instruments,
        witness,
        free_set,
        detection_mode,
        rank_tolerance,
        optimizer,
    })
}

fn parse_optimizer(v: &Value) -> Result<OptimizerOverrides> {
    let obj = v.as_object().ok_or_else(|| field_err("optimizer", "expected an object"))?;
    let mut o = OptimizerOverrides::default();
    for (k, val) in obj {
        let path = format!("optimizer.{k}");
        match k.as_str() {
            "restarts" => o.restarts = Some(as_usize(val, &path)?),
            "max_seesaw_rounds" => o.max_seesaw_rounds = Some(as_usize(val, &path)?),
            "convergence_tol" => o.convergence_tol = Some(as_f64(val, &path)?),
            "seed" => o.seed = Some(val.as_u64().ok_or_else(|| field_err(&path, "expected a non-negative integer"))?),
            "inner_search" => {
                let s = val.as_str().ok_or_else(|| field_err(&path, "expected a string"))?;
                o.inner_search = Some(s.parse().map_err(|e| at(&path, e))?);
            }
            _ => return Err(field_err(&path, "unknown field")),
        }
    }
    Ok(o)
}

fn parse_complex(v: &Value, path: &str) -> Result<Complex64> {
    if let Some(re) = v.as_f64() {
        return Ok(Complex64::new(re, 0.0));
    }
    match v.as_array().map(Vec::as_slice) {
        Some([re, im]) => Ok(Complex64::new(as_f64(re, path)?, as_f64(im, path)?)),
        _ => Err(field_err(path, "expected a number or an [re, im] pair")),
    }
}

fn parse_matrix(v: &Value, dim: usize, path: &str) -> Result<ComplexMatrix> {
    let rows = as_array(v, path)?;
    if rows.len() != dim {
        return Err(field_err(path, format!("expected {dim} rows, found {}", rows.len())));
    }
    let parsed = rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let rpath = format!("{path}[{i}]");
            let entries = as_array(row, &rpath)?;
            if entries.len() != dim {
                return Err(field_err(&rpath, format!("expected {dim} entries, found {}", entries.len())));
            }
            entries
                .iter()
                .enumerate()
                .map(|(j, z)| parse_complex(z, &format!("{rpath}[{j}]")))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    ComplexMatrix::from_rows(&parsed).map_err(|e| at(path, e))
}

/// Splits `"qrac d=3 y0=1 y1=2"` into the head word, positional words and `key=value` pairs.
fn tokens(s: &str) -> (String, Vec<String>, Vec<(String, String)>) {
    let mut words = s.split_whitespace();
    let head = words.next().unwrap_or_default().to_ascii_lowercase();
    let mut positional = Vec::new();
    let mut named = Vec::new();
    for w in words {
        match w.split_once('=') {
            Some((k, v)) => named.push((k.to_ascii_lowercase(), v.to_string())),
            None => positional.push(w.to_string()),
        }
    }
    (head, positional, named)
}

fn named_index(named: &[(String, String)], key: &str, path: &str) -> Result<Option<usize>> {
    named
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.parse::<usize>().map_err(|_| field_err(path, format!("`{key}={v}` is not an index"))))
        .transpose()
}

fn required_index(named: &[(String, String)], key: &str, path: &str) -> Result<usize> {
    named_index(named, key, path)?.ok_or_else(|| field_err(path, format!("missing `{key}=`")))
}

fn check_qrac_dim(named: &[(String, String)], dim: usize, path: &str) -> Result<()> {
    if let Some(d) = named_index(named, "d", path)? {
        if d != dim {
            return Err(field_err(path, format!("d={d} does not match dimension {dim}")));
        }
    }
    Ok(())
}

fn qubit_only(dim: usize, name: &str, path: &str) -> Result<()> {
    if dim != 2 {
        return Err(field_err(path, format!("`{name}` is a qubit state but dimension is {dim}")));
    }
    Ok(())
}

/// Named pure states.
pub fn named_ket(spec: &str, dim: usize, path: &str) -> Result<PureState> {
    let (head, positional, named) = tokens(spec);
    let qubit = |k: fn() -> PureState| qubit_only(dim, &head, path).map(|_| k());
    match head.as_str() {
        "ket" => {
            let i = positional
                .first()
                .and_then(|s| s.parse::<usize>().ok())
                .ok_or_else(|| field_err(path, "expected `ket <index>`"))?;
            PureState::basis(dim, i).map_err(|e| at(path, e))
        }
        "spanning" => {
            let k = positional
                .first()
                .and_then(|s| s.parse::<usize>().ok())
                .ok_or_else(|| field_err(path, "expected `spanning <index>`"))?;
            let family = spanning_pure_states(dim).map_err(|e| at(path, e))?;
            family
                .get(k)
                .cloned()
                .ok_or_else(|| field_err(path, format!("spanning index {k} out of range (d² = {})", dim * dim)))
        }
        "qrac" => {
            check_qrac_dim(&named, dim, path)?;
            if named.iter().any(|(k, _)| k == "x") {
                let x = required_index(&named, "x", path)?;
                let j = required_index(&named, "j", path)?;
                let basis = qrac_measurement_basis(dim, x).map_err(|e| at(path, e))?;
                return basis.get(j).cloned().ok_or_else(|| field_err(path, format!("outcome j={j} out of range")));
            }
            let y0 = required_index(&named, "y0", path)?;
            let y1 = required_index(&named, "y1", path)?;
            qrac_state(dim, y0, y1).map_err(|e| at(path, e))
        }
        "zero" => qubit(kets::zero),
        "one" => qubit(kets::one),
        "plus" | "+" => qubit(kets::plus),
        "minus" | "-" => qubit(kets::minus),
        "plus-y" | "+y" => qubit(kets::plus_y),
        "minus-y" | "-y" => qubit(kets::minus_y),
        "bar0" => qubit(kets::bar_zero),
        "bar1" => qubit(kets::bar_one),
        "bar+" | "barplus" => qubit(kets::bar_plus),
        "bar-" | "barminus" => qubit(kets::bar_minus),
        "magic-t" | "t" => qubit(kets::magic_t),
        _ => Err(field_err(path, format!("unknown named state `{spec}`"))),
    }
}

fn parse_state(v: &Value, dim: usize, path: &str) -> Result<DensityMatrix> {
    match v {
        Value::String(s) => {
            if matches!(s.trim().to_ascii_lowercase().as_str(), "maximally-mixed" | "mixed" | "identity/d") {
                return Ok(DensityMatrix::maximally_mixed(dim));
            }
            Ok(DensityMatrix::from_pure(&named_ket(s, dim, path)?))
        }
        Value::Array(_) => DensityMatrix::new(parse_matrix(v, dim, path)?).map_err(|e| at(path, e)),
        Value::Object(o) => {
            if let Some(amps) = o.get("ket") {
                let amps = as_array(amps, &format!("{path}.ket"))?
                    .iter()
                    .enumerate()
                    .map(|(i, z)| parse_complex(z, &format!("{path}.ket[{i}]")))
                    .collect::<Result<Vec<_>>>()?;
                if amps.len() != dim {
                    return Err(field_err(path, format!("ket has {} amplitudes, expected {dim}", amps.len())));
                }
                let ket = PureState::normalized(amps).map_err(|e| at(path, e))?;
                Ok(DensityMatrix::from_pure(&ket))
            } else if let Some(b) = o.get("bloch") {
                qubit_only(dim, "bloch", path)?;
                let r = as_array(b, &format!("{path}.bloch"))?;
                if r.len() != 3 {
                    return Err(field_err(path, "bloch vector needs three components"));
                }
                let r: Vec<f64> = r.iter().map(|c| as_f64(c, path)).collect::<Result<_>>()?;
                DensityMatrix::from_bloch(r[0], r[1], r[2]).map_err(|e| at(path, e))
            } else if let Some(m) = o.get("matrix") {
                DensityMatrix::new(parse_matrix(m, dim, &format!("{path}.matrix"))?).map_err(|e| at(path, e))
            } else {
                Err(field_err(path, "expected `ket`, `bloch` or `matrix`"))
            }
        }
        _ => Err(field_err(path, "expected a named state, a matrix or an object")),
    }
}

fn parse_effect(v: &Value, dim: usize, path: &str) -> Result<Effect> {
    match v {
        Value::String(s) => {
            let (head, _, _) = tokens(s);
            match head.as_str() {
                "identity" => Ok(Effect::identity(dim)),
                "null" | "zero-effect" => Ok(Effect::zero(dim)),
                "complement" => {
                    let rest = s.trim_start()[head.len()..].trim();
                    if rest.is_empty() {
                        return Err(field_err(path, "expected `complement <state>`"));
                    }
                    Ok(Effect::projector(&named_ket(rest, dim, path)?).complement())
                }
                _ => Ok(Effect::projector(&named_ket(s, dim, path)?)),
            }
        }
        Value::Array(_) => Effect::new(parse_matrix(v, dim, path)?).map_err(|e| at(path, e)),
        Value::Object(o) => match o.get("matrix") {
            Some(m) => Effect::new(parse_matrix(m, dim, &format!("{path}.matrix"))?).map_err(|e| at(path, e)),
            None => Err(field_err(path, "expected `matrix`")),
        },
        _ => Err(field_err(path, "expected a named effect or a matrix")),
    }
}

fn parse_instrument(v: &Value, dim: usize, path: &str) -> Result<Vec<Effect>> {
    match v {
        Value::String(s) => named_instrument(s, dim, path),
        Value::Array(effects) => effects
            .iter()
            .enumerate()
            .map(|(j, e)| parse_effect(e, dim, &format!("{path}[{j}]")))
            .collect(),
        _ => Err(field_err(path, "expected a list of effects or a named instrument")),
    }
}

fn named_instrument(spec: &str, dim: usize, path: &str) -> Result<Vec<Effect>> {
    let (head, positional, named) = tokens(spec);
    let projectors = |kets: Vec<PureState>| kets.iter().map(Effect::projector).collect::<Vec<_>>();
    match head.as_str() {
        "basis" => {
            let which = positional.first().map(|s| s.to_ascii_lowercase()).unwrap_or_else(|| "computational".into());
            let kets = match which.as_str() {
                "computational" | "z" => (0..dim).map(|i| PureState::basis(dim, i)).collect::<qres_core::Result<Vec<_>>>(),
                "x" => qubit_only(dim, "basis x", path).map(|_| vec![kets::plus(), kets::minus()]),
                "y" => qubit_only(dim, "basis y", path).map(|_| vec![kets::plus_y(), kets::minus_y()]),
                "bar" => qubit_only(dim, "basis bar", path).map(|_| vec![kets::bar_zero(), kets::bar_one()]),
                "bar-pm" => qubit_only(dim, "basis bar-pm", path).map(|_| vec![kets::bar_plus(), kets::bar_minus()]),
                other => return Err(field_err(path, format!("unknown basis `{other}`"))),
            }
            .map_err(|e| at(path, e))?;
            Ok(projectors(kets))
        }
        "qrac" => {
            check_qrac_dim(&named, dim, path)?;
            let x = required_index(&named, "x", path)?;
            Ok(projectors(qrac_measurement_basis(dim, x).map_err(|e| at(path, e))?))
        }
        "binary" => {
            let rest = spec.trim_start()[head.len()..].trim();
            let e = Effect::projector(&named_ket(rest, dim, path)?);
            let c = e.complement();
            Ok(vec![e, c])
        }
        _ => Err(field_err(path, format!("unknown named instrument `{spec}`"))),
    }
}

/// Looks up a free set, mapping unknown names to a validation error.
pub fn free_set(name: &str, dim: usize) -> Result<FreeSetSpec> {
    freesets::by_name(name, dim)
}
