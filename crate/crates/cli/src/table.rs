//! Correlation-table files: `{"dimension": d, "probabilities": [y][x][j]}`.
//!
//! `dimension` is optional; a bare nested array is also accepted.

use std::path::Path;

use qres_core::scenario::{table_from_nested, CorrelationTable};
use qres_core::{Error, Result};
use serde_json::{json, Value};

use crate::config::read_json;

pub struct TableFile {
    pub dimension: Option<usize>,
    pub table: CorrelationTable,
}

pub fn load(path: &Path) -> Result<TableFile> {
    let root = read_json(path)?;
    let (dimension, probs) = match &root {
        Value::Array(_) => (None, &root),
        Value::Object(o) => (
            o.get("dimension").and_then(Value::as_u64).map(|d| d as usize),
            o.get("probabilities")
                .ok_or_else(|| Error::InvalidInput(format!("{}: missing `probabilities`", path.display())))?,
        ),
        _ => return Err(Error::InvalidInput(format!("{}: expected a JSON object", path.display()))),
    };
    let nested: Vec<Vec<Vec<f64>>> = serde_json::from_value(probs.clone()).map_err(|e| {
        Error::InvalidInput(format!("{}: probabilities must be nested [y][x][j] numbers: {e}", path.display()))
    })?;
    let table = table_from_nested(&nested)?;
    Ok(TableFile { dimension, table })
}

pub fn to_json(table: &CorrelationTable, dimension: Option<usize>) -> Value {
    let mut v = json!({
        "num_y": table.num_y(),
        "num_x": table.num_x(),
        "outcomes": (0..table.num_x()).map(|x| table.outcomes(x)).collect::<Vec<_>>(),
        "probabilities": table.to_nested(),
    });
    if let Some(d) = dimension {
        v["dimension"] = json!(d);
    }
    v
}

pub fn to_csv(table: &CorrelationTable) -> String {
    let mut out = String::from("y,x,j,p\n");
    for y in 0..table.num_y() {
        for x in 0..table.num_x() {
            for j in 0..table.outcomes(x) {
                out.push_str(&format!("{y},{x},{j},{}\n", table.prob(j, x, y)));
            }
        }
    }
    out
}

pub fn to_text(table: &CorrelationTable) -> String {
    let mut out = String::new();
    for y in 0..table.num_y() {
        for x in 0..table.num_x() {
            let row: Vec<String> = (0..table.outcomes(x)).map(|j| format!("{:.6}", table.prob(j, x, y))).collect();
            out.push_str(&format!("y={y} x={x}: {}\n", row.join(" ")));
        }
    }
    out
}
