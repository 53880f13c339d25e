//! Prepare-and-measure experiments and their correlation tables.
//!
//! A preparation box emits `ρ_y` on input `y`; an operation box applies the
//! instrument chosen by `x` and reports outcome `j`. The observable data is
//! `p(j|x,y) = Tr(E_{j,x} ρ_y)`. Only effects are modeled: post-measurement
//! states never enter any correlation handled here.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmath::{ComplexMatrix, DensityMatrix, Effect};

/// Completeness tolerance for `Σ_j E_{j,x} = 𝟙`.
pub const DEFAULT_COMPLETENESS_TOL: f64 = 1e-10;
/// Normalization gate for tables produced by simulation.
pub const SIMULATED_NORMALIZATION_TOL: f64 = 1e-10;
/// Normalization gate for externally supplied tables.
pub const RAW_NORMALIZATION_TOL: f64 = 1e-6;
/// Largest imaginary Born-rule residue accepted by [`simulate`].
pub const DEFAULT_IMAGINARY_TOL: f64 = 1e-12;
const SIMULATED_RANGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PreparationBox {
    dim: usize,
    states: Vec<DensityMatrix>,
}

impl PreparationBox {
    pub fn new(states: Vec<DensityMatrix>) -> Result<Self> {
        let dim = states
            .first()
            .map(DensityMatrix::dim)
            .ok_or_else(|| Error::InvalidInput("preparation box needs at least one state".into()))?;
        if let Some((y, s)) = states.iter().enumerate().find(|(_, s)| s.dim() != dim) {
            return Err(Error::InvalidInput(format!(
                "state y={y} has dimension {}, expected {dim}",
                s.dim()
            )));
        }
        Ok(Self { dim, states })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn states(&self) -> &[DensityMatrix] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperationBox {
    dim: usize,
    instruments: Vec<Vec<Effect>>,
}

impl OperationBox {
    pub fn new(instruments: Vec<Vec<Effect>>) -> Result<Self> {
        Self::new_with_tol(instruments, DEFAULT_COMPLETENESS_TOL)
    }

    pub fn new_with_tol(instruments: Vec<Vec<Effect>>, completeness_tol: f64) -> Result<Self> {
        let dim = instruments
            .first()
            .and_then(|i| i.first())
            .map(Effect::dim)
            .ok_or_else(|| Error::InvalidInput("operation box needs at least one instrument".into()))?;
        for (x, inst) in instruments.iter().enumerate() {
            if inst.len() < 2 {
                return Err(Error::InvalidInput(format!(
                    "instrument x={x} has {} outcome(s); at least 2 are required",
                    inst.len()
                )));
            }
            if let Some((j, e)) = inst.iter().enumerate().find(|(_, e)| e.dim() != dim) {
                return Err(Error::InvalidInput(format!(
                    "effect (x={x}, j={j}) has dimension {}, expected {dim}",
                    e.dim()
                )));
            }
            let total = inst
                .iter()
                .fold(ComplexMatrix::zeros(dim), |acc, e| &acc + e.matrix());
            let defect = total.max_abs_diff(&ComplexMatrix::identity(dim));
            if defect > completeness_tol {
                return Err(Error::ContractViolation(format!(
                    "instrument x={x} is not normalized: effects sum differs from identity by {defect:.3e}"
                )));
            }
        }
        Ok(Self { dim, instruments })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn instruments(&self) -> &[Vec<Effect>] {
        &self.instruments
    }

    pub fn len(&self) -> usize {
        self.instruments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instruments.is_empty()
    }
}

/// `p(j|x,y)` for every input pair.
///
/// Instruments may have different outcome counts; the table is padded to the
/// largest count with zero probabilities and remembers the true count per `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTable {
    num_y: usize,
    num_x: usize,
    num_j: usize,
    outcomes: Vec<usize>,
    probs: Vec<f64>,
}

impl CorrelationTable {
    fn index(&self, j: usize, x: usize, y: usize) -> usize {
        (y * self.num_x + x) * self.num_j + j
    }

    /// `(num_y, num_x, num_j)`
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.num_y, self.num_x, self.num_j)
    }

    pub fn num_y(&self) -> usize {
        self.num_y
    }

    pub fn num_x(&self) -> usize {
        self.num_x
    }

    pub fn num_j(&self) -> usize {
        self.num_j
    }

    /// Number of outcomes instrument `x` actually has.
    pub fn outcomes(&self, x: usize) -> usize {
        self.outcomes[x]
    }

    /// `p(j|x,y)`; zero for padded outcomes.
    pub fn prob(&self, j: usize, x: usize, y: usize) -> f64 {
        self.probs[self.index(j, x, y)]
    }

    /// Probabilities nested as `[y][x][j]`, trimmed to each instrument's outcome count.
    pub fn to_nested(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.num_y)
            .map(|y| {
                (0..self.num_x)
                    .map(|x| (0..self.outcomes[x]).map(|j| self.prob(j, x, y)).collect())
                    .collect()
            })
            .collect()
    }

    /// Table with the `y` slices reordered: slice `k` of the result is slice `order[k]` of `self`.
    pub fn permute_preparations(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.num_y];
        if order.len() != self.num_y
            || order.iter().any(|&y| y >= self.num_y || std::mem::replace(&mut seen[y], true))
        {
            return Err(Error::InvalidInput("not a permutation of the preparation inputs".into()));
        }
        let mut probs = Vec::with_capacity(self.probs.len());
        for &y in order {
            let start = self.index(0, 0, y);
            probs.extend_from_slice(&self.probs[start..start + self.num_x * self.num_j]);
        }
        Ok(Self { probs, ..self.clone() })
    }

    /// Checks normalization and range; `tol` is the allowed slack.
    pub fn validate(&self, tol: f64) -> Result<()> {
        if self.num_y == 0 || self.num_x == 0 || self.num_j == 0 {
            return Err(Error::DataValidation("table has an empty dimension".into()));
        }
        if self.outcomes.len() != self.num_x
            || self.probs.len() != self.num_y * self.num_x * self.num_j
            || self.outcomes.iter().any(|&k| k == 0 || k > self.num_j)
        {
            return Err(Error::DataValidation("table dimensions are inconsistent".into()));
        }
        for y in 0..self.num_y {
            for x in 0..self.num_x {
                let mut total = 0.0;
                for j in 0..self.num_j {
                    let p = self.prob(j, x, y);
                    if !p.is_finite() || p < -tol || p > 1.0 + tol {
                        return Err(Error::DataValidation(format!(
                            "p({j}|{x},{y}) = {p} is not a probability"
                        )));
                    }
                    if j >= self.outcomes[x] && p != 0.0 {
                        return Err(Error::DataValidation(format!(
                            "p({j}|{x},{y}) is set but instrument x={x} has {} outcomes",
                            self.outcomes[x]
                        )));
                    }
                    total += p;
                }
                if (total - 1.0).abs() > tol {
                    return Err(Error::DataValidation(format!(
                        "probabilities for (x={x}, y={y}) sum to {total}, not 1"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Born-rule tolerances used by [`simulate_with_tol`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationTolerance {
    pub imaginary: f64,
    pub normalization: f64,
}

impl Default for SimulationTolerance {
    fn default() -> Self {
        Self { imaginary: DEFAULT_IMAGINARY_TOL, normalization: SIMULATED_NORMALIZATION_TOL }
    }
}

pub fn simulate(prep: &PreparationBox, ops: &OperationBox) -> Result<CorrelationTable> {
    simulate_with_tol(prep, ops, SimulationTolerance::default())
}

pub fn simulate_with_tol(
    prep: &PreparationBox,
    ops: &OperationBox,
    tol: SimulationTolerance,
) -> Result<CorrelationTable> {
    if prep.dim() != ops.dim() {
        return Err(Error::InvalidInput(format!(
            "preparations are {}-dimensional but operations act on dimension {}",
            prep.dim(),
            ops.dim()
        )));
    }
    let outcomes: Vec<usize> = ops.instruments().iter().map(Vec::len).collect();
    let num_j = outcomes.iter().copied().max().unwrap_or(0);
    let (num_y, num_x) = (prep.len(), ops.len());
    let mut probs = vec![0.0; num_y * num_x * num_j];
    for (y, rho) in prep.states().iter().enumerate() {
        for (x, inst) in ops.instruments().iter().enumerate() {
            let mut total = 0.0;
            for (j, effect) in inst.iter().enumerate() {
                let (p, residue) = effect.probability(rho);
                if residue.abs() > tol.imaginary {
                    return Err(Error::ContractViolation(format!(
                        "Tr(E ρ) for (j={j}, x={x}, y={y}) has imaginary part {residue:.3e}"
                    )));
                }
                if p < -SIMULATED_RANGE_TOL || p > 1.0 + SIMULATED_RANGE_TOL {
                    return Err(Error::ContractViolation(format!(
                        "p({j}|{x},{y}) = {p} leaves [0, 1]"
                    )));
                }
                probs[(y * num_x + x) * num_j + j] = p;
                total += p;
            }
            if (total - 1.0).abs() > tol.normalization {
                return Err(Error::ContractViolation(format!(
                    "probabilities for (x={x}, y={y}) sum to {total}"
                )));
            }
        }
    }
    Ok(CorrelationTable { num_y, num_x, num_j, outcomes, probs })
}

/// Shape of a flat probability array, laid out `[y][x][j]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableDims {
    pub num_y: usize,
    pub num_x: usize,
    pub num_j: usize,
    /// Outcome count per `x`; `None` means every instrument uses all `num_j` outcomes.
    pub outcomes: Option<Vec<usize>>,
}

/// Ingests measured (or otherwise externally produced) probabilities.
pub fn table_from_raw(probs: &[f64], dims: TableDims) -> Result<CorrelationTable> {
    table_from_raw_with_tol(probs, dims, RAW_NORMALIZATION_TOL)
}

pub fn table_from_raw_with_tol(probs: &[f64], dims: TableDims, tol: f64) -> Result<CorrelationTable> {
    let TableDims { num_y, num_x, num_j, outcomes } = dims;
    if probs.len() != num_y * num_x * num_j {
        return Err(Error::InvalidInput(format!(
            "{} probabilities do not fit dims ({num_y}, {num_x}, {num_j})",
            probs.len()
        )));
    }
    let outcomes = outcomes.unwrap_or_else(|| vec![num_j; num_x]);
    let table = CorrelationTable { num_y, num_x, num_j, outcomes, probs: probs.to_vec() };
    table.validate(tol)?;
    Ok(table)
}

/// Builds a table from `[y][x][j]` nested vectors; outcome counts may vary with `x`
/// but must agree across `y`.
pub fn table_from_nested(nested: &[Vec<Vec<f64>>]) -> Result<CorrelationTable> {
    let num_y = nested.len();
    let first = nested
        .first()
        .ok_or_else(|| Error::InvalidInput("table has no preparation entries".into()))?;
    let num_x = first.len();
    let outcomes: Vec<usize> = first.iter().map(Vec::len).collect();
    for (y, row) in nested.iter().enumerate() {
        if row.len() != num_x || row.iter().map(Vec::len).ne(outcomes.iter().copied()) {
            return Err(Error::InvalidInput(format!(
                "preparation y={y} does not match the shape of y=0"
            )));
        }
    }
    let num_j = outcomes.iter().copied().max().unwrap_or(0);
    let mut flat = vec![0.0; num_y * num_x * num_j];
    for (y, row) in nested.iter().enumerate() {
        for (x, ps) in row.iter().enumerate() {
            for (j, &p) in ps.iter().enumerate() {
                flat[(y * num_x + x) * num_j + j] = p;
            }
        }
    }
    table_from_raw(&flat, TableDims { num_y, num_x, num_j, outcomes: Some(outcomes) })
}
