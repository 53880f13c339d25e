//! Rank-based no-go test for free resources.
//!
//! If every prepared state lies in the span of `N` free extremal states, the
//! `y × x` matrix of `p(j|x,y)` for a fixed outcome has rank at most `N`,
//! whatever the measurements. The same holds with the roles of states and
//! effects exchanged. A numerical rank above the budget therefore certifies
//! that at least one preparation (or operation) is resourceful.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::freesets::FreeSetSpec;
use crate::qmath::{spanning_pure_states, DensityMatrix, Effect, PureState};
use crate::scenario::{CorrelationTable, OperationBox, PreparationBox};

pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Real matrix of single-outcome probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    entries: DMatrix<f64>,
}

impl CorrelationMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidInput("correlation matrix is empty".into()));
        }
        if let Some(v) = entries.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidInput(format!("entry {v} is not a probability")));
        }
        Ok(Self { entries })
    }

    /// Builds from row-major data; entries must be probabilities.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let ncols = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::InvalidInput("ragged correlation matrix".into()));
        }
        Self::new(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
    }

    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[(row, col)]
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn transpose(&self) -> Self {
        Self { entries: self.entries.transpose() }
    }
}

fn clamp_probability(p: f64) -> f64 {
    // simulated tables may carry ±1e-12 rounding
    p.clamp(0.0, 1.0)
}

fn check_outcome(table: &CorrelationTable, outcome: usize) -> Result<()> {
    if outcome >= table.num_j() {
        return Err(Error::InvalidInput(format!(
            "outcome {outcome} out of range; table has {} outcomes",
            table.num_j()
        )));
    }
    Ok(())
}

/// Rows indexed by preparation `y`, columns by setting `x`.
pub fn build_state_test_matrix(table: &CorrelationTable, outcome: usize) -> Result<CorrelationMatrix> {
    check_outcome(table, outcome)?;
    CorrelationMatrix::new(DMatrix::from_fn(table.num_y(), table.num_x(), |y, x| {
        clamp_probability(table.prob(outcome, x, y))
    }))
}

/// Transpose of [`build_state_test_matrix`]: rows indexed by `x`.
pub fn build_operation_test_matrix(
    table: &CorrelationTable,
    outcome: usize,
) -> Result<CorrelationMatrix> {
    Ok(build_state_test_matrix(table, outcome)?.transpose())
}

/// Singular values, descending.
pub fn singular_values(m: &CorrelationMatrix) -> Vec<f64> {
    let mut sv: Vec<f64> = m.entries.clone().singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Number of singular values above `rel_tol · σ_max`; zero for the zero matrix.
pub fn numerical_rank(m: &CorrelationMatrix, rel_tol: f64) -> usize {
    rank_from_spectrum(&singular_values(m), rel_tol)
}

fn rank_from_spectrum(sv: &[f64], rel_tol: f64) -> usize {
    let max = sv.first().copied().unwrap_or(0.0);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * max).count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DetectionMode {
    /// Free preparations, arbitrary operations.
    States,
    /// Free operations, arbitrary preparations.
    Operations,
    /// Fires if either side is certified resourceful.
    Both,
}

impl std::str::FromStr for DetectionMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "STATES" => Ok(Self::States),
            "OPERATIONS" => Ok(Self::Operations),
            "BOTH" => Ok(Self::Both),
            other => Err(Error::InvalidInput(format!(
                "unknown detection mode `{other}` (expected STATES, OPERATIONS or BOTH)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    ResourceDetected,
    ConsistentWithFree,
}

/// One rank comparison (states side or operations side).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankCheck {
    pub side: DetectionMode,
    pub rank: usize,
    pub budget: usize,
    pub singular_values: Vec<f64>,
    /// `budget < d²`; when false the comparison cannot fire.
    pub hypothesis_met: bool,
}

impl RankCheck {
    pub fn fires(&self) -> bool {
        self.hypothesis_met && self.rank > self.budget
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionVerdict {
    pub mode: DetectionMode,
    pub verdict: Verdict,
    pub tolerance_used: f64,
    pub checks: Vec<RankCheck>,
    /// Set when some budget reaches `d²`, making that comparison vacuous.
    pub hypothesis_warning: bool,
}

impl DetectionVerdict {
    /// Rank of the deciding check: the first that fired, else the first run.
    pub fn rank(&self) -> usize {
        self.deciding().rank
    }

    pub fn budget(&self) -> usize {
        self.deciding().budget
    }

    fn deciding(&self) -> &RankCheck {
        self.checks.iter().find(|c| c.fires()).unwrap_or(&self.checks[0])
    }
}

fn rank_check(
    matrix: &CorrelationMatrix,
    side: DetectionMode,
    budget: usize,
    dim: usize,
    rel_tol: f64,
) -> RankCheck {
    let sv = singular_values(matrix);
    RankCheck {
        side,
        rank: rank_from_spectrum(&sv, rel_tol),
        budget,
        singular_values: sv,
        hypothesis_met: budget < dim * dim,
    }
}

/// Compares the outcome-0 correlation matrix rank with the free set's budget.
pub fn detect(
    table: &CorrelationTable,
    free: &FreeSetSpec,
    mode: DetectionMode,
    rel_tol: f64,
) -> Result<DetectionVerdict> {
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(Error::InvalidInput(format!("rank tolerance {rel_tol} must lie in (0, 1)")));
    }
    let dim = free.dim();
    let mut checks = Vec::new();
    if matches!(mode, DetectionMode::States | DetectionMode::Both) {
        let budget = free.state_rank_budget();
        if budget == 0 {
            return Err(Error::InvalidInput("state rank budget must be positive".into()));
        }
        let m = build_state_test_matrix(table, 0)?;
        checks.push(rank_check(&m, DetectionMode::States, budget, dim, rel_tol));
    }
    if matches!(mode, DetectionMode::Operations | DetectionMode::Both) {
        let budget = free.effect_rank_budget();
        if budget == 0 {
            return Err(Error::InvalidInput("effect rank budget must be positive".into()));
        }
        let m = build_operation_test_matrix(table, 0)?;
        checks.push(rank_check(&m, DetectionMode::Operations, budget, dim, rel_tol));
    }
    let verdict = if checks.iter().any(RankCheck::fires) {
        Verdict::ResourceDetected
    } else {
        Verdict::ConsistentWithFree
    };
    let hypothesis_warning = checks.iter().any(|c| !c.hypothesis_met);
    Ok(DetectionVerdict { mode, verdict, tolerance_used: rel_tol, checks, hypothesis_warning })
}

fn binary_instrument(state: &PureState) -> Vec<Effect> {
    let e = Effect::projector(state);
    let rest = e.complement();
    vec![e, rest]
}

/// Realization whose outcome-0 state-test matrix has rank exactly `budget + 1`.
///
/// Prepares `budget + 1` linearly independent pure states and measures the
/// `d²` binary instruments `{P_x, 𝟙 − P_x}` whose projectors span the
/// Hermitian operators.
pub fn state_test_construction(dim: usize, budget: usize) -> Result<(PreparationBox, OperationBox)> {
    let family = spanning_pure_states(dim)?;
    if budget >= dim * dim {
        return Err(Error::InvalidInput(format!(
            "budget {budget} must be below d² = {}",
            dim * dim
        )));
    }
    let prep = PreparationBox::new(family[..=budget].iter().map(DensityMatrix::from_pure).collect())?;
    let ops = OperationBox::new(family.iter().map(binary_instrument).collect())?;
    Ok((prep, ops))
}

/// Mirror of [`state_test_construction`]: `d²` spanning states and `budget + 1`
/// linearly independent rank-one effects.
pub fn operation_test_construction(
    dim: usize,
    budget: usize,
) -> Result<(PreparationBox, OperationBox)> {
    let family = spanning_pure_states(dim)?;
    if budget >= dim * dim {
        return Err(Error::InvalidInput(format!(
            "budget {budget} must be below d² = {}",
            dim * dim
        )));
    }
    let prep = PreparationBox::new(family.iter().map(DensityMatrix::from_pure).collect())?;
    let ops = OperationBox::new(family[..=budget].iter().map(binary_instrument).collect())?;
    Ok((prep, ops))
}
