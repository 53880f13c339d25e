//! Resource witnesses: functionals of a correlation table with a free bound.
//!
//! A witness only ever reads the correlation table. The reference
//! realization attached to each witness is there to regenerate the quantum
//! value, never to inform evaluation.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::freesets::{stabilizer_qubit, MeasurementClass};
use crate::optimizer::Constraint;
use crate::optimizer;
use crate::qmath::{kets, qrac_measurement_basis, qrac_state, DensityMatrix, Effect, PureState};
use crate::scenario::{simulate, CorrelationTable, OperationBox, PreparationBox};

/// A table violates a witness when its value exceeds the bound by more than this.
pub const VIOLATION_MARGIN: f64 = 1e-9;

/// Published two-decimal value of the qubit magic bound.
pub const MAGIC_BOUND_PUBLISHED: f64 = 4.32;

/// Inputs a witness reads: preparations, settings and outcomes per setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct WitnessShape {
    pub num_y: usize,
    pub num_x: usize,
    pub min_outcomes: usize,
}

/// One addend `coef · p(j|x,y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Term {
    pub y: usize,
    pub x: usize,
    pub j: usize,
    pub coef: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearForm {
    pub constant: f64,
    pub terms: Vec<Term>,
}

impl LinearForm {
    fn unit(cells: &[(usize, usize, usize)]) -> Self {
        Self {
            constant: 0.0,
            terms: cells.iter().map(|&(y, x, j)| Term { y, x, j, coef: 1.0 }).collect(),
        }
    }

    pub fn value(&self, table: &CorrelationTable) -> f64 {
        self.constant + self.terms.iter().map(|t| t.coef * table.prob(t.j, t.x, t.y)).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum WitnessForm {
    Linear(LinearForm),
    /// `linear − Σ_{(x,y)} |p(0|x,y) − p(1|x,y)|`
    Penalized { linear: LinearForm, balance: Vec<(usize, usize)> },
    /// `−Σ_{(x,y)} |p(0|x,y) − target|` over the listed `(x, y, target)` cells.
    L1Distance { cells: Vec<(usize, usize, f64)> },
}

impl WitnessForm {
    pub fn value(&self, table: &CorrelationTable) -> f64 {
        match self {
            WitnessForm::Linear(l) => l.value(table),
            WitnessForm::Penalized { linear, balance } => {
                linear.value(table)
                    - balance
                        .iter()
                        .map(|&(x, y)| (table.prob(0, x, y) - table.prob(1, x, y)).abs())
                        .sum::<f64>()
            }
            WitnessForm::L1Distance { cells } => {
                -cells.iter().map(|&(x, y, t)| (table.prob(0, x, y) - t).abs()).sum::<f64>()
            }
        }
    }

    pub fn as_linear(&self) -> Option<&LinearForm> {
        match self {
            WitnessForm::Linear(l) => Some(l),
            _ => None,
        }
    }

    /// Every `(y, x, j)` cell the form reads.
    pub fn cells(&self) -> Vec<(usize, usize, usize)> {
        let mut out: Vec<(usize, usize, usize)> = match self {
            WitnessForm::Linear(l) => l.terms.iter().map(|t| (t.y, t.x, t.j)).collect(),
            WitnessForm::Penalized { linear, balance } => linear
                .terms
                .iter()
                .map(|t| (t.y, t.x, t.j))
                .chain(balance.iter().flat_map(|&(x, y)| [(y, x, 0), (y, x, 1)]))
                .collect(),
            WitnessForm::L1Distance { cells } => cells.iter().map(|&(x, y, _)| (y, x, 0)).collect(),
        };
        out.sort_unstable();
        out.dedup();
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundProvenance {
    /// Proven maximum over free realizations.
    Analytic,
    /// Proven upper bound; attainment not established.
    AnalyticUpperBound,
    /// Recomputed numerically; `published` is the two-decimal literature value.
    CertifiedNumeric { published: f64 },
    /// Caller-chosen margin below the quantum value.
    Margin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FreeBound {
    pub value: f64,
    pub provenance: BoundProvenance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WitnessSpec {
    pub name: String,
    pub dim: usize,
    pub shape: WitnessShape,
    pub form: WitnessForm,
    pub free_bound: FreeBound,
    /// Documented bound the certified value is compared with.
    pub nominal_bound: Option<f64>,
    /// Measurement class over which the free bound is stated.
    pub measurement_class: MeasurementClass,
    pub reference_realization: Option<(PreparationBox, OperationBox)>,
    pub reference_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum WitnessVerdict {
    Violated,
    NotViolated,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub witness: String,
    pub value: f64,
    pub free_bound: f64,
    pub provenance: BoundProvenance,
    pub verdict: WitnessVerdict,
    pub warnings: Vec<String>,
}

impl WitnessSpec {
    pub fn value(&self, table: &CorrelationTable) -> f64 {
        self.form.value(table)
    }

    /// Re-simulates the reference realization and evaluates it.
    pub fn reference_table(&self) -> Option<Result<CorrelationTable>> {
        self.reference_realization.as_ref().map(|(p, o)| simulate(p, o))
    }

    /// Outcome count used when this witness is optimized in dimension `dim`.
    pub fn outcomes_for_search(&self) -> usize {
        let base = self.shape.min_outcomes.max(2);
        match self.measurement_class {
            MeasurementClass::RankOne => base.max(self.dim),
            MeasurementClass::General => base,
        }
    }
}

fn pure_box(states: &[PureState]) -> Result<PreparationBox> {
    PreparationBox::new(states.iter().map(DensityMatrix::from_pure).collect())
}

fn projective_box(instruments: &[Vec<PureState>]) -> Result<OperationBox> {
    OperationBox::new(
        instruments
            .iter()
            .map(|basis| basis.iter().map(Effect::projector).collect())
            .collect(),
    )
}

const COHERENCE_CELLS: [(usize, usize, usize); 5] = [(0, 0, 0), (1, 0, 0), (0, 1, 0), (1, 1, 1), (2, 0, 1)];

fn coherence_instruments() -> Vec<Vec<PureState>> {
    vec![
        vec![kets::bar_zero(), kets::bar_one()],
        vec![kets::bar_plus(), kets::bar_minus()],
    ]
}

fn finish(mut spec: WitnessSpec) -> Result<WitnessSpec> {
    if let Some(table) = spec.reference_table() {
        spec.reference_value = spec.value(&table?);
    }
    Ok(spec)
}

/// `p(0|0,0)+p(0|0,1)+p(0|1,0)+p(1|1,1)+p(1|0,2) ≤ 4` over incoherent realizations.
pub fn coherence_qubit() -> WitnessSpec {
    let states = [kets::zero(), kets::plus(), kets::bar_one()];
    finish(WitnessSpec {
        name: "coherence".into(),
        dim: 2,
        shape: WitnessShape { num_y: 3, num_x: 2, min_outcomes: 2 },
        form: WitnessForm::Linear(LinearForm::unit(&COHERENCE_CELLS)),
        free_bound: FreeBound { value: 4.0, provenance: BoundProvenance::Analytic },
        nominal_bound: Some(4.0),
        measurement_class: MeasurementClass::General,
        reference_realization: Some((
            pure_box(&states).expect("qubit states"),
            projective_box(&coherence_instruments()).expect("complete bases"),
        )),
        reference_value: 0.0,
    })
    .expect("reference realization is valid")
}

/// Qudit random-access-code witness `Σ_x Σ_{y0,y1} p(j = y_x | x, y0y1) ≤ d² + d`.
///
/// Preparation `y = y0·d + y1`.
pub fn coherence_qudit(dim: usize) -> Result<WitnessSpec> {
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    let mut cells = Vec::with_capacity(2 * dim * dim);
    let mut states = Vec::with_capacity(dim * dim);
    for y0 in 0..dim {
        for y1 in 0..dim {
            let y = y0 * dim + y1;
            cells.push((y, 0, y0));
            cells.push((y, 1, y1));
            states.push(qrac_state(dim, y0, y1)?);
        }
    }
    let bases = vec![qrac_measurement_basis(dim, 0)?, qrac_measurement_basis(dim, 1)?];
    let bound = (dim * dim + dim) as f64;
    finish(WitnessSpec {
        name: "coherence-d".into(),
        dim,
        shape: WitnessShape { num_y: dim * dim, num_x: 2, min_outcomes: dim },
        form: WitnessForm::Linear(LinearForm::unit(&cells)),
        free_bound: FreeBound { value: bound, provenance: BoundProvenance::Analytic },
        nominal_bound: Some(bound),
        measurement_class: MeasurementClass::RankOne,
        reference_realization: Some((pure_box(&states)?, projective_box(&bases)?)),
        reference_value: 0.0,
    })
}

/// `W_C + p(0|2,3) − |p(0|2,0) − p(1|2,0)| − |p(0|2,1) − p(1|2,1)| ≤ 5` over real
/// states and real rank-one measurements.
pub fn imaginarity_qubit() -> WitnessSpec {
    let mut cells = COHERENCE_CELLS.to_vec();
    cells.push((3, 2, 0));
    let states = [kets::zero(), kets::plus(), kets::bar_one(), kets::plus_y()];
    let mut instruments = coherence_instruments();
    instruments.push(vec![kets::plus_y(), kets::minus_y()]);
    finish(WitnessSpec {
        name: "imaginarity".into(),
        dim: 2,
        shape: WitnessShape { num_y: 4, num_x: 3, min_outcomes: 2 },
        form: WitnessForm::Penalized { linear: LinearForm::unit(&cells), balance: vec![(2, 0), (2, 1)] },
        free_bound: FreeBound { value: 5.0, provenance: BoundProvenance::AnalyticUpperBound },
        nominal_bound: Some(5.0),
        measurement_class: MeasurementClass::RankOne,
        reference_realization: Some((
            pure_box(&states).expect("qubit states"),
            projective_box(&instruments).expect("complete bases"),
        )),
        reference_value: 0.0,
    })
    .expect("reference realization is valid")
}

/// `p(0|0,0) ≤ 1/d` when the only free state is `𝟙/d` and outcome effects are rank one.
pub fn purity(dim: usize) -> Result<WitnessSpec> {
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    let zero = PureState::basis(dim, 0)?;
    let effect = Effect::projector(&zero);
    let ops = OperationBox::new(vec![vec![effect.clone(), effect.complement()]])?;
    let bound = 1.0 / dim as f64;
    finish(WitnessSpec {
        name: "purity".into(),
        dim,
        shape: WitnessShape { num_y: 1, num_x: 1, min_outcomes: 1 },
        form: WitnessForm::Linear(LinearForm::unit(&[(0, 0, 0)])),
        free_bound: FreeBound { value: bound, provenance: BoundProvenance::Analytic },
        nominal_bound: Some(bound),
        measurement_class: MeasurementClass::RankOne,
        reference_realization: Some((pure_box(&[zero])?, ops)),
        reference_value: 0.0,
    })
}

/// The coherence expression read as a magic witness: the free bound is the
/// maximum over stabilizer states and arbitrary measurements, recomputed by
/// exhaustive vertex enumeration.
pub fn magic_qubit() -> WitnessSpec {
    let mut spec = coherence_qubit();
    spec.name = "magic".into();
    spec.nominal_bound = Some(MAGIC_BOUND_PUBLISHED);
    let certified = optimizer::enumerate_vertices(&spec, &stabilizer_qubit(), Constraint::StatesOnly)
        .expect("coherence expression is linear over the stabilizer polytope");
    spec.free_bound = FreeBound {
        value: certified.value,
        provenance: BoundProvenance::CertifiedNumeric { published: MAGIC_BOUND_PUBLISHED },
    };
    spec
}

/// `−Σ_{x,y} |p(0|x,y) − p_ref(0|x,y)| ≤ −ε` around a reference table.
pub fn generic_witness(reference: &CorrelationTable, epsilon: f64) -> Result<WitnessSpec> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidInput(format!("margin ε = {epsilon} must be strictly positive")));
    }
    let mut cells = Vec::with_capacity(reference.num_x() * reference.num_y());
    for y in 0..reference.num_y() {
        for x in 0..reference.num_x() {
            cells.push((x, y, reference.prob(0, x, y)));
        }
    }
    Ok(WitnessSpec {
        name: "generic".into(),
        dim: 0,
        shape: WitnessShape { num_y: reference.num_y(), num_x: reference.num_x(), min_outcomes: 1 },
        form: WitnessForm::L1Distance { cells },
        free_bound: FreeBound { value: -epsilon, provenance: BoundProvenance::Margin },
        nominal_bound: None,
        measurement_class: MeasurementClass::General,
        reference_realization: None,
        reference_value: 0.0,
    })
}

/// Like [`generic_witness`], keeping the realization that produced the reference table.
pub fn generic_witness_from_realization(
    prep: PreparationBox,
    ops: OperationBox,
    epsilon: f64,
) -> Result<WitnessSpec> {
    let table = simulate(&prep, &ops)?;
    let mut spec = generic_witness(&table, epsilon)?;
    spec.dim = prep.dim();
    spec.reference_realization = Some((prep, ops));
    Ok(spec)
}

/// Names accepted by [`by_name`] (plus `generic`, which needs a reference table).
pub const WITNESS_NAMES: [&str; 6] = ["coherence", "coherence-d", "imaginarity", "purity", "magic", "generic"];

pub fn by_name(name: &str, dim: usize) -> Result<WitnessSpec> {
    let qubit_only = |what: &'static str| {
        if dim != 2 {
            Err(Error::UnsupportedDimension { what, supported: "2", got: dim })
        } else {
            Ok(())
        }
    };
    match name {
        "coherence" => qubit_only("the coherence witness").map(|_| coherence_qubit()),
        "coherence-d" => coherence_qudit(dim),
        "imaginarity" => qubit_only("the imaginarity witness").map(|_| imaginarity_qubit()),
        "purity" => purity(dim),
        "magic" => qubit_only("the magic witness").map(|_| magic_qubit()),
        "generic" => Err(Error::InvalidInput("the generic witness needs a reference table".into())),
        other => Err(Error::InvalidInput(format!(
            "unknown witness `{other}` (known: {})",
            WITNESS_NAMES.join(", ")
        ))),
    }
}

/// Evaluates a witness on a table and compares against its free bound.
pub fn evaluate(spec: &WitnessSpec, table: &CorrelationTable) -> Result<Evaluation> {
    let missing: Vec<String> = spec
        .form
        .cells()
        .into_iter()
        .filter(|&(y, x, j)| y >= table.num_y() || x >= table.num_x() || j >= table.outcomes(x))
        .map(|(y, x, j)| format!("({y}, {x}, {j})"))
        .collect();
    if !missing.is_empty() {
        return Err(Error::ShapeMismatch { witness: spec.name.clone(), missing: missing.join(", ") });
    }
    let value = spec.value(table);
    let mut warnings = Vec::new();
    let read_settings: std::collections::BTreeSet<usize> = spec.form.cells().iter().map(|c| c.1).collect();
    let trivial: Vec<usize> = read_settings.into_iter().filter(|&x| table.outcomes(x) < 2).collect();
    let mut verdict = if value > spec.free_bound.value + VIOLATION_MARGIN {
        WitnessVerdict::Violated
    } else {
        WitnessVerdict::NotViolated
    };
    if !trivial.is_empty() {
        warnings.push(format!(
            "settings {trivial:?} report a single outcome; no violation is claimed for one-outcome instruments"
        ));
        verdict = WitnessVerdict::NotViolated;
    }
    Ok(Evaluation {
        witness: spec.name.clone(),
        value,
        free_bound: spec.free_bound.value,
        provenance: spec.free_bound.provenance,
        verdict,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{table_from_nested, TableDims, table_from_raw};

    fn uniform_table(num_y: usize, num_x: usize, outcomes: usize) -> CorrelationTable {
        let p = 1.0 / outcomes as f64;
        table_from_raw(
            &vec![p; num_y * num_x * outcomes],
            TableDims { num_y, num_x, num_j: outcomes, outcomes: None },
        )
        .unwrap()
    }

    #[test]
    fn coherence_reference_value() {
        let spec = coherence_qubit();
        let t = spec.reference_table().unwrap().unwrap();
        let e = evaluate(&spec, &t).unwrap();
        assert!((e.value - (3.0 + 2f64.sqrt())).abs() < 1e-9);
        assert_eq!(e.verdict, WitnessVerdict::Violated);
    }

    #[test]
    fn coherence_on_uniform_table() {
        let e = evaluate(&coherence_qubit(), &uniform_table(3, 2, 2)).unwrap();
        assert!((e.value - 2.5).abs() < 1e-15);
        assert_eq!(e.verdict, WitnessVerdict::NotViolated);
    }

    #[test]
    fn qudit_reference_values() {
        for d in 2..=4 {
            let spec = coherence_qudit(d).unwrap();
            let df = d as f64;
            assert!((spec.reference_value - (df * df + df * df.sqrt())).abs() < 1e-9, "d={d}");
            assert_eq!(spec.free_bound.value, df * df + df);
            let gap = spec.reference_value - spec.free_bound.value;
            assert!((gap - df * (df.sqrt() - 1.0)).abs() < 1e-9 && gap > 0.0);
            let uniform = uniform_table(d * d, 2, d);
            assert!((spec.value(&uniform) - 2.0 * df).abs() < 1e-12);
        }
        assert!(coherence_qudit(1).is_err());
    }

    #[test]
    fn imaginarity_values() {
        let spec = imaginarity_qubit();
        assert!((spec.reference_value - (4.0 + 2f64.sqrt())).abs() < 1e-9);
        let e = evaluate(&spec, &uniform_table(4, 3, 2)).unwrap();
        assert!((e.value - 3.0).abs() < 1e-15);
    }

    #[test]
    fn purity_values() {
        for d in 2..=3 {
            let spec = purity(d).unwrap();
            assert!((spec.reference_value - 1.0).abs() < 1e-12);
            let prep = PreparationBox::new(vec![DensityMatrix::maximally_mixed(d)]).unwrap();
            let t = simulate(&prep, &spec.reference_realization.as_ref().unwrap().1).unwrap();
            let e = evaluate(&spec, &t).unwrap();
            assert!((e.value - 1.0 / d as f64).abs() < 1e-12);
            assert_eq!(e.verdict, WitnessVerdict::NotViolated);
        }
    }

    #[test]
    fn purity_with_one_outcome_instrument_is_not_a_violation() {
        // 𝟙/2 measured with the trivial effect 𝟙: value 1 > 1/2 but nothing is certified
        let t = table_from_nested(&[vec![vec![1.0]]]).unwrap();
        let e = evaluate(&purity(2).unwrap(), &t).unwrap();
        assert_eq!(e.value, 1.0);
        assert_eq!(e.verdict, WitnessVerdict::NotViolated);
        assert_eq!(e.warnings.len(), 1);
    }

    #[test]
    fn magic_bound_is_recomputed() {
        let spec = magic_qubit();
        assert!((spec.free_bound.value - MAGIC_BOUND_PUBLISHED).abs() < 0.01);
        assert!(spec.free_bound.value >= 4.0);
        assert!(spec.reference_value > spec.free_bound.value);
        let e = evaluate(&spec, &spec.reference_table().unwrap().unwrap()).unwrap();
        assert_eq!(e.verdict, WitnessVerdict::Violated);
    }

    #[test]
    fn shape_mismatch_lists_cells() {
        let t = uniform_table(2, 2, 2);
        match evaluate(&coherence_qubit(), &t) {
            Err(Error::ShapeMismatch { missing, .. }) => assert_eq!(missing, "(2, 0, 1)"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn generic_witness_basics() {
        let spec = coherence_qubit();
        let reference = spec.reference_table().unwrap().unwrap();
        let w = generic_witness(&reference, 0.01).unwrap();
        assert_eq!(w.value(&reference), 0.0);
        let mut nested = reference.to_nested();
        nested[1][0][0] += 0.1;
        nested[1][0][1] -= 0.1;
        let shifted = table_from_nested(&nested).unwrap();
        assert!((w.value(&shifted) + 0.1).abs() < 1e-12);
        assert!(generic_witness(&reference, 0.0).is_err());
        assert!(generic_witness(&reference, -1.0).is_err());
    }

    #[test]
    fn lookup_by_name() {
        assert_eq!(by_name("coherence", 2).unwrap().name, "coherence");
        assert_eq!(by_name("coherence-d", 3).unwrap().shape.num_y, 9);
        assert!(by_name("coherence", 3).is_err());
        assert!(by_name("generic", 2).is_err());
        assert!(by_name("entanglement", 2).is_err());
    }
}
