//! Numerical certification of free bounds.
//!
//! [`certify_bound`] maximizes a witness over free realizations from many
//! random starts. The result is a lower bound on the true free maximum; a
//! value that agrees with an analytic bound across many restarts is evidence
//! that the bound is tight, while a value above it is a counterexample.
//!
//! Every restart owns a ChaCha8 stream derived from `(seed, restart index)`,
//! so results do not depend on how restarts are scheduled across threads.

mod gap;
pub mod nelder_mead;
mod seesaw;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::freesets::{EffectFamily, FreeSetSpec, InstrumentFamily, MeasurementClass, StateFamily};
use crate::qmath::{ComplexMatrix, DensityMatrix, Effect, PureState};
use crate::scenario::{simulate, OperationBox, PreparationBox};
use crate::witnesses::{coherence_qudit, WitnessSpec};

pub use gap::{estimate_gap, estimate_gap_report, GapEstimate};
use nelder_mead::NelderMeadOptions;
use seesaw::{Problem, Realization};

/// Restarts whose value lies within this of the best are counted as agreeing.
pub const AGREEMENT_TOL: f64 = 1e-6;

/// Largest exhaustive enumeration [`enumerate_vertices`] will attempt.
const MAX_ENUMERATION: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InnerSearch {
    /// Alternating exact best responses; linear witnesses only.
    SeeSaw,
    /// Joint simplex search over all parameters.
    NelderMead,
    /// See-saw for linear witnesses, Nelder–Mead otherwise.
    Hybrid,
}

impl FromStr for InnerSearch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "seesaw" | "see-saw" => Ok(Self::SeeSaw),
            "nelder-mead" | "neldermead" | "nm" => Ok(Self::NelderMead),
            "hybrid" => Ok(Self::Hybrid),
            other => Err(Error::InvalidInput(format!("unknown inner search `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimizationConfig {
    pub restarts: usize,
    pub max_seesaw_rounds: usize,
    pub convergence_tol: f64,
    pub seed: u64,
    pub inner_search: InnerSearch,
}

impl Default for OptimizationConfig {
    fn default() -> Self {
        Self { restarts: 200, max_seesaw_rounds: 500, convergence_tol: 1e-9, seed: 0, inner_search: InnerSearch::Hybrid }
    }
}

impl OptimizationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::InvalidInput("at least one restart is required".into()));
        }
        if self.max_seesaw_rounds == 0 {
            return Err(Error::InvalidInput("at least one optimization round is required".into()));
        }
        if !(self.convergence_tol > 0.0 && self.convergence_tol.is_finite()) {
            return Err(Error::InvalidInput("convergence tolerance must be positive".into()));
        }
        Ok(())
    }

    fn nelder_mead(&self, params: usize) -> NelderMeadOptions {
        NelderMeadOptions {
            max_evals: self.max_seesaw_rounds.max(1) * (20 + 4 * params),
            ftol: self.convergence_tol * 1e-3,
            initial_step: 0.3,
            restarts: 4,
        }
    }
}

/// Which side of the realization is restricted to the free set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Constraint {
    StatesOnly,
    OperationsOnly,
    Both,
}

impl Constraint {
    pub fn constrains_states(self) -> bool {
        matches!(self, Constraint::StatesOnly | Constraint::Both)
    }

    pub fn constrains_operations(self) -> bool {
        matches!(self, Constraint::OperationsOnly | Constraint::Both)
    }
}

impl FromStr for Constraint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "states" | "states_only" => Ok(Self::StatesOnly),
            "operations" | "operations_only" | "ops" => Ok(Self::OperationsOnly),
            "both" => Ok(Self::Both),
            other => Err(Error::InvalidInput(format!(
                "unknown constraint `{other}` (expected states, operations or both)"
            ))),
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Constraint::StatesOnly => "STATES_ONLY",
            Constraint::OperationsOnly => "OPERATIONS_ONLY",
            Constraint::Both => "BOTH",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertifiedBound {
    pub witness: String,
    pub free_set: String,
    pub constraint: Constraint,
    /// Witness value of the best realization found (re-evaluated from its table).
    pub value: f64,
    /// Bound documented for this witness, if any.
    pub nominal_bound: Option<f64>,
    pub argmax_states: PreparationBox,
    pub argmax_effects: OperationBox,
    pub restarts: usize,
    pub restarts_agreeing: usize,
    pub converged_restarts: usize,
    pub search: InnerSearch,
    pub config_used: OptimizationConfig,
}

struct Outcome {
    value: f64,
    realization: Realization,
    converged: bool,
}

fn families(witness: &WitnessSpec, free: &FreeSetSpec, constraint: Constraint) -> Result<(StateFamily, InstrumentFamily)> {
    let dim = free.dim();
    if witness.dim != 0 && witness.dim != dim {
        return Err(Error::InvalidInput(format!(
            "witness `{}` is {}-dimensional but free set `{}` is {dim}-dimensional",
            witness.name,
            witness.dim,
            free.name()
        )));
    }
    let states = if constraint.constrains_states() { free.state_family().clone() } else { StateFamily::Any { dim } };
    let effects = if constraint.constrains_operations() { free.effect_family() } else { EffectFamily::Any { dim } };
    Ok((states, InstrumentFamily::new(effects, witness.measurement_class)))
}

fn boxes(r: &Realization) -> Result<(PreparationBox, OperationBox)> {
    Ok((PreparationBox::new(r.states.clone())?, OperationBox::new(r.effects.clone())?))
}

fn witness_value(witness: &WitnessSpec, r: &Realization) -> Result<f64> {
    let (p, o) = boxes(r)?;
    Ok(witness.value(&simulate(&p, &o)?))
}

fn finish(
    witness: &WitnessSpec,
    free: &FreeSetSpec,
    constraint: Constraint,
    search: InnerSearch,
    cfg: &OptimizationConfig,
    outcomes: Vec<Outcome>,
) -> Result<CertifiedBound> {
    let restarts = outcomes.len();
    let best_idx = outcomes
        .iter()
        .enumerate()
        .fold(0, |best, (k, o)| if o.value > outcomes[best].value { k } else { best });
    let best_value = outcomes[best_idx].value;
    let restarts_agreeing = outcomes.iter().filter(|o| best_value - o.value <= AGREEMENT_TOL).count();
    let converged_restarts = outcomes.iter().filter(|o| o.converged).count();
    if converged_restarts == 0 {
        return Err(Error::NonConvergence(format!(
            "none of {restarts} restarts converged within {} rounds (tolerance {:e}); best value {best_value:.9}",
            cfg.max_seesaw_rounds, cfg.convergence_tol
        )));
    }
    let best =&outcomes[best_idx].realization;
    let (argmax_states, argmax_effects) = boxes(best)?;
    let value = witness.value(&simulate(&argmax_states, &argmax_effects)?);
    Ok(CertifiedBound {
        witness: witness.name.clone(),
        free_set: free.name().to_string(),
        constraint,
        value,
        nominal_bound: witness.nominal_bound,
        argmax_states,
        argmax_effects,
        restarts,
        restarts_agreeing,
        converged_restarts,
        search,
        config_used: *cfg,
    })
}

fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

/// Maximizes `witness` over realizations whose constrained side lies in `free`.
pub fn certify_bound(
    witness: &WitnessSpec,
    free: &FreeSetSpec,
    constraint: Constraint,
    cfg: &OptimizationConfig,
) -> Result<CertifiedBound> {
    cfg.validate()?;
    let (states, instruments) = families(witness, free, constraint)?;
    let outcomes = witness.outcomes_for_search();
    let (num_y, num_x) = (witness.shape.num_y, witness.shape.num_x);
    let linear = witness.form.as_linear();
    let search = match (cfg.inner_search, linear) {
        (InnerSearch::SeeSaw, None) => {
            return Err(Error::InvalidInput(format!(
                "see-saw search needs a linear witness; `{}` is nonlinear",
                witness.name
            )))
        }
        (InnerSearch::Hybrid, Some(_)) | (InnerSearch::SeeSaw, Some(_)) => InnerSearch::SeeSaw,
        _ => InnerSearch::NelderMead,
    };

    let runs: Vec<Outcome> = match (search, linear) {
        (InnerSearch::SeeSaw, Some(form)) => {
            let problem = Problem { form, num_y, num_x, outcomes, states: &states, instruments: &instruments };
            (0..cfg.restarts)
                .into_par_iter()
                .map(|k| {
                    let mut rng = restart_rng(cfg.seed, k);
                    let start = problem.random_realization(&mut rng);
                    let run = problem.run(start, cfg.max_seesaw_rounds, cfg.convergence_tol);
                    Outcome { value: run.value, realization: run.realization, converged: run.converged }
                })
                .collect()
        }
        _ => {
            let joint = Joint { witness, num_y, num_x, outcomes, states: &states, instruments: &instruments };
            let opts = cfg.nelder_mead(joint.param_len());
            (0..cfg.restarts)
                .into_par_iter()
                .map(|k| {
                    let mut rng = restart_rng(cfg.seed, k);
                    joint.run(&mut rng, &opts)
                })
                .collect::<Result<_>>()?
        }
    };
    finish(witness, free, constraint, search, cfg, runs)
}

/// Joint parametrization of all states and instruments for simplex search.
struct Joint<'a> {
    witness: &'a WitnessSpec,
    num_y: usize,
    num_x: usize,
    outcomes: usize,
    states: &'a StateFamily,
    instruments: &'a InstrumentFamily,
}

impl Joint<'_> {
    fn param_len(&self) -> usize {
        self.num_y * self.states.param_len() + self.num_x * self.instruments.param_len(self.outcomes)
    }

    fn realization(&self, p: &[f64]) -> Realization {
        let sl = self.states.param_len();
        let il = self.instruments.param_len(self.outcomes);
        let states = (0..self.num_y).map(|y| self.states.state_from_params(&p[y * sl..(y + 1) * sl])).collect();
        let base = self.num_y * sl;
        let effects = (0..self.num_x)
            .map(|x| self.instruments.instrument_from_params(self.outcomes, &p[base + x * il..base + (x + 1) * il]))
            .collect();
        Realization { states, effects }
    }

    fn run(&self, rng: &mut ChaCha8Rng, opts: &NelderMeadOptions) -> Result<Outcome> {
        let mut x0 = Vec::with_capacity(self.param_len());
        for _ in 0..self.num_y {
            x0.extend(self.states.sample_params(rng));
        }
        for _ in 0..self.num_x {
            x0.extend(self.instruments.sample_params(self.outcomes, rng));
        }
        let found = nelder_mead::minimize(
            |p| witness_value(self.witness, &self.realization(p)).map_or(f64::INFINITY, |v| -v),
            &x0,
            opts,
        );
        let realization = self.realization(&found.x);
        let value = witness_value(self.witness, &realization)?;
        Ok(Outcome { value, realization, converged: found.converged })
    }
}

fn exact_measurement_response(instruments: &InstrumentFamily, outcomes: usize) -> bool {
    matches!(instruments.effects, EffectFamily::Diagonal { .. })
        || (instruments.class == MeasurementClass::General && outcomes == 2)
}

fn starting_instrument(dim: usize, outcomes: usize) -> Vec<Effect> {
    let mut inst = vec![Effect::identity(dim)];
    inst.extend((1..outcomes).map(|_| Effect::zero(dim)));
    inst
}

/// Exhaustive maximization over vertex assignments of a polytope of free states.
///
/// Every assignment of extremal states to the preparations is paired with the
/// exactly optimal measurement, so the result is the free maximum itself
/// rather than a lower bound. Requires a linear witness, a polytope (or single
/// state) on the state side and a measurement family whose best response is
/// exact.
pub fn enumerate_vertices(witness: &WitnessSpec, free: &FreeSetSpec, constraint: Constraint) -> Result<CertifiedBound> {
    let form = witness.form.as_linear().ok_or_else(|| {
        Error::InvalidInput(format!("vertex enumeration needs a linear witness; `{}` is nonlinear", witness.name))
    })?;
    if !constraint.constrains_states() {
        return Err(Error::InvalidInput("vertex enumeration needs the states to be constrained".into()));
    }
    let (states, instruments) = families(witness, free, constraint)?;
    let vertices: Vec<DensityMatrix> = match &states {
        StateFamily::Vertices(v) => v.clone(),
        StateFamily::Fixed(s) => vec![s.clone()],
        _ => {
            return Err(Error::InvalidInput(format!(
                "free set `{}` is not a finite polytope of states",
                free.name()
            )))
        }
    };
    let outcomes = witness.outcomes_for_search();
    if !exact_measurement_response(&instruments, outcomes) {
        return Err(Error::InvalidInput(
            "vertex enumeration needs an exactly solvable measurement family".into(),
        ));
    }
    let (num_y, num_x) = (witness.shape.num_y, witness.shape.num_x);
    let total = vertices
        .len()
        .checked_pow(num_y as u32)
        .filter(|&n| n <= MAX_ENUMERATION)
        .ok_or_else(|| Error::InvalidInput("too many vertex assignments to enumerate".into()))?;
    let problem = Problem { form, num_y, num_x, outcomes, states: &states, instruments: &instruments };
    let dim = free.dim();
    let runs: Vec<Outcome> = (0..total)
        .into_par_iter()
        .map(|mut code| {
            let chosen = (0..num_y)
                .map(|_| {
                    let v = vertices[code % vertices.len()].clone();
                    code /= vertices.len();
                    v
                })
                .collect();
            let mut r = Realization { states: chosen, effects: vec![starting_instrument(dim, outcomes); num_x] };
            problem.improve_effects(&mut r);
            Outcome { value: problem.linear_value(&r), realization: r, converged: true }
        })
        .collect();
    let cfg = OptimizationConfig { restarts: total, max_seesaw_rounds: 1, ..OptimizationConfig::default() };
    finish(witness, free, constraint, InnerSearch::SeeSaw, &cfg, runs)
}

/// Lexicographic permutations of `0..n`.
fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut p: Vec<usize> = (0..n).collect();
    loop {
        out.push(p.clone());
        let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| p[i] < p[i + 1]) else {
            return out;
        };
        let j = (i + 1..n).rev().find(|&j| p[j] > p[i]).expect("successor exists");
        p.swap(i, j);
        p[i + 1..].reverse();
    }
}

/// Free maximum of the qudit random-access-code witness over incoherent
/// rank-one measurements, by enumerating every pair of outcome assignments.
///
/// For each pair of assignments the states are chosen optimally
/// (`Σ_{y0,y1} λmax(A_{y0} + B_{y1})`); the optimal states turn out to be
/// computational basis states, so the maximizer is free on both sides.
pub fn certify_qudit_coherence(dim: usize, cfg: &OptimizationConfig) -> Result<CertifiedBound> {
    if !(2..=5).contains(&dim) {
        return Err(Error::UnsupportedDimension { what: "qudit coherence certification", supported: "2..=5", got: dim });
    }
    let witness = coherence_qudit(dim)?;
    let free = crate::freesets::incoherent(dim)?;
    let perms = permutations(dim);
    let basis: Vec<PureState> = (0..dim).map(|i| PureState::basis(dim, i)).collect::<Result<_>>()?;
    let pairs: Vec<(usize, usize)> = (0..perms.len()).flat_map(|a| (0..perms.len()).map(move |b| (a, b))).collect();
    let runs: Vec<Outcome> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let (pi, tau) = (&perms[a], &perms[b]);
            let mut states = Vec::with_capacity(dim * dim);
            let mut value = 0.0;
            for y0 in 0..dim {
                for y1 in 0..dim {
                    let sum = &basis[pi[y0]].projector() + &basis[tau[y1]].projector();
                    let (lam, state) = top_diagonal(&sum);
                    value += lam;
                    states.push(DensityMatrix::from_pure(&basis[state]));
                }
            }
            let instrument = |perm: &[usize]| (0..dim).map(|j| Effect::projector(&basis[perm[j]])).collect();
            let effects = vec![instrument(pi), instrument(tau)];
            Outcome { value, realization: Realization { states, effects }, converged: true }
        })
        .collect();
    let cfg = OptimizationConfig { restarts: pairs.len(), ..*cfg };
    finish(&witness, &free, Constraint::Both, InnerSearch::SeeSaw, &cfg, runs)
}

/// Largest diagonal entry of a diagonal operator and its (lowest) index.
fn top_diagonal(m: &ComplexMatrix) -> (f64, usize) {
    debug_assert!(m.is_diagonal(1e-15));
    let eig = crate::qmath::hermitian_eigenvalues(m)[0];
    let idx = (0..m.dim()).find(|&i| (m.get(i, i).re - eig).abs() <= 1e-12).unwrap_or(0);
    (eig, idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freesets::{incoherent, maximally_mixed, real_states, stabilizer_qubit};
    use crate::witnesses::{coherence_qubit, imaginarity_qubit, magic_qubit, purity, MAGIC_BOUND_PUBLISHED};

    fn quick(restarts: usize) -> OptimizationConfig {
        OptimizationConfig { restarts, seed: 7, ..OptimizationConfig::default() }
    }

    fn assert_free(bound: &CertifiedBound, free: &FreeSetSpec) {
        if bound.constraint.constrains_states() {
            for s in bound.argmax_states.states() {
                assert!(free.membership_state(s).unwrap().is_member, "{s:?}");
            }
        }
        if bound.constraint.constrains_operations() {
            for e in bound.argmax_effects.instruments().iter().flatten() {
                assert!(free.membership_effect(e).unwrap().is_member, "{e:?}");
            }
        }
    }

    #[test]
    fn permutations_are_complete() {
        assert_eq!(permutations(1), vec![vec![0]]);
        assert_eq!(permutations(3).len(), 6);
        assert_eq!(permutations(4).len(), 24);
        assert_eq!(permutations(3)[5], vec![2, 1, 0]);
    }

    #[test]
    fn constraint_parsing() {
        assert_eq!("states".parse::<Constraint>().unwrap(), Constraint::StatesOnly);
        assert_eq!("OPERATIONS_ONLY".parse::<Constraint>().unwrap(), Constraint::OperationsOnly);
        assert_eq!("both".parse::<Constraint>().unwrap(), Constraint::Both);
        assert!("neither".parse::<Constraint>().is_err());
        assert_eq!(Constraint::Both.to_string(), "BOTH");
    }

    #[test]
    fn coherence_bound_is_reached_not_exceeded() {
        let free = incoherent(2).unwrap();
        let b = certify_bound(&coherence_qubit(), &free, Constraint::Both, &quick(40)).unwrap();
        assert!((b.value - 4.0).abs() < 1e-6, "{}", b.value);
        assert!(b.restarts_agreeing >= 1);
        assert_free(&b, &free);
    }

    #[test]
    fn certification_is_deterministic() {
        let free = incoherent(2).unwrap();
        let a = certify_bound(&coherence_qubit(), &free, Constraint::Both, &quick(16)).unwrap();
        let b = certify_bound(&coherence_qubit(), &free, Constraint::Both, &quick(16)).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.argmax_states, b.argmax_states);
        assert_eq!(a.restarts_agreeing, b.restarts_agreeing);
    }

    #[test]
    fn more_restarts_never_lower_the_bound() {
        let free = stabilizer_qubit();
        let spec = coherence_qubit();
        let few = certify_bound(&spec, &free, Constraint::StatesOnly, &quick(5)).unwrap();
        let many = certify_bound(&spec, &free, Constraint::StatesOnly, &quick(30)).unwrap();
        assert!(many.value >= few.value - 1e-12);
    }

    #[test]
    fn magic_enumeration_matches_seesaw() {
        let spec = magic_qubit();
        assert!((spec.free_bound.value - MAGIC_BOUND_PUBLISHED).abs() < 0.01);
        let free = stabilizer_qubit();
        let b = certify_bound(&spec, &free, Constraint::StatesOnly, &quick(60)).unwrap();
        assert!(b.value <= spec.free_bound.value + 1e-9);
        assert!((b.value - spec.free_bound.value).abs() < 1e-6, "{} vs {}", b.value, spec.free_bound.value);
        assert_free(&b, &free);
    }

    #[test]
    fn purity_bound_is_exact() {
        for d in 2..=3 {
            let free = maximally_mixed(d).unwrap();
            let b = certify_bound(&purity(d).unwrap(), &free, Constraint::StatesOnly, &quick(8)).unwrap();
            assert!((b.value - 1.0 / d as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn imaginarity_respects_bound_with_nelder_mead() {
        let free = real_states(2).unwrap();
        let b = certify_bound(&imaginarity_qubit(), &free, Constraint::Both, &quick(12)).unwrap();
        assert_eq!(b.search, InnerSearch::NelderMead);
        assert!(b.value <= 5.0 + 1e-6, "{}", b.value);
        assert!(b.value > 4.0);
        assert_free(&b, &free);
    }

    #[test]
    fn seesaw_rejects_nonlinear_witness() {
        let cfg = OptimizationConfig { inner_search: InnerSearch::SeeSaw, ..quick(2) };
        assert!(certify_bound(&imaginarity_qubit(), &real_states(2).unwrap(), Constraint::Both, &cfg).is_err());
    }

    #[test]
    fn qudit_enumeration() {
        for d in 2..=4 {
            let b = certify_qudit_coherence(d, &quick(1)).unwrap();
            let df = d as f64;
            assert!((b.value - (df * df + df)).abs() < 1e-9, "d={d}: {}", b.value);
            assert_free(&b, &incoherent(d).unwrap());
        }
        assert!(certify_qudit_coherence(6, &quick(1)).is_err());
        assert!(certify_qudit_coherence(1, &quick(1)).is_err());
    }

    #[test]
    fn config_validation() {
        let free = incoherent(2).unwrap();
        let cfg = OptimizationConfig { restarts: 0, ..OptimizationConfig::default() };
        assert!(certify_bound(&coherence_qubit(), &free, Constraint::Both, &cfg).is_err());
    }
}
