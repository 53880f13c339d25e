//! Alternating maximization of a linear witness over states and instruments.
//!
//! Each half-step replaces one side by its best response to the other, so the
//! witness value never decreases from one half-step to the next.

use rand::Rng;

use crate::freesets::{InstrumentFamily, StateFamily};
use crate::qmath::{ComplexMatrix, DensityMatrix, Effect};
use crate::witnesses::LinearForm;

/// Slack allowed for floating-point noise when checking monotonicity.
pub(crate) const MONOTONE_SLACK: f64 = 1e-10;

#[derive(Debug, Clone)]
pub(crate) struct Realization {
    pub states: Vec<DensityMatrix>,
    pub effects: Vec<Vec<Effect>>,
}

#[derive(Debug, Clone)]
pub(crate) struct SeesawRun {
    pub value: f64,
    pub realization: Realization,
    /// Value after every half-step, starting with the random initial point.
    pub trajectory: Vec<f64>,
    pub converged: bool,
}

impl SeesawRun {
    /// Whether no half-step lowered the value beyond floating-point slack.
    pub fn is_monotone(&self) -> bool {
        self.trajectory.windows(2).all(|w| w[1] >= w[0] - MONOTONE_SLACK)
    }
}

pub(crate) struct Problem<'a> {
    pub form: &'a LinearForm,
    pub num_y: usize,
    pub num_x: usize,
    pub outcomes: usize,
    pub states: &'a StateFamily,
    pub instruments: &'a InstrumentFamily,
}

impl Problem<'_> {
    pub fn linear_value(&self, r: &Realization) -> f64 {
        self.form.constant
            + self
                .form
                .terms
                .iter()
                .map(|t| t.coef * r.effects[t.x][t.j].matrix().trace_product(r.states[t.y].matrix()).re)
                .sum::<f64>()
    }

    pub fn random_realization(&self, rng: &mut impl Rng) -> Realization {
        let states = (0..self.num_y)
            .map(|_| {
                let p = self.states.sample_params(rng);
                self.states.state_from_params(&p)
            })
            .collect();
        let effects = (0..self.num_x)
            .map(|_| {
                let p = self.instruments.sample_params(self.outcomes, rng);
                self.instruments.instrument_from_params(self.outcomes, &p)
            })
            .collect();
        Realization { states, effects }
    }

    fn state_coefficient(&self, y: usize, effects: &[Vec<Effect>]) -> ComplexMatrix {
        let d = self.states.dim();
        self.form
            .terms
            .iter()
            .filter(|t| t.y == y)
            .fold(ComplexMatrix::zeros(d), |acc, t| &acc + &effects[t.x][t.j].matrix().scale(t.coef))
    }

    fn effect_coefficients(&self, x: usize, states: &[DensityMatrix]) -> Vec<ComplexMatrix> {
        let d = self.states.dim();
        let mut coeffs = vec![ComplexMatrix::zeros(d); self.outcomes];
        for t in self.form.terms.iter().filter(|t| t.x == x) {
            coeffs[t.j] = &coeffs[t.j] + &states[t.y].matrix().scale(t.coef);
        }
        coeffs
    }

    pub fn improve_states(&self, r: &mut Realization) {
        for y in 0..self.num_y {
            if self.form.terms.iter().any(|t| t.y == y) {
                r.states[y] = self.states.best_response(&self.state_coefficient(y, &r.effects));
            }
        }
    }

    pub fn improve_effects(&self, r: &mut Realization) {
        for x in 0..self.num_x {
            if self.form.terms.iter().any(|t| t.x == x) {
                let coeffs = self.effect_coefficients(x, &r.states);
                r.effects[x] = self.instruments.best_response(&coeffs, &r.effects[x]);
            }
        }
    }

    /// One seesaw run from `start`.
    pub fn run(&self, start: Realization, max_rounds: usize, tol: f64) -> SeesawRun {
        let mut r = start;
        let mut value = self.linear_value(&r);
        let mut trajectory = vec![value];
        let mut converged = false;
        for _ in 0..max_rounds {
            self.improve_states(&mut r);
            trajectory.push(self.linear_value(&r));
            self.improve_effects(&mut r);
            let next = self.linear_value(&r);
            trajectory.push(next);
            let gain = next - value;
            value = value.max(next);
            if gain < tol {
                converged = true;
                break;
            }
        }
        let run = SeesawRun { value, realization: r, trajectory, converged };
        debug_assert!(run.is_monotone(), "see-saw lowered the witness: {:?}", run.trajectory);
        run
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freesets::{incoherent, stabilizer_qubit, EffectFamily, MeasurementClass};
    use crate::witnesses::coherence_qubit;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn check_monotone(run: &SeesawRun) {
        assert!(run.is_monotone(), "{:?}", run.trajectory);
    }

    #[test]
    fn incoherent_seesaw_is_monotone_and_bounded() {
        let spec = coherence_qubit();
        let free = incoherent(2).unwrap();
        let inst = InstrumentFamily::new(free.effect_family(), MeasurementClass::General);
        let problem = Problem {
            form: spec.form.as_linear().unwrap(),
            num_y: 3,
            num_x: 2,
            outcomes: 2,
            states: free.state_family(),
            instruments: &inst,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let start = problem.random_realization(&mut rng);
            let run = problem.run(start, 500, 1e-9);
            check_monotone(&run);
            assert!(run.converged);
            assert!(run.value <= 4.0 + 1e-9);
        }
    }

    #[test]
    fn unconstrained_seesaw_reaches_quantum_values() {
        let spec = coherence_qubit();
        let states = StateFamily::Any { dim: 2 };
        let inst = InstrumentFamily::new(EffectFamily::Any { dim: 2 }, MeasurementClass::General);
        let problem = Problem {
            form: spec.form.as_linear().unwrap(),
            num_y: 3,
            num_x: 2,
            outcomes: 2,
            states: &states,
            instruments: &inst,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let best = (0..40)
            .map(|_| {
                let run = problem.run(problem.random_realization(&mut rng), 500, 1e-12);
                check_monotone(&run);
                run.value
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(best >= spec.reference_value - 1e-6, "{best}");
    }

    #[test]
    fn stabilizer_seesaw_is_monotone() {
        let spec = coherence_qubit();
        let free = stabilizer_qubit();
        let inst = InstrumentFamily::new(EffectFamily::Any { dim: 2 }, MeasurementClass::General);
        let problem = Problem {
            form: spec.form.as_linear().unwrap(),
            num_y: 3,
            num_x: 2,
            outcomes: 2,
            states: free.state_family(),
            instruments: &inst,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let run = problem.run(problem.random_realization(&mut rng), 500, 1e-12);
            check_monotone(&run);
        }
    }
}
