//! Distance from a reference table to the tables reachable with free states.
//!
//! The gap is `max −Σ_{x,y} |p(0|x,y) − p_ref(0|x,y)|` over free preparations
//! and arbitrary binary measurements. It is never positive; a strictly
//! negative value is the largest margin a generic witness may use.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::nelder_mead::{self, NelderMeadOptions};
use super::{OptimizationConfig, AGREEMENT_TOL};
use crate::error::{Error, Result};
use crate::freesets::{simplex_weights, FreeSetSpec, StateFamily};
use crate::qmath::{spectral_decomposition, ComplexMatrix, DensityMatrix};
use crate::scenario::CorrelationTable;

const INNER_SEARCH: NelderMeadOptions = NelderMeadOptions { max_evals: 2_000, ftol: 1e-13, initial_step: 0.2, restarts: 2 };
const DIAGONAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapEstimate {
    /// Best (largest) value of `−Σ|p − p_ref|` found; `≤ 0`.
    pub value: f64,
    pub restarts: usize,
    pub restarts_agreeing: usize,
    pub converged_restarts: usize,
}

/// Largest `−Σ_{x,y} |p(0|x,y) − p_ref(0|x,y)|` over free states and arbitrary effects.
pub fn estimate_gap(reference: &CorrelationTable, free: &FreeSetSpec, cfg: &OptimizationConfig) -> Result<f64> {
    estimate_gap_report(reference, free, cfg).map(|g| g.value)
}

pub fn estimate_gap_report(
    reference: &CorrelationTable,
    free: &FreeSetSpec,
    cfg: &OptimizationConfig,
) -> Result<GapEstimate> {
    cfg.validate()?;
    let targets: Vec<Vec<f64>> = (0..reference.num_y())
        .map(|y| (0..reference.num_x()).map(|x| reference.prob(0, x, y)).collect())
        .collect();
    let fit = Fit { targets: &targets, family: free.state_family(), dim: free.dim() };
    let runs: Vec<(f64, bool)> = (0..cfg.restarts)
        .into_par_iter()
        .map(|restart| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(restart as u64);
            fit.run(&mut rng, cfg.max_seesaw_rounds, cfg.convergence_tol)
        })
        .collect::<Result<_>>()?;
    let value = runs.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
    Ok(GapEstimate {
        value: value.min(0.0),
        restarts: cfg.restarts,
        restarts_agreeing: runs.iter().filter(|r| value - r.0 <= AGREEMENT_TOL).count(),
        converged_restarts: runs.iter().filter(|r| r.1).count(),
    })
}

struct Fit<'a> {
    targets: &'a [Vec<f64>],
    family: &'a StateFamily,
    dim: usize,
}

struct Point {
    params: Vec<Vec<f64>>,
    states: Vec<DensityMatrix>,
    effects: Vec<ComplexMatrix>,
}

impl Fit<'_> {
    fn num_y(&self) -> usize {
        self.targets.len()
    }

    fn num_x(&self) -> usize {
        self.targets.first().map_or(0, Vec::len)
    }

    fn row_cost(&self, y: usize, state: &DensityMatrix, effects: &[ComplexMatrix]) -> f64 {
        effects
            .iter()
            .zip(&self.targets[y])
            .map(|(e, t)| (e.trace_product(state.matrix()).re - t).abs())
            .sum()
    }

    fn column_cost(&self, x: usize, effect: &ComplexMatrix, states: &[DensityMatrix]) -> f64 {
        states
            .iter()
            .enumerate()
            .map(|(y, s)| (effect.trace_product(s.matrix()).re - self.targets[y][x]).abs())
            .sum()
    }

    fn total(&self, p: &Point) -> f64 {
        (0..self.num_y()).map(|y| self.row_cost(y, &p.states[y], &p.effects)).sum()
    }

    fn run(&self, rng: &mut impl Rng, max_rounds: usize, tol: f64) -> Result<(f64, bool)> {
        let params: Vec<Vec<f64>> = (0..self.num_y()).map(|_| self.family.sample_params(rng)).collect();
        let states = params.iter().map(|p| self.family.state_from_params(p)).collect();
        let effects = (0..self.num_x())
            .map(|_| {
                let p: Vec<f64> = (0..self.dim * self.dim).map(|_| rng.random_range(-0.5..1.5)).collect();
                effect_from_params(self.dim, &p)
            })
            .collect();
        let mut point = Point { params, states, effects };
        let mut cost = self.total(&point);
        for _ in 0..max_rounds {
            for y in 0..self.num_y() {
                self.improve_state(y, &mut point)?;
            }
            for x in 0..self.num_x() {
                self.improve_effect(x, &mut point)?;
            }
            let next = self.total(&point);
            let gain = cost - next;
            cost = cost.min(next);
            if gain < tol {
                return Ok((-cost, true));
            }
        }
        Ok((-cost, false))
    }

    fn improve_state(&self, y: usize, point: &mut Point) -> Result<()> {
        let current = self.row_cost(y, &point.states[y], &point.effects);
        match self.family {
            StateFamily::Fixed(_) => {}
            StateFamily::Vertices(verts) => {
                let columns: Vec<Vec<f64>> = verts
                    .iter()
                    .map(|v| point.effects.iter().map(|e| e.trace_product(v.matrix()).re).collect())
                    .collect();
                let (weights, _) = l1_fit(&columns, &self.targets[y], true)?;
                let params: Vec<f64> = weights.iter().map(|w| w.max(0.0).sqrt()).collect();
                let state = self.family.state_from_params(&params);
                if self.row_cost(y, &state, &point.effects) < current {
                    point.states[y] = state;
                    point.params[y] = params;
                }
            }
            StateFamily::Any { .. } | StateFamily::RealQubit => {
                let found = nelder_mead::minimize(
                    |p| self.row_cost(y, &self.family.state_from_params(p), &point.effects),
                    &point.params[y],
                    &INNER_SEARCH,
                );
                if found.fx < current {
                    point.states[y] = self.family.state_from_params(&found.x);
                    point.params[y] = found.x;
                }
            }
        }
        Ok(())
    }

    fn improve_effect(&self, x: usize, point: &mut Point) -> Result<()> {
        let current = self.column_cost(x, &point.effects[x], &point.states);
        let candidate = if point.states.iter().all(|s| s.matrix().max_off_diagonal() <= DIAGONAL_TOL) {
            // commuting diagonal states only see diag(E), which ranges over the unit box
            let columns: Vec<Vec<f64>> = (0..self.dim)
                .map(|i| point.states.iter().map(|s| s.matrix().get(i, i).re).collect())
                .collect();
            let goals: Vec<f64> = self.targets.iter().map(|row| row[x]).collect();
            let (diag, _) = l1_fit(&columns, &goals, false)?;
            ComplexMatrix::from_real_diagonal(&diag.iter().map(|v| v.clamp(0.0, 1.0)).collect::<Vec<_>>())
        } else {
            let start = params_from_hermitian(&point.effects[x]);
            let found = nelder_mead::minimize(
                |p| self.column_cost(x, &effect_from_params(self.dim, p), &point.states),
                &start,
                &INNER_SEARCH,
            );
            effect_from_params(self.dim, &found.x)
        };
        if self.column_cost(x, &candidate, &point.states) < current {
            point.effects[x] = candidate;
        }
        Ok(())
    }
}

/// Minimizes `Σ_i |Σ_k w_k columns[k][i] − goals[i]|` over the probability
/// simplex (`simplex = true`) or the unit box.
fn l1_fit(columns: &[Vec<f64>], goals: &[f64], simplex: bool) -> Result<(Vec<f64>, f64)> {
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let upper = if simplex { f64::INFINITY } else { 1.0 };
    let weights: Vec<_> = columns.iter().map(|_| lp.add_var(0.0, (0.0, upper))).collect();
    let slacks: Vec<_> = goals.iter().map(|_| lp.add_var(1.0, (0.0, f64::INFINITY))).collect();
    if simplex {
        let sum: Vec<_> = weights.iter().map(|&w| (w, 1.0)).collect();
        lp.add_constraint(&sum, ComparisonOp::Eq, 1.0);
    }
    for (i, (&goal, &s)) in goals.iter().zip(&slacks).enumerate() {
        let mut above: Vec<_> = weights.iter().zip(columns).map(|(&w, c)| (w, c[i])).collect();
        above.push((s, -1.0));
        lp.add_constraint(&above, ComparisonOp::Le, goal);
        let mut below: Vec<_> = weights.iter().zip(columns).map(|(&w, c)| (w, c[i])).collect();
        below.push((s, 1.0));
        lp.add_constraint(&below, ComparisonOp::Ge, goal);
    }
    let solution = lp.solve().map_err(|e| Error::NonConvergence(format!("ℓ1 fitting program failed: {e}")))?;
    let w: Vec<f64> = weights.iter().map(|&v| solution[v]).collect();
    let w = if simplex { simplex_weights(&w.iter().map(|v| v.max(0.0).sqrt()).collect::<Vec<_>>()) } else { w };
    Ok((w, solution.objective()))
}

/// Hermitian matrix from `d²` reals (diagonal, then real/imaginary parts above it)
/// with its spectrum clipped to `[0, 1]`.
fn effect_from_params(d: usize, p: &[f64]) -> ComplexMatrix {
    let h = hermitian_from_params(d, p);
    let spec = spectral_decomposition(&h, 1e-8).expect("Hermitian by construction");
    let mut e = ComplexMatrix::zeros(d);
    for (lam, v) in spec {
        let lam = lam.clamp(0.0, 1.0);
        if lam > 0.0 {
            e = &e + &v.projector().scale(lam);
        }
    }
    e.hermitian_part()
}

fn hermitian_from_params(d: usize, p: &[f64]) -> ComplexMatrix {
    let mut h = ComplexMatrix::zeros(d);
    let mut k = d;
    for i in 0..d {
        h.set(i, i, num_complex::Complex64::new(p[i], 0.0));
        for j in i + 1..d {
            let z = num_complex::Complex64::new(p[k], p[k + 1]);
            h.set(i, j, z);
            h.set(j, i, z.conj());
            k += 2;
        }
    }
    h
}

fn params_from_hermitian(h: &ComplexMatrix) -> Vec<f64> {
    let d = h.dim();
    let mut p: Vec<f64> = (0..d).map(|i| h.get(i, i).re).collect();
    for i in 0..d {
        for j in i + 1..d {
            p.push(h.get(i, j).re);
            p.push(h.get(i, j).im);
        }
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freesets::{incoherent, real_states};
    use crate::qmath::{kets, Effect};
    use crate::scenario::{simulate, OperationBox, PreparationBox};

    fn small_cfg() -> OptimizationConfig {
        OptimizationConfig { restarts: 24, ..OptimizationConfig::default() }
    }

    #[test]
    fn hermitian_round_trip() {
        let p = vec![0.3, 0.9, 0.1, -0.2];
        let h = hermitian_from_params(2, &p);
        assert!(h.is_hermitian(1e-15));
        assert_eq!(params_from_hermitian(&h), p);
        let e = effect_from_params(2, &[2.0, -1.0, 0.0, 0.0]);
        assert!(e.approx_eq(&ComplexMatrix::from_real_diagonal(&[1.0, 0.0]), 1e-12));
    }

    #[test]
    fn l1_fit_on_simplex() {
        // vertices 0 and 1 in one coordinate; goal 0.25 is reachable exactly
        let (w, obj) = l1_fit(&[vec![0.0], vec![1.0]], &[0.25], true).unwrap();
        assert!(obj.abs() < 1e-12);
        assert!((w[1] - 0.25).abs() < 1e-12);
        let (_, obj) = l1_fit(&[vec![0.2], vec![0.4]], &[1.0], true).unwrap();
        assert!((obj - 0.6).abs() < 1e-12);
    }

    #[test]
    fn free_tables_have_zero_gap() {
        let free = incoherent(2).unwrap();
        let prep = PreparationBox::new(vec![
            DensityMatrix::from_pure(&kets::zero()),
            DensityMatrix::maximally_mixed(2),
        ])
        .unwrap();
        let plus = Effect::projector(&kets::plus());
        let ops = OperationBox::new(vec![
            vec![plus.clone(), plus.complement()],
            vec![Effect::projector(&kets::one()), Effect::projector(&kets::zero())],
        ])
        .unwrap();
        let t = simulate(&prep, &ops).unwrap();
        let gap = estimate_gap(&t, &free, &small_cfg()).unwrap();
        assert!(gap > -1e-7 && gap <= 0.0, "{gap}");
    }

    #[test]
    fn coherent_reference_has_negative_gap() {
        let states = [kets::zero(), kets::one(), kets::plus()];
        let prep = PreparationBox::new(states.iter().map(DensityMatrix::from_pure).collect()).unwrap();
        let ops = OperationBox::new(
            [kets::zero(), kets::one(), kets::plus(), kets::plus_y()]
                .iter()
                .map(|k| {
                    let e = Effect::projector(k);
                    vec![e.clone(), e.complement()]
                })
                .collect(),
        )
        .unwrap();
        let t = simulate(&prep, &ops).unwrap();
        let gap = estimate_gap(&t, &incoherent(2).unwrap(), &small_cfg()).unwrap();
        assert!((gap + 0.5).abs() < 1e-6, "{gap}");
        let real_gap = estimate_gap(&t, &real_states(2).unwrap(), &small_cfg()).unwrap();
        assert!(real_gap <= 0.0 && real_gap > -1e-6, "{real_gap}");
    }

    #[test]
    fn deterministic() {
        let prep = PreparationBox::new(vec![DensityMatrix::from_pure(&kets::plus())]).unwrap();
        let ops = OperationBox::new(vec![vec![Effect::projector(&kets::plus()), Effect::projector(&kets::minus())]])
            .unwrap();
        let t = simulate(&prep, &ops).unwrap();
        let free = incoherent(2).unwrap();
        let a = estimate_gap_report(&t, &free, &small_cfg()).unwrap();
        let b = estimate_gap_report(&t, &free, &small_cfg()).unwrap();
        assert_eq!(a, b);
    }
}
