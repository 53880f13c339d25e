//! Parametrized families of states and instruments.
//!
//! Every family maps a real parameter vector onto a valid object inside the
//! family (smooth where possible, so derivative-free search can move through
//! it) and answers "best response" queries: the member maximizing a linear
//! functional `Tr(ρ C)` or `Σ_j Tr(E_j C_j)`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::qmath::{psd_power, psd_sqrt, spectral_decomposition, ComplexMatrix, DensityMatrix, Effect};

const SPECTRAL_TOL: f64 = 1e-8;
const REGULARIZER: f64 = 1e-12;
const MAX_PAIR_SWEEPS: usize = 200;
const PAIR_SWEEP_GAIN: f64 = 1e-14;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn sample_box(len: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn complex_from_params(dim: usize, p: &[f64], real: bool) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(dim);
    for i in 0..dim {
        for j in 0..dim {
            let k = i * dim + j;
            let z = if real { c(p[k], 0.0) } else { c(p[2 * k], p[2 * k + 1]) };
            m.set(i, j, z);
        }
    }
    m
}

fn top_eigenvector_projector(m: &ComplexMatrix, real: bool) -> ComplexMatrix {
    let spec = spectral_decomposition(m, SPECTRAL_TOL).expect("coefficient operator is Hermitian");
    let proj = spec[0].1.projector();
    if real {
        proj.real_part()
    } else {
        proj
    }
}

/// Projector onto the strictly positive eigenspace.
fn positive_projector(m: &ComplexMatrix, real: bool) -> ComplexMatrix {
    let spec = spectral_decomposition(m, SPECTRAL_TOL).expect("Hermitian");
    let mut p = ComplexMatrix::zeros(m.dim());
    for (lam, v) in &spec {
        if *lam > 0.0 {
            p = &p + &v.projector();
        }
    }
    if real {
        p.real_part()
    } else {
        p
    }
}

/// Orthonormal columns by modified Gram–Schmidt; degenerate columns are
/// replaced by computational basis vectors.
fn orthonormal_columns(g: &ComplexMatrix) -> Vec<Vec<Complex64>> {
    let d = g.dim();
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(d);
    let candidates = (0..d)
        .map(|j| (0..d).map(|i| g.get(i, j)).collect::<Vec<_>>())
        .chain((0..d).map(|k| (0..d).map(|i| if i == k { c(1.0, 0.0) } else { c(0.0, 0.0) }).collect()));
    for mut v in candidates {
        if basis.len() == d {
            break;
        }
        for b in &basis {
            let overlap: Complex64 = b.iter().zip(&v).map(|(x, y)| x.conj() * y).sum();
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= overlap * bi;
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-8 {
            basis.push(v.into_iter().map(|z| z / norm).collect());
        }
    }
    basis
}

fn vector_projector(v: &[Complex64]) -> ComplexMatrix {
    let d = v.len();
    ComplexMatrix::from_dmatrix(DMatrix::from_fn(d, d, |i, j| v[i] * v[j].conj()))
}

/// Outcome receiving basis vector `i` in a projective instrument with `outcomes` outcomes.
fn assigned_outcome(i: usize, outcomes: usize) -> usize {
    i.min(outcomes - 1)
}

#[derive(Debug, Clone, PartialEq)]
pub enum StateFamily {
    /// Every `d`-dimensional state.
    Any { dim: usize },
    /// Convex hull of finitely many states.
    Vertices(Vec<DensityMatrix>),
    /// Qubit states with real amplitudes (`r_y = 0`).
    RealQubit,
    /// A single state.
    Fixed(DensityMatrix),
}

impl StateFamily {
    pub fn dim(&self) -> usize {
        match self {
            StateFamily::Any { dim } => *dim,
            StateFamily::Vertices(v) => v[0].dim(),
            StateFamily::RealQubit => 2,
            StateFamily::Fixed(s) => s.dim(),
        }
    }

    pub fn param_len(&self) -> usize {
        match self {
            StateFamily::Any { dim } => 2 * dim * dim,
            StateFamily::Vertices(v) => v.len(),
            StateFamily::RealQubit => 2,
            StateFamily::Fixed(_) => 0,
        }
    }

    pub fn sample_params(&self, rng: &mut impl Rng) -> Vec<f64> {
        sample_box(self.param_len(), rng)
    }

    pub fn state_from_params(&self, p: &[f64]) -> DensityMatrix {
        debug_assert_eq!(p.len(), self.param_len());
        match self {
            StateFamily::Any { dim } => {
                let a = complex_from_params(*dim, p, false);
                let aa = (&a * &a.adjoint()).hermitian_part();
                let tr = aa.trace().re;
                if tr <= 1e-300 {
                    DensityMatrix::maximally_mixed(*dim)
                } else {
                    DensityMatrix::from_trusted(aa.scale(1.0 / tr))
                }
            }
            StateFamily::Vertices(verts) => {
                let weights = simplex_weights(p);
                let mut m = ComplexMatrix::zeros(verts[0].dim());
                for (w, v) in weights.iter().zip(verts) {
                    m = &m + &v.matrix().scale(*w);
                }
                DensityMatrix::from_trusted(m.hermitian_part())
            }
            StateFamily::RealQubit => {
                let theta = std::f64::consts::PI * p[0];
                let r = (std::f64::consts::FRAC_PI_2 * p[1]).sin().abs();
                DensityMatrix::from_bloch(r * theta.cos(), 0.0, r * theta.sin())
                    .expect("radius at most one")
            }
            StateFamily::Fixed(s) => s.clone(),
        }
    }

    /// Member maximizing `Tr(ρ coeff)`; ties among vertices go to the lowest index.
    pub fn best_response(&self, coeff: &ComplexMatrix) -> DensityMatrix {
        match self {
            StateFamily::Any { .. } => DensityMatrix::from_trusted(top_eigenvector_projector(coeff, false)),
            StateFamily::Vertices(verts) => {
                let mut best = 0;
                let mut best_val = f64::NEG_INFINITY;
                for (k, v) in verts.iter().enumerate() {
                    let val = v.matrix().trace_product(coeff).re;
                    if val > best_val {
                        best = k;
                        best_val = val;
                    }
                }
                verts[best].clone()
            }
            StateFamily::RealQubit => {
                DensityMatrix::from_trusted(top_eigenvector_projector(&coeff.real_part(), true))
            }
            StateFamily::Fixed(s) => s.clone(),
        }
    }
}

/// `p_k² / Σ p²`, uniform if all parameters vanish.
pub(crate) fn simplex_weights(p: &[f64]) -> Vec<f64> {
    let total: f64 = p.iter().map(|v| v * v).sum();
    if total <= 1e-300 {
        return vec![1.0 / p.len() as f64; p.len()];
    }
    p.iter().map(|v| v * v / total).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EffectFamily {
    /// Unrestricted POVM elements.
    Any { dim: usize },
    /// Diagonal in the computational basis (incoherent POVM elements).
    Diagonal { dim: usize },
    /// Real symmetric POVM elements.
    Real { dim: usize },
}

/// Which measurements a bound is stated for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasurementClass {
    /// Any POVM.
    General,
    /// Projective measurements whose outcome effects are rank one
    /// (fine-grained; coarse-graining happens only when outcomes < d).
    RankOne,
}

/// An effect family restricted to a measurement class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InstrumentFamily {
    pub effects: EffectFamily,
    pub class: MeasurementClass,
}

impl InstrumentFamily {
    pub fn new(effects: EffectFamily, class: MeasurementClass) -> Self {
        Self { effects, class }
    }

    pub fn dim(&self) -> usize {
        match self.effects {
            EffectFamily::Any { dim } | EffectFamily::Diagonal { dim } | EffectFamily::Real { dim } => dim,
        }
    }

    fn is_real(&self) -> bool {
        matches!(self.effects, EffectFamily::Real { .. })
    }

    pub fn param_len(&self, outcomes: usize) -> usize {
        let d = self.dim();
        match (self.effects, self.class) {
            (EffectFamily::Any { .. }, MeasurementClass::General) => outcomes * 2 * d * d,
            (EffectFamily::Real { .. }, MeasurementClass::General) => outcomes * d * d,
            (EffectFamily::Diagonal { .. }, MeasurementClass::General) => outcomes * d,
            (EffectFamily::Any { .. }, MeasurementClass::RankOne) => 2 * d * d,
            (EffectFamily::Real { .. }, MeasurementClass::RankOne) => d * d,
            (EffectFamily::Diagonal { .. }, MeasurementClass::RankOne) => d,
        }
    }

    pub fn sample_params(&self, outcomes: usize, rng: &mut impl Rng) -> Vec<f64> {
        sample_box(self.param_len(outcomes), rng)
    }

    pub fn instrument_from_params(&self, outcomes: usize, p: &[f64]) -> Vec<Effect> {
        debug_assert!(outcomes >= 1);
        debug_assert_eq!(p.len(), self.param_len(outcomes));
        let d = self.dim();
        match (self.effects, self.class) {
            (EffectFamily::Diagonal { .. }, MeasurementClass::General) => {
                let mut diag = vec![vec![0.0; d]; outcomes];
                for i in 0..d {
                    let column: Vec<f64> = (0..outcomes).map(|j| p[j * d + i]).collect();
                    for (j, w) in simplex_weights(&column).into_iter().enumerate() {
                        diag[j][i] = w;
                    }
                }
                diag.iter()
                    .map(|w| Effect::from_trusted(ComplexMatrix::from_real_diagonal(w)))
                    .collect()
            }
            (EffectFamily::Diagonal { .. }, MeasurementClass::RankOne) => {
                // basis vector order by parameter rank
                let mut order: Vec<usize> = (0..d).collect();
                order.sort_by(|&a, &b| p[a].total_cmp(&p[b]).then(a.cmp(&b)));
                let mut diag = vec![vec![0.0; d]; outcomes];
                for (slot, &i) in order.iter().enumerate() {
                    diag[assigned_outcome(slot, outcomes)][i] = 1.0;
                }
                diag.iter()
                    .map(|w| Effect::from_trusted(ComplexMatrix::from_real_diagonal(w)))
                    .collect()
            }
            (_, MeasurementClass::General) => {
                let real = self.is_real();
                let per = if real { d * d } else { 2 * d * d };
                let positives: Vec<ComplexMatrix> = (0..outcomes)
                    .map(|j| {
                        let b = complex_from_params(d, &p[j * per..(j + 1) * per], real);
                        &(&b.adjoint() * &b) + &ComplexMatrix::identity(d).scale(REGULARIZER)
                    })
                    .collect();
                normalize_instrument(&positives, real)
            }
            (_, MeasurementClass::RankOne) => {
                let real = self.is_real();
                let g = complex_from_params(d, p, real);
                let basis = orthonormal_columns(&g);
                projective_instrument(&basis, outcomes, real)
            }
        }
    }

    /// Maximizes `Σ_j Tr(E_j coeffs[j])` starting from `current`.
    ///
    /// Exact for diagonal families and for two-outcome general instruments;
    /// otherwise a monotone pairwise refinement of `current`.
    pub fn best_response(&self, coeffs: &[ComplexMatrix], current: &[Effect]) -> Vec<Effect> {
        let outcomes = coeffs.len();
        let d = self.dim();
        let real = self.is_real();
        let coeffs: Vec<ComplexMatrix> = if real {
            coeffs.iter().map(ComplexMatrix::real_part).collect()
        } else {
            coeffs.to_vec()
        };
        match (self.effects, self.class) {
            (EffectFamily::Diagonal { .. }, MeasurementClass::General) => {
                let mut diag = vec![vec![0.0; d]; outcomes];
                for i in 0..d {
                    let mut best = 0;
                    for j in 1..outcomes {
                        if coeffs[j].get(i, i).re > coeffs[best].get(i, i).re {
                            best = j;
                        }
                    }
                    diag[best][i] = 1.0;
                }
                diag.iter()
                    .map(|w| Effect::from_trusted(ComplexMatrix::from_real_diagonal(w)))
                    .collect()
            }
            (EffectFamily::Diagonal { .. }, MeasurementClass::RankOne) => {
                diagonal_rank_one_best(&coeffs, d)
            }
            (_, MeasurementClass::General) => pairwise_general(&coeffs, current, real),
            (_, MeasurementClass::RankOne) => pairwise_rank_one(&coeffs, current, real),
        }
    }
}

fn normalize_instrument(positives: &[ComplexMatrix], real: bool) -> Vec<Effect> {
    let d = positives[0].dim();
    let total = positives.iter().fold(ComplexMatrix::zeros(d), |acc, a| &acc + a);
    let inv_sqrt = psd_power(&total, -0.5);
    let mut effects: Vec<ComplexMatrix> = positives
        .iter()
        .map(|a| {
            let e = (&(&inv_sqrt * a) * &inv_sqrt).hermitian_part();
            if real {
                e.real_part()
            } else {
                e
            }
        })
        .collect();
    absorb_completeness_residue(&mut effects);
    effects.into_iter().map(Effect::from_trusted).collect()
}

/// Pushes the tiny `𝟙 − Σ_j E_j` rounding residue into the last effect.
fn absorb_completeness_residue(effects: &mut [ComplexMatrix]) {
    let d = effects[0].dim();
    let total = effects.iter().fold(ComplexMatrix::zeros(d), |acc, e| &acc + e);
    let residue = &ComplexMatrix::identity(d) - &total;
    let last = effects.len() - 1;
    effects[last] = (&effects[last] + &residue).hermitian_part();
}

fn projective_instrument(basis: &[Vec<Complex64>], outcomes: usize, real: bool) -> Vec<Effect> {
    let d = basis.len();
    let mut effects = vec![ComplexMatrix::zeros(d); outcomes];
    for (i, v) in basis.iter().enumerate() {
        let j = assigned_outcome(i, outcomes);
        effects[j] = &effects[j] + &vector_projector(v);
    }
    if real {
        for e in &mut effects {
            *e = e.real_part();
        }
    }
    absorb_completeness_residue(&mut effects);
    effects.into_iter().map(Effect::from_trusted).collect()
}

fn objective(effects: &[ComplexMatrix], coeffs: &[ComplexMatrix]) -> f64 {
    effects.iter().zip(coeffs).map(|(e, c)| e.trace_product(c).re).sum()
}

fn pairwise_general(coeffs: &[ComplexMatrix], current: &[Effect], real: bool) -> Vec<Effect> {
    let outcomes = coeffs.len();
    let mut effects: Vec<ComplexMatrix> = current.iter().map(|e| e.matrix().clone()).collect();
    let mut value = objective(&effects, coeffs);
    for _ in 0..MAX_PAIR_SWEEPS {
        let before = value;
        for j in 0..outcomes {
            for l in (j + 1)..outcomes {
                let pool = &effects[j] + &effects[l];
                let root = psd_sqrt(&pool);
                let m = (&(&root * &(&coeffs[j] - &coeffs[l])) * &root).hermitian_part();
                let p = positive_projector(&m, real);
                let mut ej = (&(&root * &p) * &root).hermitian_part();
                if real {
                    ej = ej.real_part();
                }
                let el = (&pool - &ej).hermitian_part();
                let old = effects[j].trace_product(&coeffs[j]).re + effects[l].trace_product(&coeffs[l]).re;
                let new = ej.trace_product(&coeffs[j]).re + el.trace_product(&coeffs[l]).re;
                if new > old {
                    effects[j] = ej;
                    effects[l] = el;
                }
            }
        }
        value = objective(&effects, coeffs);
        if outcomes == 2 || value - before <= PAIR_SWEEP_GAIN {
            break;
        }
    }
    absorb_completeness_residue(&mut effects);
    effects.into_iter().map(Effect::from_trusted).collect()
}

/// Recovers the rank-one basis and outcome assignment from a projective instrument.
fn basis_of(current: &[Effect], d: usize) -> Option<(Vec<Vec<Complex64>>, Vec<usize>)> {
    let mut vecs = Vec::new();
    let mut owner = Vec::new();
    for (j, e) in current.iter().enumerate() {
        let spec = spectral_decomposition(e.matrix(), SPECTRAL_TOL).ok()?;
        for (lam, v) in spec {
            if lam > 0.5 {
                vecs.push(v.amplitudes().to_vec());
                owner.push(j);
            }
        }
    }
    (vecs.len() == d).then_some((vecs, owner))
}

fn pairwise_rank_one(coeffs: &[ComplexMatrix], current: &[Effect], real: bool) -> Vec<Effect> {
    let outcomes = coeffs.len();
    let d = coeffs[0].dim();
    let (mut vecs, owner) = basis_of(current, d).unwrap_or_else(|| {
        let basis = (0..d)
            .map(|k| (0..d).map(|i| if i == k { c(1.0, 0.0) } else { c(0.0, 0.0) }).collect())
            .collect();
        (basis, (0..d).map(|i| assigned_outcome(i, outcomes)).collect())
    });
    let quad = |v: &[Complex64], m: &ComplexMatrix| -> f64 {
        let mut acc = c(0.0, 0.0);
        for i in 0..v.len() {
            for k in 0..v.len() {
                acc += v[i].conj() * m.get(i, k) * v[k];
            }
        }
        acc.re
    };
    for _ in 0..MAX_PAIR_SWEEPS {
        let mut gain = 0.0;
        for a in 0..d {
            for b in (a + 1)..d {
                if owner[a] == owner[b] {
                    continue;
                }
                let delta = &coeffs[owner[a]] - &coeffs[owner[b]];
                // 2×2 compression of `delta` onto span{u_a, u_b}
                let pair = [&vecs[a], &vecs[b]];
                let mut small = ComplexMatrix::zeros(2);
                for (r, u) in pair.iter().enumerate() {
                    for (s, w) in pair.iter().enumerate() {
                        let mut acc = c(0.0, 0.0);
                        for i in 0..d {
                            for k in 0..d {
                                acc += u[i].conj() * delta.get(i, k) * w[k];
                            }
                        }
                        small.set(r, s, acc);
                    }
                }
                let small = if real { small.real_part() } else { small.hermitian_part() };
                let spec = spectral_decomposition(&small, SPECTRAL_TOL).expect("Hermitian");
                let top = spec[0].1.amplitudes();
                let bottom = spec[1].1.amplitudes();
                let new_a: Vec<Complex64> = (0..d).map(|i| top[0] * vecs[a][i] + top[1] * vecs[b][i]).collect();
                let new_b: Vec<Complex64> =
                    (0..d).map(|i| bottom[0] * vecs[a][i] + bottom[1] * vecs[b][i]).collect();
                let old = quad(&vecs[a], &coeffs[owner[a]]) + quad(&vecs[b], &coeffs[owner[b]]);
                let new = quad(&new_a, &coeffs[owner[a]]) + quad(&new_b, &coeffs[owner[b]]);
                if new > old {
                    gain += new - old;
                    vecs[a] = new_a;
                    vecs[b] = new_b;
                }
            }
        }
        if gain <= PAIR_SWEEP_GAIN {
            break;
        }
    }
    let mut effects = vec![ComplexMatrix::zeros(d); outcomes];
    for (v, &j) in vecs.iter().zip(&owner) {
        effects[j] = &effects[j] + &vector_projector(v);
    }
    if real {
        for e in &mut effects {
            *e = e.real_part();
        }
    }
    absorb_completeness_residue(&mut effects);
    effects.into_iter().map(Effect::from_trusted).collect()
}

/// Exhaustive search over injective assignments of basis vectors to outcomes.
fn diagonal_rank_one_best(coeffs: &[ComplexMatrix], d: usize) -> Vec<Effect> {
    let outcomes = coeffs.len();
    let score = |i: usize, j: usize| coeffs[j].get(i, i).re;
    let mut best_assign: Vec<usize> = (0..d).map(|i| assigned_outcome(i, outcomes)).collect();
    if outcomes >= d {
        let mut best_val = f64::NEG_INFINITY;
        let mut assign = vec![0usize; d];
        let mut used = vec![false; outcomes];
        fn recurse(
            i: usize,
            d: usize,
            acc: f64,
            assign: &mut Vec<usize>,
            used: &mut Vec<bool>,
            best_val: &mut f64,
            best_assign: &mut Vec<usize>,
            score: &dyn Fn(usize, usize) -> f64,
        ) {
            if i == d {
                if acc > *best_val {
                    *best_val = acc;
                    best_assign.clone_from(assign);
                }
                return;
            }
            for j in 0..used.len() {
                if !used[j] {
                    used[j] = true;
                    assign[i] = j;
                    recurse(i + 1, d, acc + score(i, j), assign, used, best_val, best_assign, score);
                    used[j] = false;
                }
            }
        }
        recurse(0, d, 0.0, &mut assign, &mut used, &mut best_val, &mut best_assign, &score);
    } else {
        for (i, slot) in best_assign.iter_mut().enumerate() {
            *slot = (0..outcomes).fold(0, |b, j| if score(i, j) > score(i, b) { j } else { b });
        }
    }
    let mut diag = vec![vec![0.0; d]; outcomes];
    for (i, &j) in best_assign.iter().enumerate() {
        diag[j][i] = 1.0;
    }
    diag.iter()
        .map(|w| Effect::from_trusted(ComplexMatrix::from_real_diagonal(w)))
        .collect()
}
