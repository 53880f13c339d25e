//! Free states and free operations of the resource theories in scope.
//!
//! Each [`FreeSetSpec`] carries the extremal basis used by the rank test, the
//! rank budgets `N`, and the parametrized families searched by the optimizer.

mod family;

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::qmath::{kets, spanning_pure_states, ComplexMatrix, DensityMatrix, Effect, PureState};

pub use family::{EffectFamily, InstrumentFamily, MeasurementClass, StateFamily};
pub(crate) use family::simplex_weights;

/// Largest constraint violation still reported as membership.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FreeSetKind {
    Incoherent,
    Real,
    Stabilizer,
    MaximallyMixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MembershipReport {
    pub is_member: bool,
    /// Infinity-norm violation of the set's defining constraints.
    pub distance_estimate: f64,
}

impl MembershipReport {
    fn from_distance(distance: f64) -> Self {
        let distance = distance.max(0.0);
        Self { is_member: distance <= MEMBERSHIP_TOL, distance_estimate: distance }
    }
}

/// Object submitted to [`membership`].
#[derive(Debug, Clone, Copy)]
pub enum FreeObject<'a> {
    State(&'a DensityMatrix),
    Effect(&'a Effect),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FreeSetSpec {
    name: String,
    kind: FreeSetKind,
    dim: usize,
    state_basis: Vec<DensityMatrix>,
    effect_basis: Vec<Effect>,
    state_family: StateFamily,
    effect_family: EffectFamily,
    extremal_states: Option<Vec<DensityMatrix>>,
}

fn projectors(states: &[PureState]) -> Vec<DensityMatrix> {
    states.iter().map(DensityMatrix::from_pure).collect()
}

fn effects_of(states: &[PureState]) -> Vec<Effect> {
    states.iter().map(Effect::projector).collect()
}

fn check_dim(dim: usize) -> Result<()> {
    if dim < 2 {
        Err(Error::InvalidDimension(dim))
    } else {
        Ok(())
    }
}

/// Incoherent states and operations: diagonal in the computational basis.
pub fn incoherent(dim: usize) -> Result<FreeSetSpec> {
    check_dim(dim)?;
    let basis: Vec<PureState> = (0..dim).map(|i| PureState::basis(dim, i)).collect::<Result<_>>()?;
    let states = projectors(&basis);
    Ok(FreeSetSpec {
        name: "incoherent".into(),
        kind: FreeSetKind::Incoherent,
        dim,
        state_family: StateFamily::Vertices(states.clone()),
        extremal_states: Some(states.clone()),
        state_basis: states,
        effect_basis: effects_of(&basis),
        effect_family: EffectFamily::Diagonal { dim },
    })
}

/// Real (imaginarity-free) qubit states and operations.
pub fn real_states(dim: usize) -> Result<FreeSetSpec> {
    if dim != 2 {
        return Err(Error::UnsupportedDimension { what: "the real free set", supported: "2", got: dim });
    }
    let basis = [kets::zero(), kets::one(), kets::plus()];
    Ok(FreeSetSpec {
        name: "real".into(),
        kind: FreeSetKind::Real,
        dim,
        state_basis: projectors(&basis),
        effect_basis: effects_of(&basis),
        state_family: StateFamily::RealQubit,
        effect_family: EffectFamily::Real { dim },
        extremal_states: None,
    })
}

/// The six single-qubit stabilizer states (eigenstates of σx, σy, σz).
pub fn stabilizer_vertices() -> Vec<DensityMatrix> {
    projectors(&[kets::zero(), kets::one(), kets::plus(), kets::minus(), kets::plus_y(), kets::minus_y()])
}

/// Convex hull of the qubit stabilizer states; measurements unrestricted.
pub fn stabilizer_qubit() -> FreeSetSpec {
    let spanning = spanning_pure_states(2).expect("d = 2");
    FreeSetSpec {
        name: "stabilizer".into(),
        kind: FreeSetKind::Stabilizer,
        dim: 2,
        state_basis: projectors(&spanning),
        effect_basis: effects_of(&spanning),
        state_family: StateFamily::Vertices(stabilizer_vertices()),
        effect_family: EffectFamily::Any { dim: 2 },
        extremal_states: Some(stabilizer_vertices()),
    }
}

/// Only `𝟙/d` is free; measurements unrestricted.
pub fn maximally_mixed(dim: usize) -> Result<FreeSetSpec> {
    check_dim(dim)?;
    let mixed = DensityMatrix::maximally_mixed(dim);
    Ok(FreeSetSpec {
        name: "maximally-mixed".into(),
        kind: FreeSetKind::MaximallyMixed,
        dim,
        state_basis: vec![mixed.clone()],
        effect_basis: effects_of(&spanning_pure_states(dim)?),
        state_family: StateFamily::Fixed(mixed.clone()),
        effect_family: EffectFamily::Any { dim },
        extremal_states: Some(vec![mixed]),
    })
}

/// Names accepted by [`by_name`].
pub const FREE_SET_NAMES: [&str; 6] =
    ["incoherent", "real", "stabilizer", "maximally-mixed", "asymmetry-d2", "athermality-d2"];

/// Looks a free set up by its command-line name.
///
/// `asymmetry-d2` and `athermality-d2` coincide with the qubit incoherent set.
pub fn by_name(name: &str, dim: usize) -> Result<FreeSetSpec> {
    match name {
        "incoherent" => incoherent(dim),
        "real" => real_states(dim),
        "stabilizer" => {
            if dim != 2 {
                return Err(Error::UnsupportedDimension { what: "the stabilizer polytope", supported: "2", got: dim });
            }
            Ok(stabilizer_qubit())
        }
        "maximally-mixed" => maximally_mixed(dim),
        "asymmetry-d2" | "athermality-d2" => {
            if dim != 2 {
                return Err(Error::UnsupportedDimension { what: "asymmetry/athermality", supported: "2", got: dim });
            }
            let mut spec = incoherent(2)?;
            spec.name = name.to_string();
            Ok(spec)
        }
        other => Err(Error::InvalidInput(format!(
            "unknown free set `{other}` (known: {})",
            FREE_SET_NAMES.join(", ")
        ))),
    }
}

impl FreeSetSpec {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> FreeSetKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn state_basis(&self) -> &[DensityMatrix] {
        &self.state_basis
    }

    pub fn effect_basis(&self) -> &[Effect] {
        &self.effect_basis
    }

    /// `N_S`: number of linearly independent extremal free states.
    pub fn state_rank_budget(&self) -> usize {
        self.state_basis.len()
    }

    /// `N_O`: number of linearly independent extremal free effects.
    pub fn effect_rank_budget(&self) -> usize {
        self.effect_basis.len()
    }

    /// Whether the state-side rank test can ever fire (`N_S < d²`).
    pub fn state_test_applicable(&self) -> bool {
        self.state_rank_budget() < self.dim * self.dim
    }

    pub fn effect_test_applicable(&self) -> bool {
        self.effect_rank_budget() < self.dim * self.dim
    }

    pub fn state_family(&self) -> &StateFamily {
        &self.state_family
    }

    pub fn effect_family(&self) -> EffectFamily {
        self.effect_family
    }

    /// False when any POVM counts as free.
    pub fn effects_constrained(&self) -> bool {
        !matches!(self.effect_family, EffectFamily::Any { .. })
    }

    pub fn extremal_states(&self) -> Option<&[DensityMatrix]> {
        self.extremal_states.as_deref()
    }

    pub fn sample_state(&self, rng: &mut impl Rng) -> DensityMatrix {
        let p = self.state_family.sample_params(rng);
        self.state_family.state_from_params(&p)
    }

    pub fn sample_instrument(
        &self,
        outcomes: usize,
        class: MeasurementClass,
        rng: &mut impl Rng,
    ) -> Vec<Effect> {
        let fam = InstrumentFamily::new(self.effect_family, class);
        let p = fam.sample_params(outcomes, rng);
        fam.instrument_from_params(outcomes, &p)
    }

    pub fn membership_state(&self, state: &DensityMatrix) -> Result<MembershipReport> {
        self.check_object_dim(state.dim())?;
        let m = state.matrix();
        let distance = match self.kind {
            FreeSetKind::Incoherent => m.max_off_diagonal(),
            FreeSetKind::Real => m.max_imaginary(),
            FreeSetKind::MaximallyMixed => {
                m.max_abs_diff(DensityMatrix::maximally_mixed(self.dim).matrix())
            }
            FreeSetKind::Stabilizer => {
                polytope_distance(self.extremal_states.as_deref().unwrap_or_default(), state)?
            }
        };
        Ok(MembershipReport::from_distance(distance))
    }

    pub fn membership_effect(&self, effect: &Effect) -> Result<MembershipReport> {
        self.check_object_dim(effect.dim())?;
        let distance = match self.effect_family {
            EffectFamily::Diagonal { .. } => effect.matrix().max_off_diagonal(),
            EffectFamily::Real { .. } => effect.matrix().max_imaginary(),
            EffectFamily::Any { .. } => 0.0,
        };
        Ok(MembershipReport::from_distance(distance))
    }

    fn check_object_dim(&self, dim: usize) -> Result<()> {
        if dim != self.dim {
            return Err(Error::InvalidInput(format!(
                "object has dimension {dim} but free set `{}` is {}-dimensional",
                self.name, self.dim
            )));
        }
        Ok(())
    }
}

pub fn membership(spec: &FreeSetSpec, object: FreeObject<'_>) -> Result<MembershipReport> {
    match object {
        FreeObject::State(s) => spec.membership_state(s),
        FreeObject::Effect(e) => spec.membership_effect(e),
    }
}

/// Real coordinates of a Hermitian matrix: diagonal real parts, then the real
/// and imaginary parts of the upper triangle.
fn hermitian_coordinates(m: &ComplexMatrix) -> Vec<f64> {
    let d = m.dim();
    let mut out: Vec<f64> = (0..d).map(|i| m.get(i, i).re).collect();
    for i in 0..d {
        for j in (i + 1)..d {
            let z: Complex64 = m.get(i, j);
            out.push(z.re);
            out.push(z.im);
        }
    }
    out
}

/// Smallest `t` such that some convex combination of `vertices` matches
/// `state` coordinate-wise within `t`. Solved as a linear program.
fn polytope_distance(vertices: &[DensityMatrix], state: &DensityMatrix) -> Result<f64> {
    if vertices.is_empty() {
        return Err(Error::InvalidInput("polytope has no vertices".into()));
    }
    let target = hermitian_coordinates(state.matrix());
    let coords: Vec<Vec<f64>> = vertices.iter().map(|v| hermitian_coordinates(v.matrix())).collect();
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let t = lp.add_var(1.0, (0.0, f64::INFINITY));
    let weights: Vec<_> = vertices.iter().map(|_| lp.add_var(0.0, (0.0, f64::INFINITY))).collect();
    let sum: Vec<_> = weights.iter().map(|&w| (w, 1.0)).collect();
    lp.add_constraint(&sum, ComparisonOp::Eq, 1.0);
    for (k, &goal) in target.iter().enumerate() {
        let mut upper: Vec<_> = weights.iter().zip(&coords).map(|(&w, c)| (w, c[k])).collect();
        upper.push((t, -1.0));
        lp.add_constraint(&upper, ComparisonOp::Le, goal);
        let mut lower: Vec<_> = weights.iter().zip(&coords).map(|(&w, c)| (w, c[k])).collect();
        lower.push((t, 1.0));
        lp.add_constraint(&lower, ComparisonOp::Ge, goal);
    }
    let solution = lp
        .solve()
        .map_err(|e| Error::InvalidInput(format!("membership program failed: {e}")))?;
    Ok(solution.objective())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn all_specs() -> Vec<FreeSetSpec> {
        vec![
            incoherent(2).unwrap(),
            incoherent(3).unwrap(),
            incoherent(4).unwrap(),
            real_states(2).unwrap(),
            stabilizer_qubit(),
            maximally_mixed(2).unwrap(),
            maximally_mixed(3).unwrap(),
        ]
    }

    fn gram_determinant(ops: &[&ComplexMatrix]) -> f64 {
        let n = ops.len();
        let g = DMatrix::from_fn(n, n, |i, j| ops[i].trace_product(ops[j]).re);
        g.determinant()
    }

    #[test]
    fn incoherent_budget_and_membership() {
        let spec = incoherent(2).unwrap();
        assert_eq!(spec.state_rank_budget(), 2);
        assert_eq!(spec.effect_rank_budget(), 2);
        assert!(spec.membership_state(&DensityMatrix::maximally_mixed(2)).unwrap().is_member);
        let plus = spec.membership_state(&DensityMatrix::from_pure(&kets::plus())).unwrap();
        assert!(!plus.is_member);
        assert!((plus.distance_estimate - 0.5).abs() < 1e-12);
        let diag = DensityMatrix::new(ComplexMatrix::from_real_diagonal(&[0.3, 0.7])).unwrap();
        assert!(spec.membership_state(&diag).unwrap().is_member);
    }

    #[test]
    fn real_set() {
        let spec = real_states(2).unwrap();
        assert_eq!(spec.state_rank_budget(), 3);
        assert!(spec.state_test_applicable());
        assert!(!spec.membership_state(&DensityMatrix::from_pure(&kets::plus_y())).unwrap().is_member);
        assert!(spec.membership_state(&DensityMatrix::from_pure(&kets::bar_zero())).unwrap().is_member);
        let tilted = DensityMatrix::from_bloch(0.3, 0.2, 0.1).unwrap();
        let report = spec.membership_state(&tilted).unwrap();
        assert!(!report.is_member);
        assert!((report.distance_estimate - 0.1).abs() < 1e-12);
        assert!(matches!(real_states(3), Err(Error::UnsupportedDimension { .. })));
    }

    #[test]
    fn stabilizer_polytope() {
        let spec = stabilizer_qubit();
        assert_eq!(spec.extremal_states().unwrap().len(), 6);
        assert_eq!(spec.state_rank_budget(), 4);
        assert!(!spec.state_test_applicable());
        assert!(spec.membership_state(&DensityMatrix::maximally_mixed(2)).unwrap().is_member);
        let mix = DensityMatrix::from_pure(&kets::zero())
            .mix(&DensityMatrix::from_pure(&kets::plus()), 0.5)
            .unwrap();
        assert!(spec.membership_state(&mix).unwrap().is_member);
    }

    /// Octahedron oracle: inside iff `|r_x| + |r_y| + |r_z| ≤ 1`.
    fn octahedron_l1(rho: &DensityMatrix) -> f64 {
        rho.bloch().unwrap().iter().map(|v| v.abs()).sum()
    }

    #[test]
    fn magic_state_is_outside_stabilizer_polytope() {
        let t = DensityMatrix::from_pure(&kets::magic_t());
        assert!(octahedron_l1(&t) > 1.0);
        let report = stabilizer_qubit().membership_state(&t).unwrap();
        assert!(!report.is_member);
        assert!(report.distance_estimate > 1e-3);
    }

    #[test]
    fn stabilizer_membership_agrees_with_octahedron() {
        let spec = stabilizer_qubit();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..300 {
            let r: [f64; 3] = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let len = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
            if len > 1.0 {
                continue;
            }
            let rho = DensityMatrix::from_bloch(r[0], r[1], r[2]).unwrap();
            let l1 = octahedron_l1(&rho);
            if (l1 - 1.0).abs() < 1e-6 {
                continue;
            }
            assert_eq!(spec.membership_state(&rho).unwrap().is_member, l1 < 1.0, "r={r:?}");
        }
    }

    #[test]
    fn maximally_mixed_set() {
        for d in 2..=4 {
            let spec = maximally_mixed(d).unwrap();
            assert_eq!(spec.state_rank_budget(), 1);
            assert!(spec.membership_state(&DensityMatrix::maximally_mixed(d)).unwrap().is_member);
            let zero = DensityMatrix::from_pure(&PureState::basis(d, 0).unwrap());
            assert!(!spec.membership_state(&zero).unwrap().is_member);
        }
    }

    #[test]
    fn basis_elements_are_free_and_independent() {
        for spec in all_specs() {
            for s in spec.state_basis() {
                assert!(spec.membership_state(s).unwrap().is_member, "{}", spec.name());
            }
            let ops: Vec<&ComplexMatrix> = spec.state_basis().iter().map(DensityMatrix::matrix).collect();
            assert!(gram_determinant(&ops) > 1e-12, "{}", spec.name());
            let eff: Vec<&ComplexMatrix> = spec.effect_basis().iter().map(Effect::matrix).collect();
            assert!(gram_determinant(&eff) > 1e-12, "{}", spec.name());
        }
    }

    #[test]
    fn parametrizations_stay_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for spec in all_specs() {
            for class in [MeasurementClass::General, MeasurementClass::RankOne] {
                for _ in 0..200 {
                    let s = spec.sample_state(&mut rng);
                    DensityMatrix::new(s.matrix().clone()).unwrap();
                    assert!(spec.membership_state(&s).unwrap().is_member, "{}", spec.name());
                    for e in spec.sample_instrument(2, class, &mut rng) {
                        Effect::new(e.matrix().clone()).unwrap();
                        assert!(spec.membership_effect(&e).unwrap().is_member);
                    }
                }
            }
        }
    }

    #[test]
    fn extreme_points_are_reachable() {
        for d in 2..=4 {
            let spec = incoherent(d).unwrap();
            for i in 0..d {
                let mut p = vec![0.0; d];
                p[i] = 1.0;
                let s = spec.state_family().state_from_params(&p);
                assert!(s.matrix().approx_eq(&PureState::basis(d, i).unwrap().projector(), 1e-15));
            }
        }
        let spec = stabilizer_qubit();
        for (k, v) in stabilizer_vertices().iter().enumerate() {
            let mut p = vec![0.0; 6];
            p[k] = 0.7;
            let s = spec.state_family().state_from_params(&p);
            assert!(s.matrix().approx_eq(v.matrix(), 1e-15));
        }
    }

    /// Incoherent channels with Kraus operators `Σ_i c_{ij}|f(i)⟩⟨i|` map diagonal states to diagonal states.
    #[test]
    fn incoherent_channels_preserve_free_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for d in 2..=3 {
            let spec = incoherent(d).unwrap();
            for _ in 0..1000 {
                let rho = spec.sample_state(&mut rng);
                let effects = spec.sample_instrument(3, MeasurementClass::General, &mut rng);
                let mut out = ComplexMatrix::zeros(d);
                for e in &effects {
                    let target: Vec<usize> = (0..d).map(|_| rng.random_range(0..d)).collect();
                    let mut k = ComplexMatrix::zeros(d);
                    for i in 0..d {
                        let amp = e.matrix().get(i, i).re.max(0.0).sqrt();
                        k.set(target[i], i, Complex64::new(amp, 0.0));
                    }
                    out = &out + &(&(&k * rho.matrix()) * &k.adjoint());
                }
                let image = DensityMatrix::new_with_tol(
                    out,
                    crate::qmath::StateTolerance { hermitian: 1e-12, trace: 1e-10, min_eigenvalue: 1e-10 },
                )
                .unwrap();
                assert!(spec.membership_state(&image).unwrap().is_member);
            }
        }
    }

    #[test]
    fn lookup_by_name() {
        for name in FREE_SET_NAMES {
            let spec = by_name(name, 2).unwrap();
            assert_eq!(spec.name(), name);
        }
        assert_eq!(by_name("asymmetry-d2", 2).unwrap().kind(), FreeSetKind::Incoherent);
        assert!(by_name("asymmetry-d2", 3).is_err());
        assert!(by_name("entanglement", 2).is_err());
        assert!(matches!(by_name("incoherent", 1), Err(Error::InvalidDimension(1))));
    }

    #[test]
    fn dimension_mismatch_in_membership() {
        let spec = incoherent(3).unwrap();
        assert!(spec.membership_state(&DensityMatrix::maximally_mixed(2)).is_err());
        assert!(membership(&spec, FreeObject::Effect(&Effect::identity(3))).unwrap().is_member);
    }
}
