//! Dense complex linear algebra for small quantum systems.
//!
//! Holds the state and effect types used throughout the crate, the Pauli
//! and clock/shift operators, the qudit random-access-code states, and a
//! Hermitian spectral decomposition with a fixed eigenvector phase.
//!
//! Phase convention: every eigenvector (and every named ket built from one)
//! has its first non-negligible component real and positive.

mod matrix;

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub use matrix::{ComplexMatrix, DEFAULT_ENTRY_TOL};

/// Norm tolerance for [`PureState`].
pub const DEFAULT_NORM_TOL: f64 = 1e-12;
/// Lowest eigenvalue accepted as "non-negative".
pub const DEFAULT_EIGEN_TOL: f64 = 1e-10;
/// Hermiticity gate for [`spectral_decomposition`].
pub const DEFAULT_SPECTRAL_HERMITIAN_TOL: f64 = 1e-10;

/// Components below this modulus are skipped when fixing eigenvector phases.
const PHASE_CUTOFF: f64 = 1e-12;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Tolerances applied when validating a [`DensityMatrix`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateTolerance {
    pub hermitian: f64,
    pub trace: f64,
    pub min_eigenvalue: f64,
}

impl Default for StateTolerance {
    fn default() -> Self {
        Self {
            hermitian: DEFAULT_ENTRY_TOL,
            trace: DEFAULT_ENTRY_TOL,
            min_eigenvalue: DEFAULT_EIGEN_TOL,
        }
    }
}

/// Tolerances applied when validating an [`Effect`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectTolerance {
    pub hermitian: f64,
    pub eigenvalue: f64,
}

impl Default for EffectTolerance {
    fn default() -> Self {
        Self { hermitian: DEFAULT_ENTRY_TOL, eigenvalue: DEFAULT_EIGEN_TOL }
    }
}

/// Normalized state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: Vec<Complex64>,
}

impl PureState {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        Self::new_with_tol(amplitudes, DEFAULT_NORM_TOL)
    }

    pub fn new_with_tol(amplitudes: Vec<Complex64>, tol: f64) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidInput("state vector is empty".into()));
        }
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > tol {
            return Err(Error::ContractViolation(format!(
                "state vector norm {norm} differs from 1 by more than {tol}"
            )));
        }
        Ok(Self { amplitudes })
    }

    /// Rescales a nonzero vector to unit norm.
    pub fn normalized(amplitudes: Vec<Complex64>) -> Result<Self> {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if amplitudes.is_empty() || norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidInput("cannot normalize a zero vector".into()));
        }
        Ok(Self { amplitudes: amplitudes.into_iter().map(|a| a / norm).collect() })
    }

    /// Computational basis vector `|index⟩`.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::InvalidInput(format!("basis index {index} out of range for d={dim}")));
        }
        let mut amps = vec![c(0.0, 0.0); dim];
        amps[index] = c(1.0, 0.0);
        Ok(Self { amplitudes: amps })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &PureState) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn projector(&self) -> ComplexMatrix {
        let d = self.dim();
        let m = DMatrix::from_fn(d, d, |i, j| self.amplitudes[i] * self.amplitudes[j].conj());
        ComplexMatrix::from_dmatrix(m)
    }

    /// Applies a matrix; the result is renormalized to absorb rounding.
    pub fn apply(&self, op: &ComplexMatrix) -> Result<PureState> {
        let v = DVector::from_column_slice(&self.amplitudes);
        let out = op.as_dmatrix() * v;
        let state = PureState { amplitudes: out.iter().copied().collect() };
        let norm = state.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::ContractViolation(format!(
                "operator is not norm-preserving on this state (norm {norm})"
            )));
        }
        PureState::normalized(state.amplitudes)
    }

    fn with_phase_convention(mut self) -> Self {
        if let Some(first) = self.amplitudes.iter().find(|a| a.norm() > PHASE_CUTOFF).copied() {
            let phase = first.conj() / first.norm();
            for a in &mut self.amplitudes {
                *a *= phase;
            }
        }
        self
    }
}

/// Unit-trace positive semidefinite operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        Self::new_with_tol(matrix, StateTolerance::default())
    }

    pub fn new_with_tol(matrix: ComplexMatrix, tol: StateTolerance) -> Result<Self> {
        let herm = matrix.hermiticity_defect();
        if herm > tol.hermitian {
            return Err(Error::ContractViolation(format!(
                "density matrix is not Hermitian (defect {herm:.3e})"
            )));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > tol.trace || tr.im.abs() > tol.trace {
            return Err(Error::ContractViolation(format!(
                "density matrix trace is {:.12}{:+.3e}i, expected 1",
                tr.re, tr.im
            )));
        }
        let min_ev = hermitian_eigenvalues(&matrix).last().copied().unwrap_or(0.0);
        if min_ev < -tol.min_eigenvalue {
            return Err(Error::ContractViolation(format!(
                "density matrix has negative eigenvalue {min_ev:.3e}"
            )));
        }
        Ok(Self { matrix })
    }

    /// Trusted constructor for matrices that are valid by construction.
    pub(crate) fn from_trusted(matrix: ComplexMatrix) -> Self {
        debug_assert!(DensityMatrix::new_with_tol(
            matrix.clone(),
            StateTolerance { hermitian: 1e-9, trace: 1e-9, min_eigenvalue: 1e-9 }
        )
        .is_ok());
        Self { matrix }
    }

    pub fn from_pure(state: &PureState) -> Self {
        Self { matrix: state.projector() }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self { matrix: ComplexMatrix::identity(dim).scale(1.0 / dim as f64) }
    }

    /// Qubit state `(𝟙 + r·σ)/2`. Requires `|r| ≤ 1`.
    pub fn from_bloch(rx: f64, ry: f64, rz: f64) -> Result<Self> {
        let len = (rx * rx + ry * ry + rz * rz).sqrt();
        if len > 1.0 + 1e-12 {
            return Err(Error::ContractViolation(format!("Bloch vector length {len} exceeds 1")));
        }
        let m = ComplexMatrix::from_rows(&[
            vec![c((1.0 + rz) / 2.0, 0.0), c(rx / 2.0, -ry / 2.0)],
            vec![c(rx / 2.0, ry / 2.0), c((1.0 - rz) / 2.0, 0.0)],
        ])?;
        DensityMatrix::new(m)
    }

    /// `λ·self + (1−λ)·other`
    pub fn mix(&self, other: &DensityMatrix, weight: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::InvalidInput(format!("mixing weight {weight} outside [0, 1]")));
        }
        if self.dim() != other.dim() {
            return Err(Error::InvalidInput("cannot mix states of different dimension".into()));
        }
        let m = &self.matrix.scale(weight) + &other.matrix.scale(1.0 - weight);
        Ok(Self { matrix: m })
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// Bloch components `(r_x, r_y, r_z)`; qubits only.
    pub fn bloch(&self) -> Option<[f64; 3]> {
        if self.dim() != 2 {
            return None;
        }
        let off = self.matrix.get(1, 0);
        let rz = self.matrix.get(0, 0).re - self.matrix.get(1, 1).re;
        Some([2.0 * off.re, 2.0 * off.im, rz])
    }
}

/// POVM element: Hermitian with spectrum inside `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Effect {
    matrix: ComplexMatrix,
}

impl Effect {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        Self::new_with_tol(matrix, EffectTolerance::default())
    }

    pub fn new_with_tol(matrix: ComplexMatrix, tol: EffectTolerance) -> Result<Self> {
        let herm = matrix.hermiticity_defect();
        if herm > tol.hermitian {
            return Err(Error::ContractViolation(format!(
                "effect is not Hermitian (defect {herm:.3e})"
            )));
        }
        let evs = hermitian_eigenvalues(&matrix);
        let (max, min) = (evs[0], evs[evs.len() - 1]);
        if min < -tol.eigenvalue || max > 1.0 + tol.eigenvalue {
            return Err(Error::ContractViolation(format!(
                "effect spectrum [{min:.6}, {max:.6}] leaves [0, 1]"
            )));
        }
        Ok(Self { matrix })
    }

    pub(crate) fn from_trusted(matrix: ComplexMatrix) -> Self {
        debug_assert!(Effect::new_with_tol(
            matrix.clone(),
            EffectTolerance { hermitian: 1e-9, eigenvalue: 1e-9 }
        )
        .is_ok());
        Self { matrix }
    }

    pub fn projector(state: &PureState) -> Self {
        Self { matrix: state.projector() }
    }

    pub fn identity(dim: usize) -> Self {
        Self { matrix: ComplexMatrix::identity(dim) }
    }

    pub fn zero(dim: usize) -> Self {
        Self { matrix: ComplexMatrix::zeros(dim) }
    }

    /// `𝟙 − self`
    pub fn complement(&self) -> Self {
        Self { matrix: &ComplexMatrix::identity(self.dim()) - &self.matrix }
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// Born-rule probability `Tr(E ρ)`, with the imaginary residue returned alongside.
    pub fn probability(&self, state: &DensityMatrix) -> (f64, f64) {
        let z = self.matrix.trace_product(state.matrix());
        (z.re, z.im)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    X,
    Y,
    Z,
}

pub fn pauli(which: Pauli) -> ComplexMatrix {
    let rows = match which {
        Pauli::X => [[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]],
        Pauli::Y => [[c(0.0, 0.0), c(0.0, -1.0)], [c(0.0, 1.0), c(0.0, 0.0)]],
        Pauli::Z => [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]],
    };
    ComplexMatrix::from_dmatrix(DMatrix::from_fn(2, 2, |i, j| rows[i][j]))
}

/// `e^{2πi/d}`
pub fn root_of_unity(dim: usize) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI / dim as f64)
}

fn check_dim(dim: usize) -> Result<()> {
    if dim < 2 {
        Err(Error::InvalidDimension(dim))
    } else {
        Ok(())
    }
}

/// Clock operator `Z_d = Σ ωⁱ |i⟩⟨i|`.
pub fn generalized_pauli_z(dim: usize) -> Result<ComplexMatrix> {
    check_dim(dim)?;
    let diag: Vec<Complex64> = (0..dim)
        .map(|i| Complex64::from_polar(1.0, 2.0 * PI * i as f64 / dim as f64))
        .collect();
    Ok(ComplexMatrix::from_diagonal(&diag))
}

/// Shift operator `X_d = Σ |i⟩⟨i+1 mod d|`.
pub fn generalized_pauli_x(dim: usize) -> Result<ComplexMatrix> {
    check_dim(dim)?;
    let mut m = ComplexMatrix::zeros(dim);
    for i in 0..dim {
        m.set(i, (i + 1) % dim, c(1.0, 0.0));
    }
    Ok(m)
}

/// Seed state of the qudit random access code,
/// `((√d+1)|0⟩ + Σ_{i≥1}|i⟩) / √(2√d(1+√d))`.
pub fn qrac_seed_state(dim: usize) -> Result<PureState> {
    check_dim(dim)?;
    let sd = (dim as f64).sqrt();
    let norm = (2.0 * sd * (1.0 + sd)).sqrt();
    let mut amps = vec![c(1.0 / norm, 0.0); dim];
    amps[0] = c((sd + 1.0) / norm, 0.0);
    PureState::new_with_tol(amps, 1e-12)
}

/// Encoding state `X_d^{y0} Z_d^{y1} |ψ₀₀⟩`.
pub fn qrac_state(dim: usize, y0: usize, y1: usize) -> Result<PureState> {
    check_dim(dim)?;
    if y0 >= dim || y1 >= dim {
        return Err(Error::InvalidInput(format!(
            "qrac indices ({y0}, {y1}) out of range for d={dim}"
        )));
    }
    let op = &generalized_pauli_x(dim)?.pow(y0) * &generalized_pauli_z(dim)?.pow(y1);
    qrac_seed_state(dim)?.apply(&op)
}

/// Decoding basis for the qudit random access code.
///
/// `x = 0` is the eigenbasis of `Z_d` and `x = 1` the eigenbasis of `X_d`.
/// Outcome `j` is labeled so that it decodes `y_x = j`: for `x = 0` it is
/// `|−j mod d⟩` (since `X_d|k⟩ = |k−1⟩`), for `x = 1` it is the Fourier
/// vector `Σ_i ω^{ij}|i⟩/√d`, the `X_d` eigenvector with eigenvalue `ω^j`.
pub fn qrac_measurement_basis(dim: usize, setting: usize) -> Result<Vec<PureState>> {
    check_dim(dim)?;
    match setting {
        0 => (0..dim).map(|j| PureState::basis(dim, (dim - j) % dim)).collect(),
        1 => {
            let sd = (dim as f64).sqrt();
            (0..dim)
                .map(|j| {
                    let amps = (0..dim)
                        .map(|i| {
                            Complex64::from_polar(1.0 / sd, 2.0 * PI * (i * j) as f64 / dim as f64)
                        })
                        .collect();
                    PureState::normalized(amps)
                })
                .collect()
        }
        other => Err(Error::InvalidInput(format!("qrac measurement setting {other} not in {{0, 1}}"))),
    }
}

/// `d²` pure states whose projectors are linearly independent and span the
/// Hermitian operators: `|i⟩`, then `(|i⟩+|j⟩)/√2` and `(|i⟩+i|j⟩)/√2` for `i<j`.
pub fn spanning_pure_states(dim: usize) -> Result<Vec<PureState>> {
    check_dim(dim)?;
    let mut out: Vec<PureState> = (0..dim).map(|i| PureState::basis(dim, i)).collect::<Result<_>>()?;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..dim {
        for j in (i + 1)..dim {
            let mut plus = vec![c(0.0, 0.0); dim];
            plus[i] = c(h, 0.0);
            plus[j] = c(h, 0.0);
            out.push(PureState::new(plus)?);
            let mut plus_i = vec![c(0.0, 0.0); dim];
            plus_i[i] = c(h, 0.0);
            plus_i[j] = c(0.0, h);
            out.push(PureState::new(plus_i)?);
        }
    }
    Ok(out)
}

/// Named qubit kets used by the coherence, imaginarity and magic witnesses.
pub mod kets {
    use super::*;

    fn qubit(a: Complex64, b: Complex64) -> PureState {
        PureState::normalized(vec![a, b]).expect("nonzero qubit vector")
    }

    fn eigenvector(m: &ComplexMatrix, top: bool) -> PureState {
        let spec = spectral_decomposition(m, DEFAULT_SPECTRAL_HERMITIAN_TOL).expect("Hermitian");
        if top {
            spec[0].1.clone()
        } else {
            spec[spec.len() - 1].1.clone()
        }
    }

    fn sum_x_z() -> ComplexMatrix {
        (&pauli(Pauli::X) + &pauli(Pauli::Z)).scale(std::f64::consts::FRAC_1_SQRT_2)
    }

    fn diff_x_z() -> ComplexMatrix {
        (&pauli(Pauli::X) - &pauli(Pauli::Z)).scale(std::f64::consts::FRAC_1_SQRT_2)
    }

    pub fn zero() -> PureState {
        qubit(c(1.0, 0.0), c(0.0, 0.0))
    }
    pub fn one() -> PureState {
        qubit(c(0.0, 0.0), c(1.0, 0.0))
    }
    pub fn plus() -> PureState {
        qubit(c(1.0, 0.0), c(1.0, 0.0))
    }
    pub fn minus() -> PureState {
        qubit(c(1.0, 0.0), c(-1.0, 0.0))
    }
    /// `(|0⟩ + i|1⟩)/√2`
    pub fn plus_y() -> PureState {
        qubit(c(1.0, 0.0), c(0.0, 1.0))
    }
    /// `(|0⟩ − i|1⟩)/√2`
    pub fn minus_y() -> PureState {
        qubit(c(1.0, 0.0), c(0.0, -1.0))
    }
    /// +1 eigenvector of `(σx+σz)/√2`, i.e. `(cos π/8, sin π/8)`.
    pub fn bar_zero() -> PureState {
        eigenvector(&sum_x_z(), true)
    }
    /// −1 eigenvector of `(σx+σz)/√2`.
    pub fn bar_one() -> PureState {
        eigenvector(&sum_x_z(), false)
    }
    /// −1 eigenvector of `(σx−σz)/√2`, i.e. `(cos π/8, −sin π/8)`.
    ///
    /// This labeling (rather than +1) is the one for which the reference
    /// coherence realization reaches `3+√2`.
    pub fn bar_plus() -> PureState {
        eigenvector(&diff_x_z(), false)
    }
    /// +1 eigenvector of `(σx−σz)/√2`.
    pub fn bar_minus() -> PureState {
        eigenvector(&diff_x_z(), true)
    }
    /// `cos(π/8)|0⟩ + e^{iπ/4} sin(π/8)|1⟩`
    pub fn magic_t() -> PureState {
        let a = (PI / 8.0).cos();
        let b = Complex64::from_polar((PI / 8.0).sin(), PI / 4.0);
        qubit(c(a, 0.0), b)
    }
}

/// Eigenvalues of a Hermitian matrix, descending.
pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Vec<f64> {
    let eig = SymmetricEigen::new(m.hermitian_part().as_dmatrix().clone());
    let mut evs: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    evs.sort_by(|a, b| b.total_cmp(a));
    evs
}

/// Eigen-decomposition of a Hermitian matrix.
///
/// Eigenvalues come back in descending order with orthonormal eigenvectors,
/// each phase-fixed so its first non-negligible entry is real and positive.
pub fn spectral_decomposition(
    m: &ComplexMatrix,
    hermitian_tol: f64,
) -> Result<Vec<(f64, PureState)>> {
    let defect = m.hermiticity_defect();
    if defect > hermitian_tol {
        return Err(Error::ContractViolation(format!(
            "spectral decomposition needs a Hermitian matrix (defect {defect:.3e})"
        )));
    }
    let eig = SymmetricEigen::new(m.hermitian_part().as_dmatrix().clone());
    let d = m.dim();
    let mut pairs: Vec<(f64, PureState)> = (0..d)
        .map(|k| {
            let col: Vec<Complex64> = eig.eigenvectors.column(k).iter().copied().collect();
            let v = PureState::normalized(col).expect("eigenvector is nonzero");
            (eig.eigenvalues[k], v.with_phase_convention())
        })
        .collect();
    // stable: equal eigenvalues keep solver order
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    Ok(pairs)
}

/// Positive-semidefinite square root of a Hermitian PSD matrix.
pub(crate) fn psd_sqrt(m: &ComplexMatrix) -> ComplexMatrix {
    psd_power(m, 0.5)
}

/// `m^p` for Hermitian PSD `m`; eigenvalues below `1e-300` are treated as zero
/// (and stay zero for negative powers).
pub(crate) fn psd_power(m: &ComplexMatrix, p: f64) -> ComplexMatrix {
    let eig = SymmetricEigen::new(m.hermitian_part().as_dmatrix().clone());
    let d = m.dim();
    let mut out = DMatrix::<Complex64>::zeros(d, d);
    for k in 0..d {
        let lam = eig.eigenvalues[k].max(0.0);
        if lam <= 1e-300 {
            continue;
        }
        let f = lam.powf(p);
        let v = eig.eigenvectors.column(k);
        out += (v * v.adjoint()).map(|z| z * f);
    }
    ComplexMatrix::from_dmatrix(out).hermitian_part()
}
