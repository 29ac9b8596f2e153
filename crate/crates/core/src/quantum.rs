//! Pure states, Hermitian generators, exact propagators and projectors for
//! Hilbert spaces of dimension 2 to 5.
//!
//! The two-level basis is ordered `[|↓⟩, |↑⟩]` and `σ_z|↓⟩ = −|↓⟩`, so that
//! `⟨↓|n·σ|↓⟩ = −n_z`. With this convention the dynamical phase of a full
//! precession about `n = (sinθ, 0, cosθ)` is `π(cosθ − ε/ω)`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub const MIN_DIM: usize = 2;
pub const MAX_DIM: usize = 5;

/// Tolerance used for hermiticity, idempotency and unit-axis checks.
pub const EXACT_TOL: f64 = 1e-12;
/// Tolerance for unitarity of numerically assembled propagators.
pub const UNITARY_TOL: f64 = 1e-10;

pub const DOWN: usize = 0;
pub const UP: usize = 1;

const I: C64 = C64::new(0.0, 1.0);
const ONE: C64 = C64::new(1.0, 0.0);
const ZERO: C64 = C64::new(0.0, 0.0);

/// Complex amplitude vector over a labelled basis. The norm may shrink below
/// one after lossy projections but never exceeds it.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amps: DVector<C64>,
    labels: Arc<[String]>,
}

impl StateVector {
    pub fn new(amps: Vec<C64>, labels: Vec<String>) -> Result<Self> {
        check_dim(amps.len())?;
        if labels.len() != amps.len() {
            return Err(Error::DimensionMismatch {
                expected: amps.len(),
                found: labels.len(),
            });
        }
        let amps = DVector::from_vec(amps);
        let norm = amps.norm_squared();
        if !norm.is_finite() || norm > 1.0 + EXACT_TOL {
            return Err(Error::domain(format!("state norm² {norm} exceeds 1")));
        }
        Ok(Self {
            amps,
            labels: labels.into(),
        })
    }

    /// Basis state `index` over the given labels.
    pub fn basis(labels: &[&str], index: usize) -> Result<Self> {
        check_dim(labels.len())?;
        if index >= labels.len() {
            return Err(Error::domain(format!(
                "basis index {index} out of range for dimension {}",
                labels.len()
            )));
        }
        let mut amps = vec![ZERO; labels.len()];
        amps[index] = ONE;
        Self::new(amps, labels.iter().map(|s| s.to_string()).collect())
    }

    /// `|↓⟩ = |1,0⟩` of the two-level system.
    pub fn down() -> Self {
        Self::basis(&TWO_LEVEL_LABELS, DOWN).expect("static two-level basis")
    }

    /// `|↑⟩ = |2,0⟩` of the two-level system.
    pub fn up() -> Self {
        Self::basis(&TWO_LEVEL_LABELS, UP).expect("static two-level basis")
    }

    /// Two-level state `a|↓⟩ + b|↑⟩`.
    pub fn two_level(down: C64, up: C64) -> Result<Self> {
        Self::new(vec![down, up], TWO_LEVEL_LABELS.iter().map(|s| s.to_string()).collect())
    }

    pub(crate) fn from_parts(amps: DVector<C64>, labels: Arc<[String]>) -> Self {
        debug_assert_eq!(amps.len(), labels.len());
        Self { amps, labels }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &DVector<C64> {
        &self.amps
    }

    pub fn amplitude(&self, index: usize) -> C64 {
        self.amps[index]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.norm_squared()
    }

    pub fn population(&self, index: usize) -> f64 {
        self.amps[index].norm_sqr()
    }

    /// Multiply every amplitude by a global factor.
    pub fn scaled(&self, factor: C64) -> Self {
        Self::from_parts(&self.amps * factor, self.labels.clone())
    }

    pub(crate) fn with_amps(&self, amps: DVector<C64>) -> Self {
        Self::from_parts(amps, self.labels.clone())
    }
}

pub const TWO_LEVEL_LABELS: [&str; 2] = ["1,0", "2,0"];

fn check_dim(dim: usize) -> Result<()> {
    if (MIN_DIM..=MAX_DIM).contains(&dim) {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "dimension {dim} outside supported range {MIN_DIM}..={MAX_DIM}"
        )))
    }
}

fn check_square(m: &DMatrix<C64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::domain(format!(
            "operator must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    check_dim(m.nrows())
}

fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest elementwise deviation `‖M − M†‖_max`.
pub fn hermiticity_defect(m: &DMatrix<C64>) -> f64 {
    max_abs(&(m - m.adjoint()))
}

/// Largest elementwise deviation `‖U†U − 𝟙‖_max`.
pub fn unitarity_defect(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    max_abs(&(m.adjoint() * m - DMatrix::<C64>::identity(n, n)))
}

/// Any square matrix that can act on a [`StateVector`].
pub trait LinearOperator {
    fn matrix(&self) -> &DMatrix<C64>;

    fn dim(&self) -> usize {
        self.matrix().nrows()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    matrix: DMatrix<C64>,
}

impl HermitianOperator {
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        check_square(&matrix)?;
        let defect = hermiticity_defect(&matrix);
        if defect >= EXACT_TOL {
            return Err(Error::domain(format!(
                "operator is not Hermitian (‖M − M†‖ = {defect:e})"
            )));
        }
        Ok(Self { matrix })
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            matrix: DMatrix::zeros(dim, dim),
        })
    }

    /// `H = ω n·σ/2 + ε 𝟙/2` with angular frequencies in rad/s.
    pub fn two_level(axis: [f64; 3], omega: f64, epsilon: f64) -> Result<Self> {
        check_axis(axis)?;
        let n_sigma = axis_dot_sigma(axis);
        let matrix = n_sigma * C64::from(omega / 2.0) + identity(2) * C64::from(epsilon / 2.0);
        Self::new(matrix)
    }

    /// Expectation value `⟨ψ|H|ψ⟩ / ⟨ψ|ψ⟩`.
    pub fn expectation(&self, psi: &StateVector) -> Result<f64> {
        check_match(self.dim(), psi.dim())?;
        let amps = psi.amps();
        let num = amps.dotc(&(&self.matrix * amps));
        Ok(num.re / psi.norm_sqr())
    }

    /// Element `(row, col)`.
    pub fn element(&self, row: usize, col: usize) -> C64 {
        self.matrix[(row, col)]
    }
}

impl LinearOperator for HermitianOperator {
    fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryOperator {
    matrix: DMatrix<C64>,
}

impl UnitaryOperator {
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        check_square(&matrix)?;
        let defect = unitarity_defect(&matrix);
        if defect >= UNITARY_TOL {
            return Err(Error::domain(format!(
                "operator is not unitary (‖U†U − 𝟙‖ = {defect:e})"
            )));
        }
        Ok(Self { matrix })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self { matrix: identity(dim) })
    }

    /// `self · other`: apply `other` first.
    pub fn then_after(&self, other: &UnitaryOperator) -> UnitaryOperator {
        UnitaryOperator {
            matrix: &self.matrix * &other.matrix,
        }
    }

    pub fn adjoint(&self) -> UnitaryOperator {
        UnitaryOperator {
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn element(&self, row: usize, col: usize) -> C64 {
        self.matrix[(row, col)]
    }
}

impl LinearOperator for UnitaryOperator {
    fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }
}

/// Orthogonal projector, `P² = P = P†`.
#[derive(Clone, Debug, PartialEq)]
pub struct Projector {
    matrix: DMatrix<C64>,
}

impl Projector {
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        check_square(&matrix)?;
        let herm = hermiticity_defect(&matrix);
        let idem = max_abs(&(&matrix * &matrix - &matrix));
        if herm >= EXACT_TOL || idem >= EXACT_TOL {
            return Err(Error::domain(format!(
                "not an orthogonal projector (hermiticity {herm:e}, idempotency {idem:e})"
            )));
        }
        Ok(Self { matrix })
    }

    /// `|ψ⟩⟨ψ|/⟨ψ|ψ⟩`.
    pub fn onto(psi: &StateVector) -> Result<Self> {
        let norm = psi.norm_sqr();
        if norm <= 0.0 {
            return Err(Error::domain("cannot project onto the zero state"));
        }
        let v = psi.amps();
        let matrix = v * v.adjoint() / C64::from(norm);
        Ok(Self { matrix })
    }

    /// Projector onto the span of the listed basis levels.
    pub fn onto_levels(dim: usize, levels: &[usize]) -> Result<Self> {
        check_dim(dim)?;
        let mut matrix = DMatrix::zeros(dim, dim);
        for &l in levels {
            if l >= dim {
                return Err(Error::domain(format!("level {l} out of range for dimension {dim}")));
            }
            matrix[(l, l)] = ONE;
        }
        Ok(Self { matrix })
    }

    /// Projector removing a single basis level (`𝟙 − |l⟩⟨l|`).
    pub fn removing_level(dim: usize, level: usize) -> Result<Self> {
        let keep: Vec<usize> = (0..dim).filter(|&l| l != level).collect();
        if level >= dim {
            return Err(Error::domain(format!("level {level} out of range for dimension {dim}")));
        }
        Self::onto_levels(dim, &keep)
    }
}

impl LinearOperator for Projector {
    fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }
}

/// General (possibly non-unitary) linear map; used for lossy measurement
/// pulses and compositions of unitaries with projectors.
#[derive(Clone, Debug, PartialEq)]
pub struct Propagator {
    matrix: DMatrix<C64>,
}

impl Propagator {
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        check_square(&matrix)?;
        Ok(Self { matrix })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self { matrix: identity(dim) })
    }

    /// `self · other`: apply `other` first.
    pub fn then_after<O: LinearOperator>(&self, other: &O) -> Propagator {
        Propagator {
            matrix: &self.matrix * other.matrix(),
        }
    }
}

impl LinearOperator for Propagator {
    fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }
}

impl From<UnitaryOperator> for Propagator {
    fn from(u: UnitaryOperator) -> Self {
        Propagator { matrix: u.matrix }
    }
}

impl From<Projector> for Propagator {
    fn from(p: Projector) -> Self {
        Propagator { matrix: p.matrix }
    }
}

pub fn identity(dim: usize) -> DMatrix<C64> {
    DMatrix::identity(dim, dim)
}

/// Pauli σ_x in the `[|↓⟩, |↑⟩]` basis.
pub fn sigma_x() -> DMatrix<C64> {
    DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

/// Pauli σ_y in the `[|↓⟩, |↑⟩]` basis (`σ_xσ_y = iσ_z`).
pub fn sigma_y() -> DMatrix<C64> {
    DMatrix::from_row_slice(2, 2, &[ZERO, I, -I, ZERO])
}

/// Pauli σ_z in the `[|↓⟩, |↑⟩]` basis: `diag(−1, +1)`.
pub fn sigma_z() -> DMatrix<C64> {
    DMatrix::from_row_slice(2, 2, &[-ONE, ZERO, ZERO, ONE])
}

fn axis_dot_sigma(n: [f64; 3]) -> DMatrix<C64> {
    sigma_x() * C64::from(n[0]) + sigma_y() * C64::from(n[1]) + sigma_z() * C64::from(n[2])
}

fn check_axis(n: [f64; 3]) -> Result<()> {
    let norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
    if !norm.is_finite() || (norm - 1.0).abs() > EXACT_TOL {
        return Err(Error::domain(format!(
            "rotation axis must be a unit vector, |n| = {norm}"
        )));
    }
    Ok(())
}

fn check_match(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// Closed-form spin-½ propagator
/// `e^{−iεt/2}[cos(ωt/2)𝟙 − i sin(ωt/2) n·σ]` for `H = ω n·σ/2 + ε𝟙/2`.
pub fn su2_propagator(axis: [f64; 3], omega: f64, epsilon: f64, t: f64) -> Result<UnitaryOperator> {
    check_axis(axis)?;
    if !(omega >= 0.0) {
        return Err(Error::domain(format!("omega must be non-negative, got {omega}")));
    }
    let half = omega * t / 2.0;
    let global = C64::from_polar(1.0, -epsilon * t / 2.0);
    let matrix = (identity(2) * C64::from(half.cos()) - axis_dot_sigma(axis) * (I * half.sin())) * global;
    Ok(UnitaryOperator { matrix })
}

/// `U = e^{−iHt}` through the eigendecomposition of `H`.
pub fn expm_hermitian(h: &HermitianOperator, t: f64) -> UnitaryOperator {
    let m = &h.matrix;
    let n = m.nrows();
    let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || m[(i, j)] == ZERO));
    if diagonal {
        let phases = m.diagonal().map(|e| C64::from_polar(1.0, -e.re * t));
        return UnitaryOperator {
            matrix: DMatrix::from_diagonal(&phases),
        };
    }
    let eig = h.matrix.clone().symmetric_eigen();
    let phases = DMatrix::from_diagonal(&eig.eigenvalues.map(|e| C64::from_polar(1.0, -e * t)));
    let v = &eig.eigenvectors;
    UnitaryOperator {
        matrix: v * phases * v.adjoint(),
    }
}

/// `e^{−iMt}` for a general (non-Hermitian) generator.
pub fn expm_generator(m: &DMatrix<C64>, t: f64) -> Result<Propagator> {
    check_square(m)?;
    let scaled = m * C64::new(0.0, -t);
    Ok(Propagator { matrix: scaled.exp() })
}

pub fn apply<O: LinearOperator + ?Sized>(op: &O, psi: &StateVector) -> Result<StateVector> {
    check_match(op.dim(), psi.dim())?;
    Ok(psi.with_amps(op.matrix() * psi.amps()))
}

/// `⟨a|b⟩`, conjugate-linear in `a`.
pub fn overlap(a: &StateVector, b: &StateVector) -> Result<C64> {
    check_match(a.dim(), b.dim())?;
    Ok(a.amps().dotc(b.amps()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// Truncated power series for `e^{−iHt}`, independent of both the
    /// closed form and the eigendecomposition route.
    fn series_exp(h: &DMatrix<C64>, t: f64, terms: usize) -> DMatrix<C64> {
        let n = h.nrows();
        let a = h * C64::new(0.0, -t);
        let mut term = DMatrix::<C64>::identity(n, n);
        let mut sum = term.clone();
        for k in 1..terms {
            term = &term * &a / C64::from(k as f64);
            sum += &term;
        }
        sum
    }

    fn close(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
        max_abs(&(a - b))
    }

    #[test]
    fn propagator_at_zero_time_is_identity() {
        let u = su2_propagator([0.0, 0.0, 1.0], 3.7, 0.0, 0.0).unwrap();
        assert!(close(u.matrix(), &identity(2)) < 1e-15);
    }

    #[test]
    fn full_period_is_global_phase() {
        let omega = 2.0 * PI * 43_453.0;
        let eps = 0.37 * omega;
        let theta: f64 = 1.1937;
        let n = [theta.sin(), 0.0, theta.cos()];
        let u = su2_propagator(n, omega, eps, 2.0 * PI / omega).unwrap();
        let expected = identity(2) * C64::from_polar(1.0, -PI * (1.0 + eps / omega));
        assert!(close(u.matrix(), &expected) < 1e-12);
    }

    #[test]
    fn half_period_about_x_is_minus_i_sigma_x() {
        let omega = 5.0;
        let u = su2_propagator([1.0, 0.0, 0.0], omega, 0.0, PI / omega).unwrap();
        let h = HermitianOperator::two_level([1.0, 0.0, 0.0], omega, 0.0).unwrap();
        let oracle = series_exp(h.matrix(), PI / omega, 40);
        assert!(close(u.matrix(), &oracle) < 1e-12);
        assert!(close(u.matrix(), &(sigma_x() * -I)) < 1e-12);
    }

    #[test]
    fn non_unit_axis_is_rejected() {
        assert!(matches!(
            su2_propagator([1.0, 1.0, 0.0], 1.0, 0.0, 1.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn expm_of_zero_is_identity() {
        let h = HermitianOperator::zeros(4).unwrap();
        let u = expm_hermitian(&h, 12.3);
        assert!(close(u.matrix(), &identity(4)) < 1e-15);
    }

    #[test]
    fn spin_half_two_pi_rotation_is_minus_identity() {
        let omega = 2.0;
        let h = HermitianOperator::new(sigma_z() * C64::from(omega / 2.0)).unwrap();
        let u = expm_hermitian(&h, 2.0 * PI / omega);
        assert!(close(u.matrix(), &(identity(2) * -ONE)) < 1e-12);
    }

    #[test]
    fn expm_matches_series_for_random_hermitian() {
        // fixed pseudo-random Hermitian 4x4
        let vals = [
            0.31, -0.72, 0.55, 0.18, 0.93, -0.41, 0.27, 0.66, -0.12, 0.84, -0.57, 0.39, 0.05, -0.88, 0.71, -0.26,
        ];
        let mut m = DMatrix::<C64>::zeros(4, 4);
        let mut k = 0;
        for r in 0..4 {
            m[(r, r)] = C64::from(vals[k] * 2.0);
            k += 1;
            for c in (r + 1)..4 {
                let z = C64::new(vals[k % 16], vals[(k + 7) % 16]);
                m[(r, c)] = z;
                m[(c, r)] = z.conj();
                k += 1;
            }
        }
        let h = HermitianOperator::new(m.clone()).unwrap();
        let u = expm_hermitian(&h, 0.37);
        assert!(unitarity_defect(u.matrix()) < 1e-10);
        assert!(close(u.matrix(), &series_exp(&m, 0.37, 40)) < 1e-10);
    }

    #[test]
    fn non_hermitian_input_is_rejected() {
        let mut m = sigma_x();
        m[(0, 1)] = C64::new(1.0, 0.5);
        assert!(matches!(HermitianOperator::new(m), Err(Error::Domain(_))));
    }

    #[test]
    fn apply_identity_and_projection() {
        let s = 1.0 / 2f64.sqrt();
        let psi = StateVector::two_level(C64::from(s), C64::from(s)).unwrap();
        let id = UnitaryOperator::identity(2).unwrap();
        assert_eq!(apply(&id, &psi).unwrap(), psi);

        let p = Projector::onto(&StateVector::down()).unwrap();
        let out = apply(&p, &psi).unwrap();
        assert!((out.amplitude(DOWN) - C64::from(s)).norm() < 1e-15);
        assert!(out.amplitude(UP).norm() < 1e-15);
        assert!((out.norm_sqr() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn quarter_period_about_x_splits_population() {
        let omega = 3.0;
        let u = su2_propagator([1.0, 0.0, 0.0], omega, 0.0, PI / (2.0 * omega)).unwrap();
        let h = HermitianOperator::two_level([1.0, 0.0, 0.0], omega, 0.0).unwrap();
        let oracle = series_exp(h.matrix(), PI / (2.0 * omega), 40);
        assert!(close(u.matrix(), &oracle) < 1e-12);
        let out = apply(&u, &StateVector::down()).unwrap();
        assert!((out.population(DOWN) - 0.5).abs() < 1e-12);
        assert!((out.population(UP) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let u = UnitaryOperator::identity(3).unwrap();
        assert!(matches!(
            apply(&u, &StateVector::down()),
            Err(Error::DimensionMismatch { expected: 3, found: 2 })
        ));
        let psi3 = StateVector::basis(&["a", "b", "c"], 0).unwrap();
        assert!(overlap(&psi3, &StateVector::down()).is_err());
    }

    #[test]
    fn overlap_examples() {
        let down = StateVector::down();
        assert!((overlap(&down, &down).unwrap() - ONE).norm() < 1e-15);
        assert!(overlap(&down, &StateVector::up()).unwrap().norm() < 1e-15);

        // ⟨↓|U(δt)|↓⟩ with δt = 2π/(Nω), ε = 0 is cos(π/N) + i cosθ sin(π/N);
        // its conjugate is the per-step factor of the projective product.
        let theta: f64 = 1.1937;
        let omega = 2.0 * PI * 43_453.0;
        let n_steps = 7.0;
        let u = su2_propagator(
            [theta.sin(), 0.0, theta.cos()],
            omega,
            0.0,
            2.0 * PI / (n_steps * omega),
        )
        .unwrap();
        let evolved = apply(&u, &down).unwrap();
        let ov = overlap(&evolved, &down).unwrap();
        let expected = C64::new((PI / n_steps).cos(), -theta.cos() * (PI / n_steps).sin());
        assert!((ov - expected).norm() < 1e-12);
    }

    #[test]
    fn state_validation() {
        assert!(StateVector::new(vec![ONE; 6], vec!["x".into(); 6]).is_err());
        assert!(StateVector::new(vec![ONE, ONE], vec!["a".into(), "b".into()]).is_err());
        assert!(StateVector::new(vec![ONE, ZERO], vec!["a".into()]).is_err());
        assert!(Projector::new(sigma_x()).is_err());
    }

    #[test]
    fn decay_generator_damps_lossy_level() {
        let mut m = DMatrix::<C64>::zeros(2, 2);
        m[(UP, UP)] = C64::new(0.0, -0.5 * 4.0);
        let p = expm_generator(&m, 1.5).unwrap();
        assert!((p.matrix()[(UP, UP)].re - (-3.0f64).exp()).abs() < 1e-14);
        assert!((p.matrix()[(DOWN, DOWN)] - ONE).norm() < 1e-14);
    }
}
