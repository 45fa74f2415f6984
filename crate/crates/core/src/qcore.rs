//! Dense complex linear algebra for registers of up to four qubits.
//!
//! States are pure and stored as full amplitude vectors; operators are dense
//! `2^k x 2^k` matrices. Qubit 0 is the most significant bit of the basis
//! index, so for two parties `A` (qubit 0) and `B` (qubit 1) the ordering is
//! `|00>, |01>, |10>, |11>`.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type Matrix = DMatrix<Complex64>;

pub const MAX_QUBITS: usize = 4;

const NORM_TOL: f64 = 1e-12;
const HERMITIAN_TOL: f64 = 1e-12;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn qubits_for_dim(dim: usize) -> Result<usize> {
    if dim < 2 || !dim.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "dimension {dim} is not a power of two >= 2"
        )));
    }
    let k = dim.trailing_zeros() as usize;
    if k > MAX_QUBITS {
        return Err(Error::UnsupportedSize(k));
    }
    Ok(k)
}

/// Largest entrywise deviation of `m` from its conjugate transpose.
pub fn hermitian_defect(m: &Matrix) -> f64 {
    let mut worst = 0.0f64;
    for r in 0..m.nrows() {
        for col in 0..m.ncols() {
            worst = worst.max((m[(r, col)] - m[(col, r)].conj()).norm());
        }
    }
    worst
}

fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.adjoint()).scale(0.5)
}

/// Normalized pure state of a `k`-qubit register.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<Complex64>,
    num_qubits: usize,
}

impl StateVector {
    /// Wraps amplitudes that must already have unit norm.
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        let num_qubits = qubits_for_dim(amplitudes.len())?;
        let norm = l2_norm(&amplitudes);
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self { amplitudes, num_qubits })
    }

    /// Rescales arbitrary non-zero amplitudes to unit norm.
    pub fn normalized(mut amplitudes: Vec<Complex64>) -> Result<Self> {
        let num_qubits = qubits_for_dim(amplitudes.len())?;
        let norm = l2_norm(&amplitudes);
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::ZeroNorm);
        }
        amplitudes.iter_mut().for_each(|a| *a /= norm);
        Ok(Self { amplitudes, num_qubits })
    }

    pub fn basis(num_qubits: usize, index: usize) -> Result<Self> {
        if num_qubits == 0 || num_qubits > MAX_QUBITS {
            return Err(Error::UnsupportedSize(num_qubits));
        }
        let dim = 1 << num_qubits;
        if index >= dim {
            return Err(Error::InvalidArgument(format!(
                "basis index {index} out of range for dimension {dim}"
            )));
        }
        let mut amplitudes = vec![Complex64::default(); dim];
        amplitudes[index] = c(1.0, 0.0);
        Ok(Self { amplitudes, num_qubits })
    }

    /// Haar-random pure state (normalized complex Gaussian vector).
    pub fn random<R: Rng + ?Sized>(num_qubits: usize, rng: &mut R) -> Result<Self> {
        if num_qubits == 0 || num_qubits > MAX_QUBITS {
            return Err(Error::UnsupportedSize(num_qubits));
        }
        let amplitudes = (0..1usize << num_qubits)
            .map(|_| c(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        Self::normalized(amplitudes)
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.amplitudes)
    }

    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        check_dim(self.dim(), other.dim())?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `|<self|other>|`, equal to one when the states agree up to a global phase.
    pub fn fidelity_amplitude(&self, other: &StateVector) -> Result<f64> {
        Ok(self.inner(other)?.norm())
    }

    /// `<psi|O|psi>`; real because `O` is Hermitian.
    pub fn expectation(&self, op: &Observable) -> Result<f64> {
        check_dim(op.dim(), self.dim())?;
        Ok(quadratic_form(&self.amplitudes, &op.matrix, &self.amplitudes).re)
    }

    /// Applies a unitary and renormalizes away rounding drift.
    pub fn evolve(&self, unitary: &Matrix) -> Result<StateVector> {
        check_dim(unitary.nrows(), self.dim())?;
        let mut out = vec![Complex64::default(); self.dim()];
        mat_vec(unitary, &self.amplitudes, &mut out);
        Self::normalized(out)
    }

    pub(crate) fn from_normalized_unchecked(amplitudes: Vec<Complex64>, num_qubits: usize) -> Self {
        debug_assert!((l2_norm(&amplitudes) - 1.0).abs() < 1e-10);
        Self { amplitudes, num_qubits }
    }
}

pub(crate) fn l2_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// `out = m * v` for a column-major dense matrix.
pub(crate) fn mat_vec(m: &Matrix, v: &[Complex64], out: &mut [Complex64]) {
    let n = v.len();
    out.iter_mut().for_each(|o| *o = Complex64::default());
    let data = m.as_slice();
    for (col, &x) in v.iter().enumerate() {
        if x == Complex64::default() {
            continue;
        }
        let column = &data[col * n..(col + 1) * n];
        for (o, &a) in out.iter_mut().zip(column) {
            *o += a * x;
        }
    }
}

fn quadratic_form(bra: &[Complex64], m: &Matrix, ket: &[Complex64]) -> Complex64 {
    let mut tmp = vec![Complex64::default(); ket.len()];
    mat_vec(m, ket, &mut tmp);
    bra.iter().zip(&tmp).map(|(a, b)| a.conj() * b).sum()
}

/// Location of one qubit inside a register.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Subsystem {
    pub qubit: usize,
    pub num_qubits: usize,
}

impl Subsystem {
    /// Party A of a two-qubit register.
    pub const A: Subsystem = Subsystem { qubit: 0, num_qubits: 2 };
    /// Party B of a two-qubit register.
    pub const B: Subsystem = Subsystem { qubit: 1, num_qubits: 2 };
    /// The only qubit of a single-qubit register.
    pub const SINGLE: Subsystem = Subsystem { qubit: 0, num_qubits: 1 };

    pub fn new(qubit: usize, num_qubits: usize) -> Result<Self> {
        if num_qubits == 0 || num_qubits > MAX_QUBITS {
            return Err(Error::UnsupportedSize(num_qubits));
        }
        if qubit >= num_qubits {
            return Err(Error::InvalidSubsystem { qubit, num_qubits });
        }
        Ok(Self { qubit, num_qubits })
    }

    fn validate(self) -> Result<Self> {
        Self::new(self.qubit, self.num_qubits)
    }
}

pub fn pauli_x() -> Matrix {
    Matrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)])
}

pub fn pauli_y() -> Matrix {
    Matrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)])
}

pub fn pauli_z() -> Matrix {
    Matrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)])
}

pub fn identity(dim: usize) -> Matrix {
    Matrix::identity(dim, dim)
}

/// Kronecker-embeds a single-qubit operator on `target`, identity elsewhere.
pub fn embed(local: &Matrix, target: Subsystem) -> Result<Matrix> {
    let target = target.validate()?;
    check_dim(2, local.nrows())?;
    check_dim(2, local.ncols())?;
    let mut out = Matrix::identity(1, 1);
    for q in 0..target.num_qubits {
        out = if q == target.qubit {
            out.kronecker(local)
        } else {
            out.kronecker(&identity(2))
        };
    }
    Ok(out)
}

/// Hermitian operator on the full register, with a display label.
#[derive(Clone, Debug, PartialEq)]
pub struct Observable {
    matrix: Matrix,
    label: String,
}

impl Observable {
    pub fn new(matrix: Matrix, label: impl Into<String>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), found: matrix.ncols() });
        }
        qubits_for_dim(matrix.nrows())?;
        let defect = hermitian_defect(&matrix);
        if defect > HERMITIAN_TOL {
            return Err(Error::NotHermitian(defect));
        }
        Ok(Self { matrix, label: label.into() })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn num_qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// True when `O^2 = I` within `tol`.
    pub fn is_involution(&self, tol: f64) -> bool {
        let sq = &self.matrix * &self.matrix;
        (sq - identity(self.dim())).iter().all(|e| e.norm() <= tol)
    }

    pub fn commutes_with(&self, other: &Observable, tol: f64) -> bool {
        if self.dim() != other.dim() {
            return false;
        }
        let comm = &self.matrix * &other.matrix - &other.matrix * &self.matrix;
        comm.iter().all(|e| e.norm() <= tol)
    }
}

/// `sin(theta) sigma_x + cos(theta) sigma_z` on `target`.
///
/// `theta = 0` is `sigma_z`, `theta = pi/2` is `sigma_x`.
pub fn spin_observable(theta: f64, target: Subsystem) -> Result<Observable> {
    if !theta.is_finite() {
        return Err(Error::InvalidArgument(format!("angle must be finite, got {theta}")));
    }
    let local = pauli_x().scale(theta.sin()) + pauli_z().scale(theta.cos());
    let matrix = embed(&local, target)?;
    Observable::new(matrix, format!("spin({theta})@q{}", target.qubit))
}

/// `n . sigma` for a unit Bloch vector `n` (normalized here).
pub fn spin_along(direction: [f64; 3], target: Subsystem) -> Result<Observable> {
    let len = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(len.is_finite() && len > 0.0) {
        return Err(Error::InvalidArgument("spin direction must be a non-zero finite vector".into()));
    }
    let [nx, ny, nz] = direction.map(|x| x / len);
    let local = pauli_x().scale(nx) + pauli_y().scale(ny) + pauli_z().scale(nz);
    let matrix = embed(&local, target)?;
    Observable::new(symmetrize(&matrix), format!("spin[{nx:.4},{ny:.4},{nz:.4}]@q{}", target.qubit))
}

/// Free Hamiltonian `H0` on the full register (hbar = 1).
#[derive(Clone, Debug, PartialEq)]
pub struct Hamiltonian {
    matrix: Matrix,
}

impl Hamiltonian {
    pub fn new(matrix: Matrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), found: matrix.ncols() });
        }
        qubits_for_dim(matrix.nrows())?;
        let defect = hermitian_defect(&matrix);
        if defect > HERMITIAN_TOL {
            return Err(Error::NotHermitian(defect));
        }
        Ok(Self { matrix })
    }

    pub fn zero(num_qubits: usize) -> Result<Self> {
        if num_qubits == 0 || num_qubits > MAX_QUBITS {
            return Err(Error::UnsupportedSize(num_qubits));
        }
        let dim = 1 << num_qubits;
        Ok(Self { matrix: Matrix::zeros(dim, dim) })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_zero(&self) -> bool {
        self.matrix.iter().all(|e| *e == Complex64::default())
    }

    /// `exp(-i H t)` through the Hermitian eigendecomposition `H = V D V^dagger`.
    pub fn propagator(&self, t: f64) -> Matrix {
        let dim = self.dim();
        if self.is_zero() || t == 0.0 {
            return identity(dim);
        }
        let eig = SymmetricEigen::new(symmetrize(&self.matrix));
        let phases = Matrix::from_diagonal(&nalgebra::DVector::from_iterator(
            dim,
            eig.eigenvalues.iter().map(|&e| Complex64::from_polar(1.0, -e * t)),
        ));
        &eig.eigenvectors * phases * eig.eigenvectors.adjoint()
    }
}

/// Heisenberg-picture operator `U^dagger(t) O U(t)` with `U(t) = exp(-i H0 t)`.
pub fn heisenberg(op: &Observable, h0: &Hamiltonian, t: f64) -> Result<Observable> {
    check_dim(op.dim(), h0.dim())?;
    if !t.is_finite() {
        return Err(Error::InvalidArgument(format!("time must be finite, got {t}")));
    }
    let u = h0.propagator(t);
    let evolved = symmetrize(&(u.adjoint() * op.matrix() * &u));
    Observable::new(evolved, format!("{}(t={t})", op.label()))
}

/// `Re <psi| O_i O_j |psi>`.
pub fn two_time_corr(psi: &StateVector, oi: &Observable, oj: &Observable) -> Result<f64> {
    check_dim(oi.dim(), psi.dim())?;
    check_dim(oj.dim(), psi.dim())?;
    let product = oi.matrix() * oj.matrix();
    Ok(quadratic_form(psi.amplitudes(), &product, psi.amplitudes()).re)
}

/// `(|00> + |11>) / sqrt 2`.
pub fn epr_state() -> StateVector {
    let s = c(FRAC_1_SQRT_2, 0.0);
    let z = Complex64::default();
    StateVector::from_normalized_unchecked(vec![s, z, z, s], 2)
}

/// The four CHSH observables that saturate `2 sqrt 2` on the EPR state:
/// `A: (sigma_x, sigma_z)`, `B: (sigma_{pi/4}, sigma_{3pi/4})`.
pub fn chsh_observables() -> ([Observable; 2], [Observable; 2]) {
    let spin = |theta: f64, target, label: &str| {
        spin_observable(theta, target)
            .expect("fixed two-qubit subsystem")
            .with_label(label)
    };
    (
        [spin(FRAC_PI_2, Subsystem::A, "A:sx"), spin(0.0, Subsystem::A, "A:sz")],
        [
            spin(FRAC_PI_4, Subsystem::B, "B:s(pi/4)"),
            spin(3.0 * FRAC_PI_4, Subsystem::B, "B:s(3pi/4)"),
        ],
    )
}

/// `|E11 + E12 + E21 - E22|` for correlations ordered (1,1), (1,2), (2,1), (2,2).
pub fn chsh_value(correlations: [f64; 4]) -> f64 {
    chsh_signed(correlations).abs()
}

pub fn chsh_signed([e11, e12, e21, e22]: [f64; 4]) -> f64 {
    e11 + e12 + e21 - e22
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
        (a - b).iter().map(|e| e.norm()).fold(0.0, f64::max)
    }

    // Truncated Taylor series for exp(-i H t); independent of the eigen path.
    fn taylor_propagator(h: &Matrix, t: f64) -> Matrix {
        let dim = h.nrows();
        let step = h.scale(t) * c(0.0, -1.0);
        let mut term = identity(dim);
        let mut sum = identity(dim);
        for k in 1..60 {
            term = &term * &step / c(k as f64, 0.0);
            sum += &term;
        }
        sum
    }

    #[test]
    fn epr_amplitudes_and_norm() {
        let psi = epr_state();
        let a = psi.amplitudes();
        assert_eq!(a[0].re, FRAC_1_SQRT_2);
        assert_eq!(a[3].re, FRAC_1_SQRT_2);
        assert_eq!(a[1], Complex64::default());
        assert_eq!(a[2], Complex64::default());
        assert!((psi.norm() - 1.0).abs() < 1e-15);
        let zz = Observable::new(embed(&pauli_z(), Subsystem::A).unwrap() * embed(&pauli_z(), Subsystem::B).unwrap(), "zz").unwrap();
        assert!((psi.expectation(&zz).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn spin_observable_anchors() {
        let z_a = spin_observable(0.0, Subsystem::A).unwrap();
        assert!(max_abs_diff(z_a.matrix(), &pauli_z().kronecker(&identity(2))) < 1e-15);

        let b1 = spin_observable(PI / 4.0, Subsystem::B).unwrap();
        let want = identity(2).kronecker(&((pauli_x() + pauli_z()).scale(1.0 / SQRT_2)));
        assert!(max_abs_diff(b1.matrix(), &want) < 1e-15);

        let b2 = spin_observable(3.0 * PI / 4.0, Subsystem::B).unwrap();
        let want = identity(2).kronecker(&((pauli_x() - pauli_z()).scale(1.0 / SQRT_2)));
        assert!(max_abs_diff(b2.matrix(), &want) < 1e-15);
    }

    #[test]
    fn spin_observable_rejects_bad_subsystem() {
        let err = spin_observable(0.3, Subsystem { qubit: 2, num_qubits: 2 }).unwrap_err();
        assert_eq!(err, Error::InvalidSubsystem { qubit: 2, num_qubits: 2 });
        assert!(spin_observable(f64::NAN, Subsystem::A).is_err());
    }

    #[test]
    fn state_validation() {
        assert!(matches!(
            StateVector::new(vec![c(1.0, 0.0), c(1.0, 0.0)]),
            Err(Error::NotNormalized(_))
        ));
        assert!(StateVector::new(vec![c(1.0, 0.0); 3]).is_err());
        assert_eq!(StateVector::normalized(vec![Complex64::default(); 2]), Err(Error::ZeroNorm));
        assert_eq!(StateVector::basis(5, 0), Err(Error::UnsupportedSize(5)));
    }

    #[test]
    fn observable_rejects_non_hermitian() {
        let m = Matrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(matches!(Observable::new(m, "bad"), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn heisenberg_trivial_evolution() {
        let sz = spin_observable(0.0, Subsystem::SINGLE).unwrap();
        let h0 = Hamiltonian::zero(1).unwrap();
        let out = heisenberg(&sz, &h0, 12.3).unwrap();
        assert!(max_abs_diff(out.matrix(), sz.matrix()) < 1e-15);
    }

    #[test]
    fn heisenberg_matches_taylor_oracle() {
        let omega = 1.7;
        let h = pauli_y().scale(omega / 2.0);
        let h0 = Hamiltonian::new(h.clone()).unwrap();
        let sz = spin_observable(0.0, Subsystem::SINGLE).unwrap();
        let t = PI / (2.0 * omega);
        let out = heisenberg(&sz, &h0, t).unwrap();

        let u = taylor_propagator(&h, t);
        let oracle = u.adjoint() * sz.matrix() * &u;
        assert!(max_abs_diff(out.matrix(), &oracle) < 1e-12);
        // Rotation by pi/2 about y turns sigma_z into -sigma_x under this sign convention.
        assert!(max_abs_diff(out.matrix(), &pauli_x().scale(-1.0)) < 1e-12);
        assert!(hermitian_defect(out.matrix()) < 1e-10);
    }

    #[test]
    fn heisenberg_dimension_mismatch() {
        let sz = spin_observable(0.0, Subsystem::SINGLE).unwrap();
        let h0 = Hamiltonian::zero(2).unwrap();
        assert_eq!(
            heisenberg(&sz, &h0, 1.0),
            Err(Error::DimensionMismatch { expected: 2, found: 4 })
        );
    }

    #[test]
    fn heisenberg_preserves_spectrum_on_random_hamiltonians() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let raw = Matrix::from_fn(4, 4, |_, _| c(rng.sample(StandardNormal), rng.sample(StandardNormal)));
            let h0 = Hamiltonian::new(symmetrize(&raw)).unwrap();
            let op = spin_along([rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)], Subsystem::A).unwrap();
            let t: f64 = rng.random_range(-3.0..3.0);
            let out = heisenberg(&op, &h0, t).unwrap();
            let oracle = {
                let u = taylor_propagator(h0.matrix(), t);
                u.adjoint() * op.matrix() * &u
            };
            assert!(max_abs_diff(out.matrix(), &oracle) < 1e-9);
            let mut before: Vec<f64> = SymmetricEigen::new(op.matrix().clone()).eigenvalues.iter().copied().collect();
            let mut after: Vec<f64> = SymmetricEigen::new(out.matrix().clone()).eigenvalues.iter().copied().collect();
            before.sort_by(f64::total_cmp);
            after.sort_by(f64::total_cmp);
            for (x, y) in before.iter().zip(&after) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn two_time_corr_examples() {
        let psi = epr_state();
        let ([a1, a2], [b1, b2]) = chsh_observables();
        assert!((two_time_corr(&psi, &a1, &b1).unwrap() - FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((two_time_corr(&psi, &a2, &b2).unwrap() + FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((two_time_corr(&psi, &a1, &a1).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn epr_chsh_reaches_tsirelson_bound() {
        let psi = epr_state();
        let ([a1, a2], [b1, b2]) = chsh_observables();
        let e = [
            two_time_corr(&psi, &a1, &b1).unwrap(),
            two_time_corr(&psi, &a1, &b2).unwrap(),
            two_time_corr(&psi, &a2, &b1).unwrap(),
            two_time_corr(&psi, &a2, &b2).unwrap(),
        ];
        assert!((chsh_value(e) - 2.0 * SQRT_2).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn spin_observable_is_involution(theta in -10.0f64..10.0, qubit in 0usize..2) {
            let o = spin_observable(theta, Subsystem::new(qubit, 2).unwrap()).unwrap();
            prop_assert!(o.is_involution(1e-12));
            prop_assert!(hermitian_defect(o.matrix()) < 1e-12);
        }

        #[test]
        fn cross_party_correlation_is_symmetric(seed in any::<u64>(), ta in -4.0f64..4.0, tb in -4.0f64..4.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let psi = StateVector::random(2, &mut rng).unwrap();
            let oa = spin_observable(ta, Subsystem::A).unwrap();
            let ob = spin_observable(tb, Subsystem::B).unwrap();
            let ab = two_time_corr(&psi, &oa, &ob).unwrap();
            let ba = two_time_corr(&psi, &ob, &oa).unwrap();
            prop_assert!((ab - ba).abs() < 1e-12);
        }
    }
}
