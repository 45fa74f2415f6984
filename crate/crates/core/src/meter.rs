//! Gaussian-pointer von Neumann measurements.
//!
//! An impulsive coupling `p O` between a system and a pointer prepared in
//! `phi(q) = (eps / 2pi)^{1/4} exp(-eps q^2 / 4)` (with `eps = 1 / sigma^2`)
//! shifts the pointer by each eigenvalue of `O`. Reading `q` leaves the system
//! in `M_q |psi>` with the Kraus operator
//!
//! ```text
//! M_q = sum_m phi(q - lambda_m) Pi_m
//! ```
//!
//! so the reading density is the Gaussian mixture
//! `p(q) = sum_m <psi|Pi_m|psi> N(q; lambda_m, sigma^2)`. Nothing here is
//! expanded in `eps`: sampling and state update are exact for every `sigma`.

use std::f64::consts::PI;

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::qcore::{hermitian_defect, identity, l2_norm, mat_vec, Matrix, Observable, StateVector};

/// Eigenvalues closer than this are merged into one projector.
pub const DEGENERACY_TOL: f64 = 1e-9;

const INVOLUTION_TOL: f64 = 1e-12;
const HERMITIAN_TOL: f64 = 1e-12;

/// Initial pointer spread `sigma = Delta q(t=0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PointerSpec {
    sigma: f64,
}

impl PointerSpec {
    pub fn new(sigma: f64) -> Result<Self> {
        if sigma.is_finite() && sigma > 0.0 {
            Ok(Self { sigma })
        } else {
            Err(Error::InvalidSigma(sigma))
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// `eps = 1 / sigma^2`.
    pub fn epsilon(&self) -> f64 {
        1.0 / (self.sigma * self.sigma)
    }

    /// Normalized pointer amplitude `phi(x)`; `phi^2` is `N(0, sigma^2)`.
    pub fn amplitude(&self, x: f64) -> f64 {
        let eps = self.epsilon();
        (eps / (2.0 * PI)).powf(0.25) * (-eps * x * x / 4.0).exp()
    }
}

/// One pointer reading.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Reading {
    pub q: f64,
    pub label: String,
}

/// Distinct eigenvalues of an observable with their orthogonal projectors.
#[derive(Clone, Debug)]
pub struct SpectralDecomp {
    eigenvalues: Vec<f64>,
    projectors: Vec<Matrix>,
}

impl SpectralDecomp {
    /// Involutions (`O^2 = I`, e.g. every spin observable) use the exact
    /// projectors `(I +- O) / 2` with eigenvalues exactly `+-1`; anything else
    /// goes through a Hermitian eigendecomposition with degenerate eigenvalues
    /// merged.
    pub fn of(op: &Observable) -> Result<Self> {
        let defect = hermitian_defect(op.matrix());
        if defect > HERMITIAN_TOL {
            return Err(Error::NotHermitian(defect));
        }
        let dim = op.dim();
        let id = identity(dim);
        if op.is_involution(INVOLUTION_TOL) {
            let plus = (&id + op.matrix()).scale(0.5);
            let minus = (&id - op.matrix()).scale(0.5);
            let (mut eigenvalues, mut projectors) = (Vec::new(), Vec::new());
            // +-I has a single eigenspace.
            for (lambda, proj) in [(1.0, plus), (-1.0, minus)] {
                if proj.iter().any(|e| e.norm() > INVOLUTION_TOL) {
                    eigenvalues.push(lambda);
                    projectors.push(proj);
                }
            }
            return Ok(Self { eigenvalues, projectors });
        }

        let eig = SymmetricEigen::new(op.matrix().clone());
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));

        let mut eigenvalues: Vec<f64> = Vec::new();
        let mut members: Vec<Vec<usize>> = Vec::new();
        for idx in order {
            let lambda = eig.eigenvalues[idx];
            match eigenvalues.last() {
                Some(&prev) if (prev - lambda).abs() <= DEGENERACY_TOL => {
                    members.last_mut().expect("non-empty").push(idx)
                }
                _ => {
                    eigenvalues.push(lambda);
                    members.push(vec![idx]);
                }
            }
        }
        let projectors = members
            .iter()
            .zip(eigenvalues.iter_mut())
            .map(|(group, lambda)| {
                *lambda = group.iter().map(|&i| eig.eigenvalues[i]).sum::<f64>() / group.len() as f64;
                let mut p = Matrix::zeros(dim, dim);
                for &i in group {
                    let v = eig.eigenvectors.column(i);
                    p += v * v.adjoint();
                }
                p
            })
            .collect();
        Ok(Self { eigenvalues, projectors })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn projectors(&self) -> &[Matrix] {
        &self.projectors
    }

    pub fn dim(&self) -> usize {
        self.projectors[0].nrows()
    }

    /// `sum_m lambda_m Pi_m`.
    pub fn reconstruct(&self) -> Matrix {
        self.eigenvalues
            .iter()
            .zip(&self.projectors)
            .fold(Matrix::zeros(self.dim(), self.dim()), |acc, (&l, p)| acc + p.scale(l))
    }

    /// Born weights `<psi|Pi_m|psi>`.
    pub fn weights(&self, state: &StateVector) -> Result<Vec<f64>> {
        self.check(state)?;
        let mut branch = vec![Complex64::default(); state.dim()];
        Ok(self
            .projectors
            .iter()
            .map(|p| {
                mat_vec(p, state.amplitudes(), &mut branch);
                branch.iter().map(|a| a.norm_sqr()).sum()
            })
            .collect())
    }

    /// Kraus operator `M_q = sum_m phi(q - lambda_m) Pi_m`.
    pub fn kraus_operator(&self, q: f64, ptr: PointerSpec) -> Matrix {
        self.eigenvalues
            .iter()
            .zip(&self.projectors)
            .fold(Matrix::zeros(self.dim(), self.dim()), |acc, (&l, p)| {
                acc + p.scale(ptr.amplitude(q - l))
            })
    }

    fn check(&self, state: &StateVector) -> Result<()> {
        if state.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: state.dim() });
        }
        Ok(())
    }

    /// Splits `psi` into its branches `Pi_m psi`, stored back to back in `scratch`.
    /// Returns the branch weights in `weights`.
    fn split(&self, amps: &[Complex64], scratch: &mut Vec<Complex64>, weights: &mut Vec<f64>) {
        let dim = amps.len();
        scratch.resize(dim * self.projectors.len(), Complex64::default());
        weights.clear();
        for (p, branch) in self.projectors.iter().zip(scratch.chunks_mut(dim)) {
            mat_vec(p, amps, branch);
            weights.push(branch.iter().map(|a| a.norm_sqr()).sum());
        }
    }

    /// In-place weak measurement; returns the reading.
    pub(crate) fn weak_in_place<R: Rng + ?Sized>(
        &self,
        amps: &mut [Complex64],
        ptr: PointerSpec,
        rng: &mut R,
        work: &mut Workspace,
    ) -> Result<f64> {
        self.split(amps, &mut work.branches, &mut work.weights);
        let m = pick(&work.weights, rng);
        let noise: f64 = rng.sample(StandardNormal);
        let q = self.eigenvalues[m] + ptr.sigma() * noise;

        // Log-amplitudes relative to the largest keep exp() away from underflow.
        let eps = ptr.epsilon();
        work.log_amp.clear();
        work.log_amp.extend(self.eigenvalues.iter().map(|&l| -eps * (q - l) * (q - l) / 4.0));
        let top = work.log_amp.iter().copied().fold(f64::NEG_INFINITY, f64::max);

        let dim = amps.len();
        amps.iter_mut().for_each(|a| *a = Complex64::default());
        for (branch, &la) in work.branches.chunks(dim).zip(&work.log_amp) {
            let f = (la - top).exp();
            if f == 0.0 {
                continue;
            }
            for (a, &b) in amps.iter_mut().zip(branch) {
                *a += b * f;
            }
        }
        renormalize(amps)?;
        Ok(q)
    }

    /// In-place projective measurement; returns the exact eigenvalue.
    pub(crate) fn strong_in_place<R: Rng + ?Sized>(
        &self,
        amps: &mut [Complex64],
        rng: &mut R,
        work: &mut Workspace,
    ) -> Result<f64> {
        self.split(amps, &mut work.branches, &mut work.weights);
        let m = pick(&work.weights, rng);
        let dim = amps.len();
        amps.copy_from_slice(&work.branches[m * dim..(m + 1) * dim]);
        renormalize(amps)?;
        Ok(self.eigenvalues[m])
    }
}

/// Scratch buffers reused across measurements of one cycle.
#[derive(Debug, Default)]
pub(crate) struct Workspace {
    branches: Vec<Complex64>,
    weights: Vec<f64>,
    log_amp: Vec<f64>,
}

fn pick<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    // u landed on the rounding sliver at the top; take the last non-empty branch.
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

fn renormalize(amps: &mut [Complex64]) -> Result<()> {
    let norm = l2_norm(amps);
    if !(norm.is_finite() && norm > 0.0) {
        return Err(Error::ZeroNorm);
    }
    amps.iter_mut().for_each(|a| *a /= norm);
    Ok(())
}

fn check_normalized(state: &StateVector) -> Result<()> {
    let norm = state.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized(norm));
    }
    Ok(())
}

/// Weak (Gaussian-pointer) measurement of `op` on `state`.
pub fn weak_measure<R: Rng + ?Sized>(
    state: &StateVector,
    op: &Observable,
    ptr: PointerSpec,
    rng: &mut R,
) -> Result<(Reading, StateVector)> {
    check_normalized(state)?;
    let spec = SpectralDecomp::of(op)?;
    spec.check(state)?;
    let mut amps = state.amplitudes().to_vec();
    let q = spec.weak_in_place(&mut amps, ptr, rng, &mut Workspace::default())?;
    let post = StateVector::from_normalized_unchecked(amps, state.num_qubits());
    Ok((Reading { q, label: op.label().to_owned() }, post))
}

/// Projective measurement of `op`: the reading is an exact eigenvalue.
pub fn strong_measure<R: Rng + ?Sized>(
    state: &StateVector,
    op: &Observable,
    rng: &mut R,
) -> Result<(Reading, StateVector)> {
    check_normalized(state)?;
    let spec = SpectralDecomp::of(op)?;
    spec.check(state)?;
    let mut amps = state.amplitudes().to_vec();
    let q = spec.strong_in_place(&mut amps, rng, &mut Workspace::default())?;
    let post = StateVector::from_normalized_unchecked(amps, state.num_qubits());
    Ok((Reading { q, label: op.label().to_owned() }, post))
}

/// One component `w N(q; mean, variance)` of the reading density.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: f64,
    pub variance: f64,
}

/// Exact reading density of a weak measurement.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointerMixture {
    pub components: Vec<MixtureComponent>,
}

impl PointerMixture {
    pub fn density(&self, q: f64) -> f64 {
        self.components
            .iter()
            .map(|c| {
                let d = q - c.mean;
                c.weight * (-d * d / (2.0 * c.variance)).exp() / (2.0 * PI * c.variance).sqrt()
            })
            .sum()
    }

    pub fn mean(&self) -> f64 {
        self.components.iter().map(|c| c.weight * c.mean).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.components
            .iter()
            .map(|c| c.weight * (c.variance + c.mean * c.mean))
            .sum::<f64>()
            - m * m
    }
}

/// Mixture parameters `{(w_m, lambda_m, sigma^2)}`; components with zero weight are dropped.
pub fn pointer_pdf(state: &StateVector, op: &Observable, ptr: PointerSpec) -> Result<PointerMixture> {
    check_normalized(state)?;
    let spec = SpectralDecomp::of(op)?;
    let weights = spec.weights(state)?;
    let total: f64 = weights.iter().sum();
    let variance = ptr.sigma() * ptr.sigma();
    let components = weights
        .iter()
        .zip(spec.eigenvalues())
        .filter(|(&w, _)| w > 1e-15)
        .map(|(&w, &mean)| MixtureComponent { weight: w / total, mean, variance })
        .collect();
    Ok(PointerMixture { components })
}
