//! Two-photon polarization density matrices.
//!
//! Basis order is `|HH>, |HV>, |VH>, |VV>` with the first letter belonging to
//! the photon kept at the source and the second to the photon sent through
//! the fiber. Fidelity to `|Phi+> = (|HH> + |VV>)/sqrt(2)` is the overlap
//! `<Phi+|rho|Phi+> = (rho_11 + rho_44 + rho_14 + rho_41)/2`.
//!
//! For a one-sided rotation `U` on a pure `|Phi+>`,
//! `|<Phi+|(I x U)|Phi+>|^2 = |Tr U|^2 / 4 = cos^2(theta/2)` where `theta` is
//! the Poincaré rotation angle of `U`.

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::rotation::PoincareRotation;
use super::stokes::MeasurementMode;
use crate::error::{Error, Result};

pub const HERMITIAN_TOLERANCE: f64 = 1e-12;
pub const TRACE_TOLERANCE: f64 = 1e-12;
pub const EIGENVALUE_FLOOR: f64 = -1e-9;

/// A validated 4×4 two-qubit density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoQubitState(Matrix4<Complex64>);

impl TwoQubitState {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(rho: Matrix4<Complex64>) -> Result<Self> {
        let asym = hermiticity_error(&rho);
        if !(asym <= HERMITIAN_TOLERANCE) {
            return Err(Error::InvalidState(format!(
                "not Hermitian (max |rho - rho^dagger| = {asym:.3e})"
            )));
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > TRACE_TOLERANCE || tr.im.abs() > TRACE_TOLERANCE {
            return Err(Error::InvalidState(format!("trace {tr} != 1")));
        }
        let min_eig = rho.symmetric_eigenvalues().min();
        if min_eig < EIGENVALUE_FLOOR {
            return Err(Error::InvalidState(format!("negative eigenvalue {min_eig:.3e}")));
        }
        Ok(TwoQubitState(rho))
    }

    /// Random mixed state from the Hilbert-Schmidt ensemble (`G G^dagger / Tr`
    /// with complex Ginibre `G`).
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let g = Matrix4::from_fn(|_, _| Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)));
        let w = g * g.adjoint();
        let tr = w.trace();
        let mut rho = w / tr;
        // Exact Hermitian symmetrization to kill rounding asymmetry.
        rho = (rho + rho.adjoint()) * Complex64::from(0.5);
        TwoQubitState(rho)
    }

    /// Random pure state `|psi><psi|`.
    pub fn random_pure<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let psi =
            nalgebra::Vector4::from_fn(|_, _| Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
                .normalize();
        TwoQubitState(psi * psi.adjoint())
    }

    pub fn matrix(&self) -> &Matrix4<Complex64> {
        &self.0
    }

    pub fn maximally_mixed() -> Self {
        TwoQubitState(Matrix4::identity() * Complex64::from(0.25))
    }

    /// Overlap with `|Phi+>`.
    pub fn fidelity_to_phi_plus(&self) -> f64 {
        phi_plus_overlap(&self.0)
    }

    /// `(I x U) rho (I x U)^dagger` with `U` the SU(2) lift of `r`, acting on
    /// the second (fiber) photon.
    pub fn apply_one_sided(&self, r: &PoincareRotation) -> TwoQubitState {
        let op = kron(&Matrix2::identity(), &r.to_su2());
        let out = op * self.0 * op.adjoint();
        TwoQubitState((out + out.adjoint()) * Complex64::from(0.5))
    }

    /// `Tr[(P_a x P_b) rho]`, mode `a` on the first photon.
    pub fn coincidence_probability(&self, a: MeasurementMode, b: MeasurementMode) -> f64 {
        let psi = kron_vec(&a.jones(), &b.jones());
        (psi.adjoint() * self.0 * psi)[(0, 0)].re.max(0.0)
    }
}

/// `|Phi+><Phi+|`.
pub fn bell_phi_plus() -> TwoQubitState {
    let h = Complex64::from(0.5);
    let mut m = Matrix4::zeros();
    for (i, j) in [(0, 0), (0, 3), (3, 0), (3, 3)] {
        m[(i, j)] = h;
    }
    TwoQubitState(m)
}

/// `|Psi+><Psi+|` with `|Psi+> = (|HV> + |VH>)/sqrt(2)`.
pub fn bell_psi_plus() -> TwoQubitState {
    let h = Complex64::from(0.5);
    let mut m = Matrix4::zeros();
    for (i, j) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
        m[(i, j)] = h;
    }
    TwoQubitState(m)
}

/// Werner state `a |Phi+><Phi+| + (1 - a)/4 I`.
pub fn werner_state(a: f64) -> Result<TwoQubitState> {
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::InvalidArgument(format!("Werner parameter {a} outside [0, 1]")));
    }
    let m = bell_phi_plus().0 * Complex64::from(a) + Matrix4::identity() * Complex64::from((1.0 - a) / 4.0);
    Ok(TwoQubitState(m))
}

pub fn fidelity_to_phi_plus(rho: &TwoQubitState) -> f64 {
    rho.fidelity_to_phi_plus()
}

/// Fidelity of a raw matrix, rejecting non-Hermitian input.
pub fn fidelity_of_matrix(rho: &Matrix4<Complex64>) -> Result<f64> {
    let asym = hermiticity_error(rho);
    if !(asym <= HERMITIAN_TOLERANCE) {
        return Err(Error::InvalidState(format!(
            "not Hermitian (max |rho - rho^dagger| = {asym:.3e})"
        )));
    }
    Ok(phi_plus_overlap(rho))
}

pub fn apply_one_sided(rho: &TwoQubitState, r: &PoincareRotation) -> TwoQubitState {
    rho.apply_one_sided(r)
}

pub fn coincidence_probability(rho: &TwoQubitState, a: MeasurementMode, b: MeasurementMode) -> f64 {
    rho.coincidence_probability(a, b)
}

/// Bell-state fidelity left by a one-sided residual rotation of angle
/// `theta`: `cos^2(theta/2)`.
pub fn fidelity_from_residual_rotation(theta: f64) -> f64 {
    let c = (theta * 0.5).cos();
    c * c
}

fn phi_plus_overlap(rho: &Matrix4<Complex64>) -> f64 {
    ((rho[(0, 0)] + rho[(3, 3)] + rho[(0, 3)] + rho[(3, 0)]) * 0.5).re
}

fn hermiticity_error(rho: &Matrix4<Complex64>) -> f64 {
    (rho - rho.adjoint()).iter().map(|c| c.norm()).fold(0.0, f64::max)
}

fn kron(a: &Matrix2<Complex64>, b: &Matrix2<Complex64>) -> Matrix4<Complex64> {
    Matrix4::from_fn(|i, j| a[(i / 2, j / 2)] * b[(i % 2, j % 2)])
}

fn kron_vec(a: &nalgebra::Vector2<Complex64>, b: &nalgebra::Vector2<Complex64>) -> nalgebra::Vector4<Complex64> {
    nalgebra::Vector4::from_fn(|i, _| a[i / 2] * b[i % 2])
}
