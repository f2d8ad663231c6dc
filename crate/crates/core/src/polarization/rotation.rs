//! Proper rotations of Stokes space and their SU(2) lifts.
//!
//! A Poincaré rotation by `theta` about unit axis `n` lifts to
//! `U = cos(theta/2) I - i sin(theta/2) (n . sigma)` with
//! `sigma = (sigma_z, sigma_x, sigma_y)`, so `|Tr U| = 2|cos(theta/2)|`.
//! The lift is defined up to a global sign.

use std::ops::Mul;

use nalgebra::{Matrix2, Matrix3, Rotation3, Unit, Vector3, SVD};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::stokes::StokesVector;
use crate::error::{Error, Result};

/// Tolerance on orthonormality and determinant of a rotation matrix.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// A proper rotation of the Poincaré sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[f64; 3]; 3]", into = "[[f64; 3]; 3]")]
pub struct PoincareRotation(Matrix3<f64>);

impl PoincareRotation {
    pub fn identity() -> Self {
        PoincareRotation(Matrix3::identity())
    }

    /// Validates `m` as an element of SO(3).
    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        let err = orthonormality_error(&m);
        if !err.is_finite() || err > ROTATION_TOLERANCE {
            return Err(Error::InvalidRotation(format!("max |R^T R - I| = {err:.3e}")));
        }
        let det = m.determinant();
        if (det - 1.0).abs() > ROTATION_TOLERANCE {
            return Err(Error::InvalidRotation(format!("det = {det}")));
        }
        Ok(PoincareRotation(m))
    }

    /// Rotation by `angle` (right-handed) about `axis`. A zero axis gives the
    /// identity.
    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64) -> Self {
        match Unit::try_new(axis, 0.0) {
            Some(a) => PoincareRotation(*Rotation3::from_axis_angle(&a, angle).matrix()),
            None => PoincareRotation::identity(),
        }
    }

    /// Rotation by `|omega|` about `omega`.
    pub fn from_rotation_vector(omega: Vector3<f64>) -> Self {
        PoincareRotation(*Rotation3::new(omega).matrix())
    }

    pub fn about_s1(angle: f64) -> Self {
        PoincareRotation::from_axis_angle(Vector3::x(), angle)
    }

    pub fn about_s2(angle: f64) -> Self {
        PoincareRotation::from_axis_angle(Vector3::y(), angle)
    }

    pub fn about_s3(angle: f64) -> Self {
        PoincareRotation::from_axis_angle(Vector3::z(), angle)
    }

    /// Haar-uniform random rotation.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        // A normalized 4D Gaussian is uniform on S^3, hence Haar on SO(3).
        let q: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(rng));
        let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        let [w, x, y, z] = q.map(|c| c / n);
        PoincareRotation::from_quaternion(w, x, y, z)
    }

    fn from_quaternion(w: f64, x: f64, y: f64, z: f64) -> Self {
        PoincareRotation(Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ))
    }

    /// Unit quaternion `(w, x, y, z)` with `w >= 0` (Shepperd's method).
    pub fn quaternion(&self) -> [f64; 4] {
        let m = &self.0;
        let trace = m.trace();
        let q = if trace > m[(0, 0)].max(m[(1, 1)]).max(m[(2, 2)]) {
            let s = (1.0 + trace).sqrt() * 2.0;
            [
                0.25 * s,
                (m[(2, 1)] - m[(1, 2)]) / s,
                (m[(0, 2)] - m[(2, 0)]) / s,
                (m[(1, 0)] - m[(0, 1)]) / s,
            ]
        } else if m[(0, 0)] >= m[(1, 1)] && m[(0, 0)] >= m[(2, 2)] {
            let s = (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt() * 2.0;
            [
                (m[(2, 1)] - m[(1, 2)]) / s,
                0.25 * s,
                (m[(0, 1)] + m[(1, 0)]) / s,
                (m[(0, 2)] + m[(2, 0)]) / s,
            ]
        } else if m[(1, 1)] >= m[(2, 2)] {
            let s = (1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).sqrt() * 2.0;
            [
                (m[(0, 2)] - m[(2, 0)]) / s,
                (m[(0, 1)] + m[(1, 0)]) / s,
                0.25 * s,
                (m[(1, 2)] + m[(2, 1)]) / s,
            ]
        } else {
            let s = (1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).sqrt() * 2.0;
            [
                (m[(1, 0)] - m[(0, 1)]) / s,
                (m[(0, 2)] + m[(2, 0)]) / s,
                (m[(1, 2)] + m[(2, 1)]) / s,
                0.25 * s,
            ]
        };
        let n = q.iter().map(|c| c * c).sum::<f64>().sqrt();
        let sign = if q[0] < 0.0 { -1.0 } else { 1.0 };
        q.map(|c| sign * c / n)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn inverse(&self) -> Self {
        PoincareRotation(self.0.transpose())
    }

    pub fn apply(&self, s: &StokesVector) -> StokesVector {
        StokesVector::clamped(self.0 * s.to_vector())
    }

    /// Rotation angle in `[0, pi]`.
    ///
    /// Equal to `acos((Tr R - 1)/2)`, evaluated through `atan2` of the
    /// axial vector so that angles near 0 keep full precision.
    pub fn angle(&self) -> f64 {
        let m = &self.0;
        let sin_axis = Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]) * 0.5;
        let cos = ((m.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
        sin_axis.norm().atan2(cos)
    }

    /// Unit rotation axis and angle; the axis is `None` for the identity.
    pub fn axis_angle(&self) -> (Option<Vector3<f64>>, f64) {
        let [w, x, y, z] = self.quaternion();
        let v = Vector3::new(x, y, z);
        let angle = 2.0 * v.norm().atan2(w);
        (Unit::try_new(v, 0.0).map(|u| u.into_inner()), angle)
    }

    /// Nearest rotation in the Frobenius sense (polar decomposition).
    pub fn reorthonormalized(&self) -> Self {
        nearest_rotation(&self.0).map(PoincareRotation).unwrap_or(*self)
    }

    pub fn orthonormality_error(&self) -> f64 {
        orthonormality_error(&self.0)
    }

    /// SU(2) lift of this rotation.
    pub fn to_su2(&self) -> Matrix2<Complex64> {
        let [w, x, y, z] = self.quaternion();
        let i = Complex64::i();
        let [sz, sx, sy] = stokes_paulis();
        let c = Complex64::from;
        Matrix2::identity() * c(w) - (sz * c(x) + sx * c(y) + sy * c(z)) * i
    }

    /// Rotation induced by conjugation with a 2×2 unitary:
    /// `R_ij = Tr(sigma_i U sigma_j U^dagger) / 2`.
    pub fn from_su2(u: &Matrix2<Complex64>) -> Result<Self> {
        let paulis = stokes_paulis();
        let ud = u.adjoint();
        let m = Matrix3::from_fn(|i, j| (paulis[i] * u * paulis[j] * ud).trace().re * 0.5);
        PoincareRotation::new(m)
    }
}

impl Default for PoincareRotation {
    fn default() -> Self {
        PoincareRotation::identity()
    }
}

impl Mul for PoincareRotation {
    type Output = PoincareRotation;

    fn mul(self, rhs: PoincareRotation) -> PoincareRotation {
        PoincareRotation(self.0 * rhs.0)
    }
}

impl Mul for &PoincareRotation {
    type Output = PoincareRotation;

    fn mul(self, rhs: &PoincareRotation) -> PoincareRotation {
        PoincareRotation(self.0 * rhs.0)
    }
}

impl TryFrom<[[f64; 3]; 3]> for PoincareRotation {
    type Error = Error;

    fn try_from(rows: [[f64; 3]; 3]) -> Result<Self> {
        PoincareRotation::new(Matrix3::from_fn(|i, j| rows[i][j]))
    }
}

impl From<PoincareRotation> for [[f64; 3]; 3] {
    fn from(r: PoincareRotation) -> Self {
        std::array::from_fn(|i| std::array::from_fn(|j| r.0[(i, j)]))
    }
}

/// Angle of a rotation; free-function form of [`PoincareRotation::angle`].
pub fn rotation_angle(r: &PoincareRotation) -> f64 {
    r.angle()
}

/// Angle of the relative rotation `a^T b`.
pub fn relative_angle(a: &PoincareRotation, b: &PoincareRotation) -> f64 {
    (a.inverse() * *b).angle()
}

pub fn su2_from_poincare(r: &PoincareRotation) -> Matrix2<Complex64> {
    r.to_su2()
}

pub fn poincare_from_su2(u: &Matrix2<Complex64>) -> Result<PoincareRotation> {
    PoincareRotation::from_su2(u)
}

/// Pauli matrices ordered as the Stokes components `(s1, s2, s3)`.
pub fn stokes_paulis() -> [Matrix2<Complex64>; 3] {
    let o = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::i();
    [
        Matrix2::new(one, o, o, -one),
        Matrix2::new(o, one, one, o),
        Matrix2::new(o, -i, i, o),
    ]
}

fn orthonormality_error(m: &Matrix3<f64>) -> f64 {
    (m.transpose() * m - Matrix3::identity()).amax()
}

/// Projects a matrix onto SO(3): `U diag(1, 1, det(U V^T)) V^T` from its SVD.
/// Returns `None` when the SVD fails to converge.
pub(crate) fn nearest_rotation(m: &Matrix3<f64>) -> Option<Matrix3<f64>> {
    let svd = SVD::try_new(*m, true, true, f64::EPSILON, 200)?;
    let u = svd.u?;
    let v_t = svd.v_t?;
    let mut d = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        // nalgebra sorts singular values in descending order, so flipping the
        // last column touches the weakest direction.
        d[(2, 2)] = -1.0;
    }
    Some(u * d * v_t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_axis(rng: &mut ChaCha8Rng) -> Vector3<f64> {
        let v = Vector3::from_fn(|_, _| StandardNormal.sample(rng));
        v.normalize()
    }

    #[test]
    fn angle_of_known_rotations() {
        assert_eq!(PoincareRotation::identity().angle(), 0.0);
        let flip = PoincareRotation::new(Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0))).unwrap();
        assert!((flip.angle() - PI).abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let r = PoincareRotation::from_axis_angle(random_axis(&mut rng), 0.3);
            assert!((r.angle() - 0.3).abs() < 1e-9);
        }
    }

    #[test]
    fn atan2_angle_matches_acos_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let r = PoincareRotation::random(&mut rng);
            let acos = ((r.matrix().trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos();
            assert!((r.angle() - acos).abs() < 1e-7);
        }
    }

    #[test]
    fn su2_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let r = PoincareRotation::random(&mut rng);
            let back = PoincareRotation::from_su2(&r.to_su2()).unwrap();
            assert!((back.matrix() - r.matrix()).amax() < 1e-9);
        }
        // Near-pi rotations exercise the non-trace branches of the quaternion.
        for axis in [Vector3::x(), Vector3::y(), Vector3::z()] {
            let r = PoincareRotation::from_axis_angle(axis, PI - 1e-12);
            let back = PoincareRotation::from_su2(&r.to_su2()).unwrap();
            assert!((back.matrix() - r.matrix()).amax() < 1e-9);
        }
    }

    #[test]
    fn su2_of_identity_and_half_turn() {
        let u = PoincareRotation::identity().to_su2();
        assert!((u - Matrix2::identity()).norm() < 1e-15);

        // H -> V is a half turn about s3; the lift is traceless.
        let half = PoincareRotation::about_s3(PI);
        let h = half.apply(&StokesVector::H);
        assert!((h.to_vector() - StokesVector::V.to_vector()).norm() < 1e-12);
        assert!(half.to_su2().trace().norm() < 1e-12);
    }

    #[test]
    fn su2_conjugation_reproduces_rotation_on_stokes_vectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let paulis = stokes_paulis();
        for _ in 0..100 {
            let r = PoincareRotation::random(&mut rng);
            let u = r.to_su2();
            let s = random_axis(&mut rng);
            // rho = (I + s.sigma)/2 -> U rho U^dagger must carry R s.
            let rho = (Matrix2::identity()
                + paulis[0] * Complex64::from(s.x)
                + paulis[1] * Complex64::from(s.y)
                + paulis[2] * Complex64::from(s.z))
                * Complex64::from(0.5);
            let out = u * rho * u.adjoint();
            let measured = Vector3::from_fn(|i, _| (paulis[i] * out).trace().re);
            assert!((measured - r.matrix() * s).norm() < 1e-9);
        }
    }

    #[test]
    fn validation_rejects_reflections_and_non_orthogonal() {
        assert!(PoincareRotation::new(Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0))).is_err());
        let mut m = Matrix3::identity();
        m[(0, 1)] = 1e-6;
        assert!(PoincareRotation::new(m).is_err());
    }

    #[test]
    fn reorthonormalize_fixes_accumulated_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let r = PoincareRotation::random(&mut rng);
        let mut noisy = *r.matrix();
        noisy[(0, 0)] += 1e-7;
        noisy[(2, 1)] -= 1e-7;
        let fixed = PoincareRotation(noisy).reorthonormalized();
        assert!(fixed.orthonormality_error() < 1e-14);
        assert!((fixed.matrix() - r.matrix()).amax() < 1e-6);
    }

    #[test]
    fn axis_angle_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let axis = random_axis(&mut rng);
            let angle = rng.random_range(0.01..PI - 0.01);
            let (a, t) = PoincareRotation::from_axis_angle(axis, angle).axis_angle();
            assert!((t - angle).abs() < 1e-9);
            assert!((a.unwrap() - axis).norm() < 1e-9);
        }
    }
}
