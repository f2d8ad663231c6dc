//! Stokes vectors and the six analyzable polarization modes.
//!
//! Convention used throughout the crate: `s1 = H - V`, `s2 = D - A`,
//! `s3 = R - L`. With Jones vectors in the H/V basis this means
//! `R = (1, i)/sqrt(2)` sits at `+s3`, and the Stokes components are the
//! expectation values of `(sigma_z, sigma_x, sigma_y)` in that order. The
//! ordering is a cyclic permutation of `(x, y, z)`, so the SU(2) to SO(3)
//! map stays orientation preserving.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix2, Vector2, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed on `|s| <= 1`.
pub const STOKES_NORM_SLACK: f64 = 1e-9;

/// A polarization state on or inside the Poincaré sphere.
///
/// Components are normalized by the total intensity, so the degree of
/// polarization is the Euclidean norm of `(s1, s2, s3)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StokesVector {
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
}

impl StokesVector {
    pub const H: StokesVector = StokesVector::raw(1.0, 0.0, 0.0);
    pub const V: StokesVector = StokesVector::raw(-1.0, 0.0, 0.0);
    pub const D: StokesVector = StokesVector::raw(0.0, 1.0, 0.0);
    pub const A: StokesVector = StokesVector::raw(0.0, -1.0, 0.0);
    pub const R: StokesVector = StokesVector::raw(0.0, 0.0, 1.0);
    pub const L: StokesVector = StokesVector::raw(0.0, 0.0, -1.0);

    const fn raw(s1: f64, s2: f64, s3: f64) -> Self {
        StokesVector { s1, s2, s3 }
    }

    /// Builds a Stokes vector, rejecting anything outside the Poincaré ball.
    pub fn new(s1: f64, s2: f64, s3: f64) -> Result<Self> {
        let v = StokesVector { s1, s2, s3 };
        if !(s1.is_finite() && s2.is_finite() && s3.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite Stokes vector ({s1}, {s2}, {s3})"
            )));
        }
        if v.dop_squared() > 1.0 + STOKES_NORM_SLACK {
            return Err(Error::InvalidArgument(format!(
                "Stokes vector ({s1}, {s2}, {s3}) has degree of polarization {} > 1",
                v.dop()
            )));
        }
        Ok(v)
    }

    /// Projects an arbitrary 3-vector into the unit ball (rescaling only if
    /// its norm exceeds one).
    pub fn clamped(v: Vector3<f64>) -> Self {
        let n = v.norm();
        let v = if n > 1.0 { v / n } else { v };
        StokesVector::raw(v.x, v.y, v.z)
    }

    pub fn from_vector(v: Vector3<f64>) -> Result<Self> {
        StokesVector::new(v.x, v.y, v.z)
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.s1, self.s2, self.s3)
    }

    fn dop_squared(&self) -> f64 {
        self.s1 * self.s1 + self.s2 * self.s2 + self.s3 * self.s3
    }

    /// Degree of polarization.
    pub fn dop(&self) -> f64 {
        self.dop_squared().sqrt()
    }

    /// Unit vector along this state, or `None` for a fully depolarized state.
    pub fn direction(&self) -> Option<Vector3<f64>> {
        let n = self.dop();
        (n > 0.0).then(|| self.to_vector() / n)
    }

    /// Stokes vector of a (not necessarily normalized) Jones vector.
    pub fn from_jones(psi: &Vector2<Complex64>) -> Self {
        let intensity = psi.norm_squared();
        let cross = psi[0].conj() * psi[1];
        StokesVector::raw(
            (psi[0].norm_sqr() - psi[1].norm_sqr()) / intensity,
            2.0 * cross.re / intensity,
            2.0 * cross.im / intensity,
        )
    }
}

impl fmt::Display for StokesVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.6}, {:.6}, {:.6})", self.s1, self.s2, self.s3)
    }
}

/// The six single-photon polarization projections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MeasurementMode {
    H,
    V,
    D,
    A,
    R,
    L,
}

impl MeasurementMode {
    pub const ALL: [MeasurementMode; 6] = [
        MeasurementMode::H,
        MeasurementMode::V,
        MeasurementMode::D,
        MeasurementMode::A,
        MeasurementMode::R,
        MeasurementMode::L,
    ];

    /// Normalized Jones vector in the H/V basis.
    pub fn jones(self) -> Vector2<Complex64> {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let c = |re: f64, im: f64| Complex64::new(re, im);
        match self {
            MeasurementMode::H => Vector2::new(c(1.0, 0.0), c(0.0, 0.0)),
            MeasurementMode::V => Vector2::new(c(0.0, 0.0), c(1.0, 0.0)),
            MeasurementMode::D => Vector2::new(c(r, 0.0), c(r, 0.0)),
            MeasurementMode::A => Vector2::new(c(r, 0.0), c(-r, 0.0)),
            MeasurementMode::R => Vector2::new(c(r, 0.0), c(0.0, r)),
            MeasurementMode::L => Vector2::new(c(r, 0.0), c(0.0, -r)),
        }
    }

    /// Rank-1 projector `|m><m|`.
    pub fn projector(self) -> Matrix2<Complex64> {
        let psi = self.jones();
        psi * psi.adjoint()
    }

    pub fn stokes(self) -> StokesVector {
        match self {
            MeasurementMode::H => StokesVector::H,
            MeasurementMode::V => StokesVector::V,
            MeasurementMode::D => StokesVector::D,
            MeasurementMode::A => StokesVector::A,
            MeasurementMode::R => StokesVector::R,
            MeasurementMode::L => StokesVector::L,
        }
    }

    /// The orthogonal partner in the same basis.
    pub fn orthogonal(self) -> MeasurementMode {
        match self {
            MeasurementMode::H => MeasurementMode::V,
            MeasurementMode::V => MeasurementMode::H,
            MeasurementMode::D => MeasurementMode::A,
            MeasurementMode::A => MeasurementMode::D,
            MeasurementMode::R => MeasurementMode::L,
            MeasurementMode::L => MeasurementMode::R,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            MeasurementMode::H => 'H',
            MeasurementMode::V => 'V',
            MeasurementMode::D => 'D',
            MeasurementMode::A => 'A',
            MeasurementMode::R => 'R',
            MeasurementMode::L => 'L',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        Some(match c {
            'H' => MeasurementMode::H,
            'V' => MeasurementMode::V,
            'D' => MeasurementMode::D,
            'A' => MeasurementMode::A,
            'R' => MeasurementMode::R,
            'L' => MeasurementMode::L,
            _ => return None,
        })
    }
}

impl fmt::Display for MeasurementMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

impl FromStr for MeasurementMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut chars = s.trim().chars();
        match (chars.next().and_then(MeasurementMode::from_char), chars.next()) {
            (Some(m), None) => Ok(m),
            _ => Err(Error::InvalidArgument(format!("unknown polarization mode {s:?}"))),
        }
    }
}
