//! Polarization-dispersion analysis of polarimeter sweeps.
//!
//! From the three probe responses at each wavelength the fiber's Poincaré
//! rotation is estimated; everything else (rotation relative to the mean,
//! rotation per nanometer, the fidelity left after correcting at one
//! wavelength, Gaussian spectral averages and time maps) is derived from
//! those rotations on the measured 1 nm grid, without interpolation.

mod report;
mod sweep;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::channel::{estimate_rotation, PROBE_FRAME};
use crate::error::{Error, Result};
use crate::polarization::{fidelity_from_residual_rotation, nearest_rotation, PoincareRotation};

pub use report::{analyze_sweep, AnalysisOptions, DispersionReport, FIGURE_HEADERS};
pub use sweep::{
    load_sweep, read_sweep, simulate_sweep, PolarimeterSweep, Probe, SweepFrame, SweepPoint, SweepSchedule,
    SWEEP_HEADER,
};

/// Matching tolerance for a wavelength to count as "on the grid" (nm).
pub const GRID_MATCH_TOLERANCE_NM: f64 = 1e-6;

/// Estimated fiber rotation at one wavelength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WavelengthRotation {
    pub wavelength_nm: f64,
    pub rotation: PoincareRotation,
    /// Rotation angle relative to the input (rad).
    pub angle: f64,
}

/// Fiber rotation at each wavelength of one sweep frame.
pub fn rotations_vs_wavelength(frame: &SweepFrame) -> Result<Vec<WavelengthRotation>> {
    frame
        .points
        .iter()
        .map(|p| {
            let rotation = estimate_rotation(&PROBE_FRAME, &p.responses).map_err(|e| Error::EstimationAt {
                wavelength_nm: p.wavelength_nm,
                reason: match e {
                    Error::Estimation(r) => r,
                    other => other.to_string(),
                },
            })?;
            Ok(WavelengthRotation {
                wavelength_nm: p.wavelength_nm,
                rotation,
                angle: rotation.angle(),
            })
        })
        .collect()
}

/// Chordal mean: the entrywise mean projected back onto SO(3).
pub fn chordal_mean(rotations: &[PoincareRotation]) -> Result<PoincareRotation> {
    if rotations.is_empty() {
        return Err(Error::DegenerateMean("no rotations".into()));
    }
    let mean = rotations.iter().fold(Matrix3::zeros(), |acc, r| acc + r.matrix()) / rotations.len() as f64;
    let sv = mean.singular_values();
    let (max, min) = (sv.max(), sv.min());
    if !(min > 1e-9 * max.max(f64::MIN_POSITIVE)) {
        return Err(Error::DegenerateMean(format!(
            "entrywise mean is singular (singular values {:.3e}..{:.3e})",
            min, max
        )));
    }
    let r = nearest_rotation(&mean).ok_or_else(|| Error::DegenerateMean("SVD did not converge".into()))?;
    PoincareRotation::new(r)
}

/// Angle of each rotation relative to the chordal mean of the set.
pub fn rotation_relative_to_mean(rotations: &[WavelengthRotation]) -> Result<Vec<(f64, f64)>> {
    if rotations.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least two wavelengths, got {}",
            rotations.len()
        )));
    }
    let all: Vec<_> = rotations.iter().map(|w| w.rotation).collect();
    let mean_inv = chordal_mean(&all)?.inverse();
    Ok(rotations
        .iter()
        .map(|w| (w.wavelength_nm, (mean_inv * w.rotation).angle()))
        .collect())
}

/// Rotation between adjacent wavelengths, per nanometer, keyed by the
/// midpoint wavelength.
pub fn rotation_per_nm(rotations: &[WavelengthRotation]) -> Vec<(f64, f64)> {
    rotations
        .windows(2)
        .map(|w| {
            let step = w[1].wavelength_nm - w[0].wavelength_nm;
            let angle = (w[0].rotation.inverse() * w[1].rotation).angle();
            (0.5 * (w[0].wavelength_nm + w[1].wavelength_nm), angle / step)
        })
        .collect()
}

fn grid_index(rotations: &[WavelengthRotation], wavelength_nm: f64) -> Result<usize> {
    rotations
        .iter()
        .position(|w| (w.wavelength_nm - wavelength_nm).abs() <= GRID_MATCH_TOLERANCE_NM)
        .ok_or_else(|| {
            Error::InvalidArgument(format!(
                "reference wavelength {wavelength_nm} nm is not on the sweep grid"
            ))
        })
}

/// Bell-state fidelity at each wavelength after undoing the fiber rotation
/// measured at `reference_nm`.
pub fn corrected_fidelity_curve(rotations: &[WavelengthRotation], reference_nm: f64) -> Result<Vec<(f64, f64)>> {
    let k = grid_index(rotations, reference_nm)?;
    let undo = rotations[k].rotation.inverse();
    Ok(rotations
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let f = if i == k {
                1.0
            } else {
                fidelity_from_residual_rotation((undo * w.rotation).angle())
            };
            (w.wavelength_nm, f)
        })
        .collect())
}

/// Full width at half maximum to standard deviation.
pub fn fwhm_to_sigma(fwhm: f64) -> f64 {
    fwhm / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt())
}

/// Gaussian-weighted mean of a fidelity curve sampled on a uniform grid.
///
/// Weights are the Gaussian density at each grid point times trapezoidal
/// end factors, renormalized over the measured range. `fwhm = 0` (or a
/// width so narrow that every weight underflows) returns the value at the
/// grid point nearest `center_nm`.
pub fn spectral_weighted_fidelity(curve: &[(f64, f64)], center_nm: f64, fwhm_nm: f64) -> Result<f64> {
    if curve.is_empty() {
        return Err(Error::InvalidArgument("empty fidelity curve".into()));
    }
    if !(fwhm_nm >= 0.0) || !fwhm_nm.is_finite() {
        return Err(Error::InvalidArgument(format!("FWHM {fwhm_nm} must be >= 0")));
    }
    let (lo, hi) = (curve[0].0, curve[curve.len() - 1].0);
    if !(center_nm >= lo - GRID_MATCH_TOLERANCE_NM && center_nm <= hi + GRID_MATCH_TOLERANCE_NM) {
        return Err(Error::WavelengthOutOfRange {
            wavelength_nm: center_nm,
            min_nm: lo,
            max_nm: hi,
        });
    }
    let nearest = || {
        curve
            .iter()
            .min_by(|a, b| (a.0 - center_nm).abs().total_cmp(&(b.0 - center_nm).abs()))
            .map(|p| p.1)
            .unwrap_or(f64::NAN)
    };
    if fwhm_nm == 0.0 {
        return Ok(nearest());
    }
    let sigma = fwhm_to_sigma(fwhm_nm);
    let last = curve.len() - 1;
    let (mut num, mut den) = (0.0, 0.0);
    for (i, (lambda, f)) in curve.iter().enumerate() {
        let end = if i == 0 || i == last { 0.5 } else { 1.0 };
        let x = (lambda - center_nm) / sigma;
        let w = end * (-0.5 * x * x).exp();
        num += w * f;
        den += w;
    }
    if den > 0.0 {
        Ok((num / den).clamp(0.0, 1.0))
    } else {
        Ok(nearest())
    }
}

/// Fidelity relative to the first timestamp, per wavelength and time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalMap {
    pub timestamps_s: Vec<f64>,
    pub wavelengths_nm: Vec<f64>,
    /// `fidelity[t][lambda]`.
    pub fidelity: Vec<Vec<f64>>,
}

/// `F(lambda, t) = cos^2(theta/2)` of the rotation between the first frame
/// and frame `t`, wavelength by wavelength.
pub fn temporal_fidelity_map(sweep: &PolarimeterSweep) -> Result<TemporalMap> {
    let frames = sweep.frames();
    if frames.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "temporal map needs at least two timestamps, got {}",
            frames.len()
        )));
    }
    let wavelengths: Vec<f64> = frames[0].wavelengths().collect();
    for f in &frames[1..] {
        let same = f.points.len() == wavelengths.len()
            && f.wavelengths()
                .zip(&wavelengths)
                .all(|(a, b)| (a - b).abs() <= GRID_MATCH_TOLERANCE_NM);
        if !same {
            return Err(Error::GridMismatch {
                first_s: frames[0].timestamp_s,
                other_s: f.timestamp_s,
            });
        }
    }
    let initial: Vec<PoincareRotation> = rotations_vs_wavelength(&frames[0])?
        .into_iter()
        .map(|w| w.rotation.inverse())
        .collect();
    let mut fidelity = Vec::with_capacity(frames.len());
    fidelity.push(vec![1.0; wavelengths.len()]);
    for f in &frames[1..] {
        let row = rotations_vs_wavelength(f)?
            .iter()
            .zip(&initial)
            .map(|(w, undo)| fidelity_from_residual_rotation((*undo * w.rotation).angle()))
            .collect();
        fidelity.push(row);
    }
    Ok(TemporalMap {
        timestamps_s: frames.iter().map(|f| f.timestamp_s).collect(),
        wavelengths_nm: wavelengths,
        fidelity,
    })
}
