//! Full dispersion analysis of a sweep and its figure-panel exports.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    corrected_fidelity_curve, rotation_per_nm, rotation_relative_to_mean, rotations_vs_wavelength,
    spectral_weighted_fidelity, temporal_fidelity_map, PolarimeterSweep, TemporalMap, WavelengthRotation,
};
use crate::error::{Error, Result};
use crate::table::{ensure_dir, write_csv, write_json};

/// Column headers of every exported panel, keyed by file stem.
pub const FIGURE_HEADERS: [(&str, &[&str]); 7] = [
    ("fig2a", &["wavelength_nm", "theta_rad"]),
    ("fig2b", &["wavelength_nm", "theta_rel_rad"]),
    ("fig2c", &["wavelength_mid_nm", "theta_step_rad_per_nm"]),
    ("fig2d", &["wavelength_nm", "fidelity"]),
    ("fig2e", &["fwhm_nm", "fidelity"]),
    ("fig2f", &["center_nm", "fidelity"]),
    ("fig3", &["timestamp_s", "wavelength_nm", "fidelity"]),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisOptions {
    /// Wavelength at which the fiber rotation is undone (nm).
    pub reference_nm: f64,
    /// Spectral widths for the bandwidth scan (nm).
    pub fwhm_nm: Vec<f64>,
    /// Spectral width used for the center-wavelength scan (nm).
    pub center_scan_fwhm_nm: f64,
    /// Timestamp analyzed for the single-time panels; the first if unset.
    pub timestamp_s: Option<f64>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            reference_nm: 1300.0,
            fwhm_nm: (0..=40).map(f64::from).collect(),
            center_scan_fwhm_nm: 10.0,
            timestamp_s: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionReport {
    pub label: String,
    pub timestamp_s: f64,
    pub reference_nm: f64,
    pub rotations: Vec<WavelengthRotation>,
    /// (wavelength, angle relative to the mean rotation).
    pub relative_to_mean: Vec<(f64, f64)>,
    /// (midpoint wavelength, rotation per nm).
    pub rotation_per_nm: Vec<(f64, f64)>,
    /// (wavelength, fidelity after correction at `reference_nm`).
    pub corrected_fidelity: Vec<(f64, f64)>,
    /// (FWHM, spectrally averaged fidelity centered on `reference_nm`).
    pub spectral_fidelity: Vec<(f64, f64)>,
    pub center_scan_fwhm_nm: f64,
    /// (center wavelength, averaged fidelity when correcting at that center).
    pub center_scan: Vec<(f64, f64)>,
    pub temporal: Option<TemporalMap>,
}

/// Runs every analysis step on one sweep.
pub fn analyze_sweep(sweep: &PolarimeterSweep, options: &AnalysisOptions) -> Result<DispersionReport> {
    let frame = match options.timestamp_s {
        None => &sweep.frames()[0],
        Some(t) => sweep
            .frame_at(t)
            .ok_or_else(|| Error::InvalidArgument(format!("no sweep recorded at t={t} s")))?,
    };
    let rotations = rotations_vs_wavelength(frame)?;
    let relative_to_mean = if rotations.len() >= 2 {
        rotation_relative_to_mean(&rotations)?
    } else {
        Vec::new()
    };
    let corrected_fidelity = corrected_fidelity_curve(&rotations, options.reference_nm)?;
    let spectral_fidelity = options
        .fwhm_nm
        .iter()
        .map(|&w| {
            Ok((
                w,
                spectral_weighted_fidelity(&corrected_fidelity, options.reference_nm, w)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let center_scan = rotations
        .iter()
        .map(|r| {
            let curve = corrected_fidelity_curve(&rotations, r.wavelength_nm)?;
            let f = spectral_weighted_fidelity(&curve, r.wavelength_nm, options.center_scan_fwhm_nm)?;
            Ok((r.wavelength_nm, f))
        })
        .collect::<Result<Vec<_>>>()?;
    let temporal = if sweep.frames().len() >= 2 {
        Some(temporal_fidelity_map(sweep)?)
    } else {
        None
    };
    Ok(DispersionReport {
        label: sweep.label.clone(),
        timestamp_s: frame.timestamp_s,
        reference_nm: options.reference_nm,
        rotation_per_nm: rotation_per_nm(&rotations),
        rotations,
        relative_to_mean,
        corrected_fidelity,
        spectral_fidelity,
        center_scan_fwhm_nm: options.center_scan_fwhm_nm,
        center_scan,
        temporal,
    })
}

fn pairs(rows: &[(f64, f64)]) -> impl Iterator<Item = Vec<String>> + '_ {
    rows.iter().map(|(a, b)| vec![a.to_string(), b.to_string()])
}

impl DispersionReport {
    /// Writes `report.json` and one CSV per panel into `dir`. `fig3.csv` is
    /// only written for multi-timestamp sweeps. Returns the written paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
        ensure_dir(dir)?;
        let mut written = Vec::new();
        let mut emit = |stem: &str, rows: Vec<Vec<String>>| -> Result<()> {
            let header = FIGURE_HEADERS
                .iter()
                .find(|(s, _)| *s == stem)
                .map(|(_, h)| *h)
                .unwrap_or(&[]);
            let path = dir.join(format!("{stem}.csv"));
            write_csv(&path, header, rows)?;
            written.push(path);
            Ok(())
        };
        emit(
            "fig2a",
            self.rotations
                .iter()
                .map(|r| vec![r.wavelength_nm.to_string(), r.angle.to_string()])
                .collect(),
        )?;
        emit("fig2b", pairs(&self.relative_to_mean).collect())?;
        emit("fig2c", pairs(&self.rotation_per_nm).collect())?;
        emit("fig2d", pairs(&self.corrected_fidelity).collect())?;
        emit("fig2e", pairs(&self.spectral_fidelity).collect())?;
        emit("fig2f", pairs(&self.center_scan).collect())?;
        if let Some(map) = &self.temporal {
            let mut rows = Vec::new();
            for (t, row) in map.timestamps_s.iter().zip(&map.fidelity) {
                for (l, f) in map.wavelengths_nm.iter().zip(row) {
                    rows.push(vec![t.to_string(), l.to_string(), f.to_string()]);
                }
            }
            emit("fig3", rows)?;
        }
        let json = dir.join("report.json");
        write_json(&json, self)?;
        written.push(json);
        Ok(written)
    }
}
