//! The simulated deployed fiber.
//!
//! A [`FiberChannel`] holds one Poincaré rotation per point of a 1 nm
//! wavelength grid, a loss budget and a drift process. Channels are values:
//! [`FiberChannel::step_drift`] returns an evolved copy, while
//! [`FiberChannel::advance`] evolves in place for long simulations.

mod drift;
mod estimate;
mod loss;

use std::f64::consts::TAU;

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polarization::{PoincareRotation, StokesVector};

pub use drift::DriftProcess;
pub use estimate::{estimate_rotation, MIN_RESPONSE_DOP, PARALLEL_TOLERANCE, PROBE_FRAME};
pub use loss::{total_loss_db, transmission, LossBudget, LossElement, METRO_FIBER_LOSS_DB};

/// Rotations are re-projected onto SO(3) after this many drift steps.
pub const REORTHONORMALIZE_EVERY: u64 = 1000;

/// Uniform wavelength grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WavelengthGrid {
    pub start_nm: f64,
    pub step_nm: f64,
    pub count: usize,
}

impl Default for WavelengthGrid {
    /// 1260–1350 nm in 1 nm steps.
    fn default() -> Self {
        WavelengthGrid {
            start_nm: 1260.0,
            step_nm: 1.0,
            count: 91,
        }
    }
}

impl WavelengthGrid {
    pub fn new(start_nm: f64, step_nm: f64, count: usize) -> Result<Self> {
        if count == 0 || !(step_nm > 0.0) || !start_nm.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "invalid wavelength grid start={start_nm} step={step_nm} count={count}"
            )));
        }
        Ok(WavelengthGrid {
            start_nm,
            step_nm,
            count,
        })
    }

    /// A single-wavelength grid.
    pub fn single(wavelength_nm: f64) -> Self {
        WavelengthGrid {
            start_nm: wavelength_nm,
            step_nm: 1.0,
            count: 1,
        }
    }

    pub fn end_nm(&self) -> f64 {
        self.wavelength(self.count - 1)
    }

    pub fn wavelength(&self, index: usize) -> f64 {
        self.start_nm + self.step_nm * index as f64
    }

    pub fn wavelengths(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count).map(|i| self.wavelength(i))
    }

    /// Index of the nearest grid point, or an error outside the grid's
    /// range (half a step of slack at either end).
    pub fn snap(&self, wavelength_nm: f64) -> Result<usize> {
        let pos = (wavelength_nm - self.start_nm) / self.step_nm;
        let idx = pos.round();
        if !pos.is_finite() || idx < 0.0 || idx > (self.count - 1) as f64 {
            return Err(Error::WavelengthOutOfRange {
                wavelength_nm,
                min_nm: self.start_nm,
                max_nm: self.end_nm(),
            });
        }
        Ok(idx as usize)
    }
}

/// Polarimeter with additive Gaussian noise on each Stokes component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolarimeterModel {
    /// Measurements per second.
    pub rate_hz: f64,
    /// Standard deviation of the noise on each normalized component.
    pub noise_sigma: f64,
}

impl Default for PolarimeterModel {
    fn default() -> Self {
        PolarimeterModel {
            rate_hz: 1e4,
            noise_sigma: 0.005,
        }
    }
}

impl PolarimeterModel {
    pub fn noiseless() -> Self {
        PolarimeterModel {
            noise_sigma: 0.0,
            ..PolarimeterModel::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate_hz > 0.0) || !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "polarimeter rate {} Hz / noise {} invalid",
                self.rate_hz, self.noise_sigma
            )));
        }
        Ok(())
    }

    /// One reading of the true (unit) Stokes direction `s`.
    pub fn measure<R: Rng + ?Sized>(&self, s: &Vector3<f64>, rng: &mut R) -> StokesVector {
        self.measure_averaged(s, 1, rng)
    }

    /// Mean of `samples` readings. The average of `n` independent readings
    /// has per-component noise `sigma / sqrt(n)`.
    ///
    /// Noise perturbs the measured direction; the result is rescaled to the
    /// true degree of polarization, which keeps it inside the Poincaré ball
    /// and leaves only an `O(sigma^2)` bias on the mean.
    pub fn measure_averaged<R: Rng + ?Sized>(&self, s: &Vector3<f64>, samples: usize, rng: &mut R) -> StokesVector {
        let dop = s.norm().min(1.0);
        if self.noise_sigma == 0.0 || dop == 0.0 {
            return StokesVector::clamped(*s);
        }
        let sigma = self.noise_sigma / (samples.max(1) as f64).sqrt();
        let noisy = s + Vector3::from_fn(|_, _| {
            let z: f64 = StandardNormal.sample(rng);
            sigma * z
        });
        match noisy.try_normalize(0.0) {
            Some(u) => StokesVector::clamped(u * dop),
            None => StokesVector::clamped(*s),
        }
    }

    /// Wall-clock time of `samples` readings.
    pub fn duration_s(&self, samples: usize) -> f64 {
        samples as f64 / self.rate_hz
    }
}

/// Parameters for a synthetic dispersive fiber built from birefringent
/// sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    /// Number of concatenated birefringent sections.
    pub plates: usize,
    /// Mean retardance slope of each section (rad/nm); individual slopes are
    /// drawn uniformly from `[0.5, 1.5]` times this value.
    pub dispersion_rad_per_nm: f64,
    pub grid: WavelengthGrid,
    /// Reference wavelength about which retardances are linearized (nm).
    pub center_nm: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            plates: 3,
            dispersion_rad_per_nm: 0.02,
            grid: WavelengthGrid::default(),
            center_nm: 1300.0,
        }
    }
}

/// A simulated deployed fiber.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberChannel {
    grid: WavelengthGrid,
    rotations: Vec<PoincareRotation>,
    pub loss: LossBudget,
    pub drift: DriftProcess,
    /// Largest allowed rotation between adjacent grid points (rad/nm).
    pub max_rotation_per_nm: f64,
    time_s: f64,
    steps: u64,
    jumps: u64,
}

impl FiberChannel {
    pub const DEFAULT_MAX_ROTATION_PER_NM: f64 = 1.0;

    /// A lossless, static channel that leaves every polarization unchanged.
    pub fn identity(grid: WavelengthGrid) -> Self {
        FiberChannel {
            grid,
            rotations: vec![PoincareRotation::identity(); grid.count],
            loss: LossBudget::empty(),
            drift: DriftProcess::frozen(),
            max_rotation_per_nm: Self::DEFAULT_MAX_ROTATION_PER_NM,
            time_s: 0.0,
            steps: 0,
            jumps: 0,
        }
    }

    /// Wraps an explicit rotation field, checking continuity in wavelength.
    pub fn from_rotations(grid: WavelengthGrid, rotations: Vec<PoincareRotation>) -> Result<Self> {
        if rotations.len() != grid.count {
            return Err(Error::InvalidArgument(format!(
                "{} rotations for a grid of {} wavelengths",
                rotations.len(),
                grid.count
            )));
        }
        let ch = FiberChannel {
            rotations,
            ..FiberChannel::identity(grid)
        };
        ch.check_continuity()?;
        Ok(ch)
    }

    /// The same rotation at every wavelength.
    pub fn uniform(grid: WavelengthGrid, rotation: PoincareRotation) -> Self {
        FiberChannel {
            rotations: vec![rotation; grid.count],
            ..FiberChannel::identity(grid)
        }
    }

    pub fn with_loss(mut self, loss: LossBudget) -> Self {
        self.loss = loss;
        self
    }

    pub fn with_drift(mut self, drift: DriftProcess) -> Self {
        self.drift = drift;
        self
    }

    fn check_continuity(&self) -> Result<()> {
        for (k, pair) in self.rotations.windows(2).enumerate() {
            let per_nm = (pair[0].inverse() * pair[1]).angle() / self.grid.step_nm;
            if per_nm > self.max_rotation_per_nm {
                return Err(Error::InvalidArgument(format!(
                    "rotation field jumps {per_nm:.3} rad/nm at {} nm (limit {})",
                    self.grid.wavelength(k),
                    self.max_rotation_per_nm
                )));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> &WavelengthGrid {
        &self.grid
    }

    pub fn rotations(&self) -> &[PoincareRotation] {
        &self.rotations
    }

    /// Rotation at the grid point nearest `wavelength_nm`.
    pub fn rotation_at(&self, wavelength_nm: f64) -> Result<&PoincareRotation> {
        Ok(&self.rotations[self.grid.snap(wavelength_nm)?])
    }

    /// Simulated time since construction (s).
    pub fn time_s(&self) -> f64 {
        self.time_s
    }

    /// Number of drift steps taken.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Number of discrete jump events so far.
    pub fn jump_count(&self) -> u64 {
        self.jumps
    }

    /// Polarimeter reading of probe `s_in` after the fiber at the current
    /// time.
    pub fn probe_response<R: Rng + ?Sized>(
        &self,
        wavelength_nm: f64,
        s_in: &StokesVector,
        polarimeter: &PolarimeterModel,
        rng: &mut R,
    ) -> Result<StokesVector> {
        if (s_in.dop() - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidArgument(format!("probe {s_in} is not fully polarized")));
        }
        let r = self.rotation_at(wavelength_nm)?;
        Ok(polarimeter.measure(&(r.matrix() * s_in.to_vector()), rng))
    }

    /// Evolved copy of the channel after `dt_s` seconds of drift.
    pub fn step_drift<R: Rng + ?Sized>(&self, dt_s: f64, rng: &mut R) -> FiberChannel {
        let mut next = self.clone();
        next.advance(dt_s, rng);
        next
    }

    /// Evolves the channel in place by `dt_s` seconds and returns the number
    /// of jump events that occurred. Non-positive `dt_s` is a no-op.
    pub fn advance<R: Rng + ?Sized>(&mut self, dt_s: f64, rng: &mut R) -> usize {
        if !(dt_s > 0.0) {
            return 0;
        }
        self.time_s += dt_s;
        self.steps += 1;
        if self.drift.is_frozen() {
            return 0;
        }
        if self.drift.walk_rate_rad_per_sqrt_hour > 0.0 {
            let incs = self
                .drift
                .walk_increments(dt_s, self.grid.count, self.grid.step_nm, rng);
            for (r, inc) in self.rotations.iter_mut().zip(incs) {
                *r = inc * *r;
            }
        }
        let jumps = self.drift.sample_jumps(dt_s, rng);
        for j in &jumps {
            for r in self.rotations.iter_mut() {
                *r = *j * *r;
            }
        }
        self.jumps += jumps.len() as u64;
        if self.steps % REORTHONORMALIZE_EVERY == 0 {
            for r in self.rotations.iter_mut() {
                *r = r.reorthonormalized();
            }
        }
        jumps.len()
    }

    /// Largest deviation from orthonormality over the rotation field.
    pub fn max_orthonormality_error(&self) -> f64 {
        self.rotations
            .iter()
            .map(|r| r.orthonormality_error())
            .fold(0.0, f64::max)
    }
}

/// Synthetic fiber made of `plates` birefringent sections with random axes
/// and retardances varying linearly with wavelength.
pub fn synth_dispersive_channel<R: Rng + ?Sized>(params: &SynthParams, rng: &mut R) -> Result<FiberChannel> {
    if !(params.dispersion_rad_per_nm >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "dispersion {} rad/nm must be >= 0",
            params.dispersion_rad_per_nm
        )));
    }
    let grid = params.grid;
    let plates: Vec<(Vector3<f64>, f64, f64)> = (0..params.plates)
        .map(|_| {
            let axis = Vector3::from_fn(|_, _| StandardNormal.sample(rng));
            let slope = params.dispersion_rad_per_nm * rng.random_range(0.5..1.5);
            let offset = rng.random_range(0.0..TAU);
            (axis, slope, offset)
        })
        .collect();
    let rotations = grid
        .wavelengths()
        .map(|lambda| {
            plates
                .iter()
                .fold(PoincareRotation::identity(), |acc, (axis, slope, offset)| {
                    let retardance = offset + slope * (lambda - params.center_nm);
                    PoincareRotation::from_axis_angle(*axis, retardance) * acc
                })
        })
        .collect();
    FiberChannel::from_rotations(grid, rotations)
}
