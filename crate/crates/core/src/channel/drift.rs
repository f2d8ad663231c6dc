//! Temporal drift of the fiber's rotation field: a random walk on SO(3)
//! that is correlated across wavelength, plus rare common jumps.

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, LogNormal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polarization::PoincareRotation;

/// Parameters of the drift process. The defaults are synthetic, not values
/// measured on any particular fiber.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DriftProcess {
    /// Random-walk angular diffusion rate (rad/√hour).
    pub walk_rate_rad_per_sqrt_hour: f64,
    /// Mean number of discrete jumps per day.
    pub jump_rate_per_day: f64,
    /// Mean of `ln(jump angle / rad)`.
    pub jump_log_mean: f64,
    /// Standard deviation of `ln(jump angle / rad)`.
    pub jump_log_sigma: f64,
    /// Wavelength scale over which the walk's increments decorrelate (nm).
    pub decorrelation_nm: f64,
}

impl Default for DriftProcess {
    fn default() -> Self {
        DriftProcess {
            walk_rate_rad_per_sqrt_hour: 0.02,
            jump_rate_per_day: 2.0,
            jump_log_mean: 0.6f64.ln(),
            jump_log_sigma: 0.5,
            decorrelation_nm: 20.0,
        }
    }
}

impl DriftProcess {
    /// No drift at all.
    pub fn frozen() -> Self {
        DriftProcess {
            walk_rate_rad_per_sqrt_hour: 0.0,
            jump_rate_per_day: 0.0,
            ..DriftProcess::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("walk_rate_rad_per_sqrt_hour", self.walk_rate_rad_per_sqrt_hour),
            ("jump_rate_per_day", self.jump_rate_per_day),
            ("jump_log_sigma", self.jump_log_sigma),
            ("decorrelation_nm", self.decorrelation_nm),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidArgument(format!("drift {name} = {v} must be >= 0")));
            }
        }
        if !self.jump_log_mean.is_finite() {
            return Err(Error::InvalidArgument("drift jump_log_mean must be finite".into()));
        }
        Ok(())
    }

    pub fn is_frozen(&self) -> bool {
        self.walk_rate_rad_per_sqrt_hour == 0.0 && self.jump_rate_per_day == 0.0
    }

    /// Per-wavelength random-walk increments for an interval `dt_s` on a grid
    /// of `n` points spaced `step_nm` apart.
    ///
    /// Each increment has angle `|N(0, rate^2 dt)|`; the signed angle and the
    /// axis are AR(1) processes along wavelength with correlation
    /// `exp(-step / decorrelation)`.
    pub(crate) fn walk_increments<R: Rng + ?Sized>(
        &self,
        dt_s: f64,
        n: usize,
        step_nm: f64,
        rng: &mut R,
    ) -> Vec<PoincareRotation> {
        let sigma = self.walk_rate_rad_per_sqrt_hour * (dt_s / 3600.0).sqrt();
        let rho = if self.decorrelation_nm > 0.0 {
            (-step_nm / self.decorrelation_nm).exp()
        } else {
            0.0
        };
        let innovation = (1.0 - rho * rho).sqrt();
        let mut z: f64 = StandardNormal.sample(rng);
        let mut axis = gaussian3(rng);
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            if k > 0 {
                let dz: f64 = StandardNormal.sample(rng);
                z = rho * z + innovation * dz;
                axis = axis * rho + gaussian3(rng) * innovation;
            }
            let omega = match axis.try_normalize(0.0) {
                Some(a) => a * (sigma * z),
                None => Vector3::zeros(),
            };
            out.push(PoincareRotation::from_rotation_vector(omega));
        }
        out
    }

    /// Common jump rotations occurring during an interval `dt_s`.
    pub(crate) fn sample_jumps<R: Rng + ?Sized>(&self, dt_s: f64, rng: &mut R) -> Vec<PoincareRotation> {
        let mean = self.jump_rate_per_day * dt_s / 86_400.0;
        if mean <= 0.0 {
            return Vec::new();
        }
        let count = Poisson::new(mean).map(|p| p.sample(rng) as usize).unwrap_or(0);
        let angle = LogNormal::new(self.jump_log_mean, self.jump_log_sigma).expect("validated drift parameters");
        (0..count)
            .map(|_| {
                let a = gaussian3(rng);
                PoincareRotation::from_axis_angle(a, angle.sample(rng))
            })
            .collect()
    }
}

fn gaussian3<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    Vector3::new(
        StandardNormal.sample(rng),
        StandardNormal.sample(rng),
        StandardNormal.sample(rng),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn validation() {
        assert!(DriftProcess::default().validate().is_ok());
        let bad = DriftProcess {
            jump_rate_per_day: -1.0,
            ..DriftProcess::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn increment_angles_have_requested_spread() {
        let d = DriftProcess {
            walk_rate_rad_per_sqrt_hour: 0.1,
            ..DriftProcess::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut sum_sq = 0.0;
        let trials = 20_000;
        for _ in 0..trials {
            let inc = d.walk_increments(3600.0, 1, 1.0, &mut rng);
            sum_sq += inc[0].angle().powi(2);
        }
        // E[angle^2] = rate^2 dt = 0.01 for one hour.
        let mean_sq = sum_sq / trials as f64;
        assert!((mean_sq - 0.01).abs() < 0.0005, "{mean_sq}");
    }

    #[test]
    fn neighbouring_wavelengths_move_together() {
        let d = DriftProcess {
            walk_rate_rad_per_sqrt_hour: 0.1,
            decorrelation_nm: 50.0,
            ..DriftProcess::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let inc = d.walk_increments(3600.0, 91, 1.0, &mut rng);
        let mut neighbour = 0.0;
        let mut far = 0.0;
        for k in 0..90 {
            neighbour += (inc[k].inverse() * inc[k + 1]).angle();
        }
        for k in 0..45 {
            far += (inc[k].inverse() * inc[k + 45]).angle();
        }
        assert!(neighbour / 90.0 < far / 45.0);
    }
}
