//! Probabilistic pair source and coincidence detection.
//!
//! The source emits `|Phi+>` pairs mixed with white noise whose weight grows
//! with the pair rate: `g_SI = 1 + kappa / rate` and the Werner parameter
//! `a = (g_SI - 1)/(g_SI + 1)`. Counts in each measured mode pair are
//! Poisson with mean set by the pair rate, link transmission, detector
//! efficiencies, dwell time and the mode-pair probability.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polarization::{werner_state, MeasurementMode, PoincareRotation, TwoQubitState};

/// Default noise constant (pairs/s), fitted to the quoted operating points.
pub const DEFAULT_KAPPA: f64 = 5.5e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceModel {
    /// Rate constant in `g_SI = 1 + kappa / rate` (pairs/s).
    pub kappa: f64,
    /// Highest pair rate the source can be driven at (pairs/s).
    pub max_rate: f64,
}

impl Default for SourceModel {
    fn default() -> Self {
        Self {
            kappa: DEFAULT_KAPPA,
            max_rate: 1e6,
        }
    }
}

impl SourceModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::InvalidArgument(format!("kappa must be > 0, got {}", self.kappa)));
        }
        if !(self.max_rate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "max rate must be > 0, got {}",
                self.max_rate
            )));
        }
        Ok(())
    }

    pub fn gsi_at_rate(&self, rate: f64) -> Result<f64> {
        gsi_at_rate(self, rate)
    }

    pub fn state_at_rate(&self, rate: f64) -> Result<TwoQubitState> {
        state_at_rate(self, rate)
    }

    /// Fidelity of the emitted state at `rate`.
    pub fn fidelity_at_rate(&self, rate: f64) -> Result<f64> {
        fidelity_from_gsi(gsi_at_rate(self, rate)?)
    }
}

/// `1 + kappa / rate`.
pub fn gsi_at_rate(src: &SourceModel, rate: f64) -> Result<f64> {
    src.validate()?;
    if !(rate > 0.0) || rate > src.max_rate {
        return Err(Error::InvalidArgument(format!(
            "pair rate {rate} outside (0, {}]",
            src.max_rate
        )));
    }
    Ok(1.0 + src.kappa / rate)
}

/// Werner parameter for a given cross-correlation.
pub fn werner_parameter(g: f64) -> Result<f64> {
    if !(g >= 1.0) {
        return Err(Error::InvalidArgument(format!("g_SI must be >= 1, got {g}")));
    }
    if g.is_infinite() {
        return Ok(1.0);
    }
    Ok((g - 1.0) / (g + 1.0))
}

/// Inverse of [`werner_parameter`]: `(1 + a)/(1 - a)`.
pub fn gsi_from_werner(a: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::InvalidArgument(format!("Werner parameter {a} outside [0, 1]")));
    }
    Ok((1.0 + a) / (1.0 - a))
}

/// `1 - 3 / (2 (1 + g))`.
pub fn fidelity_from_gsi(g: f64) -> Result<f64> {
    if !(g >= 1.0) {
        return Err(Error::InvalidArgument(format!("g_SI must be >= 1, got {g}")));
    }
    Ok(1.0 - 1.5 / (1.0 + g))
}

pub fn state_at_rate(src: &SourceModel, rate: f64) -> Result<TwoQubitState> {
    werner_state(werner_parameter(gsi_at_rate(src, rate)?)?)
}

/// Detector pair: the local arm (first photon) and the fiber arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorModel {
    pub efficiency_local: f64,
    pub efficiency_remote: f64,
    /// Dark count rate of each detector (counts/s).
    pub dark_count_rate: f64,
    /// Coincidence window used for accidentals between dark counts (s).
    pub coincidence_window_s: f64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self {
            efficiency_local: 0.68,
            efficiency_remote: 0.90,
            dark_count_rate: 0.0,
            coincidence_window_s: 1e-9,
        }
    }
}

impl DetectorModel {
    pub fn ideal() -> Self {
        Self {
            efficiency_local: 1.0,
            efficiency_remote: 1.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, eta) in [("local", self.efficiency_local), ("remote", self.efficiency_remote)] {
            if !(eta > 0.0 && eta <= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} detector efficiency {eta} outside (0, 1]"
                )));
            }
        }
        if !(self.dark_count_rate >= 0.0 && self.coincidence_window_s >= 0.0) {
            return Err(Error::InvalidArgument("dark count rate and window must be >= 0".into()));
        }
        Ok(())
    }

    /// Product of both efficiencies.
    pub fn joint_efficiency(&self) -> f64 {
        self.efficiency_local * self.efficiency_remote
    }

    fn accidental_rate(&self) -> f64 {
        self.dark_count_rate * self.dark_count_rate * self.coincidence_window_s
    }
}

/// Ordered pair of analyzer settings, local photon first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModePair(pub MeasurementMode, pub MeasurementMode);

impl ModePair {
    pub fn label(&self) -> String {
        format!("{}{}", self.0.as_char(), self.1.as_char())
    }

    pub fn parse(s: &str) -> Result<Self> {
        let mut chars = s.chars();
        match (chars.next(), chars.next(), chars.next()) {
            (Some(a), Some(b), None) => match (MeasurementMode::from_char(a), MeasurementMode::from_char(b)) {
                (Some(a), Some(b)) => Ok(ModePair(a, b)),
                _ => Err(Error::InvalidArgument(format!("unknown mode pair {s:?}"))),
            },
            _ => Err(Error::InvalidArgument(format!("mode pair {s:?} must be two letters"))),
        }
    }
}

impl fmt::Display for ModePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// The eight linear-polarization mode pairs used by the fidelity bounds.
pub const BOUND_MODES: [ModePair; 8] = {
    use MeasurementMode::*;
    [
        ModePair(H, H),
        ModePair(H, V),
        ModePair(V, H),
        ModePair(V, V),
        ModePair(D, D),
        ModePair(D, A),
        ModePair(A, D),
        ModePair(A, A),
    ]
};

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementPlan {
    pub modes: Vec<ModePair>,
    /// Integration time per mode pair (s).
    pub dwell_s: f64,
}

impl MeasurementPlan {
    pub fn new(modes: Vec<ModePair>, dwell_s: f64) -> Result<Self> {
        if !(dwell_s > 0.0 && dwell_s.is_finite()) {
            return Err(Error::InvalidArgument(format!("dwell must be > 0, got {dwell_s}")));
        }
        if modes.is_empty() {
            return Err(Error::InvalidArgument("measurement plan has no mode pairs".into()));
        }
        Ok(Self { modes, dwell_s })
    }

    /// All eight bound modes with a common dwell.
    pub fn bound_modes(dwell_s: f64) -> Result<Self> {
        Self::new(BOUND_MODES.to_vec(), dwell_s)
    }
}

/// Recorded coincidences. Serialized as
/// `{"dwell_s": number, "counts": {"HH": int, ...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoincidenceCounts {
    pub dwell_s: f64,
    counts: BTreeMap<String, u64>,
}

impl CoincidenceCounts {
    pub fn new(dwell_s: f64) -> Result<Self> {
        if !(dwell_s > 0.0 && dwell_s.is_finite()) {
            return Err(Error::InvalidArgument(format!("dwell must be > 0, got {dwell_s}")));
        }
        Ok(Self {
            dwell_s,
            counts: BTreeMap::new(),
        })
    }

    /// Builds counts from `(label, count)` pairs such as `("HH", 5000)`.
    pub fn from_pairs<'a>(dwell_s: f64, pairs: impl IntoIterator<Item = (&'a str, u64)>) -> Result<Self> {
        let mut c = Self::new(dwell_s)?;
        for (label, n) in pairs {
            c.set(ModePair::parse(label)?, n);
        }
        Ok(c)
    }

    pub fn set(&mut self, mode: ModePair, count: u64) {
        self.counts.insert(mode.label(), count);
    }

    pub fn get(&self, mode: ModePair) -> Option<u64> {
        self.counts.get(&mode.label()).copied()
    }

    /// Count for `mode`, or a `MissingMode` error.
    pub fn require(&self, mode: ModePair) -> Result<u64> {
        self.get(mode).ok_or_else(|| Error::MissingMode(mode.label()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (ModePair, u64)> + '_ {
        self.counts
            .iter()
            .filter_map(|(k, v)| ModePair::parse(k).ok().map(|m| (m, *v)))
    }

    fn validate(&self) -> Result<()> {
        if !(self.dwell_s > 0.0 && self.dwell_s.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "dwell must be > 0, got {}",
                self.dwell_s
            )));
        }
        for k in self.counts.keys() {
            ModePair::parse(k)?;
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Poisson draw that accepts a zero mean.
pub(crate) fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean > 0.0 {
        Poisson::new(mean).map(|d| d.sample(rng) as u64).unwrap_or(0)
    } else {
        0
    }
}

/// Simulates one pass of `plan`. `rate` is the pair rate delivered into the
/// link and `transmission` the fiber-arm transmission; `rotation`, if
/// given, acts on the fiber photon before detection.
pub fn simulate_counts<R: Rng + ?Sized>(
    rho: &TwoQubitState,
    rate: f64,
    transmission: f64,
    detectors: &DetectorModel,
    plan: &MeasurementPlan,
    rotation: Option<&PoincareRotation>,
    rng: &mut R,
) -> Result<CoincidenceCounts> {
    if !(rate >= 0.0 && rate.is_finite()) {
        return Err(Error::InvalidArgument(format!("pair rate must be >= 0, got {rate}")));
    }
    if !(transmission > 0.0 && transmission <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "transmission {transmission} outside (0, 1]"
        )));
    }
    detectors.validate()?;
    let rotated;
    let state = match rotation {
        Some(r) => {
            rotated = rho.apply_one_sided(r);
            &rotated
        }
        None => rho,
    };
    let flux = rate * transmission * detectors.joint_efficiency() * plan.dwell_s;
    let accidental = detectors.accidental_rate() * plan.dwell_s;
    let mut counts = CoincidenceCounts::new(plan.dwell_s)?;
    for &mode in &plan.modes {
        let mean = flux * state.coincidence_probability(mode.0, mode.1) + accidental;
        counts.set(mode, poisson(mean, rng));
    }
    Ok(counts)
}

/// `(C_HH + C_HV + C_VH + C_VV) / (eta_1 eta_2 dwell)`.
pub fn pair_rate_from_counts(counts: &CoincidenceCounts, detectors: &DetectorModel) -> Result<f64> {
    let total: u64 = BOUND_MODES[..4]
        .iter()
        .map(|&m| counts.require(m))
        .sum::<Result<u64>>()?;
    Ok(total as f64 / (detectors.joint_efficiency() * counts.dwell_s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polarization::bell_phi_plus;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const PAIRS: [&str; 8] = ["HH", "HV", "VH", "VV", "DD", "DA", "AD", "AA"];

    #[test]
    fn gsi_examples() {
        let src = SourceModel::default();
        assert!((src.gsi_at_rate(2e5).unwrap() - 28.5).abs() < 1e-12);
        assert!((src.gsi_at_rate(2e4).unwrap() - 276.0).abs() < 1e-12);
        assert!((src.fidelity_at_rate(2e4).unwrap() - 0.9946).abs() < 1e-4);
        assert!((src.fidelity_at_rate(2e5).unwrap() - 0.949).abs() < 1e-3);
        assert!((src.fidelity_at_rate(5e5).unwrap() - (1.0 - 3.0 / 26.0)).abs() < 1e-12);
        let huge = SourceModel { max_rate: 1e30, ..src };
        assert!(huge.gsi_at_rate(1e30).unwrap() - 1.0 < 1e-20);
        assert!(src.gsi_at_rate(0.0).is_err());
        assert!(src.gsi_at_rate(-1.0).is_err());
        assert!(src.gsi_at_rate(2e6).is_err());
        assert!(SourceModel { kappa: 0.0, ..src }.validate().is_err());
    }

    #[test]
    fn fidelity_from_gsi_examples() {
        assert_eq!(fidelity_from_gsi(1.0).unwrap(), 0.25);
        assert_eq!(fidelity_from_gsi(f64::INFINITY).unwrap(), 1.0);
        assert!((fidelity_from_gsi(29.0).unwrap() - 0.95).abs() < 1e-12);
        let oracle = werner_state(werner_parameter(29.0).unwrap())
            .unwrap()
            .fidelity_to_phi_plus();
        assert!((oracle - 0.95).abs() < 1e-12);
        assert!(fidelity_from_gsi(0.999).is_err());
        assert!(fidelity_from_gsi(f64::NAN).is_err());
    }

    #[test]
    fn fidelity_decreases_with_rate() {
        let src = SourceModel::default();
        let rates: Vec<f64> = (0..50).map(|k| 1e3 * 1.12f64.powi(k)).collect();
        let f: Vec<f64> = rates.iter().map(|&r| src.fidelity_at_rate(r).unwrap()).collect();
        assert!(f.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn near_white_noise_state() {
        let src = SourceModel {
            kappa: 1e-9,
            max_rate: 1e6,
        };
        let rho = src.state_at_rate(1e6).unwrap();
        assert!((rho.fidelity_to_phi_plus() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn phi_plus_has_no_cross_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let plan = MeasurementPlan::bound_modes(10.0).unwrap();
        let c = simulate_counts(
            &bell_phi_plus(),
            1e5,
            1.0,
            &DetectorModel::ideal(),
            &plan,
            None,
            &mut rng,
        )
        .unwrap();
        for m in ["HV", "VH", "DA", "AD"] {
            assert_eq!(c.require(ModePair::parse(m).unwrap()).unwrap(), 0);
        }
    }

    #[test]
    fn poisson_mean_and_spread() {
        let plan = MeasurementPlan::new(vec![ModePair::parse("HH").unwrap()], 1.0).unwrap();
        let mut sum = 0.0;
        for seed in 0..200 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c = simulate_counts(
                &bell_phi_plus(),
                1e4,
                1.0,
                &DetectorModel::ideal(),
                &plan,
                None,
                &mut rng,
            )
            .unwrap();
            let n = c.require(ModePair::parse("HH").unwrap()).unwrap() as f64;
            assert!((n - 5000.0).abs() <= 300.0);
            sum += n;
        }
        assert!((sum / 200.0 - 5000.0).abs() < 4.0 * (5000.0f64 / 200.0).sqrt());
    }

    #[test]
    fn linear_basis_total_and_pair_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let det = DetectorModel::default();
        let plan = MeasurementPlan::bound_modes(1.0).unwrap();
        let rho = SourceModel::default().state_at_rate(2e5).unwrap();
        let r = PoincareRotation::random(&mut rng);
        let t = 0.0179;
        let c = simulate_counts(&rho, 2e5, t, &det, &plan, Some(&r), &mut rng).unwrap();
        let total: u64 = BOUND_MODES[..4].iter().map(|&m| c.require(m).unwrap()).sum();
        let expected = 2e5 * t * det.joint_efficiency();
        assert!((total as f64 - expected).abs() < 5.0 * expected.sqrt());
        let recovered = pair_rate_from_counts(&c, &det).unwrap();
        let sigma = expected.sqrt() / det.joint_efficiency();
        assert!((recovered - 2e5 * t).abs() < 5.0 * sigma);
    }

    #[test]
    fn pair_rate_examples() {
        let c = CoincidenceCounts::from_pairs(1.0, [("HH", 2500), ("VV", 2500), ("HV", 0), ("VH", 0)]).unwrap();
        assert_eq!(pair_rate_from_counts(&c, &DetectorModel::ideal()).unwrap(), 5000.0);
        let c = CoincidenceCounts::from_pairs(1.0, [("HH", 1710), ("VV", 1700), ("HV", 6), ("VH", 4)]).unwrap();
        let r = pair_rate_from_counts(&c, &DetectorModel::default()).unwrap();
        assert!((r - 5588.2).abs() < 0.05);
        let partial = CoincidenceCounts::from_pairs(1.0, [("HH", 10)]).unwrap();
        assert!(
            matches!(pair_rate_from_counts(&partial, &DetectorModel::ideal()), Err(Error::MissingMode(m)) if m == "HV")
        );
    }

    #[test]
    fn efficiency_and_transmission_commute() {
        let plan = MeasurementPlan::bound_modes(2.0).unwrap();
        let rho = SourceModel::default().state_at_rate(1e5).unwrap();
        let a = DetectorModel {
            efficiency_local: 0.5,
            efficiency_remote: 0.8,
            ..DetectorModel::default()
        };
        let b = DetectorModel {
            efficiency_local: 0.8,
            efficiency_remote: 0.5,
            ..DetectorModel::default()
        };
        let mut r1 = ChaCha8Rng::seed_from_u64(9);
        let mut r2 = ChaCha8Rng::seed_from_u64(9);
        let c1 = simulate_counts(&rho, 1e5, 0.25, &a, &plan, None, &mut r1).unwrap();
        let c2 = simulate_counts(&rho, 1e5, 0.25, &b, &plan, None, &mut r2).unwrap();
        assert_eq!(c1, c2);
    }

    #[test]
    fn dark_counts_add_accidentals() {
        let plan = MeasurementPlan::bound_modes(100.0).unwrap();
        let det = DetectorModel {
            dark_count_rate: 1e4,
            coincidence_window_s: 1e-6,
            ..DetectorModel::ideal()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let c = simulate_counts(&bell_phi_plus(), 0.0, 1.0, &det, &plan, None, &mut rng).unwrap();
        let hv = c.require(ModePair::parse("HV").unwrap()).unwrap() as f64;
        assert!((hv - 1e4).abs() < 500.0);
    }

    #[test]
    fn counts_json_round_trip() {
        let text = r#"{"dwell_s": 60, "counts": {"HH": 5000, "HV": 3, "VH": 1, "VV": 4990,
                       "DD": 4900, "DA": 20, "AD": 25, "AA": 4950}}"#;
        let c = CoincidenceCounts::from_json_str(text).unwrap();
        assert_eq!(c.dwell_s, 60.0);
        assert_eq!(c.iter().count(), 8);
        let back = CoincidenceCounts::from_json_str(&c.to_json_string().unwrap()).unwrap();
        assert_eq!(back, c);
        assert!(CoincidenceCounts::from_json_str(r#"{"dwell_s": 1, "counts": {"HX": 1}}"#).is_err());
        assert!(CoincidenceCounts::from_json_str(r#"{"dwell_s": 1, "counts": {"HH": -1}}"#).is_err());
        assert!(CoincidenceCounts::from_json_str(r#"{"dwell_s": 0, "counts": {}}"#).is_err());
        for p in PAIRS {
            assert_eq!(ModePair::parse(p).unwrap().label(), p);
        }
    }

    proptest! {
        #[test]
        fn werner_gsi_round_trip(a in 0.0f64..0.999) {
            let g = gsi_from_werner(a).unwrap();
            prop_assert!((werner_parameter(g).unwrap() - a).abs() < 1e-12);
        }

        #[test]
        fn state_fidelity_matches_closed_form(rate in 1.0f64..1e6) {
            let src = SourceModel::default();
            let f_state = src.state_at_rate(rate).unwrap().fidelity_to_phi_plus();
            let f_closed = fidelity_from_gsi(src.gsi_at_rate(rate).unwrap()).unwrap();
            prop_assert!((f_state - f_closed).abs() < 1e-12);
        }
    }
}
