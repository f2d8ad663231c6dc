//! Fidelity bounds from eight linear-polarization coincidence counts.
//!
//! With `F = (rho_HH,HH + rho_VV,VV)/2 + Re rho_HH,VV`, the populations come
//! straight from the H/V counts and the coherence is bounded in two ways:
//! by Cauchy-Schwarz on the populations (`L1`/`U1`, and `L3`/`U3` in the
//! D/A basis), and through the cross-basis correlator, which fixes
//! `Re(rho_HH,VV + rho_HV,VH)` so that only the smaller `HV`/`VH` coherence
//! remains to be bounded (`L2`/`U2`, and `L4`/`U4` with the bases swapped).
//! The reported interval is the highest lower and lowest upper bound.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polarization::TwoQubitState;
use crate::source::{poisson, CoincidenceCounts, BOUND_MODES};

/// How the diagonal-basis counts are normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Every expression divides by the H/V total `N`.
    #[default]
    LinearTotal,
    /// D/A counts are divided by their own total.
    PerBasis,
}

/// Form of the single-basis (population-only) expressions `L1, U1, L3, U3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SingleBasisForm {
    /// `(C_HH + C_VV)/(2N) -+ sqrt(C_HH C_VV)/N`, the Cauchy-Schwarz bound.
    #[default]
    Halved,
    /// `(C_HH + C_VV -+ sqrt(C_HH C_VV))/N`. Its lower bound exceeds the
    /// true fidelity for many states; kept for comparison only.
    AsPrinted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundOptions {
    pub normalization: Normalization,
    pub single_basis_form: SingleBasisForm,
}

/// Eight counts (or expected counts) in the order HH, HV, VH, VV, DD, DA,
/// AD, AA.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisCounts(pub [f64; 8]);

impl BasisCounts {
    pub fn from_counts(c: &CoincidenceCounts) -> Result<Self> {
        let mut out = [0.0; 8];
        for (slot, &mode) in out.iter_mut().zip(&BOUND_MODES) {
            *slot = c.require(mode)? as f64;
        }
        Ok(Self(out))
    }

    /// Exact expected counts `n * P(a, b)` for a state.
    pub fn from_state(rho: &TwoQubitState, n: f64) -> Self {
        let mut out = [0.0; 8];
        for (slot, mode) in out.iter_mut().zip(&BOUND_MODES) {
            *slot = n * rho.coincidence_probability(mode.0, mode.1);
        }
        Self(out)
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self(self.0.map(|c| c * k))
    }

    /// H/V total.
    pub fn linear_total(&self) -> f64 {
        self.0[..4].iter().sum()
    }

    pub fn diagonal_total(&self) -> f64 {
        self.0[4..].iter().sum()
    }
}

/// Raw values of the eight bound expressions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundExpressions {
    #[serde(rename = "L1")]
    pub l1: f64,
    #[serde(rename = "U1")]
    pub u1: f64,
    #[serde(rename = "L2")]
    pub l2: f64,
    #[serde(rename = "U2")]
    pub u2: f64,
    #[serde(rename = "L3")]
    pub l3: f64,
    #[serde(rename = "U3")]
    pub u3: f64,
    #[serde(rename = "L4")]
    pub l4: f64,
    #[serde(rename = "U4")]
    pub u4: f64,
}

impl BoundExpressions {
    pub fn lowers(&self) -> [f64; 4] {
        [self.l1, self.l2, self.l3, self.l4]
    }

    pub fn uppers(&self) -> [f64; 4] {
        [self.u1, self.u2, self.u3, self.u4]
    }

    pub fn to_map(&self) -> BTreeMap<&'static str, f64> {
        BTreeMap::from([
            ("L1", self.l1),
            ("U1", self.u1),
            ("L2", self.l2),
            ("U2", self.u2),
            ("L3", self.l3),
            ("U3", self.u3),
            ("L4", self.l4),
            ("U4", self.u4),
        ])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityBounds {
    pub lower: f64,
    pub upper: f64,
    pub sigma_lower: f64,
    pub sigma_upper: f64,
    pub expressions: BoundExpressions,
}

impl FidelityBounds {
    pub fn contains(&self, f: f64) -> bool {
        self.lower <= f && f <= self.upper
    }
}

/// Evaluates every expression.
pub fn bound_expressions(b: &BasisCounts, opts: &BoundOptions) -> Result<BoundExpressions> {
    let [hh, hv, vh, vv, dd, da, ad, aa] = b.0;
    if b.0.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
        return Err(Error::InvalidArgument("counts must be finite and >= 0".into()));
    }
    let n = b.linear_total();
    if !(n > 0.0) {
        return Err(Error::NoCoincidences);
    }
    let nd = match opts.normalization {
        Normalization::LinearTotal => n,
        Normalization::PerBasis => {
            let nd = b.diagonal_total();
            if !(nd > 0.0) {
                return Err(Error::InvalidArgument("no coincidences in the diagonal basis".into()));
            }
            nd
        }
    };
    let single = |x: f64, y: f64, norm: f64| match opts.single_basis_form {
        SingleBasisForm::Halved => ((x + y) / (2.0 * norm), (x * y).sqrt() / norm),
        SingleBasisForm::AsPrinted => ((x + y) / norm, (x * y).sqrt() / norm),
    };
    let (p1, c1) = single(hh, vv, n);
    let (p3, c3) = single(dd, aa, nd);

    // Population plus correlator of the other basis, halved.
    let pop_z = (hh + vv) / n;
    let corr_z = (hh + vv - hv - vh) / n;
    let pop_x = (dd + aa) / nd;
    let corr_x = (dd + aa - da - ad) / nd;
    let off_z = (hv * vh).sqrt() / n;
    let off_x = (da * ad).sqrt() / nd;

    Ok(BoundExpressions {
        l1: p1 - c1,
        u1: p1 + c1,
        l2: 0.5 * (pop_z + corr_x) - off_z,
        u2: 0.5 * (pop_z + corr_x) + off_z,
        l3: p3 - c3,
        u3: p3 + c3,
        l4: 0.5 * (pop_x + corr_z) - off_x,
        u4: 0.5 * (pop_x + corr_z) + off_x,
    })
}

/// `(max L, min U)` with the upper bound clamped to 1. Sampling noise can
/// push the best lower bound above the best upper bound; both are then
/// reported at their midpoint.
fn combine(e: &BoundExpressions) -> (f64, f64) {
    let lower = e.lowers().into_iter().fold(f64::NEG_INFINITY, f64::max);
    let upper = e.uppers().into_iter().fold(f64::INFINITY, f64::min).min(1.0);
    if lower > upper {
        let mid = 0.5 * (lower + upper);
        (mid, mid)
    } else {
        (lower, upper)
    }
}

/// Bounds without uncertainties (`sigma_* = 0`).
pub fn bounds_from_basis(b: &BasisCounts, opts: &BoundOptions) -> Result<FidelityBounds> {
    let expressions = bound_expressions(b, opts)?;
    let (lower, upper) = combine(&expressions);
    Ok(FidelityBounds {
        lower,
        upper,
        sigma_lower: 0.0,
        sigma_upper: 0.0,
        expressions,
    })
}

pub fn bounds_from_counts(c: &CoincidenceCounts, opts: &BoundOptions) -> Result<FidelityBounds> {
    bounds_from_basis(&BasisCounts::from_counts(c)?, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum UncertaintyMethod {
    /// Resample each count as Poisson(observed) and take the standard
    /// deviation of the recomputed bounds.
    Bootstrap { resamples: usize, seed: u64 },
    /// First-order propagation of Poisson variances through the active
    /// lower and upper expressions.
    Gaussian,
}

impl Default for UncertaintyMethod {
    fn default() -> Self {
        UncertaintyMethod::Bootstrap {
            resamples: 1000,
            seed: 0,
        }
    }
}

fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// `(sigma_lower, sigma_upper)`.
pub fn bound_uncertainties(b: &BasisCounts, opts: &BoundOptions, method: &UncertaintyMethod) -> Result<(f64, f64)> {
    bound_expressions(b, opts)?;
    match *method {
        UncertaintyMethod::Bootstrap { resamples, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut lows = Vec::with_capacity(resamples);
            let mut ups = Vec::with_capacity(resamples);
            for _ in 0..resamples {
                let sample = BasisCounts(b.0.map(|c| poisson(c, &mut rng) as f64));
                // A resample with no H/V coincidences carries no information.
                if let Ok(e) = bound_expressions(&sample, opts) {
                    let (l, u) = combine(&e);
                    lows.push(l);
                    ups.push(u);
                }
            }
            Ok((std_dev(&lows), std_dev(&ups)))
        }
        UncertaintyMethod::Gaussian => {
            let (l0, u0) = combine(&bound_expressions(b, opts)?);
            let (mut var_l, mut var_u) = (0.0, 0.0);
            for i in 0..8 {
                let c = b.0[i];
                if c <= 0.0 {
                    continue;
                }
                let h = (1e-4 * c).max(1e-6).min(0.5 * c);
                let mut plus = *b;
                let mut minus = *b;
                plus.0[i] += h;
                minus.0[i] -= h;
                let (lp, up) = combine(&bound_expressions(&plus, opts)?);
                let (lm, um) = match bound_expressions(&minus, opts) {
                    Ok(e) => combine(&e),
                    Err(_) => (l0, u0),
                };
                let dl = (lp - lm) / (2.0 * h);
                let du = (up - um) / (2.0 * h);
                var_l += dl * dl * c;
                var_u += du * du * c;
            }
            Ok((var_l.sqrt(), var_u.sqrt()))
        }
    }
}

/// Bounds with uncertainties attached.
pub fn bounds_with_uncertainties(
    c: &CoincidenceCounts,
    opts: &BoundOptions,
    method: &UncertaintyMethod,
) -> Result<FidelityBounds> {
    let b = BasisCounts::from_counts(c)?;
    let mut out = bounds_from_basis(&b, opts)?;
    let (sl, su) = bound_uncertainties(&b, opts, method)?;
    out.sigma_lower = sl;
    out.sigma_upper = su;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polarization::{bell_phi_plus, werner_state, PoincareRotation};
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn counts(v: [u64; 8]) -> CoincidenceCounts {
        let labels = ["HH", "HV", "VH", "VV", "DD", "DA", "AD", "AA"];
        CoincidenceCounts::from_pairs(1.0, labels.into_iter().zip(v)).unwrap()
    }

    const DEFAULT: BoundOptions = BoundOptions {
        normalization: Normalization::LinearTotal,
        single_basis_form: SingleBasisForm::Halved,
    };
    const PRINTED: BoundOptions = BoundOptions {
        normalization: Normalization::LinearTotal,
        single_basis_form: SingleBasisForm::AsPrinted,
    };

    #[test]
    fn perfect_bell_counts() {
        let b = bounds_from_counts(&counts([5000, 0, 0, 5000, 5000, 0, 0, 5000]), &DEFAULT).unwrap();
        assert_eq!((b.lower, b.upper), (1.0, 1.0));
        let p = bounds_from_counts(&counts([5000, 0, 0, 5000, 5000, 0, 0, 5000]), &PRINTED).unwrap();
        assert_eq!((p.lower, p.upper), (1.0, 1.0));
        assert_eq!(p.expressions.u1, 1.5);
    }

    #[test]
    fn white_noise_counts() {
        let c = counts([2500; 8]);
        let b = bounds_from_counts(&c, &DEFAULT).unwrap();
        assert_eq!((b.lower, b.upper), (0.0, 0.5));
        let p = bounds_from_counts(&c, &PRINTED).unwrap();
        assert_eq!((p.lower, p.upper), (0.25, 0.5));
        let truth = werner_state(0.0).unwrap().fidelity_to_phi_plus();
        assert!(b.contains(truth) && p.contains(truth));
    }

    #[test]
    fn werner_exact_probabilities() {
        let rho = werner_state(0.9).unwrap();
        let basis = BasisCounts::from_state(&rho, 1e6);
        for opts in [DEFAULT, PRINTED] {
            let b = bounds_from_basis(&basis, &opts).unwrap();
            assert!((b.lower - 0.9).abs() < 1e-12);
            assert!((b.upper - 0.95).abs() < 1e-12);
            assert!(b.contains(rho.fidelity_to_phi_plus()));
        }
    }

    #[test]
    fn printed_single_basis_lower_is_unsound() {
        // 0.9 |HH><HH| + 0.1 |VV><VV|: F = 1/2 but the printed L1 is 0.7.
        let c = counts([9000, 0, 0, 1000, 2500, 2500, 2500, 2500]);
        let p = bounds_from_counts(&c, &PRINTED).unwrap();
        assert!((p.expressions.l1 - 0.7).abs() < 1e-12 && p.lower > 0.5);
        assert!(bounds_from_counts(&c, &DEFAULT).unwrap().contains(0.5));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let violations = (0..1000)
            .filter(|_| {
                let rho = TwoQubitState::random(&mut rng);
                let b = bounds_from_basis(&BasisCounts::from_state(&rho, 1.0), &PRINTED).unwrap();
                b.expressions.l1 > rho.fidelity_to_phi_plus() + 1e-12
            })
            .count();
        assert!(violations > 100);
    }

    #[test]
    fn per_basis_normalization_tolerates_flux_imbalance() {
        let rho = werner_state(0.8).unwrap();
        let mut basis = BasisCounts::from_state(&rho, 1e6);
        for c in &mut basis.0[4..] {
            *c *= 0.7;
        }
        let per = BoundOptions {
            normalization: Normalization::PerBasis,
            ..DEFAULT
        };
        let b = bounds_from_basis(&basis, &per).unwrap();
        assert!((b.lower - 0.8).abs() < 1e-12 && (b.upper - 0.9).abs() < 1e-12);
        let lit = bounds_from_basis(&basis, &DEFAULT).unwrap();
        assert!(lit.lower < 0.8 - 1e-3);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            bounds_from_counts(&counts([0, 0, 0, 0, 1, 1, 1, 1]), &DEFAULT),
            Err(Error::NoCoincidences)
        ));
        let partial = CoincidenceCounts::from_pairs(1.0, [("HH", 1), ("HV", 1), ("VH", 1), ("VV", 1)]).unwrap();
        assert!(matches!(
            bounds_from_counts(&partial, &DEFAULT),
            Err(Error::MissingMode(_))
        ));
    }

    #[test]
    fn crossing_bounds_meet_at_midpoint() {
        // Inconsistent counts: perfect H/V correlation, anti-correlated D/A.
        let b = bounds_from_counts(&counts([5000, 0, 0, 5000, 0, 5000, 5000, 0]), &DEFAULT).unwrap();
        assert_eq!(b.lower, b.upper);
    }

    #[test]
    fn sigma_scaling_and_robustness() {
        let rho = werner_state(0.9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let small = BasisCounts::from_state(&rho.apply_one_sided(&PoincareRotation::random(&mut rng)), 1e4);
        let big = small.scaled(100.0);
        let m = UncertaintyMethod::default();
        let (sl, su) = bound_uncertainties(&small, &DEFAULT, &m).unwrap();
        let (bl, bu) = bound_uncertainties(&big, &DEFAULT, &m).unwrap();
        assert!((sl / bl - 10.0).abs() < 3.0, "{sl} {bl}");
        assert!((su / bu - 10.0).abs() < 3.0, "{su} {bu}");

        let perfect = BasisCounts([2.5e5, 0.0, 0.0, 2.5e5, 2.5e5, 0.0, 0.0, 2.5e5]);
        let (pl, pu) = bound_uncertainties(&perfect.scaled(2.0), &DEFAULT, &m).unwrap();
        assert!(pl.is_finite() && pu.is_finite() && pl < 0.002);
        let (gl, gu) = bound_uncertainties(&perfect, &DEFAULT, &UncertaintyMethod::Gaussian).unwrap();
        assert!(gl.is_finite() && gu.is_finite());
    }

    #[test]
    fn gaussian_matches_bootstrap_at_high_counts() {
        let rho = werner_state(0.85)
            .unwrap()
            .apply_one_sided(&PoincareRotation::about_s3(0.3));
        let b = BasisCounts::from_state(&rho, 1e5);
        let (bl, bu) = bound_uncertainties(&b, &DEFAULT, &UncertaintyMethod::default()).unwrap();
        let (gl, gu) = bound_uncertainties(&b, &DEFAULT, &UncertaintyMethod::Gaussian).unwrap();
        assert!((bl / gl - 1.0).abs() < 0.2, "{bl} {gl}");
        assert!((bu / gu - 1.0).abs() < 0.2, "{bu} {gu}");
    }

    #[test]
    fn bootstrap_is_deterministic() {
        let c = counts([1000, 20, 30, 990, 950, 40, 45, 970]);
        let m = UncertaintyMethod::Bootstrap {
            resamples: 200,
            seed: 7,
        };
        let a = bounds_with_uncertainties(&c, &DEFAULT, &m).unwrap();
        let b = bounds_with_uncertainties(&c, &DEFAULT, &m).unwrap();
        assert_eq!(a, b);
        assert!(a.sigma_lower > 0.0);
    }

    #[test]
    fn report_json_shape() {
        let c = counts([1000, 20, 30, 990, 950, 40, 45, 970]);
        let b = bounds_with_uncertainties(&c, &DEFAULT, &UncertaintyMethod::default()).unwrap();
        let v: serde_json::Value = serde_json::to_value(b).unwrap();
        for k in ["lower", "upper", "sigma_lower", "sigma_upper"] {
            assert!(v[k].is_f64());
        }
        assert_eq!(v["expressions"].as_object().unwrap().len(), 8);
        assert!(v["expressions"]["L4"].is_f64());
    }

    #[test]
    fn sound_for_phi_plus_family() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let rho = bell_phi_plus().apply_one_sided(&PoincareRotation::random(&mut rng));
            let b = bounds_from_basis(&BasisCounts::from_state(&rho, 1.0), &DEFAULT).unwrap();
            let f = rho.fidelity_to_phi_plus();
            assert!(b.lower <= f + 1e-12 && f <= b.upper + 1e-12);
        }
    }

    proptest! {
        #[test]
        fn scale_invariance(v in proptest::array::uniform8(0u32..100_000), k in 1u32..1000) {
            let b = BasisCounts(v.map(f64::from));
            prop_assume!(b.linear_total() > 0.0);
            let e1 = bound_expressions(&b, &DEFAULT).unwrap();
            let e2 = bound_expressions(&b.scaled(f64::from(k)), &DEFAULT).unwrap();
            for (x, y) in e1.lowers().iter().chain(&e1.uppers()).zip(e2.lowers().iter().chain(&e2.uppers())) {
                prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
            }
        }

        #[test]
        fn sound_on_random_states(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = TwoQubitState::random(&mut rng);
            let f = rho.fidelity_to_phi_plus();
            for opts in [DEFAULT, BoundOptions { normalization: Normalization::PerBasis, ..DEFAULT }] {
                let b = bounds_from_basis(&BasisCounts::from_state(&rho, 1e6), &opts).unwrap();
                prop_assert!(b.lower <= f + 1e-12 && f <= b.upper + 1e-12);
                prop_assert!(b.expressions.lowers().iter().all(|l| *l <= f + 1e-12));
                prop_assert!(b.expressions.uppers().iter().all(|u| *u >= f - 1e-12));
            }
        }
    }
}
