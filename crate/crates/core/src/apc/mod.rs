//! Automated polarization compensation.
//!
//! Classical probe pulses are sent through the fiber and a variable-retarder
//! compensator; a polarimeter compares the responses with a stored
//! reference. A check that falls below the trigger threshold starts a
//! finite-difference gradient ascent over the compensator retardances. The
//! entangled link is down for the whole duration of every check and
//! optimization.

mod ledger;
mod longrun;

use std::f64::consts::{FRAC_PI_2, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{FiberChannel, PolarimeterModel};
use crate::error::{Error, Result};
use crate::polarization::{MeasurementMode, PoincareRotation, StokesVector};

pub use ledger::{uptime, DowntimeCause, DowntimeInterval, UptimeLedger};
pub use longrun::{run_long_term, CycleRecord, LongRunParams, LongRunResult, LongRunSample};

/// Four variable retarders about the fixed axes S1, S2, S1, S2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompensatorState {
    /// Retardances (rad), kept in `[0, 2 pi)`.
    pub retardances: [f64; 4],
    /// Modulation bandwidth (Hz); limits how far a retardance can move in a
    /// given time.
    pub bandwidth_hz: f64,
}

impl Default for CompensatorState {
    /// Quarter-wave settings, away from the degenerate all-zero point where
    /// the S3 direction is not reachable to first order.
    fn default() -> Self {
        Self {
            retardances: [FRAC_PI_2; 4],
            bandwidth_hz: 1.2e5,
        }
    }
}

fn wrap(x: f64) -> f64 {
    let w = x.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

impl CompensatorState {
    pub fn new(retardances: [f64; 4]) -> Self {
        Self {
            retardances: retardances.map(wrap),
            ..Self::default()
        }
    }

    /// `R_S2(x4) R_S1(x3) R_S2(x2) R_S1(x1)`.
    pub fn rotation(&self) -> PoincareRotation {
        let [a, b, c, d] = self.retardances;
        PoincareRotation::about_s2(d)
            * PoincareRotation::about_s1(c)
            * PoincareRotation::about_s2(b)
            * PoincareRotation::about_s1(a)
    }

    /// Largest retardance change reachable in `dt_s` (one full wave per
    /// modulation period).
    pub fn max_slew(&self, dt_s: f64) -> f64 {
        TAU * self.bandwidth_hz * dt_s
    }

    /// Moves by `delta`, clipping each component to the slew limit for an
    /// update lasting `dt_s`.
    pub fn stepped(&self, delta: &[f64; 4], dt_s: f64) -> Self {
        let limit = self.max_slew(dt_s);
        let mut r = self.retardances;
        for (x, d) in r.iter_mut().zip(delta) {
            *x = wrap(*x + d.clamp(-limit, limit));
        }
        Self {
            retardances: r,
            bandwidth_hz: self.bandwidth_hz,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ApcConfig {
    /// Checks below this classical fidelity start an optimization.
    pub trigger_threshold: f64,
    /// Optimization stops once this classical fidelity is reached.
    pub optimization_threshold: f64,
    /// Distribution time between checks (s).
    pub check_period_s: f64,
    /// Probe polarizations sent by the injector.
    pub probes: Vec<MeasurementMode>,
    /// Polarimeter readings averaged per probe.
    pub samples_per_probe: usize,
    pub polarimeter: PolarimeterModel,
    /// Finite-difference step on each retardance (rad).
    pub fd_step_rad: f64,
    /// Initial gradient step multiplier, halved on each failed trial. The
    /// default is the Newton step when the four retarder axes are spread
    /// evenly over the sphere.
    pub step_size: f64,
    /// Step halvings tried before the optimization is declared stalled.
    pub max_backtracks: usize,
    pub max_iterations: usize,
    /// Time to measure the probe set once (s).
    pub measurement_cost_s: f64,
    /// Time per gradient iteration (s).
    pub iteration_cost_s: f64,
    /// Longest a cycle may take (s).
    pub max_cycle_s: f64,
}

impl Default for ApcConfig {
    fn default() -> Self {
        Self {
            trigger_threshold: 0.99,
            optimization_threshold: 0.99,
            check_period_s: 20.0,
            probes: vec![MeasurementMode::H, MeasurementMode::D, MeasurementMode::R],
            samples_per_probe: 100,
            polarimeter: PolarimeterModel::default(),
            fd_step_rad: 0.02,
            step_size: 2.25,
            max_backtracks: 6,
            max_iterations: 50,
            measurement_cost_s: 0.03,
            iteration_cost_s: (1.0 - 0.03) / 50.0,
            max_cycle_s: 1.0,
        }
    }
}

impl ApcConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        for (name, v) in [
            ("trigger", self.trigger_threshold),
            ("optimization", self.optimization_threshold),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return bad(format!("{name} threshold {v} outside (0, 1]"));
            }
        }
        if !(self.check_period_s > 0.0 && self.check_period_s.is_finite()) {
            return bad(format!("check period {} must be > 0", self.check_period_s));
        }
        if self.probes.len() < 2 {
            return bad("probe set needs at least two polarizations".into());
        }
        if self.samples_per_probe == 0 {
            return bad("samples_per_probe must be >= 1".into());
        }
        self.polarimeter.validate()?;
        if !(self.fd_step_rad > 0.0 && self.step_size > 0.0) {
            return bad("finite-difference and gradient steps must be > 0".into());
        }
        if !(self.measurement_cost_s > 0.0 && self.iteration_cost_s >= 0.0) {
            return bad("measurement cost must be > 0 and iteration cost >= 0".into());
        }
        if !(self.max_cycle_s >= self.measurement_cost_s) {
            return bad(format!(
                "max cycle time {} s is shorter than one measurement ({} s)",
                self.max_cycle_s, self.measurement_cost_s
            ));
        }
        Ok(())
    }

    fn probe_states(&self) -> Vec<StokesVector> {
        self.probes.iter().map(|m| m.stokes()).collect()
    }
}

/// Polarimeter responses to `probes` after `channel` and `comp` at the
/// channel's current time.
fn measure_responses<R: Rng + ?Sized>(
    channel: &FiberChannel,
    wavelength_nm: f64,
    comp: &CompensatorState,
    probes: &[StokesVector],
    polarimeter: &PolarimeterModel,
    samples: usize,
    rng: &mut R,
) -> Result<Vec<StokesVector>> {
    let total = comp.rotation() * *channel.rotation_at(wavelength_nm)?;
    Ok(probes
        .iter()
        .map(|p| polarimeter.measure_averaged(&(total.matrix() * p.to_vector()), samples, rng))
        .collect())
}

/// Reference responses through the channel and the current compensator.
pub fn reference_capture<R: Rng + ?Sized>(
    channel: &FiberChannel,
    wavelength_nm: f64,
    comp: &CompensatorState,
    cfg: &ApcConfig,
    rng: &mut R,
) -> Result<Vec<StokesVector>> {
    measure_responses(
        channel,
        wavelength_nm,
        comp,
        &cfg.probe_states(),
        &cfg.polarimeter,
        cfg.samples_per_probe,
        rng,
    )
}

/// Mean over probes of `(1 + s_cur . s_ref)/2` on normalized vectors.
pub fn classical_fidelity(current: &[StokesVector], reference: &[StokesVector]) -> Result<f64> {
    if current.len() != reference.len() || current.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{} responses against {} reference vectors",
            current.len(),
            reference.len()
        )));
    }
    let mut sum = 0.0;
    for (c, r) in current.iter().zip(reference) {
        let (Some(c), Some(r)) = (c.direction(), r.direction()) else {
            return Err(Error::InvalidArgument("zero-DOP response".into()));
        };
        sum += 0.5 * (1.0 + c.dot(&r).clamp(-1.0, 1.0));
    }
    Ok(sum / current.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CyclePath {
    FastCheck,
    Optimized,
}

impl CyclePath {
    pub fn as_str(self) -> &'static str {
        match self {
            CyclePath::FastCheck => "fast_check",
            CyclePath::Optimized => "optimized",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompensationCycleResult {
    pub pre_fidelity: f64,
    pub post_fidelity: f64,
    pub iterations: usize,
    pub duration_s: f64,
    pub path: CyclePath,
    /// False if an optimization ended below the optimization threshold.
    pub converged: bool,
    /// Measured classical fidelity after each accepted step, starting with
    /// the pre-cycle value.
    pub trace: Vec<f64>,
}

/// One check, and if needed one optimization, at the channel's current
/// time.
pub fn compensation_cycle<R: Rng + ?Sized>(
    channel: &FiberChannel,
    wavelength_nm: f64,
    comp: &CompensatorState,
    cfg: &ApcConfig,
    reference: &[StokesVector],
    rng: &mut R,
) -> Result<(CompensatorState, CompensationCycleResult)> {
    let probes = cfg.probe_states();
    let measure = |c: &CompensatorState, rng: &mut R| -> Result<f64> {
        let resp = measure_responses(
            channel,
            wavelength_nm,
            c,
            &probes,
            &cfg.polarimeter,
            cfg.samples_per_probe,
            rng,
        )?;
        classical_fidelity(&resp, reference)
    };

    let pre = measure(comp, rng)?;
    if pre >= cfg.trigger_threshold {
        return Ok((
            *comp,
            CompensationCycleResult {
                pre_fidelity: pre,
                post_fidelity: pre,
                iterations: 0,
                duration_s: cfg.measurement_cost_s.min(cfg.max_cycle_s),
                path: CyclePath::FastCheck,
                converged: true,
                trace: vec![pre],
            },
        ));
    }

    let mut state = *comp;
    let mut f = pre;
    let mut trace = vec![pre];
    let mut iterations = 0;
    let step_time = cfg.iteration_cost_s;
    while f < cfg.optimization_threshold && iterations < cfg.max_iterations {
        iterations += 1;
        let mut grad = [0.0; 4];
        for (k, g) in grad.iter_mut().enumerate() {
            let mut plus = [0.0; 4];
            let mut minus = [0.0; 4];
            plus[k] = cfg.fd_step_rad;
            minus[k] = -cfg.fd_step_rad;
            let fp = measure(&state.stepped(&plus, step_time), rng)?;
            let fm = measure(&state.stepped(&minus, step_time), rng)?;
            *g = (fp - fm) / (2.0 * cfg.fd_step_rad);
        }
        let mut alpha = cfg.step_size;
        let mut accepted = None;
        for _ in 0..=cfg.max_backtracks {
            let delta = grad.map(|g| alpha * g);
            let trial = state.stepped(&delta, step_time);
            let ft = measure(&trial, rng)?;
            if ft > f {
                accepted = Some((trial, ft));
                break;
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((s, ft)) => {
                state = s;
                f = ft;
                trace.push(ft);
            }
            None => break,
        }
    }
    let duration_s = (cfg.measurement_cost_s + iterations as f64 * cfg.iteration_cost_s).min(cfg.max_cycle_s);
    Ok((
        state,
        CompensationCycleResult {
            pre_fidelity: pre,
            post_fidelity: f,
            iterations,
            duration_s,
            path: CyclePath::Optimized,
            converged: f >= cfg.optimization_threshold,
            trace,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::WavelengthGrid;
    use crate::polarization::bell_phi_plus;
    use nalgebra::Vector3;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn noiseless() -> ApcConfig {
        ApcConfig {
            polarimeter: PolarimeterModel::noiseless(),
            ..ApcConfig::default()
        }
    }

    fn single(r: PoincareRotation) -> FiberChannel {
        FiberChannel::uniform(WavelengthGrid::single(1300.0), r)
    }

    #[test]
    fn compensator_rotation_and_wrapping() {
        let c = CompensatorState::new([0.0; 4]);
        assert!(
            (c.rotation().matrix() - PoincareRotation::identity().matrix())
                .abs()
                .max()
                < 1e-15
        );
        let c = CompensatorState::new([-0.5, 7.0, TAU, 1.0]);
        assert!(c.retardances.iter().all(|x| (0.0..TAU).contains(x)));
        let half = CompensatorState::new([std::f64::consts::PI, 0.0, 0.0, 0.0]);
        let d = half.rotation().apply(&StokesVector::D);
        assert!((d.s2 + 1.0).abs() < 1e-12);
        let slow = CompensatorState {
            bandwidth_hz: 1.0,
            ..CompensatorState::default()
        };
        let moved = slow.stepped(&[10.0, 0.0, 0.0, 0.0], 0.01);
        assert!((moved.retardances[0] - slow.retardances[0] - TAU * 0.01).abs() < 1e-12);
    }

    #[test]
    fn reference_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = noiseless();
        let id = CompensatorState::new([0.0; 4]);
        let r = reference_capture(&single(PoincareRotation::identity()), 1300.0, &id, &cfg, &mut rng).unwrap();
        assert_eq!(r, vec![StokesVector::H, StokesVector::D, StokesVector::R]);

        let rot = PoincareRotation::random(&mut rng);
        let r = reference_capture(&single(rot), 1300.0, &id, &cfg, &mut rng).unwrap();
        for (got, probe) in r.iter().zip([StokesVector::H, StokesVector::D, StokesVector::R]) {
            assert!((got.to_vector() - rot.apply(&probe).to_vector()).norm() < 1e-12);
        }

        let noisy = ApcConfig::default();
        let ch = single(rot);
        let a = reference_capture(&ch, 1300.0, &id, &noisy, &mut rng).unwrap();
        let b = reference_capture(&ch, 1300.0, &id, &noisy, &mut rng).unwrap();
        assert!(classical_fidelity(&a, &b).unwrap() > 1.0 - 1e-5);
    }

    #[test]
    fn classical_fidelity_examples() {
        let probes = [StokesVector::H, StokesVector::D, StokesVector::R];
        assert_eq!(classical_fidelity(&probes, &probes).unwrap(), 1.0);
        for theta in [0.05, 0.3, 1.0, 2.0, std::f64::consts::PI] {
            let r = PoincareRotation::about_s1(theta);
            let cur: Vec<_> = probes.iter().map(|p| r.apply(p)).collect();
            let f = classical_fidelity(&cur, &probes).unwrap();
            let oracle = [1.0, theta.cos(), theta.cos()]
                .iter()
                .map(|x| 0.5 * (1.0 + x))
                .sum::<f64>()
                / 3.0;
            assert!((f - oracle).abs() < 1e-12);
            assert!((f - (2.0 + theta.cos()) / 3.0).abs() < 1e-12);
        }
        let r = PoincareRotation::from_axis_angle(Vector3::new(1.0, -2.0, 0.5), 0.05);
        let cur: Vec<_> = probes.iter().map(|p| r.apply(p)).collect();
        assert!(classical_fidelity(&cur, &probes).unwrap() >= 0.999);
        let zero = StokesVector::new(0.0, 0.0, 0.0).unwrap();
        assert!(classical_fidelity(&[zero, StokesVector::D, StokesVector::R], &probes).is_err());
        assert!(classical_fidelity(&probes[..2], &probes).is_err());
    }

    #[test]
    fn static_channel_takes_fast_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = ApcConfig::default();
        let comp = CompensatorState::default();
        let ch = single(PoincareRotation::random(&mut rng));
        let reference = reference_capture(&ch, 1300.0, &comp, &cfg, &mut rng).unwrap();
        let (after, res) = compensation_cycle(&ch, 1300.0, &comp, &cfg, &reference, &mut rng).unwrap();
        assert_eq!(after, comp);
        assert_eq!(res.path, CyclePath::FastCheck);
        assert_eq!(res.duration_s, 0.03);
        assert_eq!(res.iterations, 0);
    }

    #[test]
    fn recovers_from_half_radian_jumps() {
        let cfg = ApcConfig::default();
        let mut ok = 0;
        let mut quantum_min: f64 = 1.0;
        for seed in 0..200 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let comp = CompensatorState::default();
            let base = PoincareRotation::random(&mut rng);
            let ch = single(base);
            let reference = reference_capture(&ch, 1300.0, &comp, &cfg, &mut rng).unwrap();
            let axis = Vector3::new(
                rng.random::<f64>() - 0.5,
                rng.random::<f64>() - 0.5,
                rng.random::<f64>() - 0.5,
            );
            let jumped = single(PoincareRotation::from_axis_angle(axis, 0.5) * base);
            let (after, res) = compensation_cycle(&jumped, 1300.0, &comp, &cfg, &reference, &mut rng).unwrap();
            assert_eq!(res.path, CyclePath::Optimized);
            assert!(res.pre_fidelity < cfg.trigger_threshold);
            assert!(res.trace.windows(2).all(|w| w[1] >= w[0]));
            assert!(res.duration_s >= 0.03 && res.duration_s <= 1.0);
            if res.post_fidelity >= 0.99 {
                ok += 1;
            }
            if res.converged {
                let residual =
                    (comp.rotation() * base).inverse() * after.rotation() * *jumped.rotation_at(1300.0).unwrap();
                let f = bell_phi_plus().apply_one_sided(&residual).fidelity_to_phi_plus();
                quantum_min = quantum_min.min(f);
            }
        }
        assert!(ok >= 190, "{ok}/200 converged");
        assert!(quantum_min >= 0.98, "{quantum_min}");
    }

    #[test]
    fn gate_is_exact() {
        // A check exactly at the threshold is a fast check.
        let cfg = ApcConfig {
            trigger_threshold: 1.0,
            ..noiseless()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let comp = CompensatorState::default();
        let ch = single(PoincareRotation::identity());
        let reference = reference_capture(&ch, 1300.0, &comp, &cfg, &mut rng).unwrap();
        let (_, res) = compensation_cycle(&ch, 1300.0, &comp, &cfg, &reference, &mut rng).unwrap();
        assert_eq!(res.path, CyclePath::FastCheck);
    }

    #[test]
    fn config_validation() {
        assert!(ApcConfig::default().validate().is_ok());
        assert!(ApcConfig {
            trigger_threshold: 0.0,
            ..ApcConfig::default()
        }
        .validate()
        .is_err());
        assert!(ApcConfig {
            check_period_s: 0.0,
            ..ApcConfig::default()
        }
        .validate()
        .is_err());
        assert!(ApcConfig {
            max_cycle_s: 0.01,
            ..ApcConfig::default()
        }
        .validate()
        .is_err());
        let worst = ApcConfig::default();
        assert!((worst.measurement_cost_s + worst.max_iterations as f64 * worst.iteration_cost_s - 1.0).abs() < 1e-12);
    }
}
