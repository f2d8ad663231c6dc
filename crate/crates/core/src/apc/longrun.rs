//! Event-driven long-term simulation of a compensated and an uncompensated
//! fiber path sharing one drifting channel.

use serde::{Deserialize, Serialize};

use super::{
    compensation_cycle, reference_capture, ApcConfig, CompensatorState, CyclePath, DowntimeCause, UptimeLedger,
};
use crate::bounds::{bounds_from_counts, BoundOptions};
use crate::channel::{FiberChannel, LossBudget};
use crate::error::{Error, Result};
use crate::polarization::PoincareRotation;
use crate::rng::{stream, streams};
use crate::source::{pair_rate_from_counts, simulate_counts, DetectorModel, MeasurementPlan, SourceModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LongRunParams {
    pub duration_s: f64,
    /// Interval between fidelity-bounding measurements (s).
    pub sample_period_s: f64,
    /// Wavelength of the fiber photon, also used by the probes (nm).
    pub wavelength_nm: f64,
    /// Pair rate delivered into the link (pairs/s).
    pub rate: f64,
    /// Integration time per mode pair of each bounding measurement (s).
    pub dwell_s: f64,
    pub source: SourceModel,
    pub detectors: DetectorModel,
    /// Loss between source and detection on the fiber arm.
    pub loss: LossBudget,
    pub bounds: BoundOptions,
}

impl Default for LongRunParams {
    fn default() -> Self {
        Self {
            duration_s: 15.0 * 86_400.0,
            sample_period_s: 240.0,
            wavelength_nm: 1300.0,
            rate: 2e5,
            dwell_s: 10.0,
            source: SourceModel::default(),
            detectors: DetectorModel::default(),
            loss: LossBudget::deployed_link(),
            bounds: BoundOptions::default(),
        }
    }
}

impl LongRunParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sample_period_s > 0.0 && self.duration_s > self.sample_period_s) {
            return Err(Error::InvalidArgument(format!(
                "duration {} s must exceed the sampling period {} s",
                self.duration_s, self.sample_period_s
            )));
        }
        if !(self.dwell_s > 0.0) {
            return Err(Error::InvalidArgument(format!("dwell {} must be > 0", self.dwell_s)));
        }
        self.source.gsi_at_rate(self.rate)?;
        self.detectors.validate()
    }
}

/// One fidelity-bounding measurement on both paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LongRunSample {
    pub t_s: f64,
    /// Pair rate inferred from the compensated path's H/V counts.
    pub pair_rate: f64,
    pub comp_lower: f64,
    pub comp_upper: f64,
    pub uncomp_lower: f64,
    pub uncomp_upper: f64,
    pub uptime_cum: f64,
    /// True fidelities of the delivered states.
    pub comp_fidelity: f64,
    pub uncomp_fidelity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub t_s: f64,
    pub path: CyclePath,
    pub duration_s: f64,
    pub pre_fid: f64,
    pub post_fid: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongRunResult {
    pub samples: Vec<LongRunSample>,
    pub cycles: Vec<CycleRecord>,
    pub ledger: UptimeLedger,
    pub jumps: u64,
    pub compensator: CompensatorState,
}

impl LongRunResult {
    pub fn uptime(&self) -> f64 {
        self.ledger.uptime()
    }

    pub fn optimizations(&self) -> usize {
        self.cycles.iter().filter(|c| c.path == CyclePath::Optimized).count()
    }
}

/// Runs the link for `params.duration_s` of simulated time.
///
/// At `t = 0` the reference is captured and both paths are corrected to
/// deliver `|Phi+>`. The compensated path then carries the residual
/// `(C0 R0)^T C(t) R(t)`; the uncompensated path bypasses the compensator
/// and keeps the frozen initial correction, `R0^T R(t)`. Distribution runs
/// for `check_period_s` between cycles; every cycle is downtime. Bounding
/// measurements are taken every `sample_period_s`.
pub fn run_long_term(
    mut channel: FiberChannel,
    initial: CompensatorState,
    cfg: &ApcConfig,
    params: &LongRunParams,
    seed: u64,
) -> Result<LongRunResult> {
    cfg.validate()?;
    params.validate()?;
    channel.drift.validate()?;
    let lambda = params.wavelength_nm;
    let mut drift_rng = stream(seed, streams::DRIFT);
    let mut apc_rng = stream(seed, streams::POLARIMETER);
    let mut comp_rng = stream(seed, streams::COUNTS_COMPENSATED);
    let mut uncomp_rng = stream(seed, streams::COUNTS_UNCOMPENSATED);

    let state = params.source.state_at_rate(params.rate)?;
    let plan = MeasurementPlan::bound_modes(params.dwell_s)?;
    let transmission = params.loss.transmission();

    let mut comp = initial;
    let reference = reference_capture(&channel, lambda, &comp, cfg, &mut apc_rng)?;
    let r0 = *channel.rotation_at(lambda)?;
    let undo_comp = (comp.rotation() * r0).inverse();
    let undo_uncomp = r0.inverse();

    let mut ledger = UptimeLedger::new();
    let mut samples = Vec::new();
    let mut cycles = Vec::new();
    let mut next_check = cfg.check_period_s;
    let mut next_sample = params.sample_period_s;
    let start = channel.time_s();

    loop {
        let t = next_check.min(next_sample);
        if t > params.duration_s {
            break;
        }
        channel.advance(start + t - channel.time_s(), &mut drift_rng);
        let r = *channel.rotation_at(lambda)?;
        if next_sample <= next_check {
            let comp_residual: PoincareRotation = undo_comp * comp.rotation() * r;
            let uncomp_residual = undo_uncomp * r;
            let detectors = &params.detectors;
            let cc = simulate_counts(
                &state,
                params.rate,
                transmission,
                detectors,
                &plan,
                Some(&comp_residual),
                &mut comp_rng,
            )?;
            let cu = simulate_counts(
                &state,
                params.rate,
                transmission,
                detectors,
                &plan,
                Some(&uncomp_residual),
                &mut uncomp_rng,
            )?;
            let bc = bounds_from_counts(&cc, &params.bounds)?;
            let bu = bounds_from_counts(&cu, &params.bounds)?;
            samples.push(LongRunSample {
                t_s: t,
                pair_rate: pair_rate_from_counts(&cc, detectors)?,
                comp_lower: bc.lower,
                comp_upper: bc.upper,
                uncomp_lower: bu.lower,
                uncomp_upper: bu.upper,
                uptime_cum: 1.0 - ledger.total_downtime_s() / t,
                comp_fidelity: state.apply_one_sided(&comp_residual).fidelity_to_phi_plus(),
                uncomp_fidelity: state.apply_one_sided(&uncomp_residual).fidelity_to_phi_plus(),
            });
            next_sample += params.sample_period_s;
        } else {
            let (next, res) = compensation_cycle(&channel, lambda, &comp, cfg, &reference, &mut apc_rng)?;
            comp = next;
            let cause = match res.path {
                CyclePath::FastCheck => DowntimeCause::Check,
                CyclePath::Optimized => DowntimeCause::Optimization,
            };
            ledger.record(t, res.duration_s, cause)?;
            cycles.push(CycleRecord {
                t_s: t,
                path: res.path,
                duration_s: res.duration_s,
                pre_fid: res.pre_fidelity,
                post_fid: res.post_fidelity,
                iterations: res.iterations,
                converged: res.converged,
            });
            next_check = t + res.duration_s + cfg.check_period_s;
        }
    }
    ledger.advance_to(params.duration_s);
    Ok(LongRunResult {
        samples,
        cycles,
        ledger,
        jumps: channel.jump_count(),
        compensator: comp,
    })
}
