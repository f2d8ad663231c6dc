//! Reproducible experiment drivers and their file formats.
//!
//! One JSON run configuration holds a section per experiment; every section
//! and field has a default, so `{}` is a valid configuration.

use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::apc::{run_long_term, ApcConfig, CompensatorState, LongRunParams, LongRunResult};
use crate::bounds::{bounds_with_uncertainties, BoundOptions, UncertaintyMethod};
use crate::channel::{
    synth_dispersive_channel, DriftProcess, FiberChannel, LossBudget, PolarimeterModel, SynthParams, WavelengthGrid,
};
use crate::dispersion::{simulate_sweep, AnalysisOptions, PolarimeterSweep, SweepSchedule};
use crate::error::{Error, Result};
use crate::polarization::PoincareRotation;
use crate::rng::{stream, streams};
use crate::source::{
    fidelity_from_gsi, simulate_counts, CoincidenceCounts, DetectorModel, MeasurementPlan, SourceModel,
};
use crate::table::{ensure_dir, write_csv, write_json};

pub const RATE_FIDELITY_HEADER: [&str; 6] = ["rate", "lower", "upper", "sigma_l", "sigma_u", "theory_F"];
pub const TIME_SERIES_HEADER: [&str; 7] = [
    "t_s",
    "pair_rate",
    "comp_lower",
    "comp_upper",
    "uncomp_lower",
    "uncomp_upper",
    "uptime_cum",
];
/// Extra columns appended to the time series when a trailing average is
/// requested.
pub const TRAILING_AVERAGE_COLUMNS: [&str; 4] = [
    "comp_lower_avg",
    "comp_upper_avg",
    "uncomp_lower_avg",
    "uncomp_upper_avg",
];
pub const CYCLE_LOG_HEADER: [&str; 6] = ["t_s", "path", "duration_s", "pre_fid", "post_fid", "iterations"];

/// `n` geometrically spaced points from `lo` to `hi` inclusive.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo) || n == 0 {
        return Err(Error::InvalidArgument(format!("bad grid {lo}..{hi} with {n} points")));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let ratio = (hi / lo).ln() / (n - 1) as f64;
    let mut out: Vec<f64> = (0..n).map(|k| lo * (ratio * k as f64).exp()).collect();
    out[n - 1] = hi;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateFidelityConfig {
    /// Explicit pair rates; if empty, `points` geometric steps from
    /// `min_rate` to `max_rate`.
    pub rates: Vec<f64>,
    pub min_rate: f64,
    pub max_rate: f64,
    pub points: usize,
    /// Integration time per mode pair at each rate (s).
    pub dwell_s: f64,
    pub source: SourceModel,
    pub detectors: DetectorModel,
    pub loss: LossBudget,
    pub bounds: BoundOptions,
    pub bootstrap_resamples: usize,
}

impl Default for RateFidelityConfig {
    fn default() -> Self {
        Self {
            rates: Vec::new(),
            min_rate: 2e4,
            max_rate: 5e5,
            points: 20,
            dwell_s: 60.0,
            source: SourceModel::default(),
            detectors: DetectorModel::default(),
            loss: LossBudget::deployed_link(),
            bounds: BoundOptions::default(),
            bootstrap_resamples: 1000,
        }
    }
}

impl RateFidelityConfig {
    pub fn rate_grid(&self) -> Result<Vec<f64>> {
        if self.rates.is_empty() {
            geometric_grid(self.min_rate, self.max_rate, self.points)
        } else {
            Ok(self.rates.clone())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFidelityPoint {
    pub rate: f64,
    pub lower: f64,
    pub upper: f64,
    pub sigma_l: f64,
    pub sigma_u: f64,
    pub theory_f: f64,
}

/// Simulated bounds versus pair rate for a compensated link. Each rate
/// point draws from its own stream, so points are independent of the grid.
pub fn rate_fidelity(cfg: &RateFidelityConfig, seed: u64) -> Result<Vec<RateFidelityPoint>> {
    let transmission = cfg.loss.transmission();
    let plan = MeasurementPlan::bound_modes(cfg.dwell_s)?;
    cfg.rate_grid()?
        .into_iter()
        .enumerate()
        .map(|(i, rate)| {
            let mut rng = stream(seed, streams::POINT_BASE + i as u64);
            let rho = cfg.source.state_at_rate(rate)?;
            let counts = simulate_counts(&rho, rate, transmission, &cfg.detectors, &plan, None, &mut rng)?;
            let method = UncertaintyMethod::Bootstrap {
                resamples: cfg.bootstrap_resamples,
                seed: rng.random(),
            };
            let b = bounds_with_uncertainties(&counts, &cfg.bounds, &method)?;
            Ok(RateFidelityPoint {
                rate,
                lower: b.lower,
                upper: b.upper,
                sigma_l: b.sigma_lower,
                sigma_u: b.sigma_upper,
                theory_f: fidelity_from_gsi(cfg.source.gsi_at_rate(rate)?)?,
            })
        })
        .collect()
}

pub fn write_rate_fidelity(path: &Path, points: &[RateFidelityPoint]) -> Result<()> {
    write_csv(
        path,
        &RATE_FIDELITY_HEADER,
        points.iter().map(|p| {
            [p.rate, p.lower, p.upper, p.sigma_l, p.sigma_u, p.theory_f]
                .iter()
                .map(f64::to_string)
                .collect()
        }),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LongrunConfig {
    pub apc: ApcConfig,
    pub run: LongRunParams,
    pub drift: DriftProcess,
    pub compensator: CompensatorState,
    /// Adds trailing-average columns over this window (hours) when set.
    pub trailing_average_h: Option<f64>,
}

impl Default for LongrunConfig {
    fn default() -> Self {
        Self {
            apc: ApcConfig::default(),
            run: LongRunParams::default(),
            drift: DriftProcess::default(),
            compensator: CompensatorState::default(),
            trailing_average_h: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongrunSummary {
    pub uptime: f64,
    pub mean_comp_lower: f64,
    pub mean_comp_upper: f64,
    pub mean_uncomp_lower: f64,
    pub mean_uncomp_upper: f64,
    pub min_comp_lower: f64,
    pub min_uncomp_lower: f64,
    pub samples: usize,
    pub checks: usize,
    pub optimizations: usize,
    pub unconverged: usize,
    pub jumps: u64,
    pub elapsed_s: f64,
}

/// Single-wavelength channel with a random initial rotation and the
/// configured drift.
pub fn longrun_channel(cfg: &LongrunConfig, seed: u64) -> FiberChannel {
    let mut rng = stream(seed, streams::CHANNEL);
    FiberChannel::uniform(
        WavelengthGrid::single(cfg.run.wavelength_nm),
        PoincareRotation::random(&mut rng),
    )
    .with_drift(cfg.drift.clone())
    .with_loss(cfg.run.loss.clone())
}

pub fn longrun(cfg: &LongrunConfig, seed: u64) -> Result<LongRunResult> {
    if let Some(h) = cfg.trailing_average_h {
        if !(h > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "trailing average window {h} h must be > 0"
            )));
        }
    }
    run_long_term(longrun_channel(cfg, seed), cfg.compensator, &cfg.apc, &cfg.run, seed)
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

pub fn summarize(res: &LongRunResult) -> LongrunSummary {
    let s = &res.samples;
    let optimizations = res.optimizations();
    LongrunSummary {
        uptime: res.uptime(),
        mean_comp_lower: mean(s.iter().map(|x| x.comp_lower)),
        mean_comp_upper: mean(s.iter().map(|x| x.comp_upper)),
        mean_uncomp_lower: mean(s.iter().map(|x| x.uncomp_lower)),
        mean_uncomp_upper: mean(s.iter().map(|x| x.uncomp_upper)),
        min_comp_lower: s.iter().map(|x| x.comp_lower).fold(f64::INFINITY, f64::min),
        min_uncomp_lower: s.iter().map(|x| x.uncomp_lower).fold(f64::INFINITY, f64::min),
        samples: s.len(),
        checks: res.cycles.len() - optimizations,
        optimizations,
        unconverged: res.cycles.iter().filter(|c| !c.converged).count(),
        jumps: res.jumps,
        elapsed_s: res.ledger.elapsed_s(),
    }
}

/// Mean of each series over the trailing window `(t - window, t]`.
pub fn trailing_average(t: &[f64], series: &[f64], window_s: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(t.len());
    let mut start = 0;
    let mut sum = 0.0;
    for i in 0..t.len() {
        sum += series[i];
        while t[i] - t[start] >= window_s {
            sum -= series[start];
            start += 1;
        }
        out.push(sum / (i + 1 - start) as f64);
    }
    out
}

/// Writes `timeseries.csv`, `cycles.csv` and `summary.json` into `dir`.
pub fn write_longrun(dir: &Path, res: &LongRunResult, trailing_average_h: Option<f64>) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let s = &res.samples;
    let t: Vec<f64> = s.iter().map(|x| x.t_s).collect();
    let avgs: Option<Vec<Vec<f64>>> = trailing_average_h.map(|h| {
        let cols: [fn(&crate::apc::LongRunSample) -> f64; 4] = [
            |x| x.comp_lower,
            |x| x.comp_upper,
            |x| x.uncomp_lower,
            |x| x.uncomp_upper,
        ];
        cols.iter()
            .map(|f| trailing_average(&t, &s.iter().map(f).collect::<Vec<_>>(), h * 3600.0))
            .collect()
    });
    let mut header: Vec<&str> = TIME_SERIES_HEADER.to_vec();
    if avgs.is_some() {
        header.extend(TRAILING_AVERAGE_COLUMNS);
    }
    let series = dir.join("timeseries.csv");
    write_csv(
        &series,
        &header,
        s.iter().enumerate().map(|(i, x)| {
            let mut row: Vec<String> = [
                x.t_s,
                x.pair_rate,
                x.comp_lower,
                x.comp_upper,
                x.uncomp_lower,
                x.uncomp_upper,
                x.uptime_cum,
            ]
            .iter()
            .map(f64::to_string)
            .collect();
            if let Some(a) = &avgs {
                row.extend(a.iter().map(|c| c[i].to_string()));
            }
            row
        }),
    )?;
    let cycles = dir.join("cycles.csv");
    write_csv(
        &cycles,
        &CYCLE_LOG_HEADER,
        res.cycles.iter().map(|c| {
            vec![
                c.t_s.to_string(),
                c.path.as_str().to_string(),
                c.duration_s.to_string(),
                c.pre_fid.to_string(),
                c.post_fid.to_string(),
                c.iterations.to_string(),
            ]
        }),
    )?;
    let summary = dir.join("summary.json");
    write_json(&summary, &summarize(res))?;
    Ok(vec![series, cycles, summary])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSweepConfig {
    pub channel: SynthParams,
    pub schedule: SweepSchedule,
    pub polarimeter: PolarimeterModel,
    /// Drift between sweeps; none by default.
    pub drift: DriftProcess,
    pub label: String,
}

impl Default for SimulateSweepConfig {
    fn default() -> Self {
        Self {
            channel: SynthParams::default(),
            schedule: SweepSchedule::default(),
            polarimeter: PolarimeterModel::default(),
            drift: DriftProcess::frozen(),
            label: "synthetic".into(),
        }
    }
}

pub fn simulate_sweep_experiment(cfg: &SimulateSweepConfig, seed: u64) -> Result<PolarimeterSweep> {
    cfg.polarimeter.validate()?;
    cfg.drift.validate()?;
    let mut rng = stream(seed, streams::CHANNEL);
    let channel = synth_dispersive_channel(&cfg.channel, &mut rng)?.with_drift(cfg.drift.clone());
    let mut rng = stream(seed, streams::POLARIMETER);
    simulate_sweep(&channel, &cfg.schedule, &cfg.polarimeter, &cfg.label, &mut rng)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsConfig {
    pub options: BoundOptions,
    pub uncertainty: UncertaintyMethod,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self {
            options: BoundOptions::default(),
            uncertainty: UncertaintyMethod::default(),
        }
    }
}

/// Bounds report for a counts file. The bootstrap seed in the config is
/// replaced by the run seed.
pub fn bounds_report(
    counts: &CoincidenceCounts,
    cfg: &BoundsConfig,
    seed: u64,
) -> Result<crate::bounds::FidelityBounds> {
    let method = match cfg.uncertainty {
        UncertaintyMethod::Bootstrap { resamples, .. } => UncertaintyMethod::Bootstrap { resamples, seed },
        m => m,
    };
    bounds_with_uncertainties(counts, &cfg.options, &method)
}

/// All experiment settings in one file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seed for every stochastic step; `--seed` overrides it.
    pub seed: u64,
    pub simulate_sweep: SimulateSweepConfig,
    pub analyze_sweep: AnalysisOptions,
    pub rate_fidelity: RateFidelityConfig,
    pub longrun: LongrunConfig,
    pub bounds: BoundsConfig,
    /// Free-form notes; ignored.
    #[serde(rename = "_notes", skip_serializing_if = "Option::is_none")]
    pub notes: Option<serde_json::Value>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            simulate_sweep: SimulateSweepConfig::default(),
            analyze_sweep: AnalysisOptions::default(),
            rate_fidelity: RateFidelityConfig::default(),
            longrun: LongrunConfig::default(),
            bounds: BoundsConfig::default(),
            notes: None,
        }
    }
}

impl RunConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.longrun.apc.validate()?;
        self.longrun.run.validate()?;
        self.longrun.drift.validate()?;
        self.simulate_sweep.drift.validate()?;
        self.simulate_sweep.polarimeter.validate()?;
        self.rate_fidelity.source.validate()?;
        self.rate_fidelity.detectors.validate()?;
        Ok(())
    }

    /// Defaults with a short description of every section.
    pub fn annotated_defaults() -> Self {
        let notes = serde_json::json!({
            "seed": "seed for all random streams; --seed overrides",
            "simulate_sweep": "synthetic fiber (plates, dispersion_rad_per_nm, grid, center_nm), sweep schedule, polarimeter noise, drift between sweeps",
            "analyze_sweep": "reference_nm for the corrected-fidelity curve, fwhm_nm scan list, center_scan_fwhm_nm, optional timestamp_s",
            "rate_fidelity": "pair-rate grid (rates or min_rate/max_rate/points), dwell_s per mode pair, source kappa, detector efficiencies, loss budget, bound options, bootstrap_resamples",
            "longrun": "apc thresholds/periods/costs/optimizer, run duration/sampling/rate/dwell/loss, drift process, initial compensator, optional trailing_average_h",
            "bounds": "normalization (linear_total|per_basis), single_basis_form (halved|as_printed), uncertainty method (bootstrap|gaussian)"
        });
        Self {
            notes: Some(notes),
            ..Self::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints() {
        let g = geometric_grid(2e4, 5e5, 20).unwrap();
        assert_eq!(g.len(), 20);
        assert_eq!((g[0], g[19]), (2e4, 5e5));
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert!(geometric_grid(0.0, 1.0, 3).is_err());
    }

    #[test]
    fn trailing_average_window() {
        let t = [0.0, 1.0, 2.0, 3.0];
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(trailing_average(&t, &x, 2.0), vec![1.0, 1.5, 2.5, 3.5]);
        assert_eq!(trailing_average(&t, &x, 100.0), vec![1.0, 1.5, 2.0, 2.5]);
    }

    #[test]
    fn config_round_trip_and_empty() {
        let cfg = RunConfig::annotated_defaults();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        assert_eq!(RunConfig::from_json_str(&text).unwrap(), cfg);
        assert_eq!(RunConfig::from_json_str("{}").unwrap(), RunConfig::default());
        assert!(RunConfig::from_json_str(r#"{"sede": 3}"#).is_err());
        assert!(RunConfig::from_json_str(r#"{"longrun": {"apc": {"check_period_s": -1}}}"#).is_err());
    }

    #[test]
    fn rate_points_are_independent_of_grid() {
        let cfg = RateFidelityConfig {
            rates: vec![2e4, 1e5],
            bootstrap_resamples: 50,
            ..Default::default()
        };
        let a = rate_fidelity(&cfg, 3).unwrap();
        let b = rate_fidelity(
            &RateFidelityConfig {
                rates: vec![2e4],
                ..cfg.clone()
            },
            3,
        )
        .unwrap();
        assert_eq!(a[0], b[0]);
    }
}
