//! Polarimeter sweep data: the three probe responses at every wavelength of
//! one or more timestamps, with CSV import and export.
//!
//! CSV schema (header required, column order fixed):
//!
//! ```text
//! timestamp_s,wavelength_nm,probe,s1,s2,s3,dop
//! ```
//!
//! `probe` is one of `H`, `D`, `R`. Lines starting with `#` are comments; a
//! comment of the form `# label: <text>` sets the sweep's configuration
//! label.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{FiberChannel, PolarimeterModel, PROBE_FRAME};
use crate::error::{Error, Result};
use crate::polarization::StokesVector;

pub const SWEEP_HEADER: [&str; 7] = ["timestamp_s", "wavelength_nm", "probe", "s1", "s2", "s3", "dop"];

/// Largest Stokes norm accepted from a file; slightly super-unit vectors
/// from instrument noise are pulled back onto the sphere.
const MAX_FILE_STOKES_NORM: f64 = 1.05;

/// Probe state label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Probe {
    H,
    D,
    R,
}

impl Probe {
    pub const ALL: [Probe; 3] = [Probe::H, Probe::D, Probe::R];

    fn index(self) -> usize {
        match self {
            Probe::H => 0,
            Probe::D => 1,
            Probe::R => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Probe::H => "H",
            Probe::D => "D",
            Probe::R => "R",
        }
    }

    fn parse(s: &str) -> Option<Probe> {
        match s {
            "H" => Some(Probe::H),
            "D" => Some(Probe::D),
            "R" => Some(Probe::R),
            _ => None,
        }
    }
}

/// Responses to the `{H, D, R}` probes at one wavelength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub wavelength_nm: f64,
    pub responses: [StokesVector; 3],
}

impl SweepPoint {
    pub fn response(&self, probe: Probe) -> &StokesVector {
        &self.responses[probe.index()]
    }
}

/// All wavelengths recorded at one timestamp, in increasing wavelength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFrame {
    pub timestamp_s: f64,
    pub points: Vec<SweepPoint>,
}

impl SweepFrame {
    pub fn wavelengths(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.wavelength_nm)
    }
}

/// A validated polarimeter sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarimeterSweep {
    pub label: String,
    frames: Vec<SweepFrame>,
}

impl PolarimeterSweep {
    pub fn new(label: impl Into<String>, frames: Vec<SweepFrame>) -> Result<Self> {
        if frames.iter().all(|f| f.points.is_empty()) {
            return Err(Error::EmptySweep);
        }
        for f in &frames {
            for pair in f.points.windows(2) {
                if !(pair[1].wavelength_nm > pair[0].wavelength_nm) {
                    return Err(Error::NonMonotoneGrid {
                        timestamp_s: f.timestamp_s,
                        wavelength_nm: pair[1].wavelength_nm,
                        previous_nm: pair[0].wavelength_nm,
                    });
                }
            }
        }
        Ok(PolarimeterSweep {
            label: label.into(),
            frames,
        })
    }

    pub fn frames(&self) -> &[SweepFrame] {
        &self.frames
    }

    /// Frame recorded at `timestamp_s` (exact match).
    pub fn frame_at(&self, timestamp_s: f64) -> Option<&SweepFrame> {
        self.frames.iter().find(|f| f.timestamp_s == timestamp_s)
    }

    /// Total number of probe records.
    pub fn record_count(&self) -> usize {
        self.frames.iter().map(|f| f.points.len() * 3).sum()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut out = out;
        writeln!(out, "# label: {}", self.label).map_err(|e| Error::io("<sweep>", e))?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(SWEEP_HEADER)?;
        for f in &self.frames {
            for p in &f.points {
                for probe in Probe::ALL {
                    let s = p.response(probe);
                    w.write_record([
                        f.timestamp_s.to_string(),
                        p.wavelength_nm.to_string(),
                        probe.as_str().to_string(),
                        s.s1.to_string(),
                        s.s2.to_string(),
                        s.s3.to_string(),
                        s.dop().to_string(),
                    ])?;
                }
            }
        }
        w.flush().map_err(|e| Error::io("<sweep>", e))?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Reads and validates a sweep CSV file.
pub fn load_sweep(path: impl AsRef<Path>) -> Result<PolarimeterSweep> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let default_label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_sweep(file, &default_label)
}

#[derive(Default)]
struct PartialPoint {
    wavelength_nm: f64,
    responses: [Option<StokesVector>; 3],
}

struct PartialFrame {
    timestamp_s: f64,
    points: Vec<PartialPoint>,
    index: HashMap<u64, usize>,
}

/// Parses sweep CSV from any reader.
pub fn read_sweep<R: Read>(mut input: R, default_label: &str) -> Result<PolarimeterSweep> {
    let mut text = String::new();
    input.read_to_string(&mut text).map_err(|e| Error::io("<sweep>", e))?;
    let label = text
        .lines()
        .filter_map(|l| l.trim().strip_prefix('#'))
        .find_map(|l| l.trim().strip_prefix("label:"))
        .map(|l| l.trim().to_string())
        .unwrap_or_else(|| default_label.to_string());

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());

    let header = reader.headers().map_err(|e| Error::Schema {
        line: 1,
        message: e.to_string(),
    })?;
    if header.is_empty() || header.iter().all(|h| h.is_empty()) {
        return Err(Error::EmptySweep);
    }
    if header.iter().ne(SWEEP_HEADER.iter().copied()) {
        return Err(Error::Schema {
            line: header.position().map_or(1, |p| p.line() as usize),
            message: format!(
                "expected header {:?}, found {:?}",
                SWEEP_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }

    let mut frames: Vec<PartialFrame> = Vec::new();
    let mut frame_index: HashMap<u64, usize> = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Schema {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let schema = |message: String| Error::Schema { line, message };
        if record.len() != SWEEP_HEADER.len() {
            return Err(schema(format!(
                "expected {} fields, found {}",
                SWEEP_HEADER.len(),
                record.len()
            )));
        }
        let num = |i: usize| -> Result<f64> {
            let v: f64 = record[i].parse().map_err(|_| {
                schema(format!(
                    "{}: cannot parse {:?} as a number",
                    SWEEP_HEADER[i], &record[i]
                ))
            })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(schema(format!("{}: non-finite value", SWEEP_HEADER[i])))
            }
        };
        let timestamp_s = num(0)?;
        let wavelength_nm = num(1)?;
        let probe = Probe::parse(&record[2])
            .ok_or_else(|| schema(format!("probe must be H, D or R, found {:?}", &record[2])))?;
        let v = nalgebra::Vector3::new(num(3)?, num(4)?, num(5)?);
        let dop = num(6)?;
        if !(0.0..=MAX_FILE_STOKES_NORM).contains(&dop) {
            return Err(schema(format!("dop {dop} outside [0, 1]")));
        }
        if v.norm() > MAX_FILE_STOKES_NORM {
            return Err(schema(format!("Stokes vector norm {} exceeds 1", v.norm())));
        }
        let s = StokesVector::clamped(v);

        let fi = *frame_index.entry(timestamp_s.to_bits()).or_insert_with(|| {
            frames.push(PartialFrame {
                timestamp_s,
                points: Vec::new(),
                index: HashMap::new(),
            });
            frames.len() - 1
        });
        let frame = &mut frames[fi];
        let pi = *frame.index.entry(wavelength_nm.to_bits()).or_insert_with(|| {
            frame.points.push(PartialPoint {
                wavelength_nm,
                ..PartialPoint::default()
            });
            frame.points.len() - 1
        });
        let slot = &mut frame.points[pi].responses[probe.index()];
        if slot.is_some() {
            return Err(Error::DuplicateProbe {
                timestamp_s,
                wavelength_nm,
                probe: probe.as_str().into(),
                line,
            });
        }
        *slot = Some(s);
    }

    if frames.is_empty() {
        return Err(Error::EmptySweep);
    }
    let mut complete = Vec::with_capacity(frames.len());
    for f in frames {
        let mut points = Vec::with_capacity(f.points.len());
        for p in f.points {
            let mut responses = [StokesVector::H; 3];
            for probe in Probe::ALL {
                responses[probe.index()] = p.responses[probe.index()].ok_or_else(|| Error::MissingProbe {
                    timestamp_s: f.timestamp_s,
                    wavelength_nm: p.wavelength_nm,
                    probe: probe.as_str().into(),
                })?;
            }
            points.push(SweepPoint {
                wavelength_nm: p.wavelength_nm,
                responses,
            });
        }
        complete.push(SweepFrame {
            timestamp_s: f.timestamp_s,
            points,
        });
    }
    PolarimeterSweep::new(label, complete)
}

/// Timing of a simulated sweep series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSchedule {
    /// Number of sweeps (timestamps).
    pub sweeps: usize,
    /// Time between consecutive sweeps (s).
    pub interval_s: f64,
}

impl Default for SweepSchedule {
    fn default() -> Self {
        SweepSchedule {
            sweeps: 1,
            interval_s: 3600.0,
        }
    }
}

/// Probes `channel` with `{H, D, R}` at every grid wavelength, letting it
/// drift for `interval_s` between sweeps. Each sweep is treated as
/// instantaneous.
pub fn simulate_sweep<R: Rng + ?Sized>(
    channel: &FiberChannel,
    schedule: &SweepSchedule,
    polarimeter: &PolarimeterModel,
    label: &str,
    rng: &mut R,
) -> Result<PolarimeterSweep> {
    let mut ch = channel.clone();
    let mut frames = Vec::with_capacity(schedule.sweeps);
    for k in 0..schedule.sweeps {
        if k > 0 {
            ch.advance(schedule.interval_s, rng);
        }
        let points = ch
            .grid()
            .wavelengths()
            .zip(ch.rotations())
            .map(|(wavelength_nm, r)| SweepPoint {
                wavelength_nm,
                responses: PROBE_FRAME.map(|p| polarimeter.measure(&(r.matrix() * p.to_vector()), rng)),
            })
            .collect();
        frames.push(SweepFrame {
            timestamp_s: k as f64 * schedule.interval_s,
            points,
        });
    }
    PolarimeterSweep::new(label, frames)
}
