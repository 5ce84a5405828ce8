//! Orientation traces and their CSV representation.
//!
//! A trace is one subject's uniformly sampled yaw/pitch/roll series in degrees.
//! The canonical file format is a UTF-8 CSV with the header
//! `timestamp,yaw,pitch,roll`; timestamps are checked for monotonicity and then
//! dropped, the declared sample rate is authoritative.

use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Jump between consecutive yaw samples above which a rollover is suspected.
const ROLLOVER_JUMP_DEG: f64 = 300.0;

/// Rotation axis. Every block and file in the crate uses this order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Yaw,
    Pitch,
    Roll,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::Yaw, Axis::Pitch, Axis::Roll];

    /// All unordered axis pairs, in the order used by reports.
    pub const PAIRS: [(Axis, Axis); 3] = [
        (Axis::Yaw, Axis::Pitch),
        (Axis::Yaw, Axis::Roll),
        (Axis::Pitch, Axis::Roll),
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::Yaw => "yaw",
            Axis::Pitch => "pitch",
            Axis::Roll => "roll",
        }
    }

    /// Yaw and roll live on the circle; pitch is bounded to [-90, 90].
    pub fn is_circular(self) -> bool {
        !matches!(self, Axis::Pitch)
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A finite angle in degrees.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct AngleDeg(f64);

impl AngleDeg {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() {
            Ok(AngleDeg(value))
        } else {
            Err(Error::Validation(format!("angle {value} is not finite")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// The same direction expressed in [-180, 180).
    pub fn wrapped(self) -> AngleDeg {
        AngleDeg(crate::preprocess::wrap_angle(self.0))
    }

    pub fn is_wrapped(self) -> bool {
        (-180.0..180.0).contains(&self.0)
    }

    pub fn is_valid_pitch(self) -> bool {
        (-90.0..=90.0).contains(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Orientation {
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

impl Orientation {
    pub fn new(yaw: f64, pitch: f64, roll: f64) -> Self {
        Orientation { yaw, pitch, roll }
    }

    pub fn get(&self, axis: Axis) -> f64 {
        match axis {
            Axis::Yaw => self.yaw,
            Axis::Pitch => self.pitch,
            Axis::Roll => self.roll,
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.yaw, self.pitch, self.roll]
    }

    fn is_finite(&self) -> bool {
        self.yaw.is_finite() && self.pitch.is_finite() && self.roll.is_finite()
    }
}

/// One subject's uniformly sampled orientation series.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    subject_id: String,
    rate_hz: f64,
    samples: Vec<Orientation>,
}

impl Trace {
    pub fn new(subject_id: impl Into<String>, rate_hz: f64, samples: Vec<Orientation>) -> Result<Self> {
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(invalid(format!("sample rate must be positive, got {rate_hz}")));
        }
        if samples.is_empty() {
            return Err(Error::Validation("empty trace".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::Validation(format!("non-finite angle at sample {i}")));
        }
        Ok(Trace {
            subject_id: subject_id.into(),
            rate_hz,
            samples,
        })
    }

    /// Builds a trace from three equally long axis series.
    pub fn from_axes(
        subject_id: impl Into<String>,
        rate_hz: f64,
        yaw: &[f64],
        pitch: &[f64],
        roll: &[f64],
    ) -> Result<Self> {
        if yaw.len() != pitch.len() || yaw.len() != roll.len() {
            return Err(invalid(format!(
                "axis lengths differ: yaw {}, pitch {}, roll {}",
                yaw.len(),
                pitch.len(),
                roll.len()
            )));
        }
        let samples = yaw
            .iter()
            .zip(pitch)
            .zip(roll)
            .map(|((&y, &p), &r)| Orientation::new(y, p, r))
            .collect();
        Trace::new(subject_id, rate_hz, samples)
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn samples(&self) -> &[Orientation] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn axis(&self, axis: Axis) -> Vec<f64> {
        self.samples.iter().map(|s| s.get(axis)).collect()
    }

    pub fn axes(&self) -> [Vec<f64>; 3] {
        Axis::ALL.map(|a| self.axis(a))
    }
}

/// A collection of traces recorded at one common rate.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSet {
    traces: Vec<Trace>,
    provenance: String,
}

impl TraceSet {
    pub fn new(traces: Vec<Trace>, provenance: impl Into<String>) -> Result<Self> {
        if let Some(first) = traces.first() {
            if let Some(bad) = traces.iter().find(|t| t.rate_hz != first.rate_hz) {
                return Err(Error::Validation(format!(
                    "trace {} has rate {} Hz but {} has {} Hz",
                    bad.subject_id, bad.rate_hz, first.subject_id, first.rate_hz
                )));
            }
        }
        Ok(TraceSet {
            traces,
            provenance: provenance.into(),
        })
    }

    pub fn traces(&self) -> &[Trace] {
        &self.traces
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    /// Common sample rate, `None` for an empty set.
    pub fn rate_hz(&self) -> Option<f64> {
        self.traces.first().map(|t| t.rate_hz)
    }
}

const CSV_HEADER: [&str; 4] = ["timestamp", "yaw", "pitch", "roll"];

/// Reads a trace CSV. The subject id is the file stem.
pub fn load_trace_csv(path: impl AsRef<Path>, rate_hz: f64) -> Result<Trace> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let header = reader
        .headers()
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?
        .clone();
    let names: Vec<&str> = header.iter().collect();
    if names != CSV_HEADER {
        return Err(Error::Format(format!(
            "{}: expected header `timestamp,yaw,pitch,roll`, found `{}`",
            path.display(),
            names.join(",")
        )));
    }

    let mut samples = Vec::new();
    let mut last_time = f64::NEG_INFINITY;
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Format(format!("{}: row {row}: {e}", path.display())))?;
        if record.len() != CSV_HEADER.len() {
            return Err(Error::Format(format!(
                "{}: row {row} has {} columns, expected 4",
                path.display(),
                record.len()
            )));
        }
        let mut values = [0.0f64; 4];
        for (slot, (field, name)) in values.iter_mut().zip(record.iter().zip(CSV_HEADER)) {
            let v: f64 = field.parse().map_err(|_| {
                Error::Format(format!(
                    "{}: row {row}: column {name} is not a number: `{field}`",
                    path.display()
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::Validation(format!(
                    "{}: row {row}: column {name} is not finite",
                    path.display()
                )));
            }
            *slot = v;
        }
        if values[0] <= last_time {
            return Err(Error::Validation(format!(
                "{}: row {row}: timestamp {} does not increase",
                path.display(),
                values[0]
            )));
        }
        last_time = values[0];
        samples.push(Orientation::new(values[1], values[2], values[3]));
    }
    if samples.is_empty() {
        return Err(Error::Validation(format!("{}: empty trace", path.display())));
    }
    let subject = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Trace::new(subject, rate_hz, samples)
}

/// Writes a trace CSV with timestamps `i / rate_hz`.
///
/// Values use Rust's shortest round-trip float formatting, so reading the file
/// back reproduces the trace exactly.
pub fn save_trace_csv(trace: &Trace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::with_capacity(trace.len() * 48);
    out.push_str("timestamp,yaw,pitch,roll\n");
    for (i, s) in trace.samples.iter().enumerate() {
        let t = i as f64 / trace.rate_hz;
        out.push_str(&format!("{t},{},{},{}\n", s.yaw, s.pitch, s.roll));
    }
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceWarning {
    PitchOutOfRange {
        count: usize,
        first_index: usize,
        value: f64,
    },
    AngleNotWrapped {
        axis: Axis,
        count: usize,
        first_index: usize,
        value: f64,
    },
    PossibleRollover {
        count: usize,
        first_index: usize,
        jump: f64,
    },
}

impl fmt::Display for TraceWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceWarning::PitchOutOfRange { count, first_index, value } => write!(
                f,
                "pitch out of range [-90, 90]: {count} samples, first at {first_index} ({value})"
            ),
            TraceWarning::AngleNotWrapped { axis, count, first_index, value } => write!(
                f,
                "{axis} outside [-180, 180): {count} samples, first at {first_index} ({value})"
            ),
            TraceWarning::PossibleRollover { count, first_index, jump } => write!(
                f,
                "possible rollover: {count} yaw jumps over {ROLLOVER_JUMP_DEG} deg, first at {first_index} ({jump})"
            ),
        }
    }
}

/// Range and continuity checks. Never fails; at most one warning per rule and axis.
pub fn validate_trace(trace: &Trace) -> Vec<TraceWarning> {
    let mut warnings = Vec::new();

    let pitch = trace.axis(Axis::Pitch);
    let bad: Vec<usize> = (0..pitch.len())
        .filter(|&i| !(-90.0..=90.0).contains(&pitch[i]))
        .collect();
    if let Some(&first) = bad.first() {
        warnings.push(TraceWarning::PitchOutOfRange {
            count: bad.len(),
            first_index: first,
            value: pitch[first],
        });
    }

    for axis in [Axis::Yaw, Axis::Roll] {
        let series = trace.axis(axis);
        let bad: Vec<usize> = (0..series.len())
            .filter(|&i| !(-180.0..180.0).contains(&series[i]))
            .collect();
        if let Some(&first) = bad.first() {
            warnings.push(TraceWarning::AngleNotWrapped {
                axis,
                count: bad.len(),
                first_index: first,
                value: series[first],
            });
        }
    }

    let yaw = trace.axis(Axis::Yaw);
    let jumps: Vec<usize> = (1..yaw.len())
        .filter(|&i| (yaw[i] - yaw[i - 1]).abs() > ROLLOVER_JUMP_DEG)
        .collect();
    if let Some(&first) = jumps.first() {
        warnings.push(TraceWarning::PossibleRollover {
            count: jumps.len(),
            first_index: first,
            jump: yaw[first] - yaw[first - 1],
        });
    }
    warnings
}
