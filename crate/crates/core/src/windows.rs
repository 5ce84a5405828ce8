//! Fixed-length window blocks and their on-disk archive.
//!
//! An archive is a directory holding `manifest.json` and `data.bin`. The binary
//! is the block as little-endian f64 in window-major, step-major, axis-minor order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::preprocess::PreprocessConfig;
use crate::trace::Axis;

pub const AXES: usize = 3;
const MANIFEST: &str = "manifest.json";
const DATA: &str = "data.bin";
const FORMAT: &str = "headrot-windows";
const VERSION: u32 = 1;

/// A block of `count × len × 3` values, axis order (yaw, pitch, roll).
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    count: usize,
    len: usize,
    rate_hz: f64,
    data: Vec<f64>,
}

impl WindowSet {
    pub fn new(count: usize, len: usize, rate_hz: f64, data: Vec<f64>) -> Result<Self> {
        if len < 2 {
            return Err(invalid(format!("window length must be at least 2, got {len}")));
        }
        if count < 1 {
            return Err(invalid("window set must hold at least one window"));
        }
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(invalid(format!("sample rate must be positive, got {rate_hz}")));
        }
        if data.len() != count * len * AXES {
            return Err(invalid(format!(
                "data length {} does not match {count} x {len} x {AXES}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite value in window {} step {}",
                i / (len * AXES),
                (i / AXES) % len
            )));
        }
        Ok(WindowSet {
            count,
            len,
            rate_hz,
            data,
        })
    }

    /// Concatenates windows given as `len × 3` slices.
    pub fn from_windows<'a, I>(len: usize, rate_hz: f64, windows: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut data = Vec::new();
        let mut count = 0;
        for w in windows {
            if w.len() != len * AXES {
                return Err(invalid(format!(
                    "window {count} has {} values, expected {}",
                    w.len(),
                    len * AXES
                )));
            }
            data.extend_from_slice(w);
            count += 1;
        }
        WindowSet::new(count, len, rate_hz, data)
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.count, self.len, AXES]
    }

    /// The `len × 3` block of window `i`.
    pub fn window(&self, i: usize) -> &[f64] {
        let n = self.len * AXES;
        &self.data[i * n..(i + 1) * n]
    }

    pub fn windows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.len * AXES)
    }

    pub fn value(&self, window: usize, step: usize, axis: Axis) -> f64 {
        self.data[(window * self.len + step) * AXES + axis.index()]
    }

    /// One axis of window `i` as a contiguous series.
    pub fn series(&self, i: usize, axis: Axis) -> Vec<f64> {
        self.window(i)
            .iter()
            .skip(axis.index())
            .step_by(AXES)
            .copied()
            .collect()
    }

    /// All values of one axis pooled across windows and steps.
    pub fn axis_values(&self, axis: Axis) -> impl Iterator<Item = f64> + '_ {
        self.data.iter().skip(axis.index()).step_by(AXES).copied()
    }

    /// Selects windows by index, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<WindowSet> {
        WindowSet::from_windows(self.len, self.rate_hz, indices.iter().map(|&i| self.window(i)))
    }

    pub fn save(&self, dir: impl AsRef<Path>, meta: &ArchiveMeta) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let manifest = Manifest {
            format: FORMAT.into(),
            version: VERSION,
            shape: self.shape(),
            rate_hz: self.rate_hz,
            axis_order: Axis::ALL.map(|a| a.name().to_string()).to_vec(),
            dtype: "f64le".into(),
            data_file: DATA.into(),
            meta: meta.clone(),
        };
        let json = serde_json::to_string_pretty(&manifest)?;
        let path = dir.join(MANIFEST);
        fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
        let mut bytes = Vec::with_capacity(self.data.len() * 8);
        for v in &self.data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let path = dir.join(DATA);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<(WindowSet, ArchiveMeta)> {
        let dir = dir.as_ref();
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest =
            serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        if manifest.format != FORMAT {
            return Err(Error::Format(format!("{}: not a window archive", path.display())));
        }
        if manifest.version > VERSION {
            return Err(Error::UnsupportedVersion {
                found: manifest.version,
                supported: VERSION,
            });
        }
        if manifest.shape[2] != AXES {
            return Err(Error::Format(format!("{}: expected 3 axes", path.display())));
        }
        let path = dir.join(&manifest.data_file);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let expected = manifest.shape.iter().product::<usize>() * 8;
        if bytes.len() != expected {
            return Err(Error::Corrupt {
                path,
                offset: bytes.len().min(expected) as u64,
                reason: format!("expected {expected} bytes, found {}", bytes.len()),
            });
        }
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let set = WindowSet::new(manifest.shape[0], manifest.shape[1], manifest.rate_hz, data)?;
        Ok((set, manifest.meta))
    }
}

/// Whether values are degrees or the [0, 1] model representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    Degrees,
    Transformed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveMeta {
    pub representation: Representation,
    pub preprocess: Option<PreprocessConfig>,
    /// Free text: where the windows came from and which transform produced them.
    pub provenance: String,
}

impl ArchiveMeta {
    pub fn degrees(provenance: impl Into<String>) -> Self {
        ArchiveMeta {
            representation: Representation::Degrees,
            preprocess: None,
            provenance: provenance.into(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    shape: [usize; 3],
    rate_hz: f64,
    axis_order: Vec<String>,
    dtype: String,
    data_file: String,
    meta: ArchiveMeta,
}
