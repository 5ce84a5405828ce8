//! Binary checkpoint container.
//!
//! Layout: the 8-byte magic `HRTGCKPT`, a little-endian u32 format version, a
//! little-endian u64 manifest length, the JSON manifest, then the payload of
//! little-endian f64 values. The manifest indexes every named tensor in the
//! payload by offset and length (in values).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{TimeGanConfig, TrainSchedule};
use super::model::{TimeGanModel, NETWORKS};
use super::train::{JointLosses, LossHistory, Optimizers, SchedulePosition, OPTIMIZERS};
use crate::error::{Error, Result};
use crate::nn::{AdamState, Parameterized};
use crate::preprocess::TransformParams;

const MAGIC: &[u8; 8] = b"HRTGCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 8;

/// Complete training state: resuming from it continues bit-identically.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: TimeGanModel,
    pub optimizers: Optimizers,
    pub schedule: TrainSchedule,
    pub position: SchedulePosition,
    pub rng: ChaCha8Rng,
    pub transform: TransformParams,
    pub history: LossHistory,
    pub real_window_count: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct RngState {
    /// 32-byte key, hex.
    seed: String,
    stream: u64,
    /// Position in the keystream; a u128 written as a decimal string.
    word_pos: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
    len: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    config: TimeGanConfig,
    schedule: TrainSchedule,
    seq_len: usize,
    rate_hz: f64,
    position: SchedulePosition,
    rng: RngState,
    transform: TransformParams,
    real_window_count: usize,
    adam_steps: BTreeMap<String, u64>,
    tensors: Vec<TensorEntry>,
    payload_len: usize,
}

struct PayloadWriter {
    tensors: Vec<TensorEntry>,
    values: Vec<f64>,
}

impl PayloadWriter {
    fn push(&mut self, name: String, shape: &[usize], values: &[f64]) {
        self.tensors.push(TensorEntry {
            name,
            shape: shape.to_vec(),
            offset: self.values.len(),
            len: values.len(),
        });
        self.values.extend_from_slice(values);
    }
}

fn corrupt(path: &Path, offset: usize, reason: impl Into<String>) -> Error {
    Error::Corrupt {
        path: path.to_path_buf(),
        offset: offset as u64,
        reason: reason.into(),
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut payload = PayloadWriter {
            tensors: Vec::new(),
            values: Vec::new(),
        };
        for (name, net) in NETWORKS.iter().zip(self.model.networks()) {
            net.for_each_param(&mut |p, shape, v| payload.push(format!("{name}.{p}"), shape, v));
        }
        let mut adam_steps = BTreeMap::new();
        for (name, opt) in OPTIMIZERS.iter().zip(self.optimizers.all()) {
            adam_steps.insert(name.to_string(), opt.step_count());
            let n = opt.first_moment().len();
            payload.push(format!("adam.{name}.m"), &[n], opt.first_moment());
            payload.push(format!("adam.{name}.v"), &[n], opt.second_moment());
        }
        let h = &self.history;
        payload.push("history.embedding".into(), &[h.embedding.len()], &h.embedding);
        payload.push("history.supervised".into(), &[h.supervised.len()], &h.supervised);
        let joint: Vec<f64> = h.joint.iter().flat_map(|j| j.to_array()).collect();
        payload.push(
            "history.joint".into(),
            &[h.joint.len(), JointLosses::FIELDS.len()],
            &joint,
        );

        let seed: String = self.rng.get_seed().iter().map(|b| format!("{b:02x}")).collect();
        let manifest = Manifest {
            config: self.model.config,
            schedule: self.schedule,
            seq_len: self.model.seq_len,
            rate_hz: self.model.rate_hz,
            position: self.position,
            rng: RngState {
                seed,
                stream: self.rng.get_stream(),
                word_pos: self.rng.get_word_pos().to_string(),
            },
            transform: self.transform.clone(),
            real_window_count: self.real_window_count,
            adam_steps,
            tensors: payload.tensors,
            payload_len: payload.values.len(),
        };
        let json = serde_json::to_vec(&manifest)?;
        let mut out = Vec::with_capacity(HEADER_LEN + json.len() + 8 * payload.values.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for v in &payload.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    /// Parses a checkpoint; `origin` only labels diagnostics.
    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(corrupt(origin, bytes.len(), "file ends inside the header"));
        }
        if &bytes[..8] != MAGIC {
            return Err(corrupt(origin, 0, "not a checkpoint (bad magic)"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version > CHECKPOINT_VERSION {
            return Err(Error::UnsupportedVersion {
                found: version,
                supported: CHECKPOINT_VERSION,
            });
        }
        if version == 0 {
            return Err(corrupt(origin, 8, "version 0 is not valid"));
        }
        let manifest_len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
        let manifest_end = HEADER_LEN
            .checked_add(manifest_len)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| {
                corrupt(
                    origin,
                    bytes.len(),
                    format!("manifest of {manifest_len} bytes is truncated"),
                )
            })?;
        let manifest: Manifest = serde_json::from_slice(&bytes[HEADER_LEN..manifest_end]).map_err(|e| {
            corrupt(
                origin,
                HEADER_LEN + e.column().saturating_sub(1),
                format!("bad manifest: {e}"),
            )
        })?;

        let payload = &bytes[manifest_end..];
        if payload.len() != manifest.payload_len * 8 {
            return Err(corrupt(
                origin,
                manifest_end + payload.len().min(manifest.payload_len * 8),
                format!(
                    "payload holds {} bytes, manifest declares {} values",
                    payload.len(),
                    manifest.payload_len
                ),
            ));
        }
        let values: Vec<f64> = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let mut tensors: BTreeMap<&str, &TensorEntry> = BTreeMap::new();
        for t in &manifest.tensors {
            if t.offset + t.len > values.len() || t.shape.iter().product::<usize>() != t.len {
                return Err(corrupt(
                    origin,
                    manifest_end + 8 * t.offset,
                    format!("tensor {} is out of bounds", t.name),
                ));
            }
            tensors.insert(&t.name, t);
        }
        let tensor = |name: &str, len: Option<usize>| -> Result<&[f64]> {
            let t = tensors
                .get(name)
                .ok_or_else(|| corrupt(origin, HEADER_LEN, format!("tensor {name} missing from manifest")))?;
            if len.is_some_and(|l| l != t.len) {
                return Err(corrupt(
                    origin,
                    manifest_end + 8 * t.offset,
                    format!(
                        "tensor {name} has {} values, expected {}",
                        t.len,
                        len.unwrap_or(0)
                    ),
                ));
            }
            Ok(&values[t.offset..t.offset + t.len])
        };

        let mut model =
            TimeGanModel::new(manifest.config, manifest.seq_len, manifest.rate_hz, 0).map_err(|e| {
                corrupt(
                    origin,
                    HEADER_LEN,
                    format!("manifest describes an invalid model: {e}"),
                )
            })?;
        let mut missing = None;
        for (name, net) in NETWORKS.iter().zip(model.networks_mut()) {
            net.for_each_param_mut(&mut |p, v| {
                let key = format!("{name}.{p}");
                match tensor(&key, Some(v.len())) {
                    Ok(src) => v.copy_from_slice(src),
                    Err(e) => {
                        missing.get_or_insert(e);
                    }
                }
            });
        }
        if let Some(e) = missing {
            return Err(e);
        }

        let fresh = Optimizers::new(&model);
        let mut restored = Vec::with_capacity(OPTIMIZERS.len());
        for (name, opt) in OPTIMIZERS.iter().zip(fresh.all()) {
            let n = opt.first_moment().len();
            let step = *manifest
                .adam_steps
                .get(*name)
                .ok_or_else(|| corrupt(origin, HEADER_LEN, format!("optimizer {name} missing")))?;
            let m = tensor(&format!("adam.{name}.m"), Some(n))?.to_vec();
            let v = tensor(&format!("adam.{name}.v"), Some(n))?.to_vec();
            restored.push(AdamState::from_parts(*opt.config(), step, m, v)?);
        }
        let mut it = restored.into_iter();
        let mut next = || it.next().expect("five optimizers");
        let optimizers = Optimizers {
            embedding: next(),
            supervised: next(),
            generator: next(),
            embedder: next(),
            discriminator: next(),
        };

        let joint_raw = tensor("history.joint", None)?;
        let fields = JointLosses::FIELDS.len();
        if joint_raw.len() % fields != 0 {
            return Err(corrupt(origin, manifest_end, "joint history has a partial row"));
        }
        let history = LossHistory {
            embedding: tensor("history.embedding", None)?.to_vec(),
            supervised: tensor("history.supervised", None)?.to_vec(),
            joint: joint_raw
                .chunks_exact(fields)
                .map(|c| JointLosses::from_array(c.try_into().expect("row width")))
                .collect(),
        };

        let rng = restore_rng(&manifest.rng).ok_or_else(|| corrupt(origin, HEADER_LEN, "bad RNG state"))?;
        Ok(Checkpoint {
            model,
            optimizers,
            schedule: manifest.schedule,
            position: manifest.position,
            rng,
            transform: manifest.transform,
            history,
            real_window_count: manifest.real_window_count,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}

fn restore_rng(state: &RngState) -> Option<ChaCha8Rng> {
    if state.seed.len() != 64 {
        return None;
    }
    let mut seed = [0u8; 32];
    for (i, b) in seed.iter_mut().enumerate() {
        *b = u8::from_str_radix(state.seed.get(2 * i..2 * i + 2)?, 16).ok()?;
    }
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(state.stream);
    rng.set_word_pos(state.word_pos.parse().ok()?);
    Some(rng)
}

/// Path-friendly name of the checkpoint file inside a snapshot directory.
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";

pub(crate) fn checkpoint_path(dir: &Path) -> PathBuf {
    dir.join(CHECKPOINT_FILE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::{apply_transform, fit_transform};
    use crate::timegan::train::{DiscardSink, Trainer};
    use crate::toy::{sine_windows, SineWindowSpec};

    fn trained() -> Checkpoint {
        let real = sine_windows(
            &SineWindowSpec {
                count: 24,
                len: 5,
                ..SineWindowSpec::default()
            },
            2,
        );
        let params = fit_transform(&real, 30).unwrap();
        let x = apply_transform(&real, &params);
        let cfg = TimeGanConfig {
            hidden_dim: 4,
            latent_dim: 3,
            num_layers: 2,
            ..TimeGanConfig::default()
        };
        let sched = TrainSchedule {
            epochs_embedding: 1,
            epochs_supervised: 1,
            epochs_joint: 1,
            batch_size: 8,
            ..TrainSchedule::default()
        };
        let mut t = Trainer::new(&x, params, cfg, sched).unwrap();
        t.run(&x, &mut DiscardSink).unwrap();
        t.into_checkpoint()
    }

    #[test]
    fn file_round_trip_and_header() {
        let ck = trained();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(CHECKPOINT_FILE);
        ck.save(&path).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[..8], b"HRTGCKPT");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 1);
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn nan_history_survives() {
        let mut ck = trained();
        ck.history.embedding.push(f64::NAN);
        let back = Checkpoint::from_bytes(&ck.to_bytes().unwrap(), Path::new("x")).unwrap();
        assert!(back.history.embedding.last().unwrap().is_nan());
        assert_eq!(back.history.joint, ck.history.joint);
    }

    #[test]
    fn truncation_is_reported_with_offset() {
        let bytes = trained().to_bytes().unwrap();
        for cut in [4, HEADER_LEN + 3, bytes.len() - 8] {
            match Checkpoint::from_bytes(&bytes[..cut], Path::new("ck.bin")) {
                Err(Error::Corrupt { path, offset, .. }) => {
                    assert_eq!(path, Path::new("ck.bin"));
                    assert!(offset as usize <= cut, "offset {offset} beyond cut {cut}");
                }
                other => panic!("cut {cut}: expected Corrupt, got {other:?}"),
            }
        }
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(
            Checkpoint::from_bytes(&bad, Path::new("x")),
            Err(Error::Corrupt { offset: 0, .. })
        ));
    }

    #[test]
    fn future_versions_are_refused() {
        let mut bytes = trained().to_bytes().unwrap();
        bytes[8..12].copy_from_slice(&2u32.to_le_bytes());
        assert!(matches!(
            Checkpoint::from_bytes(&bytes, Path::new("x")),
            Err(Error::UnsupportedVersion {
                found: 2,
                supported: 1
            })
        ));
    }
}
