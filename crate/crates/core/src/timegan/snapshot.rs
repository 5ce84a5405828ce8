use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::checkpoint::{checkpoint_path, Checkpoint};
use super::train::{Snapshot, SnapshotSink};
use crate::error::{invalid, Error, Result};
use crate::metrics::{fidelity_score, FidelityScore, MetricsConfig};
use crate::windows::{ArchiveMeta, WindowSet};

const PREFIX: &str = "snapshot-";
const DIAGNOSTIC: &str = "diagnostic-checkpoint.bin";

/// Snapshot archive on disk: one `snapshot-EEEEE` directory per snapshot
/// epoch, holding `checkpoint.bin` and a `windows/` archive in degrees.
#[derive(Debug, Clone)]
pub struct DirectoryArchive {
    root: PathBuf,
}

impl DirectoryArchive {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        Ok(DirectoryArchive { root })
    }

    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        if !root.is_dir() {
            return Err(Error::io(
                &root,
                std::io::Error::from(std::io::ErrorKind::NotFound),
            ));
        }
        Ok(DirectoryArchive { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn snapshot_dir(&self, epoch: usize) -> PathBuf {
        self.root.join(format!("{PREFIX}{epoch:05}"))
    }

    /// Snapshot epochs present, ascending.
    pub fn epochs(&self) -> Result<Vec<usize>> {
        let entries = fs::read_dir(&self.root).map_err(|e| Error::io(&self.root, e))?;
        let mut epochs = Vec::new();
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(&self.root, e))?;
            let name = entry.file_name();
            if let Some(epoch) = name
                .to_str()
                .and_then(|n| n.strip_prefix(PREFIX))
                .and_then(|n| n.parse().ok())
            {
                epochs.push(epoch);
            }
        }
        epochs.sort_unstable();
        Ok(epochs)
    }

    pub fn load_windows(&self, epoch: usize) -> Result<WindowSet> {
        Ok(WindowSet::load(self.snapshot_dir(epoch).join("windows"))?.0)
    }

    pub fn load_checkpoint(&self, epoch: usize) -> Result<Checkpoint> {
        Checkpoint::load(checkpoint_path(&self.snapshot_dir(epoch)))
    }

    /// Scores every snapshot against `real`.
    pub fn select(&self, real: &WindowSet, cfg: &MetricsConfig) -> Result<SnapshotSelection> {
        let epochs = self.epochs()?;
        select_snapshot(
            epochs.into_iter().map(|e| self.load_windows(e).map(|w| (e, w))),
            real,
            cfg,
        )
    }
}

impl SnapshotSink for DirectoryArchive {
    fn snapshot(&mut self, snapshot: Snapshot) -> Result<()> {
        let dir = self.snapshot_dir(snapshot.epoch);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        snapshot.checkpoint.save(checkpoint_path(&dir))?;
        let meta = ArchiveMeta::degrees(format!(
            "timegan snapshot at joint epoch {} ({} values clamped)",
            snapshot.epoch, snapshot.clamped
        ));
        snapshot.windows.save(dir.join("windows"), &meta)
    }

    fn diagnostic(&mut self, checkpoint: &Checkpoint) -> Result<Option<PathBuf>> {
        let path = self.root.join(DIAGNOSTIC);
        checkpoint.save(&path)?;
        Ok(Some(path))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub id: usize,
    pub score: FidelityScore,
}

/// Scores of every snapshot, ordered by id, and the lowest-scoring id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotSelection {
    pub best: usize,
    pub table: Vec<ScoreRow>,
}

impl SnapshotSelection {
    fn from_rows(mut table: Vec<ScoreRow>) -> Result<Self> {
        if table.is_empty() {
            return Err(invalid("snapshot archive is empty"));
        }
        table.sort_by_key(|r| r.id);
        let best = table
            .iter()
            .min_by(|a, b| a.score.total.total_cmp(&b.score.total).then(a.id.cmp(&b.id)))
            .map(|r| r.id)
            .expect("non-empty");
        Ok(SnapshotSelection { best, table })
    }

    pub fn best_row(&self) -> &ScoreRow {
        self.table
            .iter()
            .find(|r| r.id == self.best)
            .expect("best id is in the table")
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from(
            "id,total,orientation_yaw,orientation_pitch,orientation_roll,range_yaw,range_pitch,range_roll,autocorr_yaw,autocorr_pitch,autocorr_roll\n",
        );
        for r in &self.table {
            let s = &r.score;
            let cells: Vec<String> = std::iter::once(s.total)
                .chain(s.orientation_l1)
                .chain(s.range_l1)
                .chain(s.autocorrelation_deviation)
                .map(|v| v.to_string())
                .collect();
            out.push_str(&format!("{},{}\n", r.id, cells.join(",")));
        }
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Picks the generated dataset closest to `real` by [`fidelity_score`]; ties
/// go to the lower id.
pub fn select_snapshot<I>(snapshots: I, real: &WindowSet, cfg: &MetricsConfig) -> Result<SnapshotSelection>
where
    I: IntoIterator<Item = Result<(usize, WindowSet)>>,
{
    let mut rows = Vec::new();
    for item in snapshots {
        let (id, windows) = item?;
        rows.push(ScoreRow {
            id,
            score: fidelity_score(real, &windows, cfg)?,
        });
    }
    SnapshotSelection::from_rows(rows)
}

/// Scores snapshots as they arrive, keeps the best one in memory and
/// optionally forwards every snapshot to another sink.
pub struct ScoringSink<'a> {
    real: &'a WindowSet,
    cfg: MetricsConfig,
    inner: Option<&'a mut dyn SnapshotSink>,
    rows: Vec<ScoreRow>,
    best: Option<(f64, Snapshot)>,
}

impl<'a> ScoringSink<'a> {
    pub fn new(real: &'a WindowSet, cfg: MetricsConfig, inner: Option<&'a mut dyn SnapshotSink>) -> Self {
        ScoringSink {
            real,
            cfg,
            inner,
            rows: Vec::new(),
            best: None,
        }
    }

    pub fn selection(&self) -> Result<SnapshotSelection> {
        SnapshotSelection::from_rows(self.rows.clone())
    }

    pub fn into_best(self) -> Option<Snapshot> {
        self.best.map(|(_, s)| s)
    }
}

impl SnapshotSink for ScoringSink<'_> {
    fn snapshot(&mut self, snapshot: Snapshot) -> Result<()> {
        let score = fidelity_score(self.real, &snapshot.windows, &self.cfg)?;
        self.rows.push(ScoreRow {
            id: snapshot.epoch,
            score,
        });
        let better = self.best.as_ref().is_none_or(|(t, _)| score.total < *t);
        let keep = better.then(|| snapshot.clone());
        if let Some(inner) = self.inner.as_deref_mut() {
            inner.snapshot(snapshot)?;
        }
        if let Some(s) = keep {
            self.best = Some((score.total, s));
        }
        Ok(())
    }

    fn diagnostic(&mut self, checkpoint: &Checkpoint) -> Result<Option<PathBuf>> {
        match self.inner.as_deref_mut() {
            Some(inner) => inner.diagnostic(checkpoint),
            None => Ok(None),
        }
    }
}
