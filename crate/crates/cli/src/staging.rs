use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

/// A scratch directory next to the output directory. Outputs are written
/// there and moved into place only when the command succeeds, so a failed run
/// leaves the output directory as it was.
#[derive(Debug)]
pub struct Staging {
    target: PathBuf,
    dir: PathBuf,
    committed: bool,
}

impl Staging {
    pub fn begin(target: &Path) -> Result<Self> {
        let name = target
            .file_name()
            .with_context(|| format!("output path {} has no final component", target.display()))?;
        let mut staged = std::ffi::OsString::from(".");
        staged.push(name);
        staged.push(".partial");
        let dir = target.with_file_name(staged);
        if dir.exists() {
            fs::remove_dir_all(&dir).with_context(|| format!("clearing {}", dir.display()))?;
        }
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Staging {
            target: target.to_path_buf(),
            dir,
            committed: false,
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    /// Moves every staged entry into the target, replacing same-named entries.
    pub fn commit(mut self) -> Result<()> {
        fs::create_dir_all(&self.target).with_context(|| format!("creating {}", self.target.display()))?;
        let mut entries: Vec<PathBuf> = fs::read_dir(&self.dir)?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        entries.sort();
        for src in entries {
            let dst = self
                .target
                .join(src.file_name().expect("directory entry has a name"));
            if dst.is_dir() {
                fs::remove_dir_all(&dst)?;
            } else if dst.exists() {
                fs::remove_file(&dst)?;
            }
            fs::rename(&src, &dst)
                .with_context(|| format!("moving {} to {}", src.display(), dst.display()))?;
        }
        fs::remove_dir(&self.dir)?;
        self.committed = true;
        Ok(())
    }

    /// Moves a single staged file into the target before the rest is discarded.
    pub fn rescue(&self, staged: &Path) -> Result<PathBuf> {
        fs::create_dir_all(&self.target)?;
        let dst = self
            .target
            .join(staged.file_name().context("staged path has no file name")?);
        fs::rename(staged, &dst)?;
        Ok(dst)
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.dir);
        }
    }
}
