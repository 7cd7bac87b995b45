//! Where every artifact lives under the output directory.

use std::path::{Path, PathBuf};

use qgdebias_core::nets::Architecture;

#[derive(Debug, Clone)]
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    pub fn stage_dir(&self, stage: &str) -> PathBuf {
        self.root.join(stage)
    }

    pub fn stage_config(&self, stage: &str) -> PathBuf {
        self.stage_dir(stage).join("config.toml")
    }

    /// Fine reference over the training window, fine grid.
    pub fn fine_train(&self) -> PathBuf {
        self.root.join("simulate/fine_train.qgtj")
    }

    /// Free coarse run over the training window.
    pub fn cr_train(&self) -> PathBuf {
        self.root.join("simulate/cr_train.qgtj")
    }

    /// Fine reference over the test window, projected onto the coarse grid.
    pub fn rd_test(&self) -> PathBuf {
        self.root.join("simulate/rd_test.qgtj")
    }

    pub fn cr_test(&self) -> PathBuf {
        self.root.join("simulate/cr_test.qgtj")
    }

    pub fn topography(&self) -> PathBuf {
        self.root.join("simulate/topography.toml")
    }

    pub fn training_set(&self) -> PathBuf {
        self.root.join("nudge/training_set")
    }

    pub fn nudged(&self) -> PathBuf {
        self.root.join("nudge/nudged.qgtj")
    }

    pub fn spectral_ratio(&self) -> PathBuf {
        self.root.join("nudge/spectral_ratio.csv")
    }

    pub fn model(&self, arch: Architecture, member: usize) -> PathBuf {
        self.root.join(format!("train/{arch}/member-{member:02}.qgnn"))
    }

    pub fn loss_history(&self, arch: Architecture, member: usize) -> PathBuf {
        self.root.join(format!("train/{arch}/member-{member:02}.loss.csv"))
    }

    pub fn corrected(&self, arch: Architecture, member: usize) -> PathBuf {
        self.root.join(format!("correct/{arch}/member-{member:02}.qgtj"))
    }

    pub fn report_dir(&self) -> PathBuf {
        self.root.join("report")
    }

    pub fn sweep_surface(&self, arch: Architecture) -> PathBuf {
        self.root.join(format!("sweep/{arch}.csv"))
    }

    pub fn sweep_checkpoint(&self, arch: Architecture, member: usize, epoch: usize) -> PathBuf {
        self.root.join(format!("sweep/{arch}/member-{member:02}/epoch-{epoch:05}.qgnn"))
    }

    /// Path relative to the root, with forward slashes, as stored in the manifest.
    pub fn relative(&self, path: &Path) -> String {
        let rel = path.strip_prefix(&self.root).unwrap_or(path);
        rel.components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/")
    }
}

/// Fail with a missing-prerequisite error unless every path exists.
pub fn require(paths: &[PathBuf], what: &str) -> Result<(), crate::PipelineError> {
    for p in paths {
        if !p.exists() {
            return Err(crate::PipelineError::Missing(format!("{what}: {} not found", p.display())));
        }
    }
    Ok(())
}
