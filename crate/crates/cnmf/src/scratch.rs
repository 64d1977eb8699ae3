use std::path::{Path, PathBuf};
use std::sync::Arc;

use cnmf_core::{BlockScratch, DenseMatrix};
use tempfile::TempDir;

use crate::store::{read_binary, scratch_dir, write_binary};

/// Block scratch on disk: one binary matrix file per block inside a
/// temporary directory that is removed when the last owner drops.
#[derive(Debug, Clone)]
pub struct FileScratch {
    dir: Arc<TempDir>,
}

impl FileScratch {
    /// A new directory under `root`, or under the system temp dir.
    pub fn new(root: Option<&Path>) -> crate::Result<Self> {
        Ok(FileScratch {
            dir: Arc::new(scratch_dir(root)?),
        })
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    /// Shared ownership of the directory, for stores created inside it.
    pub fn owner(&self) -> Arc<TempDir> {
        Arc::clone(&self.dir)
    }

    /// A file name inside the directory, distinct from the block files.
    pub fn file(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn block_path(&self, index: usize) -> PathBuf {
        self.dir.path().join(format!("block-{index:06}.cnmf"))
    }
}

impl BlockScratch for FileScratch {
    fn store(&mut self, index: usize, block: &DenseMatrix) -> cnmf_core::Result<()> {
        Ok(write_binary(&self.block_path(index), block)?)
    }

    fn load(&self, index: usize) -> cnmf_core::Result<DenseMatrix> {
        Ok(read_binary(&self.block_path(index))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocks_round_trip_and_directory_is_removed() {
        let root = tempfile::tempdir().unwrap();
        let path;
        {
            let mut s = FileScratch::new(Some(root.path())).unwrap();
            path = s.path().to_path_buf();
            let b = DenseMatrix::from_fn(3, 2, |i, j| (i * 2 + j) as f64 - 0.5);
            s.store(4, &b).unwrap();
            assert_eq!(s.load(4).unwrap(), b);
            assert!(s.load(0).is_err());
        }
        assert!(!path.exists());
    }
}
