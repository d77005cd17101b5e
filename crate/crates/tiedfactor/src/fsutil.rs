use std::io::Write;
use std::path::Path;

use crate::error::{IoError, IoResult};

/// Writes `bytes` to a temporary file next to `path` and renames it into
/// place, so a failed run never leaves a partial file behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> IoResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| IoError::at(path, e))?;
    tmp.write_all(bytes).map_err(|e| IoError::at(path, e))?;
    tmp.as_file().sync_all().map_err(|e| IoError::at(path, e))?;
    tmp.persist(path).map_err(|e| IoError::at(path, e.error))?;
    Ok(())
}

/// Several files committed together: all are staged first and only renamed
/// once every one of them has been written.
#[derive(Default)]
pub struct Staged {
    files: Vec<(tempfile::NamedTempFile, std::path::PathBuf)>,
}

impl Staged {
    pub fn add(&mut self, path: &Path, bytes: &[u8]) -> IoResult<()> {
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| IoError::at(path, e))?;
        tmp.write_all(bytes).map_err(|e| IoError::at(path, e))?;
        self.files.push((tmp, path.to_path_buf()));
        Ok(())
    }

    pub fn commit(self) -> IoResult<()> {
        for (tmp, path) in self.files {
            tmp.persist(&path)
                .map_err(|e| IoError::at(&path, e.error))?;
        }
        Ok(())
    }
}
