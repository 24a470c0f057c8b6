use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Name of the marker left in an output directory whose artifacts are
/// incomplete.
pub const INCOMPLETE_MARKER: &str = "INCOMPLETE";

/// An output directory that stays flagged as incomplete until
/// [`OutputDir::finish`] is called.
pub struct OutputDir {
    path: PathBuf,
}

impl OutputDir {
    pub fn create(path: &Path) -> Result<Self> {
        fs::create_dir_all(path).map_err(|e| Error::io(path, e))?;
        let dir = OutputDir {
            path: path.to_path_buf(),
        };
        dir.write_text(INCOMPLETE_MARKER, "run did not finish\n")?;
        Ok(dir)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn join(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<()> {
        let p = self.join(name);
        fs::write(&p, text).map_err(|e| Error::io(&p, e))
    }

    pub fn create_file(&self, name: &str) -> Result<BufWriter<File>> {
        let p = self.join(name);
        File::create(&p)
            .map(BufWriter::new)
            .map_err(|e| Error::io(&p, e))
    }

    /// Records `err` in the marker file and passes it through.
    pub fn fail(&self, err: Error) -> Error {
        let _ = fs::write(self.join(INCOMPLETE_MARKER), format!("{err}\n"));
        err
    }

    pub fn finish(self) -> Result<()> {
        let p = self.join(INCOMPLETE_MARKER);
        fs::remove_file(&p).map_err(|e| Error::io(&p, e))
    }
}

pub(crate) fn flush<W: Write>(mut w: W, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// Empty cell for absent values.
pub(crate) fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
