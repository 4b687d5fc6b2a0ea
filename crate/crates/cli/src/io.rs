//! Output staging. Files are written next to their destination under a
//! hidden temporary name and renamed into place by [`Outputs::commit`];
//! dropping an uncommitted set removes the temporaries, so a failed command
//! leaves no partial files behind.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::error::{CliError, Result};

pub struct Outputs {
    dir: PathBuf,
    staged: Vec<(PathBuf, PathBuf)>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|source| CliError::File {
            path: dir.display().to_string(),
            source,
        })?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            staged: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn stage<F>(&mut self, name: &str, write: F) -> Result<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<()>,
    {
        let tmp = self.dir.join(format!(".{name}.tmp"));
        let fin = self.dir.join(name);
        self.staged.push((tmp.clone(), fin));
        let file = File::create(&tmp).map_err(|source| CliError::File {
            path: tmp.display().to_string(),
            source,
        })?;
        let mut w = BufWriter::new(file);
        write(&mut w)?;
        w.flush()?;
        w.into_inner().map_err(|e| CliError::Io(e.into_error()))?.sync_all()?;
        Ok(())
    }

    /// Stages a CSV file; `header` is always written, even with no rows.
    pub fn csv<F>(&mut self, name: &str, header: &[&str], rows: F) -> Result<()>
    where
        F: FnOnce(&mut csv::Writer<&mut BufWriter<File>>) -> Result<()>,
    {
        self.stage(name, |out| {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
            w.write_record(header)?;
            rows(&mut w)?;
            w.flush()?;
            Ok(())
        })
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.stage(name, |out| {
            serde_json::to_writer_pretty(&mut *out, value)?;
            out.write_all(b"\n")?;
            Ok(())
        })
    }

    /// Stages a file produced by a writer-taking function.
    pub fn raw<F>(&mut self, name: &str, write: F) -> Result<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<()>,
    {
        self.stage(name, write)
    }

    /// Moves every staged file into place and returns the final paths.
    pub fn commit(mut self) -> Result<Vec<PathBuf>> {
        let staged = std::mem::take(&mut self.staged);
        let mut done = Vec::with_capacity(staged.len());
        for (tmp, fin) in staged {
            fs::rename(&tmp, &fin)?;
            done.push(fin);
        }
        Ok(done)
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        for (tmp, _) in &self.staged {
            let _ = fs::remove_file(tmp);
        }
    }
}

/// Formats a float for CSV: shortest round-trip form, `.` decimal.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Audit envelope around every JSON summary.
#[derive(Debug, Serialize)]
pub struct Summary<'a, C: Serialize, B: Serialize> {
    pub schema_version: u32,
    pub command: &'a str,
    pub seed: u64,
    pub config: &'a C,
    pub wall_clock_s: f64,
    #[serde(flatten)]
    pub body: B,
}

pub struct Clock(Instant);

impl Clock {
    pub fn start() -> Self {
        Clock(Instant::now())
    }

    pub fn seconds(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}
