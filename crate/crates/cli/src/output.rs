use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

pub const ERROR_SUMMARY: &str = "errors.json";

/// Output directory whose files are replaced atomically.
#[derive(Debug, Clone)]
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating output directory {}", root.display()))?;
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Writes `name` through a temporary file in the same directory.
    pub fn write(&self, name: &str, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<PathBuf> {
        let target = self.path(name);
        let tmp = tempfile::NamedTempFile::new_in(&self.root)
            .with_context(|| format!("creating temporary file in {}", self.root.display()))?;
        {
            let mut w = BufWriter::new(tmp.as_file());
            f(&mut w)?;
            w.flush()?;
        }
        tmp.persist(&target).with_context(|| format!("writing {}", target.display()))?;
        Ok(target)
    }

    pub fn write_json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> Result<PathBuf> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)?;
            Ok(())
        })
    }
}

#[derive(Debug, Serialize)]
pub struct ErrorSummary<'a> {
    pub command: &'a str,
    /// The error that stopped the run, if any.
    pub fatal: Option<String>,
    /// Failures that did not stop the run.
    pub errors: &'a [String],
}

/// Writes the summary next to the outputs; stale summaries from earlier
/// runs are removed when there is nothing to report.
pub fn record_errors(out: &Path, summary: &ErrorSummary<'_>) -> Result<()> {
    if summary.fatal.is_none() && summary.errors.is_empty() {
        let stale = out.join(ERROR_SUMMARY);
        if stale.exists() {
            fs::remove_file(&stale).with_context(|| format!("removing {}", stale.display()))?;
        }
        return Ok(());
    }
    OutDir::create(out)?.write_json(ERROR_SUMMARY, summary)?;
    Ok(())
}
