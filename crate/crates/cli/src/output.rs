use std::fs::{self, File};
use std::io::Write;
use std::path::Path;

use crate::CliError;

/// Writes `contents` to `dir/name` through a temporary file in the same
/// directory followed by a rename, so readers never see a partial file.
pub fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let target = dir.join(name);
    let result = (|| {
        let mut f = File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
        fs::rename(&tmp, &target)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(io_err(&target, e));
    }
    Ok(())
}

fn io_err(p: &Path, e: std::io::Error) -> CliError {
    CliError::Config(format!("cannot write {}: {e}", p.display()))
}

/// CSV body plus JSON lines, LF line endings throughout.
#[derive(Debug, Default)]
pub struct Report {
    csv: String,
    jsonl: String,
}

impl Report {
    pub fn new(header: &str) -> Self {
        Self { csv: format!("{header}\n"), jsonl: String::new() }
    }

    pub fn push(&mut self, csv_row: String, json: String) {
        self.csv.push_str(&csv_row);
        self.csv.push('\n');
        self.jsonl.push_str(&json);
        self.jsonl.push('\n');
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        write_atomic(dir, "report.csv", &self.csv)?;
        write_atomic(dir, "report.jsonl", &self.jsonl)
    }
}

/// Semicolon-joined list, so it stays a single CSV field.
pub fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(";")
}
