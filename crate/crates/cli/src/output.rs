//! Dataset assembly and atomic-ish emission.
//!
//! Results are rendered to strings first and written into a staging
//! directory next to the destination; only a complete set of files is
//! moved into place, and the staging directory is removed on any failure.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use pulsedkerr::observe::WignerGrid;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Files of one run, relative to the output directory.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Dataset {
    pub files: Vec<(PathBuf, String)>,
}

impl Dataset {
    pub fn add(&mut self, path: impl Into<PathBuf>, contents: String) {
        self.files.push((path.into(), contents));
    }

    pub fn get(&self, path: &str) -> Option<&str> {
        self.files
            .iter()
            .find(|(p, _)| p == Path::new(path))
            .map(|(_, c)| c.as_str())
    }

    pub fn names(&self) -> Vec<String> {
        self.files.iter().map(|(p, _)| p.display().to_string()).collect()
    }

    /// Nests every file of `other` under `dir`.
    pub fn extend_under(&mut self, dir: &str, other: Dataset) {
        for (p, c) in other.files {
            self.files.push((Path::new(dir).join(p), c));
        }
    }
}

/// Simple CSV table with a fixed header.
pub struct Csv {
    text: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self {
            text: format!("{}\n", header.join(",")),
            columns: header.len(),
        }
    }

    pub fn row(&mut self, cells: &[String]) {
        debug_assert_eq!(cells.len(), self.columns);
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn numbers(&mut self, values: &[f64]) {
        let cells: Vec<String> = values.iter().map(|v| fmt_f64(*v)).collect();
        self.row(&cells);
    }

    pub fn finish(self) -> String {
        self.text
    }
}

/// `x, y, w` with x outer and y inner.
pub fn wigner_csv(grid: &WignerGrid) -> String {
    let mut text = String::with_capacity(grid.values.len() * 72 + 8);
    text.push_str("x,y,w\n");
    for (i, x) in grid.xs.iter().enumerate() {
        for (j, y) in grid.ys.iter().enumerate() {
            let _ = writeln!(text, "{},{},{}", fmt_f64(*x), fmt_f64(*y), fmt_f64(grid.value(i, j)));
        }
    }
    text
}

fn staging_dir(out: &Path) -> PathBuf {
    let name = out
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let parent = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    parent.join(format!(".{name}.staging-{}", std::process::id()))
}

/// Writes `data` into `out`, creating it if needed. Files with the same
/// name are replaced; nothing in `out` is touched unless every file was
/// staged successfully.
pub fn commit(out: &Path, data: &Dataset) -> io::Result<()> {
    let staging = staging_dir(out);
    let result = stage_and_move(&staging, out, data);
    if staging.exists() {
        let _ = fs::remove_dir_all(&staging);
    }
    result
}

fn stage_and_move(staging: &Path, out: &Path, data: &Dataset) -> io::Result<()> {
    if staging.exists() {
        fs::remove_dir_all(staging)?;
    }
    fs::create_dir_all(staging)?;
    for (rel, contents) in &data.files {
        let path = staging.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, contents)?;
    }
    fs::create_dir_all(out)?;
    for (rel, _) in &data.files {
        let dest = out.join(rel);
        if let Some(parent) = dest.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::rename(staging.join(rel), dest)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn csv_layout() {
        let mut csv = Csv::new(&["t", "p"]);
        csv.numbers(&[0.0, 1.0]);
        assert_eq!(csv.finish(), "t,p\n0.0000000000000000e0,1.0000000000000000e0\n");
    }

    #[test]
    fn commit_writes_nested_files_and_cleans_staging() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("run");
        let mut data = Dataset::default();
        data.add("a.csv", "x\n".into());
        data.add("sub/b.csv", "y\n".into());
        commit(&out, &data).unwrap();
        assert_eq!(fs::read_to_string(out.join("a.csv")).unwrap(), "x\n");
        assert_eq!(fs::read_to_string(out.join("sub/b.csv")).unwrap(), "y\n");
        let leftovers: Vec<_> = fs::read_dir(dir.path()).unwrap().collect();
        assert_eq!(leftovers.len(), 1);
    }

    #[test]
    fn failed_commit_leaves_no_partial_output() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("run");
        let mut data = Dataset::default();
        data.add("a.csv", "x\n".into());
        // a file and a directory with the same name cannot both be staged
        data.add("a.csv/b.csv", "y\n".into());
        assert!(commit(&out, &data).is_err());
        assert!(!out.exists());
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    }
}
