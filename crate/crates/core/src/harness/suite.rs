//! Directory-level runs with a coverage table.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::config::RunConfig;
use super::report::Summary;
use super::run::execute;

/// Results that the reference suite is expected to exercise.
pub const EXPECTED_ANCHORS: [&str; 17] = [
    "lemma1", "lemma2", "lemma3", "lemma4", "lemma5", "lemma6", "lemma7", "lemma8", "lemma9", "lemma10", "lemma11",
    "theorem1", "theorem2", "theorem3", "theorem4", "theorem5", "theorem6",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub file: String,
    pub name: String,
    pub pass: bool,
    pub summary: Summary,
    pub failed_records: Vec<String>,
    #[serde(default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub entries: Vec<SuiteEntry>,
    /// Anchor to the names of the configs with at least one record for it.
    pub coverage: BTreeMap<String, Vec<String>>,
    pub uncovered: Vec<String>,
    pub warnings: Vec<String>,
    pub pass: bool,
}

impl SuiteReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn coverage_table(&self) -> String {
        let mut s = String::new();
        for (anchor, names) in &self.coverage {
            let cell = if names.is_empty() { "-".to_string() } else { names.join(", ") };
            s.push_str(&format!("{anchor:<10} {cell}\n"));
        }
        s
    }
}

fn config_files(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Err(Error::Config(format!("config directory {} does not exist", dir.display())));
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}

/// Runs every `*.json` config in `dir` on `workers` threads. With `out`, each
/// config writes into `out/<file stem>/` and the aggregate goes to
/// `out/suite.json`. Unparsable configs are a [`Error::Config`].
pub fn run_suite(dir: &Path, out: Option<&Path>, workers: usize) -> Result<SuiteReport> {
    let files = config_files(dir)?;
    let configs = files.iter().map(|f| RunConfig::load(f)).collect::<Result<Vec<_>>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let outputs: Vec<_> = pool.install(|| configs.par_iter().map(execute).collect());

    let mut coverage: BTreeMap<String, Vec<String>> =
        EXPECTED_ANCHORS.iter().map(|a| (a.to_string(), Vec::new())).collect();
    let mut entries = Vec::with_capacity(outputs.len());
    for (file, run) in files.iter().zip(&outputs) {
        let stem = file.file_stem().and_then(|s| s.to_str()).unwrap_or("config").to_string();
        if let Some(out) = out {
            run.write_to(&out.join(&stem))?;
        }
        let r = &run.report;
        for a in r.anchors() {
            let names = coverage.entry(a.to_string()).or_default();
            if names.last() != Some(&r.name) {
                names.push(r.name.clone());
            }
        }
        entries.push(SuiteEntry {
            file: file.file_name().and_then(|s| s.to_str()).unwrap_or_default().to_string(),
            name: r.name.clone(),
            pass: r.pass,
            summary: r.summary,
            failed_records: r.records.iter().filter(|c| !c.pass).map(|c| c.id.clone()).collect(),
            error: r.error.clone(),
        });
    }
    for names in coverage.values_mut() {
        names.sort();
        names.dedup();
    }
    let uncovered: Vec<String> =
        coverage.iter().filter(|(_, v)| v.is_empty()).map(|(k, _)| k.clone()).collect();
    let mut warnings = Vec::new();
    if entries.is_empty() {
        warnings.push("no coverage: the directory holds no configs".to_string());
    } else if !uncovered.is_empty() {
        warnings.push(format!("no coverage for {}", uncovered.join(", ")));
    }
    let report = SuiteReport {
        pass: entries.iter().all(|e| e.pass),
        entries,
        coverage,
        uncovered,
        warnings,
    };
    if let Some(out) = out {
        std::fs::create_dir_all(out)?;
        std::fs::write(out.join("suite.json"), report.to_json())?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_directory_passes_with_warning() {
        let dir = tempfile::tempdir().unwrap();
        let r = run_suite(dir.path(), None, 2).unwrap();
        assert!(r.pass);
        assert!(r.entries.is_empty());
        assert!(r.warnings[0].starts_with("no coverage"));
    }

    #[test]
    fn missing_directory_is_an_error() {
        assert!(matches!(
            run_suite(Path::new("/nonexistent/banachflow"), None, 1),
            Err(Error::Config(_))
        ));
    }
}
