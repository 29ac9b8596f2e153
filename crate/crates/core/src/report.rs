//! Writing run outputs to disk.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::OutputFormat;
use crate::error::{Error, Result};
use crate::experiment::RunOutput;

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    for row in rows {
        w.serialize(row).map_err(|e| Error::Parse(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Empty tables are skipped.
fn table<T: Serialize>(out_dir: &Path, name: &str, rows: &[T], written: &mut Vec<PathBuf>) -> Result<()> {
    if rows.is_empty() {
        return Ok(());
    }
    let path = out_dir.join(name);
    write_rows(&path, rows)?;
    written.push(path);
    Ok(())
}

/// Write every table of `output` into `out_dir`; returns the files written
/// in a fixed order. Identical outputs give byte-identical files.
pub fn emit(output: &RunOutput, out_dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    if format.csv() {
        for (label, ds) in &output.fringes {
            let path = out_dir.join(format!("fringes_{label}.csv"));
            let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
            ds.write_csv(BufWriter::new(file))?;
            written.push(path);
        }
        table(out_dir, "field_fits.csv", &output.field_fits, &mut written)?;
        table(out_dir, "phases.csv", &output.phases, &mut written)?;
        table(out_dir, "figure2.csv", &output.figure2, &mut written)?;
        table(out_dir, "figure3.csv", &output.figure3, &mut written)?;
        table(out_dir, &format!("{}.csv", output.name), &output.figure4, &mut written)?;
        table(
            out_dir,
            "appendix_zeno_population.csv",
            &output.zeno_population,
            &mut written,
        )?;
        let summary: Vec<_> = output.appendix.iter().copied().collect();
        table(out_dir, "appendix_summary.csv", &summary, &mut written)?;
    }
    if format.json() {
        let path = out_dir.join(format!("{}.json", output.name));
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, output).map_err(|e| Error::Parse(e.to_string()))?;
        w.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
        w.flush().map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atom::DelayCase;
    use crate::config::ExperimentConfig;
    use crate::experiment;

    #[test]
    fn emits_case_tables_and_json() {
        let mut cfg = ExperimentConfig::default();
        cfg.noise.enabled = false;
        let out = experiment::run_case(&cfg, DelayCase::Reference).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = emit(&out, dir.path(), OutputFormat::Both).unwrap();
        let names: Vec<_> = files
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(
            names,
            ["fringes_case1.csv", "field_fits.csv", "phases.csv", "case1.json"]
        );
        let phases = fs::read_to_string(dir.path().join("phases.csv")).unwrap();
        assert!(phases.starts_with("delta_hz,rabi_hz,case,phi_rad,phi_err_rad\n"));
        let json: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("case1.json")).unwrap()).unwrap();
        let echoed: ExperimentConfig = serde_json::from_value(json["config"].clone()).unwrap();
        assert_eq!(echoed, cfg);
        assert_eq!(json["config_sha256"].as_str().unwrap().len(), 64);
    }

    #[test]
    fn csv_only_skips_json() {
        let mut cfg = ExperimentConfig::default();
        cfg.noise.enabled = false;
        let out = experiment::run_case(&cfg, DelayCase::Reference).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = emit(&out, dir.path(), OutputFormat::Csv).unwrap();
        assert!(files.iter().all(|p| p.extension().unwrap() == "csv"));
    }
}
