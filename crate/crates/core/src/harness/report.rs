//! Machine-readable result bundle: one JSON ledger plus CSV tables, all
//! with stable field ordering so an unchanged ledger re-emits byte for
//! byte. Wall-clock timings are deliberately kept out of the bundle.

use super::{
    AlphaRow, ComparisonRow, CrossValRow, MaskRatioRow, NoiseTypeRow, RetainAvailabilityRow,
    TheoryTrial,
};
use crate::metrics::MetricReport;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Everything a full experiment produced, minus checkpoints (referenced by
/// relative path).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunLedger {
    pub config_hash: String,
    pub runs: Vec<RunRecord>,
    pub comparison: Vec<ComparisonRow>,
    pub alpha_sweep: Vec<AlphaRow>,
    pub retain_availability: Vec<RetainAvailabilityRow>,
    pub noise_type: Vec<NoiseTypeRow>,
    pub mask_ratio: Vec<MaskRatioRow>,
    pub crossval: Vec<CrossValRow>,
    pub theory_trials: Vec<TheoryTrial>,
}

/// One executed run and the artifact files it wrote.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub name: String,
    pub config_hash: String,
    pub artifacts: Vec<String>,
}

impl RunLedger {
    pub fn new(config_hash: &str) -> Self {
        RunLedger { config_hash: config_hash.to_string(), ..Default::default() }
    }

    pub fn record(&mut self, name: &str, artifacts: Vec<String>) {
        self.runs.push(RunRecord {
            name: name.to_string(),
            config_hash: self.config_hash.clone(),
            artifacts,
        });
    }

    pub fn load(path: &Path) -> Result<RunLedger> {
        let p = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(&p, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(&p, e.to_string()))
    }
}

fn write_csv(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    let p = path.display().to_string();
    let mut writer = csv::Writer::from_path(path).map_err(|e| {
        Error::format(&p, e.to_string())
    })?;
    writer
        .write_record(header)
        .and_then(|_| {
            for row in rows {
                writer.write_record(&row)?;
            }
            writer.flush().map_err(csv::Error::from)
        })
        .map_err(|e| Error::format(&p, e.to_string()))
}

fn metric_cells(report: &MetricReport) -> Vec<String> {
    vec![
        format!("{}", report.retain.fid_analog),
        format!("{}", report.forget.fid_analog),
        format!("{}", report.retain.is_analog),
        format!("{}", report.forget.is_analog),
        format!("{}", report.retain.clip_analog),
        format!("{}", report.forget.clip_analog),
    ]
}

const METRIC_HEADER: [&str; 6] = ["fid_r", "fid_f", "is_r", "is_f", "clip_r", "clip_f"];

/// Writes the JSON ledger and the CSV tables into `dir`. Emission of an
/// unchanged ledger is byte-identical.
pub fn emit_report(ledger: &RunLedger, dir: &Path) -> Result<()> {
    if ledger.runs.is_empty() && ledger.comparison.is_empty() {
        return Err(Error::InvalidArgument("emit_report: empty ledger".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    for record in &ledger.runs {
        for artifact in &record.artifacts {
            let path = dir.join(artifact);
            if !path.exists() {
                return Err(Error::InvalidArgument(format!(
                    "ledger references missing artifact {}",
                    path.display()
                )));
            }
        }
    }

    let ledger_path = dir.join("ledger.json");
    let text = serde_json::to_string_pretty(ledger)
        .map_err(|e| Error::format("ledger.json", e.to_string()))?;
    std::fs::write(&ledger_path, text.as_bytes())
        .map_err(|e| Error::io(ledger_path.display().to_string(), e))?;

    if !ledger.comparison.is_empty() {
        let mut header = vec!["method"];
        header.extend(METRIC_HEADER);
        header.push("config_hash");
        let rows = ledger
            .comparison
            .iter()
            .map(|r| {
                let mut cells = vec![r.method.clone()];
                cells.extend(metric_cells(&r.report));
                cells.push(ledger.config_hash.clone());
                cells
            })
            .collect();
        write_csv(&dir.join("table1.csv"), &header, rows)?;
    }

    if !ledger.alpha_sweep.is_empty() {
        let mut header = vec!["alpha"];
        header.extend(METRIC_HEADER);
        header.push("config_hash");
        let rows = ledger
            .alpha_sweep
            .iter()
            .map(|r| {
                let mut cells = vec![format!("{}", r.alpha)];
                cells.extend(metric_cells(&r.report));
                cells.push(ledger.config_hash.clone());
                cells
            })
            .collect();
        write_csv(&dir.join("alpha_sweep.csv"), &header, rows)?;
    }

    if !ledger.retain_availability.is_empty() {
        let mut header = vec!["source", "images_per_class"];
        header.extend(METRIC_HEADER);
        header.push("config_hash");
        let rows = ledger
            .retain_availability
            .iter()
            .map(|r| {
                let mut cells = vec![
                    r.source.clone(),
                    r.images_per_class.map_or(String::new(), |c| c.to_string()),
                ];
                cells.extend(metric_cells(&r.report));
                cells.push(ledger.config_hash.clone());
                cells
            })
            .collect();
        write_csv(&dir.join("retain_availability.csv"), &header, rows)?;
    }

    if !ledger.noise_type.is_empty() {
        let mut header = vec!["noise", "mask_ratio"];
        header.extend(METRIC_HEADER);
        header.push("config_hash");
        let rows = ledger
            .noise_type
            .iter()
            .map(|r| {
                let mut cells = vec![format!("{:?}", r.noise), format!("{}", r.mask_ratio)];
                cells.extend(metric_cells(&r.report));
                cells.push(ledger.config_hash.clone());
                cells
            })
            .collect();
        write_csv(&dir.join("noise_type.csv"), &header, rows)?;
    }

    if !ledger.mask_ratio.is_empty() {
        let mut header = vec!["model", "mask_ratio"];
        header.extend(METRIC_HEADER);
        header.push("config_hash");
        let rows = ledger
            .mask_ratio
            .iter()
            .map(|r| {
                let mut cells = vec![r.model.clone(), format!("{}", r.mask_ratio)];
                cells.extend(metric_cells(&r.report));
                cells.push(ledger.config_hash.clone());
                cells
            })
            .collect();
        write_csv(&dir.join("mask_ratio.csv"), &header, rows)?;
    }

    if !ledger.crossval.is_empty() {
        let header = vec![
            "source_model",
            "split",
            "fid_analog",
            "is_analog",
            "clip_analog",
            "config_hash",
        ];
        let rows = ledger
            .crossval
            .iter()
            .map(|r| {
                vec![
                    r.source_model.clone(),
                    r.split.clone(),
                    format!("{}", r.fid_analog),
                    format!("{}", r.is_analog),
                    format!("{}", r.clip_analog),
                    ledger.config_hash.clone(),
                ]
            })
            .collect();
        write_csv(&dir.join("crossval.csv"), &header, rows)?;
    }

    if !ledger.theory_trials.is_empty() {
        let path = dir.join("theory_trials.json");
        let body = serde_json::json!({
            "config_hash": ledger.config_hash,
            "trials": ledger.theory_trials,
        });
        let text = serde_json::to_string_pretty(&body)
            .map_err(|e| Error::format("theory_trials.json", e.to_string()))?;
        std::fs::write(&path, text.as_bytes())
            .map_err(|e| Error::io(path.display().to_string(), e))?;
    }

    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_ledger_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let ledger = RunLedger::new("deadbeef");
        assert!(emit_report(&ledger, dir.path()).is_err());
    }

    #[test]
    fn missing_artifact_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut ledger = RunLedger::new("deadbeef");
        ledger.record("run", vec!["missing.ckpt".into()]);
        assert!(emit_report(&ledger, dir.path()).is_err());
    }

    #[test]
    fn reemission_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let mut ledger = RunLedger::new("cafe");
        std::fs::write(dir.path().join("a.ckpt"), b"x").unwrap();
        ledger.record("run-a", vec!["a.ckpt".into()]);
        ledger.crossval.push(CrossValRow {
            source_model: "original".into(),
            split: "retain".into(),
            fid_analog: 1.25,
            is_analog: 3.5,
            clip_analog: 0.75,
        });
        emit_report(&ledger, dir.path()).unwrap();
        let first = std::fs::read(dir.path().join("ledger.json")).unwrap();
        let first_csv = std::fs::read(dir.path().join("crossval.csv")).unwrap();
        emit_report(&ledger, dir.path()).unwrap();
        assert_eq!(first, std::fs::read(dir.path().join("ledger.json")).unwrap());
        assert_eq!(first_csv, std::fs::read(dir.path().join("crossval.csv")).unwrap());

        // reload and re-emit: still identical
        let loaded = RunLedger::load(&dir.path().join("ledger.json")).unwrap();
        emit_report(&loaded, dir.path()).unwrap();
        assert_eq!(first, std::fs::read(dir.path().join("ledger.json")).unwrap());
    }
}
