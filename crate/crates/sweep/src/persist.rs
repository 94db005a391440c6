//! CSV body plus JSON sidecar. The CSV holds only data, so two runs of the
//! same spec produce identical bytes; timestamps live in the sidecar.

use crate::{Quantity, SweepError, SweepResult, SweepSpec};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Shortest round-trip scientific form; empty for missing values.
pub fn format_value(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

pub fn header(result: &SweepResult) -> Vec<String> {
    let mut h = vec!["axis".to_string(), "value".to_string()];
    h.extend(result.quantities.iter().map(|q| q.name().to_string()));
    h.extend(result.quantities.iter().filter_map(|q| q.residual_column()));
    h.push("error_category".into());
    h
}

pub fn write_csv<W: Write>(result: &SweepResult, out: W) -> Result<(), SweepError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(result))?;
    for row in &result.rows {
        let mut rec = vec![
            result.spec.axis.name().to_string(),
            format_value(Some(row.axis_value)),
        ];
        rec.extend(row.values.iter().map(|&v| format_value(v)));
        for (j, q) in result.quantities.iter().enumerate() {
            if q.has_residual() {
                rec.push(format_value(row.residuals[j]));
            }
        }
        rec.push(row.error_category.clone().unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string(result: &SweepResult) -> Result<String, SweepError> {
    let mut buf = Vec::new();
    write_csv(result, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnInfo {
    pub name: String,
    pub description: String,
    pub residual_column: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedRow {
    pub index: usize,
    pub axis_value: f64,
    pub category: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub schema_version: u32,
    pub artifact_version: String,
    pub config_hash: String,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub spec: SweepSpec,
    pub columns: Vec<ColumnInfo>,
    pub rows: usize,
    pub failed_rows: Vec<FailedRow>,
    /// Largest residual seen per residual column.
    pub max_residuals: BTreeMap<String, f64>,
}

pub fn sidecar(result: &SweepResult) -> Sidecar {
    let columns = result
        .quantities
        .iter()
        .map(|q: &Quantity| ColumnInfo {
            name: q.name().into(),
            description: q.description().into(),
            residual_column: q.residual_column(),
        })
        .collect();
    let failed_rows = result
        .rows
        .iter()
        .filter_map(|r| {
            r.error_category.as_ref().map(|c| FailedRow {
                index: r.index,
                axis_value: r.axis_value,
                category: c.clone(),
                message: r.error_message.clone().unwrap_or_default(),
            })
        })
        .collect();
    let mut max_residuals = BTreeMap::new();
    for (j, q) in result.quantities.iter().enumerate() {
        if let Some(col) = q.residual_column() {
            let worst = result
                .rows
                .iter()
                .filter_map(|r| r.residuals[j])
                .fold(0.0f64, f64::max);
            max_residuals.insert(col, worst);
        }
    }
    Sidecar {
        schema_version: result.metadata.schema_version,
        artifact_version: result.metadata.artifact_version.clone(),
        config_hash: result.metadata.config_hash.clone(),
        started_unix: result.metadata.started_unix,
        finished_unix: result.metadata.finished_unix,
        spec: result.spec.clone(),
        columns,
        rows: result.rows.len(),
        failed_rows,
        max_residuals,
    }
}

/// Sidecar path next to a CSV file: `out.csv` → `out.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Writes `csv_path` and its sidecar; returns the sidecar path.
pub fn persist(result: &SweepResult, csv_path: &Path) -> Result<PathBuf, SweepError> {
    let file = std::fs::File::create(csv_path)?;
    write_csv(result, std::io::BufWriter::new(file))?;
    let side = sidecar_path(csv_path);
    let text = serde_json::to_string_pretty(&sidecar(result))?;
    std::fs::write(&side, text + "\n")?;
    Ok(side)
}
