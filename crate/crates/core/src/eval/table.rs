use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::EvalError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub scheme: String,
    pub values: Vec<f64>,
}

/// Named numeric columns, one row per scheme and point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub schema_version: u32,
    pub study: String,
    pub columns: Vec<String>,
    pub rows: Vec<MetricRow>,
}

impl MetricTable {
    pub fn new(study: &str, columns: &[&str]) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            study: study.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, scheme: &str, values: Vec<f64>) {
        assert_eq!(values.len(), self.columns.len(), "row width");
        self.rows.push(MetricRow {
            scheme: scheme.to_string(),
            values,
        });
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Values of column `name` over the rows of `scheme`.
    pub fn series(&self, scheme: &str, name: &str) -> Vec<f64> {
        let Some(c) = self.column(name) else { return Vec::new() };
        self.rows.iter().filter(|r| r.scheme == scheme).map(|r| r.values[c]).collect()
    }
}

/// Writes `<study>.csv` and `<study>.json` into `dir` and returns both paths.
pub fn write_table(dir: &Path, table: &MetricTable) -> Result<(PathBuf, PathBuf), EvalError> {
    let csv_path = dir.join(format!("{}.csv", table.study));
    let json_path = dir.join(format!("{}.json", table.study));
    let mut w = csv::Writer::from_path(&csv_path)?;
    let mut header = vec!["schema_version".to_string(), "study".into(), "scheme".into()];
    header.extend(table.columns.iter().cloned());
    w.write_record(&header)?;
    for r in &table.rows {
        let mut rec = vec![table.schema_version.to_string(), table.study.clone(), r.scheme.clone()];
        rec.extend(r.values.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    std::fs::write(&json_path, serde_json::to_string_pretty(table)? + "\n")?;
    Ok((csv_path, json_path))
}

pub fn read_table_json(path: &Path) -> Result<MetricTable, EvalError> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

pub fn read_table_csv(path: &Path) -> Result<MetricTable, EvalError> {
    let mut r = csv::Reader::from_path(path)?;
    let columns: Vec<String> = r.headers()?.iter().skip(3).map(String::from).collect();
    let mut table = MetricTable {
        schema_version: SCHEMA_VERSION,
        study: String::new(),
        columns,
        rows: Vec::new(),
    };
    for rec in r.records() {
        let rec = rec?;
        let bad = |what: &str| EvalError::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, what.to_string()));
        table.schema_version = rec[0].parse().map_err(|_| bad("schema_version"))?;
        table.study = rec[1].to_string();
        let values = rec.iter().skip(3).map(|v| v.parse::<f64>().map_err(|_| bad("value"))).collect::<Result<Vec<_>, _>>()?;
        table.rows.push(MetricRow {
            scheme: rec[2].to_string(),
            values,
        });
    }
    Ok(table)
}
