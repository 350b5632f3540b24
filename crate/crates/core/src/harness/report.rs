use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::eval::EvalReport;
use super::train::Variant;
use super::HarnessError;

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

pub fn to_csv_string<T: Serialize>(rows: &[T]) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Csv(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| HarnessError::Csv(e.to_string()))
}

fn csv_err(e: csv::Error) -> HarnessError {
    HarnessError::Csv(e.to_string())
}

/// One line of a report table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub variant: String,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
}

/// Flattens reports into rows, variant by variant, metrics in name order.
pub fn metric_rows(reports: &[(Variant, EvalReport)]) -> Vec<MetricRow> {
    reports
        .iter()
        .flat_map(|(v, r)| {
            r.metrics.iter().map(move |(k, m)| MetricRow {
                variant: v.label().into(),
                metric: k.clone(),
                mean: m.mean,
                std: m.std,
            })
        })
        .collect()
}

/// Plain-text table with one row per variant and one column per metric.
pub fn render_table(reports: &[(Variant, EvalReport)]) -> String {
    let Some((_, first)) = reports.first() else {
        return String::new();
    };
    let names: Vec<&String> = first.metrics.keys().collect();
    let mut out = format!("{:<20}", "variant");
    for n in &names {
        out.push_str(&format!(" {n:>16}"));
    }
    out.push('\n');
    for (v, r) in reports {
        out.push_str(&format!("{:<20}", v.label()));
        for n in &names {
            let m = r
                .metrics
                .get(*n)
                .copied()
                .unwrap_or(super::MetricSummary { mean: 0.0, std: 0.0 });
            out.push_str(&format!(" {:>9.2} ± {:<4.2}", m.mean, m.std));
        }
        out.push('\n');
    }
    out
}
