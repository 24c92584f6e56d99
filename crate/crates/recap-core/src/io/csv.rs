//! Flat CSV tables for experiment outputs.
//!
//! Every run artefact that downstream analysis touches — metrics, ROC
//! points, training curves, embeddings, feature matrices — goes through
//! here as a typed row. Writers append-or-create whole files; readers
//! take any `io::Read` so the same code path serves files and in-memory
//! bytes. Numbers round-trip losslessly: f64 values are written with
//! shortest-exact formatting and `inf` parses back to infinity.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::Error;
use crate::harness::MetricsReport;
use crate::Result;

/// One evaluation: which protocol, tested on what, and how it scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub protocol: String,
    pub kind: String,
    /// Domain ids joined with `+`.
    pub train_domains: String,
    pub test_domains: String,
    pub samples: usize,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Empty field when the test set had one class.
    pub auc: Option<f64>,
}

impl MetricsRow {
    /// Flattens a report into a row under a protocol heading.
    pub fn from_report(
        protocol: &str,
        kind: &str,
        train_domains: &[String],
        test_domains: &[String],
        report: &MetricsReport,
    ) -> Self {
        MetricsRow {
            protocol: protocol.to_string(),
            kind: kind.to_string(),
            train_domains: train_domains.join("+"),
            test_domains: test_domains.join("+"),
            samples: report.tp + report.fp + report.tn + report.fn_,
            tp: report.tp,
            fp: report.fp,
            tn: report.tn,
            fn_: report.fn_,
            accuracy: report.accuracy,
            precision: report.precision,
            recall: report.recall,
            f1: report.f1,
            auc: report.auc,
        }
    }
}

/// One ROC operating point of one protocol's test evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocRow {
    pub protocol: String,
    pub fpr: f64,
    pub tpr: f64,
    pub threshold: f64,
}

/// One epoch of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub protocol: String,
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

/// One embedded point of a 2-D feature projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsneRow {
    pub id: String,
    pub domain: String,
    pub label: Label,
    pub x: f64,
    pub y: f64,
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidInput(format!("csv: {e}"))
}

/// Serializes rows with a header to any writer.
pub fn write_csv<T: Serialize, W: Write>(rows: &[T], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::InvalidInput(format!("csv: {e}")))?;
    Ok(())
}

/// Deserializes a whole headered CSV from any reader.
pub fn read_csv<T: DeserializeOwned, R: Read>(source: R) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(source);
    r.deserialize().collect::<std::result::Result<_, _>>().map_err(csv_err)
}

/// Writes rows to a file, creating or truncating it.
pub fn save_csv<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(rows, file)
}

/// Reads a whole CSV file of one row type.
pub fn load_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file)
}

pub fn read_metrics_csv<R: Read>(source: R) -> Result<Vec<MetricsRow>> {
    read_csv(source)
}

/// Converts a protocol's ROC polyline into rows.
pub fn roc_rows(protocol: &str, report: &MetricsReport) -> Vec<RocRow> {
    report
        .roc
        .iter()
        .map(|p| RocRow {
            protocol: protocol.to_string(),
            fpr: p.fpr,
            tpr: p.tpr,
            threshold: p.threshold,
        })
        .collect()
}

/// Writes a feature matrix with identifying columns and a dynamic
/// `f0..f{n-1}` header. All rows must share one width.
pub fn save_feature_csv(
    ids: &[String],
    domains: &[String],
    labels: &[Label],
    features: &[Vec<f64>],
    path: &Path,
) -> Result<()> {
    if ids.len() != features.len() || domains.len() != features.len() || labels.len() != features.len() {
        return Err(Error::InvalidInput(format!(
            "feature csv: {} ids, {} domains, {} labels for {} rows",
            ids.len(),
            domains.len(),
            labels.len(),
            features.len()
        )));
    }
    let width = features.first().map_or(0, Vec::len);
    if let Some(bad) = features.iter().find(|f| f.len() != width) {
        return Err(Error::InvalidInput(format!(
            "feature csv: ragged row of {} values, expected {width}",
            bad.len()
        )));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let mut header = vec!["id".to_string(), "domain".to_string(), "label".to_string()];
    header.extend((0..width).map(|i| format!("f{i}")));
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..features.len() {
        let mut record = vec![ids[i].clone(), domains[i].clone(), labels[i].as_str().to_string()];
        // Display for f64 is shortest-exact, so the values parse back bitwise.
        record.extend(features[i].iter().map(f64::to_string));
        w.write_record(&record).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::InvalidInput(format!("csv: {e}")))?;
    Ok(())
}
