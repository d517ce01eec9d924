use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::baselines::MetricsReport;

/// Metrics written by `train`, read back by `report`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub model: String,
    pub features: Vec<String>,
    pub scaled_inputs: bool,
    pub train: MetricsReport,
    pub test: MetricsReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowSource {
    Measured,
    Literature,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    /// Percent.
    pub train_r2: f64,
    pub test_r2: f64,
    pub source: RowSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ReportRow>,
    pub warnings: Vec<String>,
}

/// Published scores of the models this tool does not implement, in percent.
pub const LITERATURE_ROWS: [(&str, f64, f64); 4] = [
    ("ANN (Baseline)", 95.60, 95.66),
    ("ABR", 95.11, 95.35),
    ("RFR", 96.04, 95.07),
    ("DTR", 96.26, 93.91),
];

const MEASURED_ORDER: [&str; 3] = ["kan", "mlp", "lr"];

pub fn build_report(metrics: &[MetricsFile]) -> ComparisonReport {
    let mut warnings = Vec::new();
    if metrics.is_empty() {
        warnings.push("no metrics files given: only literature rows are shown".to_string());
    }
    let mut rows: Vec<ReportRow> = Vec::new();
    for name in MEASURED_ORDER {
        let found: Vec<&MetricsFile> = metrics.iter().filter(|m| m.model == name).collect();
        if found.len() > 1 {
            warnings.push(format!(
                "{} metrics files for {name}; using the first",
                found.len()
            ));
        }
        if let Some(m) = found.first() {
            rows.push(ReportRow {
                model: name.to_uppercase(),
                train_r2: 100.0 * m.train.r2,
                test_r2: 100.0 * m.test.r2,
                source: RowSource::Measured,
            });
        }
    }
    for m in metrics {
        if !MEASURED_ORDER.contains(&m.model.as_str()) {
            warnings.push(format!("ignoring metrics for unknown model {:?}", m.model));
        }
    }
    rows.extend(LITERATURE_ROWS.iter().map(|(m, tr, te)| ReportRow {
        model: m.to_string(),
        train_r2: *tr,
        test_r2: *te,
        source: RowSource::Literature,
    }));
    rows.sort_by(|a, b| b.test_r2.total_cmp(&a.test_r2));
    ComparisonReport { rows, warnings }
}

impl ComparisonReport {
    pub fn to_markdown(&self) -> String {
        let mut s =
            String::from("| Model | Train R² (%) | Test R² (%) | Source |\n|---|---:|---:|---|\n");
        for r in &self.rows {
            let (model, tag) = match r.source {
                RowSource::Measured => (format!("**{}**", r.model), "measured"),
                RowSource::Literature => (format!("_{}_", r.model), "literature (quoted, not run)"),
            };
            let _ = writeln!(
                s,
                "| {model} | {:.2} | {:.2} | {tag} |",
                r.train_r2, r.test_r2
            );
        }
        for w in &self.warnings {
            let _ = writeln!(s, "\n> warning: {w}");
        }
        s
    }
}
