use serde::{Deserialize, Serialize};

use super::metrics::{DatasetMetrics, EvaluationReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Markdown,
    Csv,
    Json,
}

fn pct(x: f64) -> String {
    format!("{x:.1}")
}

/// One table with a row per report. Datasets come from the first report.
pub fn markdown_table(reports: &[&EvaluationReport]) -> String {
    let Some(first) = reports.first() else {
        return String::new();
    };
    let with_delta = reports.iter().any(|r| r.avg_delta.is_some());
    let mut header = vec!["System".to_string()];
    header.extend(first.datasets.iter().map(|d| d.dataset.clone()));
    header.extend(["All".into(), "All (pooled)".into(), "Exe.%".into()]);
    if with_delta {
        header.push("Avg.Δ".into());
    }
    let mut out = format!("| {} |\n", header.join(" | "));
    out.push_str(&format!("|{}\n", " --- |".repeat(header.len())));
    for r in reports {
        let mut row = vec![r.system.clone()];
        for d in &first.datasets {
            row.push(r.dataset(&d.dataset).map_or("-".into(), |m| pct(m.accuracy().percent())));
        }
        row.push(pct(r.all_unweighted()));
        row.push(pct(r.all_weighted().percent()));
        let exe = r.execution_rate();
        row.push(if exe.den == 0 { "-".into() } else { pct(exe.percent()) });
        if with_delta {
            row.push(r.avg_delta.map_or("-".into(), |d| format!("{d:+.1}")));
        }
        out.push_str(&format!("| {} |\n", row.join(" | ")));
    }
    out
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    system: String,
    dataset: String,
    questions: u64,
    excluded: u64,
    correct: u64,
    executions: u64,
    successful_executions: u64,
    accuracy: String,
    execution_rate: String,
    baseline: Option<String>,
    avg_delta: Option<f64>,
}

pub fn emit_report(report: &EvaluationReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Markdown => markdown_table(&[report]),
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for d in &report.datasets {
                w.serialize(CsvRow {
                    system: report.system.clone(),
                    dataset: d.dataset.clone(),
                    questions: d.questions,
                    excluded: d.excluded,
                    correct: d.correct,
                    executions: d.executions,
                    successful_executions: d.successful_executions,
                    accuracy: pct(d.accuracy().percent()),
                    execution_rate: pct(d.execution_rate().percent()),
                    baseline: report.baseline.clone(),
                    avg_delta: report.avg_delta,
                })
                .expect("in-memory csv write");
            }
            String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv is utf-8")
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("malformed report csv: {0}")]
pub struct ReportCsvError(String);

/// Inverse of the CSV form of [`emit_report`].
pub fn load_report_csv(text: &str) -> Result<EvaluationReport, ReportCsvError> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut report: Option<EvaluationReport> = None;
    for row in rdr.deserialize::<CsvRow>() {
        let row = row.map_err(|e| ReportCsvError(e.to_string()))?;
        let r = report.get_or_insert_with(|| EvaluationReport {
            system: row.system.clone(),
            datasets: Vec::new(),
            baseline: row.baseline.clone(),
            avg_delta: row.avg_delta,
        });
        if r.system != row.system {
            return Err(ReportCsvError(format!("mixed systems {} and {}", r.system, row.system)));
        }
        r.datasets.push(DatasetMetrics {
            dataset: row.dataset,
            questions: row.questions,
            excluded: row.excluded,
            correct: row.correct,
            executions: row.executions,
            successful_executions: row.successful_executions,
        });
    }
    report.ok_or_else(|| ReportCsvError("no rows".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> EvaluationReport {
        let mut r = EvaluationReport::new(
            "program",
            vec![
                DatasetMetrics {
                    dataset: "boolq".into(),
                    questions: 197,
                    excluded: 3,
                    correct: 116,
                    executions: 1970,
                    successful_executions: 1801,
                },
                DatasetMetrics {
                    dataset: "strategy, qa".into(),
                    questions: 234,
                    excluded: 0,
                    correct: 125,
                    executions: 2340,
                    successful_executions: 2000,
                },
            ],
        );
        r.baseline = Some("cot".into());
        r.avg_delta = Some(9.180000000000001);
        r
    }

    #[test]
    fn csv_round_trip() {
        let r = sample();
        assert_eq!(load_report_csv(&emit_report(&r, ReportFormat::Csv)).unwrap(), r);
        let mut plain = sample();
        plain.baseline = None;
        plain.avg_delta = None;
        assert_eq!(load_report_csv(&emit_report(&plain, ReportFormat::Csv)).unwrap(), plain);
    }

    #[test]
    fn markdown_columns() {
        let r = sample();
        let md = emit_report(&r, ReportFormat::Markdown);
        let header = md.lines().next().unwrap();
        assert_eq!(header, "| System | boolq | strategy, qa | All | All (pooled) | Exe.% | Avg.Δ |");
        let mut plain = sample();
        plain.avg_delta = None;
        assert!(!emit_report(&plain, ReportFormat::Markdown).contains("Avg.Δ"));
        let json: EvaluationReport = serde_json::from_str(&emit_report(&r, ReportFormat::Json)).unwrap();
        assert_eq!(json, r);
    }
}
