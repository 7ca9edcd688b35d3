//! Datasets, experiment runs, metrics, and reports.

pub mod config;
pub mod dataset;
pub mod metrics;
pub mod pipeline;
pub mod report;

use std::path::Path;

pub use config::{ConfigFile, IsolationMode, RunConfig, RunMode};
pub use dataset::{convert_mcq_to_binary, load_dataset, sample_records, DatasetRecord};
pub use metrics::{avg_delta, compute_metrics, DatasetMetrics, EvaluationReport, MetricsError};
pub use pipeline::{read_traces, write_traces, Engine, QuestionTrace, TraceStatus};
pub use report::{emit_report, load_report_csv, markdown_table, ReportFormat};

use crate::gateway::{Gateway, GatewayError};

/// Main gateway and, when configured separately, the conceptualizer's.
pub fn build_gateways(cfg: &ConfigFile) -> Result<(Gateway, Option<Gateway>), GatewayError> {
    let main = Gateway::from_config(&cfg.backend)?;
    let concept = cfg.conceptualizer.as_ref().map(Gateway::from_config).transpose()?;
    Ok((main, concept))
}

pub struct RunOutput {
    pub traces: Vec<QuestionTrace>,
    pub report: EvaluationReport,
}

/// Runs every record, writes `traces/` and `report.json` under `out_dir`.
pub fn run_to_dir(engine: &Engine<'_>, records: &[DatasetRecord], out_dir: &Path) -> anyhow::Result<RunOutput> {
    let traces = engine.run(records);
    write_traces(&out_dir.join("traces"), &traces)?;
    let report = EvaluationReport::from_traces(engine.config.mode.label(), &traces)?;
    std::fs::write(out_dir.join("report.json"), emit_report(&report, ReportFormat::Json))?;
    Ok(RunOutput { traces, report })
}
