use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::pipeline::{QuestionTrace, TraceStatus};
use crate::fraction::Fraction;
use crate::verdict::Verdict;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetMetrics {
    pub dataset: String,
    /// Questions scored; excluded ones are not among them.
    pub questions: u64,
    pub excluded: u64,
    pub correct: u64,
    pub executions: u64,
    pub successful_executions: u64,
}

impl DatasetMetrics {
    pub fn accuracy(&self) -> Fraction {
        Fraction::new(self.correct, self.questions)
    }

    pub fn execution_rate(&self) -> Fraction {
        Fraction::new(self.successful_executions, self.executions)
    }

    /// Metrics for a printed accuracy, e.g. `from_percent("boolq", 58.9)`.
    /// The percentage is held exactly as tenths over 1000.
    pub fn from_percent(dataset: &str, percent: f64) -> Self {
        DatasetMetrics {
            dataset: dataset.to_string(),
            questions: 1000,
            excluded: 0,
            correct: (percent * 10.0).round() as u64,
            executions: 0,
            successful_executions: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("ids without gold answers: {0:?}")]
    IdMismatch(Vec<String>),
    #[error("datasets differ from the baseline: {0:?}")]
    DatasetMismatch(Vec<String>),
}

/// Accuracy counts unknown verdicts as wrong; Exe.% is taken over every
/// (question, candidate) execution.
pub fn compute_metrics(
    dataset: &str,
    traces: &[&QuestionTrace],
    gold: &BTreeMap<String, Verdict>,
) -> Result<DatasetMetrics, MetricsError> {
    let missing: Vec<String> = traces
        .iter()
        .filter(|t| t.status != TraceStatus::Excluded && !gold.contains_key(&t.id))
        .map(|t| t.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(MetricsError::IdMismatch(missing));
    }
    let mut m = DatasetMetrics {
        dataset: dataset.to_string(),
        questions: 0,
        excluded: 0,
        correct: 0,
        executions: 0,
        successful_executions: 0,
    };
    for t in traces {
        if t.status == TraceStatus::Excluded {
            m.excluded += 1;
            continue;
        }
        m.questions += 1;
        m.correct += u64::from(t.verdict.is_definite() && Some(&t.verdict) == gold.get(&t.id));
        for o in t.executions() {
            m.executions += 1;
            m.successful_executions += u64::from(o.succeeded());
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub system: String,
    pub datasets: Vec<DatasetMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub avg_delta: Option<f64>,
}

impl EvaluationReport {
    pub fn new(system: &str, datasets: Vec<DatasetMetrics>) -> Self {
        EvaluationReport {
            system: system.to_string(),
            datasets,
            baseline: None,
            avg_delta: None,
        }
    }

    /// Groups traces by origin (first appearance order) and scores each group
    /// against the gold answers carried in the traces.
    pub fn from_traces(system: &str, traces: &[QuestionTrace]) -> Result<Self, MetricsError> {
        let mut order: Vec<&str> = Vec::new();
        for t in traces {
            if !order.contains(&t.origin.as_str()) {
                order.push(&t.origin);
            }
        }
        let gold: BTreeMap<String, Verdict> =
            traces.iter().filter_map(|t| t.gold.map(|g| (t.id.clone(), g))).collect();
        let datasets = order
            .into_iter()
            .map(|o| {
                let group: Vec<&QuestionTrace> = traces.iter().filter(|t| t.origin == o).collect();
                compute_metrics(o, &group, &gold)
            })
            .collect::<Result<_, _>>()?;
        Ok(EvaluationReport::new(system, datasets))
    }

    /// Unweighted mean of the per-dataset accuracies, in percent.
    pub fn all_unweighted(&self) -> f64 {
        if self.datasets.is_empty() {
            return 0.0;
        }
        self.datasets.iter().map(|d| d.accuracy().percent()).sum::<f64>() / self.datasets.len() as f64
    }

    /// Pooled accuracy over every question.
    pub fn all_weighted(&self) -> Fraction {
        Fraction::new(
            self.datasets.iter().map(|d| d.correct).sum(),
            self.datasets.iter().map(|d| d.questions).sum(),
        )
    }

    pub fn execution_rate(&self) -> Fraction {
        Fraction::new(
            self.datasets.iter().map(|d| d.successful_executions).sum(),
            self.datasets.iter().map(|d| d.executions).sum(),
        )
    }

    pub fn dataset(&self, name: &str) -> Option<&DatasetMetrics> {
        self.datasets.iter().find(|d| d.dataset == name)
    }

    pub fn with_baseline(mut self, baseline: &EvaluationReport) -> Result<Self, MetricsError> {
        self.avg_delta = Some(avg_delta(&self, baseline)?);
        self.baseline = Some(baseline.system.clone());
        Ok(self)
    }
}

/// Mean over datasets of the accuracy difference to `baseline`, in points.
pub fn avg_delta(system: &EvaluationReport, baseline: &EvaluationReport) -> Result<f64, MetricsError> {
    let mut unmatched: Vec<String> = system
        .datasets
        .iter()
        .filter(|d| baseline.dataset(&d.dataset).is_none())
        .chain(baseline.datasets.iter().filter(|d| system.dataset(&d.dataset).is_none()))
        .map(|d| d.dataset.clone())
        .collect();
    if !unmatched.is_empty() || system.datasets.is_empty() {
        unmatched.sort();
        return Err(MetricsError::DatasetMismatch(unmatched));
    }
    let total: f64 = system
        .datasets
        .iter()
        .map(|d| d.accuracy().percent() - baseline.dataset(&d.dataset).expect("matched").accuracy().percent())
        .sum();
    Ok(total / system.datasets.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(name: &str, accs: &[f64]) -> EvaluationReport {
        let names = ["a", "b", "c", "d", "e"];
        EvaluationReport::new(
            name,
            accs.iter().zip(names).map(|(p, n)| DatasetMetrics::from_percent(n, *p)).collect(),
        )
    }

    #[test]
    fn delta_and_means() {
        let base = report("cot", &[72.6, 60.3, 85.3, 75.0, 63.3]);
        assert!((base.all_unweighted() - 71.3).abs() < 1e-9);
        let sys = report("sys", &[73.6, 61.3, 86.3, 76.0, 64.3]).with_baseline(&base).unwrap();
        assert!((sys.avg_delta.unwrap() - 1.0).abs() < 1e-9);
        let short = report("short", &[1.0]);
        assert!(matches!(avg_delta(&short, &base), Err(MetricsError::DatasetMismatch(_))));
    }

    #[test]
    fn weighted_differs_from_unweighted() {
        let r = EvaluationReport::new(
            "x",
            vec![
                DatasetMetrics {
                    dataset: "small".into(),
                    questions: 10,
                    excluded: 0,
                    correct: 10,
                    executions: 0,
                    successful_executions: 0,
                },
                DatasetMetrics {
                    dataset: "big".into(),
                    questions: 90,
                    excluded: 0,
                    correct: 45,
                    executions: 0,
                    successful_executions: 0,
                },
            ],
        );
        assert!((r.all_unweighted() - 75.0).abs() < 1e-9);
        assert_eq!(r.all_weighted(), Fraction::new(55, 100));
    }
}
