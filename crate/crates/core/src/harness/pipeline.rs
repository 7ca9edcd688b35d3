use std::collections::BTreeSet;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{RunConfig, RunMode};
use super::dataset::DatasetRecord;
use crate::analogy::{acquire_similar_set, AnalogyError, SimilarSet};
use crate::conceptualizer::{conceptualize, AbstractQuestion, ConceptualizeError, ConcreteQuestion};
use crate::cot::{cot_consensus, ConsensusResult};
use crate::gateway::{GatewayError, Llm, Recorder};
use crate::program::{
    execute_candidate, generate_candidates_at, rewrite_soft_operators, ExecutionOutcome, ProgramCandidate,
    SandboxPolicy,
};
use crate::selection::{
    plain_majority, refine_and_select, score_programs, select, PoolEntry, RefinementAttempt, ScoredProgram,
    SelectionResult,
};
use crate::verdict::{tally, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceStatus {
    Answered,
    /// Could not be conceptualized; left out of the metrics.
    Excluded,
    /// Stopped by an infrastructure error; scored as unknown.
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateTrace {
    pub id: String,
    pub completion: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rewritten: Option<String>,
    pub rewrite_count: usize,
    pub outcome: ExecutionOutcome,
}

impl CandidateTrace {
    fn new(c: &ProgramCandidate, outcome: ExecutionOutcome) -> Self {
        let (source, rewritten, rewrite_count) = match &c.program {
            Ok(p) => {
                let r = rewrite_soft_operators(p);
                (Some(p.source.clone()), Some(r.source), r.rewrite_count)
            }
            Err(_) => (None, None, 0),
        };
        CandidateTrace {
            id: format!("p{}", c.index),
            completion: c.completion.clone(),
            source,
            rewritten,
            rewrite_count,
            outcome,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vote {
    pub yes: usize,
    pub no: usize,
}

/// Everything that went into one question's verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionTrace {
    pub id: String,
    pub origin: String,
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<Verdict>,
    pub mode: RunMode,
    pub status: TraceStatus,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub prompt_keys: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abstract_question: Option<AbstractQuestion>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cot: Option<ConsensusResult>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub candidates: Vec<CandidateTrace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vote: Option<Vote>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub similar: Option<SimilarSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub similar_error: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scored: Vec<ScoredProgram>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub refinements: Vec<RefinementAttempt>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub refined_programs: Vec<PoolEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<SelectionResult>,
}

impl QuestionTrace {
    fn new(record: &DatasetRecord, mode: RunMode) -> Self {
        QuestionTrace {
            id: record.id.clone(),
            origin: record.origin.clone(),
            question: record.question.clone(),
            gold: record.gold,
            mode,
            status: TraceStatus::Answered,
            verdict: Verdict::Unknown,
            error: None,
            prompt_keys: Vec::new(),
            abstract_question: None,
            cot: None,
            candidates: Vec::new(),
            vote: None,
            similar: None,
            similar_error: None,
            scored: Vec::new(),
            refinements: Vec::new(),
            refined_programs: Vec::new(),
            selection: None,
        }
    }

    /// Executions of candidate programs on the original question.
    pub fn executions(&self) -> impl Iterator<Item = &ExecutionOutcome> {
        self.candidates.iter().map(|c| &c.outcome)
    }
}

/// Answers questions with one configured pipeline.
pub struct Engine<'a> {
    pub llm: &'a dyn Llm,
    /// Model used for conceptualization only.
    pub conceptualizer: &'a dyn Llm,
    pub config: RunConfig,
    pub policy: SandboxPolicy,
}

impl Engine<'_> {
    pub fn answer(&self, record: &DatasetRecord) -> QuestionTrace {
        let llm = Recorder::new(self.llm);
        let concept = Recorder::new(self.conceptualizer);
        let mut trace = QuestionTrace::new(record, self.config.mode);
        if let Err(e) = self.fill(record, &llm, &concept, &mut trace) {
            tracing::warn!(id = %record.id, error = %e, "question failed");
            trace.status = TraceStatus::Failed;
            trace.verdict = Verdict::Unknown;
            trace.error = Some(e.to_string());
        }
        let keys: BTreeSet<String> = llm.keys().into_iter().chain(concept.keys()).collect();
        trace.prompt_keys = keys.into_iter().collect();
        trace
    }

    fn fill(
        &self,
        record: &DatasetRecord,
        llm: &dyn Llm,
        concept: &dyn Llm,
        trace: &mut QuestionTrace,
    ) -> Result<(), GatewayError> {
        let cfg = &self.config;
        if cfg.mode == RunMode::Cot {
            let c = cot_consensus(llm, &record.question, cfg.k_samples, cfg.inference_temperature)?;
            trace.verdict = c.verdict;
            trace.cot = Some(c);
            return Ok(());
        }

        let question = ConcreteQuestion {
            id: record.id.clone(),
            text: record.question.clone(),
            gold: record.gold,
        };
        let aq = match conceptualize(concept, &question) {
            Ok(aq) => aq,
            Err(ConceptualizeError::Gateway(e)) => return Err(e),
            Err(e @ ConceptualizeError::Failed { .. }) => {
                tracing::info!(id = %record.id, "excluded: {e}");
                trace.status = TraceStatus::Excluded;
                trace.error = Some(e.to_string());
                return Ok(());
            }
        };
        trace.abstract_question = Some(aq.clone());
        let candidates = generate_candidates_at(llm, &aq, cfg.k_samples, cfg.inference_temperature)?;
        let bindings = aq.bindings();

        if cfg.mode == RunMode::Program {
            let outcomes: Vec<ExecutionOutcome> = candidates
                .par_iter()
                .map(|c| execute_candidate(c, &bindings, llm, &self.policy).map(|r| r.outcome))
                .collect::<Result<_, _>>()?;
            let (yes, no) = tally(outcomes.iter().map(|o| o.verdict));
            trace.candidates = candidates.iter().zip(outcomes).map(|(c, o)| CandidateTrace::new(c, o)).collect();
            trace.vote = Some(Vote { yes, no });
            trace.verdict = crate::verdict::majority(trace.executions().map(|o| o.verdict));
            return Ok(());
        }

        let similar = match acquire_similar_set(llm, &aq, &cfg.analogy()) {
            Ok(s) => s,
            Err(AnalogyError::Gateway(e)) => return Err(e),
            Err(AnalogyError::InsufficientSimilarQuestions { minimum, partial }) => {
                trace.similar_error = Some(format!(
                    "only {} similar questions survived, {minimum} required",
                    partial.questions.len()
                ));
                SimilarSet {
                    questions: Vec::new(),
                    ..partial
                }
            }
            Err(e) => {
                trace.similar_error = Some(e.to_string());
                SimilarSet {
                    abstract_id: aq.source_id.clone(),
                    questions: Vec::new(),
                    validated: 0,
                }
            }
        };

        let pool: Vec<PoolEntry> = candidates.iter().map(PoolEntry::from_candidate).collect();
        let scored = score_programs(llm, &pool, &similar.questions, &bindings, &self.policy)?;
        trace.candidates = candidates
            .iter()
            .zip(&scored)
            .map(|(c, s)| CandidateTrace::new(c, s.original.clone()))
            .collect();
        let (yes, no) = tally(trace.executions().map(|o| o.verdict));
        trace.vote = Some(Vote { yes, no });

        let n_original = pool.len();
        let (selection, scored) = if cfg.mode == RunMode::Refine {
            let out = refine_and_select(llm, &aq, pool, scored, &similar.questions, &cfg.refine(), &self.policy)?;
            trace.refinements = out.attempts;
            trace.refined_programs = out.pool[n_original..].to_vec();
            (out.selection, out.scored)
        } else {
            let scores: Vec<_> = scored.iter().map(|s| s.score.clone()).collect();
            let sel = if similar.questions.is_empty() {
                plain_majority(&scores)
            } else {
                select(&scores)
            };
            (sel, scored)
        };
        trace.verdict = selection.verdict;
        trace.selection = Some(selection);
        trace.scored = scored;
        trace.similar = Some(similar);
        Ok(())
    }

    /// Answers every record, in parallel, returning traces in input order.
    pub fn run(&self, records: &[DatasetRecord]) -> Vec<QuestionTrace> {
        let work = || records.par_iter().map(|r| self.answer(r)).collect();
        if self.config.workers == 0 {
            work()
        } else {
            rayon::ThreadPoolBuilder::new()
                .num_threads(self.config.workers)
                .build()
                .expect("worker pool")
                .install(work)
        }
    }
}

/// File name for a question id: anything outside `[A-Za-z0-9._-]` becomes `_`.
pub fn trace_file_name(id: &str) -> String {
    let safe: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' })
        .collect();
    format!("{safe}.json")
}

/// Writes one pretty-printed JSON file per question.
pub fn write_traces(dir: &Path, traces: &[QuestionTrace]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for t in traces {
        let mut text = serde_json::to_string_pretty(t).expect("trace serializes");
        text.push('\n');
        std::fs::write(dir.join(trace_file_name(&t.id)), text)?;
    }
    Ok(())
}

pub fn read_traces(dir: &Path) -> std::io::Result<Vec<QuestionTrace>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let text = std::fs::read_to_string(&p)?;
            serde_json::from_str(&text)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, format!("{}: {e}", p.display())))
        })
        .collect()
}
