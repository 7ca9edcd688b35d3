//! Scoring candidate programs on silver-labeled similar questions, choosing a
//! verdict from the scores, and one round of feedback-driven refinement.

use std::collections::BTreeMap;

use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analogy::SimilarQuestion;
use crate::conceptualizer::{AbstractQuestion, Bindings};
use crate::fraction::Fraction;
use crate::gateway::{catalog, slots, GatewayError, Llm, LlmRequest, INFERENCE_TEMPERATURE};
use crate::program::{
    execute_candidate, literal, ExecutionOutcome, ProgramCandidate, ProgramError, SandboxPolicy, SolutionProgram,
};
use crate::typed::TypedValue;
use crate::verdict::{majority, Verdict};

/// A program in the selection pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub id: String,
    pub program: Result<SolutionProgram, ProgramError>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
}

impl PoolEntry {
    pub fn from_candidate(c: &ProgramCandidate) -> Self {
        PoolEntry {
            id: format!("p{}", c.index),
            program: c.program.clone(),
            parent: None,
        }
    }

    fn as_candidate(&self) -> ProgramCandidate {
        ProgramCandidate {
            index: 0,
            completion: String::new(),
            program: self.program.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseResult {
    pub predicted: Verdict,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgramScore {
    pub program_id: String,
    pub accuracy: Fraction,
    pub per_question: BTreeMap<String, CaseResult>,
    pub original_verdict: Verdict,
}

impl ProgramScore {
    /// Scores predictions against `(question id, silver label)` pairs; an
    /// unknown prediction is never correct.
    pub fn from_predictions(
        program_id: &str,
        labels: &[(&str, Verdict)],
        predicted: &[Verdict],
        original_verdict: Verdict,
    ) -> Self {
        assert_eq!(labels.len(), predicted.len(), "one prediction per labeled question");
        let per_question: BTreeMap<String, CaseResult> = labels
            .iter()
            .zip(predicted)
            .map(|(&(id, silver), &p)| {
                let correct = p.is_definite() && p == silver;
                (id.to_string(), CaseResult { predicted: p, correct })
            })
            .collect();
        let correct = per_question.values().filter(|c| c.correct).count() as u64;
        ProgramScore {
            program_id: program_id.to_string(),
            accuracy: Fraction::new(correct, labels.len() as u64),
            per_question,
            original_verdict,
        }
    }

    pub fn has_failures(&self) -> bool {
        self.per_question.values().any(|c| !c.correct)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseExecution {
    pub question_id: String,
    pub outcome: ExecutionOutcome,
}

/// A score together with the executions it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredProgram {
    pub score: ProgramScore,
    pub original: ExecutionOutcome,
    pub cases: Vec<CaseExecution>,
}

/// Executes every pool program on the original bindings and on every
/// similar question. Failed executions count as incorrect.
pub fn score_programs(
    llm: &dyn Llm,
    pool: &[PoolEntry],
    similar: &[SimilarQuestion],
    original: &Bindings,
    policy: &SandboxPolicy,
) -> Result<Vec<ScoredProgram>, GatewayError> {
    let jobs: Vec<(usize, Option<usize>)> = (0..pool.len())
        .flat_map(|p| std::iter::once((p, None)).chain((0..similar.len()).map(move |q| (p, Some(q)))))
        .collect();
    let outcomes: Vec<ExecutionOutcome> = jobs
        .par_iter()
        .map(|&(p, q)| {
            let bindings = q.map_or(original, |q| &similar[q].bindings);
            execute_candidate(&pool[p].as_candidate(), bindings, llm, policy).map(|r| r.outcome)
        })
        .collect::<Result<_, _>>()?;

    let labels: Vec<(&str, Verdict)> = similar.iter().map(|q| (q.id.as_str(), q.silver_label)).collect();
    let mut it = outcomes.into_iter();
    let mut scored = Vec::with_capacity(pool.len());
    for entry in pool {
        let original = it.next().expect("one original execution per program");
        let cases: Vec<CaseExecution> = similar
            .iter()
            .map(|sq| CaseExecution {
                question_id: sq.id.clone(),
                outcome: it.next().expect("one execution per similar question"),
            })
            .collect();
        let predicted: Vec<Verdict> = cases.iter().map(|c| c.outcome.verdict).collect();
        scored.push(ScoredProgram {
            score: ProgramScore::from_predictions(&entry.id, &labels, &predicted, original.verdict),
            original,
            cases,
        });
    }
    Ok(scored)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMethod {
    TopMajority,
    Weighted,
    PlainMajority,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub verdict: Verdict,
    pub method: SelectionMethod,
    pub top_set: Vec<String>,
}

/// Majority over the programs' verdicts on the original question.
pub fn plain_majority(scores: &[ProgramScore]) -> SelectionResult {
    let mut top_set: Vec<String> = scores.iter().map(|s| s.program_id.clone()).collect();
    top_set.sort();
    SelectionResult {
        verdict: majority(scores.iter().map(|s| s.original_verdict)),
        method: SelectionMethod::PlainMajority,
        top_set,
    }
}

/// Best accuracy tier first; a draw there (or a tier with only unknown
/// verdicts) goes to an accuracy-weighted vote over every program.
pub fn select(scores: &[ProgramScore]) -> SelectionResult {
    let Some(best) = scores.iter().map(|s| s.accuracy).max_by(|a, b| a.cmp_value(*b)) else {
        return plain_majority(scores);
    };
    let top: Vec<&ProgramScore> = scores.iter().filter(|s| s.accuracy.same_value(best)).collect();
    let mut top_set: Vec<String> = top.iter().map(|s| s.program_id.clone()).collect();
    top_set.sort();

    let verdict = majority(top.iter().map(|s| s.original_verdict));
    if verdict.is_definite() {
        return SelectionResult {
            verdict,
            method: SelectionMethod::TopMajority,
            top_set,
        };
    }

    let mut yes = Ratio::<u128>::from_integer(0);
    let mut no = Ratio::<u128>::from_integer(0);
    for s in scores {
        let w = s.accuracy.ratio();
        let w = Ratio::new(u128::from(*w.numer()), u128::from(*w.denom()));
        match s.original_verdict {
            Verdict::Yes => yes += w,
            Verdict::No => no += w,
            Verdict::Unknown => {}
        }
    }
    let verdict = match yes.cmp(&no) {
        std::cmp::Ordering::Greater => Verdict::Yes,
        std::cmp::Ordering::Less => Verdict::No,
        std::cmp::Ordering::Equal => Verdict::Unknown,
    };
    SelectionResult {
        verdict,
        method: SelectionMethod::Weighted,
        top_set,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedCase {
    pub question_id: String,
    pub question: String,
    pub bindings: Bindings,
    pub program_verdict: Verdict,
    pub program_output: String,
    pub silver_label: Verdict,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementFeedback {
    pub program_id: String,
    pub failed_cases: Vec<FailedCase>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FeedbackError {
    #[error("program `{0}` has no failed cases")]
    NoFailures(String),
    #[error("no failed case of `{0}` has a rationale agreeing with its silver label")]
    NoUsableRationale(String),
}

/// Up to `max_cases` failed cases, each with one rationale that reached the
/// silver label.
pub fn build_feedback(
    scored: &ScoredProgram,
    similar: &[SimilarQuestion],
    max_cases: usize,
) -> Result<RefinementFeedback, FeedbackError> {
    let id = &scored.score.program_id;
    if !scored.score.has_failures() {
        return Err(FeedbackError::NoFailures(id.clone()));
    }
    let mut failed_cases = Vec::new();
    for (sq, case) in similar.iter().zip(&scored.cases) {
        if failed_cases.len() == max_cases {
            break;
        }
        if scored.score.per_question.get(&sq.id).is_none_or(|c| c.correct) {
            continue;
        }
        let Some(rationale) = sq.rationales.iter().find(|r| r.verdict == sq.silver_label) else {
            continue;
        };
        failed_cases.push(FailedCase {
            question_id: sq.id.clone(),
            question: sq.text.clone(),
            bindings: sq.bindings.clone(),
            program_verdict: case.outcome.verdict,
            program_output: case.outcome.raw_output.trim().to_string(),
            silver_label: sq.silver_label,
            rationale: rationale.text.trim().to_string(),
        });
    }
    if failed_cases.is_empty() {
        return Err(FeedbackError::NoUsableRationale(id.clone()));
    }
    Ok(RefinementFeedback {
        program_id: id.clone(),
        failed_cases,
    })
}

fn call_literal(v: &TypedValue) -> String {
    match v {
        TypedValue::Text(s) => serde_json::to_string(s).expect("string serializes"),
        other => literal(other),
    }
}

/// Failed cases in the layout of the refinement prompt.
pub fn render_failed_cases(program: &SolutionProgram, feedback: &RefinementFeedback) -> String {
    let mut out = Vec::new();
    for (i, case) in feedback.failed_cases.iter().enumerate() {
        let n = i + 1;
        let args: Vec<String> = program
            .entry_params
            .iter()
            .filter_map(|p| case.bindings.get(p).map(|v| format!("{p}={}", call_literal(v))))
            .collect();
        let returned = match case.program_verdict {
            Verdict::Yes => "Yes".to_string(),
            Verdict::No => "No".to_string(),
            Verdict::Unknown if case.program_output.is_empty() => "nothing".to_string(),
            Verdict::Unknown => case.program_output.clone(),
        };
        out.push(format!("Failed case {n}: answer({})", args.join(", ")));
        out.push(format!(
            "Failed reason {n}: The concrete question in this case is '{}' {} However, the program returned results '{returned}'.",
            case.question, case.rationale
        ));
    }
    out.join("\n")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementAttempt {
    pub parent: String,
    pub feedback: RefinementFeedback,
    pub completion: String,
    /// Id of the new pool member; absent when the completion did not parse.
    pub accepted_as: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Asks for a better program given the failed cases; returns the completion
/// and its parse.
pub fn refine(
    llm: &dyn Llm,
    question: &AbstractQuestion,
    program: &SolutionProgram,
    feedback: &RefinementFeedback,
) -> Result<(String, Result<SolutionProgram, ProgramError>), GatewayError> {
    let req = LlmRequest::new(
        catalog::REFINE,
        slots([
            ("question", question.annotated()),
            ("program", program.source.clone()),
            ("failed_cases", render_failed_cases(program, feedback)),
        ]),
        INFERENCE_TEMPERATURE,
        0,
    );
    let completion = llm.complete(&req)?.text;
    let parsed = ProgramCandidate::from_completion(0, completion.clone()).program;
    Ok((completion, parsed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RefineConfig {
    pub top_t: usize,
    pub max_cases: usize,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig { top_t: 2, max_cases: 2 }
    }
}

/// Pool ids ordered by accuracy, best first; ties keep pool order.
pub fn ranked(scores: &[ProgramScore]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].accuracy.cmp_value(scores[a].accuracy));
    idx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineOutcome {
    pub pool: Vec<PoolEntry>,
    pub scored: Vec<ScoredProgram>,
    pub attempts: Vec<RefinementAttempt>,
    pub selection: SelectionResult,
}

/// Refines the best `top_t` programs that fail somewhere, adds the results
/// to the pool, and selects over the union.
pub fn refine_and_select(
    llm: &dyn Llm,
    question: &AbstractQuestion,
    pool: Vec<PoolEntry>,
    scored: Vec<ScoredProgram>,
    similar: &[SimilarQuestion],
    cfg: &RefineConfig,
    policy: &SandboxPolicy,
) -> Result<RefineOutcome, GatewayError> {
    let scores: Vec<ProgramScore> = scored.iter().map(|s| s.score.clone()).collect();
    if similar.is_empty() {
        return Ok(RefineOutcome {
            selection: plain_majority(&scores),
            pool,
            scored,
            attempts: Vec::new(),
        });
    }

    let parents: Vec<usize> = ranked(&scores)
        .into_iter()
        .filter(|&i| pool[i].program.is_ok())
        .take(cfg.top_t)
        .filter(|&i| scores[i].has_failures())
        .collect();

    let mut attempts = Vec::new();
    let mut fresh = Vec::new();
    for i in parents {
        let parent = &pool[i];
        let feedback = match build_feedback(&scored[i], similar, cfg.max_cases) {
            Ok(f) => f,
            Err(e) => {
                tracing::debug!(error = %e, "not refined");
                continue;
            }
        };
        let program = parent.program.as_ref().expect("parents parsed");
        let (completion, parsed) = refine(llm, question, program, &feedback)?;
        let (accepted_as, error) = match parsed {
            Ok(p) => {
                let id = format!("{}-r", parent.id);
                fresh.push(PoolEntry {
                    id: id.clone(),
                    program: Ok(p),
                    parent: Some(parent.id.clone()),
                });
                (Some(id), None)
            }
            Err(e) => (None, Some(e.to_string())),
        };
        attempts.push(RefinementAttempt {
            parent: parent.id.clone(),
            feedback,
            completion,
            accepted_as,
            error,
        });
    }

    let original_bindings = question.bindings();
    let fresh_scored = score_programs(llm, &fresh, similar, &original_bindings, policy)?;
    let mut pool = pool;
    let mut scored = scored;
    pool.extend(fresh);
    scored.extend(fresh_scored);
    let union: Vec<ProgramScore> = scored.iter().map(|s| s.score.clone()).collect();
    Ok(RefineOutcome {
        selection: select(&union),
        pool,
        scored,
        attempts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn score(id: &str, correct: u64, total: u64, v: Verdict) -> ProgramScore {
        ProgramScore {
            program_id: id.into(),
            accuracy: Fraction::new(correct, total),
            per_question: BTreeMap::new(),
            original_verdict: v,
        }
    }

    #[test]
    fn better_program_wins() {
        let r = select(&[score("p1", 1, 5, Verdict::No), score("p2", 5, 5, Verdict::Yes)]);
        assert_eq!(
            r,
            SelectionResult {
                verdict: Verdict::Yes,
                method: SelectionMethod::TopMajority,
                top_set: vec!["p2".into()]
            }
        );
    }

    #[test]
    fn tied_tier_majority() {
        let r = select(&[
            score("a", 3, 5, Verdict::Yes),
            score("b", 3, 5, Verdict::No),
            score("c", 3, 5, Verdict::Yes),
            score("d", 1, 5, Verdict::No),
        ]);
        assert_eq!((r.verdict, r.method), (Verdict::Yes, SelectionMethod::TopMajority));
        assert_eq!(r.top_set, ["a", "b", "c"]);
    }

    #[test]
    fn weighted_fallback() {
        // top tier draws; yes carries 0.8 + 0.6 = 1.4, no 0.8 + 0.3 = 1.1
        let r = select(&[
            score("a", 8, 10, Verdict::Yes),
            score("b", 8, 10, Verdict::No),
            score("c", 6, 10, Verdict::Yes),
            score("d", 3, 10, Verdict::No),
        ]);
        assert_eq!((r.verdict, r.method), (Verdict::Yes, SelectionMethod::Weighted));

        let r = select(&[score("a", 1, 2, Verdict::Yes), score("b", 1, 2, Verdict::No)]);
        assert_eq!((r.verdict, r.method), (Verdict::Unknown, SelectionMethod::Weighted));

        let r = select(&[score("a", 2, 2, Verdict::Unknown), score("b", 1, 2, Verdict::No)]);
        assert_eq!((r.verdict, r.method), (Verdict::No, SelectionMethod::Weighted));
    }

    #[test]
    fn equal_accuracies_match_plain_majority() {
        let s = [
            score("a", 2, 4, Verdict::Yes),
            score("b", 1, 2, Verdict::No),
            score("c", 2, 4, Verdict::No),
        ];
        assert_eq!(select(&s).verdict, plain_majority(&s).verdict);
    }

    #[test]
    fn ranking_is_stable() {
        let s = [
            score("a", 1, 4, Verdict::Yes),
            score("b", 3, 4, Verdict::No),
            score("c", 3, 4, Verdict::No),
        ];
        assert_eq!(ranked(&s), [1, 2, 0]);
    }
}
