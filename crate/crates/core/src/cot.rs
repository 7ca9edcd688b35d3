//! Chain-of-thought answering with self-consistency.

use serde::{Deserialize, Serialize};

use crate::fraction::Fraction;
use crate::gateway::{catalog, slots, GatewayError, Llm};
use crate::verdict::{majority, normalize_output, tally, Verdict};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoTSample {
    pub text: String,
    pub verdict: Verdict,
}

impl CoTSample {
    pub fn new(text: impl Into<String>) -> Self {
        let text = text.into();
        let verdict = extract_verdict(&text);
        CoTSample { text, verdict }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsensusResult {
    pub samples: Vec<CoTSample>,
    pub verdict: Verdict,
    /// Larger of the yes and no counts over all samples.
    pub agreement: Fraction,
}

impl ConsensusResult {
    /// Rationales whose verdict is `v`.
    pub fn rationales_for(&self, v: Verdict) -> impl Iterator<Item = &CoTSample> {
        self.samples.iter().filter(move |s| s.verdict == v)
    }
}

const MARKER: &str = "the answer is";

/// Verdict stated after the last "the answer is"; without the marker, the
/// last sentence is scanned for a lone yes or no.
pub fn extract_verdict(text: &str) -> Verdict {
    let lower = text.to_lowercase();
    if let Some(at) = lower.rfind(MARKER) {
        let rest = &lower[at + MARKER.len()..];
        return match rest.split(|c: char| !c.is_alphanumeric()).find(|t| !t.is_empty()) {
            Some("yes") => Verdict::Yes,
            Some("no") => Verdict::No,
            _ => Verdict::Unknown,
        };
    }
    let last = lower
        .split(['.', '!', '?', '\n'])
        .rev()
        .find(|s| !s.trim().is_empty())
        .unwrap_or("");
    normalize_output(last)
}

/// Majority over definite verdicts; unknowns still count toward the
/// agreement denominator.
pub fn aggregate(samples: Vec<CoTSample>) -> ConsensusResult {
    let (yes, no) = tally(samples.iter().map(|s| s.verdict));
    let verdict = majority(samples.iter().map(|s| s.verdict));
    ConsensusResult {
        agreement: Fraction::new(yes.max(no) as u64, samples.len() as u64),
        verdict,
        samples,
    }
}

pub fn cot_consensus(llm: &dyn Llm, question: &str, k: u32, temperature: f64) -> Result<ConsensusResult, GatewayError> {
    assert!(k >= 1, "at least one sample is required");
    let responses = llm.sample_n(catalog::COT, &slots([("question", question)]), k, temperature)?;
    Ok(aggregate(responses.into_iter().map(|r| CoTSample::new(r.text)).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn extraction() {
        assert_eq!(
            extract_verdict("11 is a prime number. As a result, if I have to guess an answer, the answer is yes."),
            Verdict::Yes
        );
        assert_eq!(extract_verdict(""), Verdict::Unknown);
        assert_eq!(extract_verdict("First the answer is no. On reflection the answer is yes."), Verdict::Yes);
        assert_eq!(extract_verdict("The Answer Is: No"), Verdict::No);
        assert_eq!(extract_verdict("Hard to say. Probably yes"), Verdict::Yes);
        assert_eq!(extract_verdict("the answer is unclear"), Verdict::Unknown);
    }

    fn texts(yes: usize, no: usize, unknown: usize) -> Vec<CoTSample> {
        let mut v = Vec::new();
        v.extend((0..yes).map(|_| CoTSample::new("so the answer is yes")));
        v.extend((0..no).map(|_| CoTSample::new("so the answer is no")));
        v.extend((0..unknown).map(|_| CoTSample::new("I am not sure")));
        v
    }

    #[test]
    fn consensus_arithmetic() {
        let r = aggregate(texts(6, 4, 0));
        assert_eq!((r.verdict, r.agreement), (Verdict::Yes, Fraction::new(6, 10)));
        assert_eq!(aggregate(texts(5, 5, 0)).verdict, Verdict::Unknown);
        assert_eq!(aggregate(texts(10, 0, 0)).agreement.to_f64(), 1.0);
        let r = aggregate(texts(3, 4, 3));
        assert_eq!((r.verdict, r.agreement), (Verdict::No, Fraction::new(4, 10)));
    }

    proptest! {
        #[test]
        fn permutation_invariant(y in 0usize..6, n in 0usize..6, u in 0usize..6, seed in any::<u64>()) {
            prop_assume!(y + n + u > 0);
            let base = aggregate(texts(y, n, u));
            let mut shuffled = texts(y, n, u);
            let len = shuffled.len();
            let mut s = seed;
            for i in (1..len).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                shuffled.swap(i, (s >> 33) as usize % (i + 1));
            }
            let other = aggregate(shuffled);
            prop_assert_eq!(base.verdict, other.verdict);
            prop_assert_eq!(base.agreement, other.agreement);
            prop_assert_eq!(base.verdict == Verdict::Unknown, y == n);
        }
    }
}
