use proptest::prelude::*;

use concept_core::selection::{plain_majority, select, ProgramScore};
use concept_core::verdict::Verdict;

fn verdict() -> impl Strategy<Value = Verdict> {
    prop_oneof![Just(Verdict::Yes), Just(Verdict::No), Just(Verdict::Unknown)]
}

/// Pools scored on `q` shared questions: per program a prediction row and
/// an original verdict.
fn pool() -> impl Strategy<Value = (Vec<Verdict>, Vec<(Vec<Verdict>, Verdict)>)> {
    (0usize..7, 1usize..7).prop_flat_map(|(q, n)| {
        (
            prop::collection::vec(prop_oneof![Just(Verdict::Yes), Just(Verdict::No)], q),
            prop::collection::vec((prop::collection::vec(verdict(), q), verdict()), n),
        )
    })
}

fn scores(silver: &[Verdict], rows: &[(Vec<Verdict>, Verdict)]) -> Vec<ProgramScore> {
    let ids: Vec<String> = (0..silver.len()).map(|j| format!("s{j}")).collect();
    let labels: Vec<(&str, Verdict)> = ids.iter().map(String::as_str).zip(silver.iter().copied()).collect();
    rows.iter()
        .enumerate()
        .map(|(i, (preds, orig))| ProgramScore::from_predictions(&format!("p{i}"), &labels, preds, *orig))
        .collect()
}

proptest! {
    #[test]
    fn order_does_not_matter((silver, rows) in pool(), seed in any::<u64>()) {
        let s = scores(&silver, &rows);
        let mut shuffled = s.clone();
        let n = shuffled.len();
        for i in (1..n).rev() {
            shuffled.swap(i, (seed as usize).wrapping_mul(i + 7) % (i + 1));
        }
        prop_assert_eq!(select(&s), select(&shuffled));
    }

    #[test]
    fn unanimous_pool_wins((silver, rows) in pool(), v in prop_oneof![Just(Verdict::Yes), Just(Verdict::No)]) {
        let rows: Vec<_> = rows.into_iter().map(|(p, _)| (p, v)).collect();
        let s = scores(&silver, &rows);
        prop_assert_eq!(select(&s).verdict, v);
        prop_assert_eq!(plain_majority(&s).verdict, v);
    }

    #[test]
    fn a_perfect_program_alone_decides((silver, rows) in pool(), v in prop_oneof![Just(Verdict::Yes), Just(Verdict::No)]) {
        prop_assume!(!silver.is_empty());
        let mut rows: Vec<_> = rows
            .into_iter()
            .map(|(mut p, o)| {
                p[0] = silver[0].flip();
                (p, o)
            })
            .collect();
        rows.push((silver.clone(), v));
        let s = scores(&silver, &rows);
        let sel = select(&s);
        prop_assert_eq!(sel.verdict, v);
        prop_assert_eq!(sel.top_set, vec![format!("p{}", rows.len() - 1)]);
    }

    #[test]
    fn accuracy_counts_definite_matches((silver, rows) in pool()) {
        for (score, (preds, _)) in scores(&silver, &rows).iter().zip(&rows) {
            let hits = preds.iter().zip(&silver).filter(|(p, s)| p == s).count() as u64;
            prop_assert_eq!(score.accuracy.num, hits);
            prop_assert_eq!(score.accuracy.den, silver.len() as u64);
            prop_assert_eq!(score.has_failures(), hits < silver.len() as u64);
        }
    }
}
