use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Yes,
    No,
    Unknown,
}

impl Verdict {
    pub fn is_definite(self) -> bool {
        self != Verdict::Unknown
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Yes => "yes",
            Verdict::No => "no",
            Verdict::Unknown => "unknown",
        }
    }

    pub fn parse(s: &str) -> Option<Verdict> {
        match s.trim().to_ascii_lowercase().as_str() {
            "yes" | "true" => Some(Verdict::Yes),
            "no" | "false" => Some(Verdict::No),
            "unknown" => Some(Verdict::Unknown),
            _ => None,
        }
    }

    pub fn flip(self) -> Verdict {
        match self {
            Verdict::Yes => Verdict::No,
            Verdict::No => Verdict::Yes,
            Verdict::Unknown => Verdict::Unknown,
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Maps printed program output to a verdict by whole-word containment.
pub fn normalize_output(raw: &str) -> Verdict {
    let lower = raw.to_lowercase();
    let mut yes = false;
    let mut no = false;
    for tok in lower.split(|c: char| !c.is_alphanumeric()) {
        match tok {
            "yes" => yes = true,
            "no" => no = true,
            _ => {}
        }
    }
    match (yes, no) {
        (true, false) => Verdict::Yes,
        (false, true) => Verdict::No,
        _ => Verdict::Unknown,
    }
}

/// Yes/no counts, ignoring unknowns.
pub fn tally(verdicts: impl IntoIterator<Item = Verdict>) -> (usize, usize) {
    verdicts.into_iter().fold((0, 0), |(y, n), v| match v {
        Verdict::Yes => (y + 1, n),
        Verdict::No => (y, n + 1),
        Verdict::Unknown => (y, n),
    })
}

/// Strict majority over definite verdicts; a draw is unknown.
pub fn majority(verdicts: impl IntoIterator<Item = Verdict>) -> Verdict {
    let (y, n) = tally(verdicts);
    match y.cmp(&n) {
        std::cmp::Ordering::Greater => Verdict::Yes,
        std::cmp::Ordering::Less => Verdict::No,
        std::cmp::Ordering::Equal => Verdict::Unknown,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization() {
        assert_eq!(normalize_output("Must be yes"), Verdict::Yes);
        assert_eq!(normalize_output("Must be no"), Verdict::No);
        assert_eq!(normalize_output("MUST BE YES\n"), Verdict::Yes);
        assert_eq!(normalize_output(""), Verdict::Unknown);
        assert_eq!(normalize_output("maybe yes maybe no"), Verdict::Unknown);
        assert_eq!(normalize_output("nobody knows"), Verdict::Unknown);
        assert_eq!(normalize_output("True"), Verdict::Unknown);
    }

    #[test]
    fn majority_with_draws() {
        use Verdict::*;
        assert_eq!(majority([Yes, No, Yes]), Yes);
        assert_eq!(majority([Yes, No]), Unknown);
        assert_eq!(majority([Unknown, Unknown, No]), No);
        assert_eq!(majority([]), Unknown);
    }
}
