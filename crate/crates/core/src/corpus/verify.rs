use std::fmt;

use super::{Label, LabeledCorpus, Language};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Sentences,
    Words,
    /// Number of tokens carrying the label.
    Label(Label),
    LanguageSentences(Language),
    LanguageWords(Language),
}

impl Metric {
    fn observe(self, corpus: &LabeledCorpus) -> usize {
        let stats = corpus.stats();
        match self {
            Metric::Sentences => stats.sentences,
            Metric::Words => stats.words,
            Metric::Label(l) => stats.label_count(l),
            Metric::LanguageSentences(lang) => stats.languages.get(&lang).map_or(0, |s| s.sentences),
            Metric::LanguageWords(lang) => stats.languages.get(&lang).map_or(0, |s| s.words),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Sentences => write!(f, "sentences"),
            Metric::Words => write!(f, "words"),
            Metric::Label(l) => write!(f, "label:{l}"),
            Metric::LanguageSentences(lang) => write!(f, "{lang}:sentences"),
            Metric::LanguageWords(lang) => write!(f, "{lang}:words"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExpectedCount {
    pub metric: Metric,
    pub expected: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountCheck {
    pub metric: Metric,
    pub expected: usize,
    pub observed: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerificationReport {
    pub checks: Vec<CountCheck>,
}

impl VerificationReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{:<20} expected {:>8} observed {:>8} {}",
                c.metric.to_string(),
                c.expected,
                c.observed,
                if c.pass { "PASS" } else { "FAIL" }
            )?;
        }
        write!(f, "overall {}", if self.pass() { "PASS" } else { "FAIL" })
    }
}

/// Compares corpus counts against a fixture table. Mismatches are report
/// content, never errors.
pub fn verify_statistics(corpus: &LabeledCorpus, expected: &[ExpectedCount]) -> VerificationReport {
    let checks = expected
        .iter()
        .map(|e| {
            let observed = e.metric.observe(corpus);
            CountCheck { metric: e.metric, expected: e.expected, observed, pass: observed == e.expected }
        })
        .collect();
    VerificationReport { checks }
}

/// IndicRedRep dataset counts.
pub mod fixtures {
    use super::{ExpectedCount, Label, Language, Metric};

    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    pub enum Split {
        Train,
        Validation,
        Test,
    }

    impl Split {
        pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

        pub fn as_str(self) -> &'static str {
            match self {
                Split::Train => "train",
                Split::Validation => "validation",
                Split::Test => "test",
            }
        }

        pub fn from_name(name: &str) -> Option<Split> {
            Split::ALL.into_iter().find(|s| s.as_str() == name)
        }
    }

    /// (sentences, words) per language and split.
    pub fn split_size(language: Language, split: Split) -> Option<(usize, usize)> {
        let row = match (language, split) {
            (Language::Hi, Split::Train) => (3622, 103602),
            (Language::Hi, _) => (453, 12950),
            (Language::Te, Split::Train) => (1289, 36860),
            (Language::Te, _) => (161, 4608),
            (Language::Mr, Split::Train) => (1322, 37822),
            (Language::Mr, _) => (165, 4728),
            (Language::Other, _) => return None,
        };
        Some(row)
    }

    /// Sentence and word counts for one language split.
    pub fn language_split(language: Language, split: Split) -> Vec<ExpectedCount> {
        let Some((sentences, words)) = split_size(language, split) else {
            return Vec::new();
        };
        vec![
            ExpectedCount { metric: Metric::Sentences, expected: sentences },
            ExpectedCount { metric: Metric::Words, expected: words },
        ]
    }

    /// Label totals across all three languages, per split or overall
    /// (`None`).
    pub fn label_totals(split: Option<Split>) -> Vec<ExpectedCount> {
        let (rep, redup, other) = match split {
            Some(Split::Train) => (2598, 1875, 462),
            Some(Split::Validation) => (335, 230, 62),
            Some(Split::Test) => (330, 235, 62),
            None => (3263, 2340, 586),
        };
        vec![
            ExpectedCount { metric: Metric::Label(Label::Rep), expected: rep },
            ExpectedCount { metric: Metric::Label(Label::Redup), expected: redup },
            ExpectedCount { metric: Metric::Label(Label::Other), expected: other },
        ]
    }
}
