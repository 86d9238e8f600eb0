//! Labeled token corpora: data model, file format, normalization, splitting.

mod conll;
mod normalize;
mod split;
mod verify;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use conll::{parse_conll, write_conll};
pub use normalize::{is_punctuation, normalize_sentence, normalize_word};
pub use split::{stratified_split, SplitSpec};
pub use verify::{fixtures, verify_statistics, CountCheck, ExpectedCount, Metric, VerificationReport};

#[derive(Debug, Error, PartialEq)]
pub enum CorpusError {
    #[error("line {line}: malformed line {content:?}")]
    MalformedLine { line: usize, content: String },
    #[error("line {line}: unknown label {label:?}")]
    UnknownLabel { line: usize, label: String },
    #[error("line {line}: sentence mixes labeled and unlabeled tokens")]
    MixedLabeling { line: usize },
    #[error("document contains no sentences")]
    EmptyDocument,
    #[error("sentence {id:?} has {tokens} tokens but {labels} labels")]
    LabelLengthMismatch { id: String, tokens: usize, labels: usize },
    #[error("sentence {id:?} has no tokens")]
    EmptySentence { id: String },
    #[error("token {surface:?} contains whitespace")]
    WhitespaceInToken { surface: String },
    #[error("corpus contains unlabeled sentences")]
    UnlabeledCorpus,
    #[error("invalid split ratios {0:?}: must be non-negative and sum to 1")]
    InvalidRatios([f64; 3]),
}

/// Token class. The order of the variants is the global label order used by
/// every model and every tie-break.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Redup,
    Rep,
    Other,
    O,
}

impl Label {
    pub const COUNT: usize = 4;
    pub const ALL: [Label; 4] = [Label::Redup, Label::Rep, Label::Other, Label::O];
    /// The classes that enter macro averages.
    pub const CLASSES: [Label; 3] = [Label::Redup, Label::Rep, Label::Other];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Label> {
        Label::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Redup => "reduplication",
            Label::Rep => "repetition",
            Label::Other => "other",
            Label::O => "O",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "reduplication" => Ok(Label::Redup),
            "repetition" => Ok(Label::Rep),
            "other" => Ok(Label::Other),
            "O" => Ok(Label::O),
            _ => Err(s.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum Language {
    Hi,
    Te,
    Mr,
    #[default]
    Other,
}

impl Language {
    pub const ALL: [Language; 4] = [Language::Hi, Language::Te, Language::Mr, Language::Other];

    pub fn as_str(self) -> &'static str {
        match self {
            Language::Hi => "hi",
            Language::Te => "te",
            Language::Mr => "mr",
            Language::Other => "other",
        }
    }

    /// Unrecognized tags map to [`Language::Other`].
    pub fn from_tag(tag: &str) -> Language {
        match tag {
            "hi" => Language::Hi,
            "te" => Language::Te,
            "mr" => Language::Mr,
            _ => Language::Other,
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token {
    pub surface: String,
    /// NFC form with leading and trailing punctuation removed. Empty for
    /// all-punctuation tokens read from a file.
    pub normalized: String,
    pub index: usize,
}

impl Token {
    pub fn new(surface: impl Into<String>, index: usize) -> Token {
        let surface = surface.into();
        let normalized = normalize_word(&surface);
        Token { surface, normalized, index }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    id: String,
    language: Language,
    tokens: Vec<Token>,
    labels: Option<Vec<Label>>,
}

impl Sentence {
    pub fn new(
        id: impl Into<String>,
        language: Language,
        tokens: Vec<Token>,
        labels: Option<Vec<Label>>,
    ) -> Result<Sentence, CorpusError> {
        let id = id.into();
        if tokens.is_empty() {
            return Err(CorpusError::EmptySentence { id });
        }
        if let Some(t) = tokens.iter().find(|t| t.surface.chars().any(char::is_whitespace)) {
            return Err(CorpusError::WhitespaceInToken { surface: t.surface.clone() });
        }
        if let Some(labels) = &labels {
            if labels.len() != tokens.len() {
                return Err(CorpusError::LabelLengthMismatch {
                    id,
                    tokens: tokens.len(),
                    labels: labels.len(),
                });
            }
        }
        let tokens = tokens
            .into_iter()
            .enumerate()
            .map(|(i, t)| Token { index: i, ..t })
            .collect();
        Ok(Sentence { id, language, tokens, labels })
    }

    /// Builds a sentence from surface words, keeping every word (including
    /// all-punctuation ones) so that labels stay aligned.
    pub fn from_words<S: AsRef<str>>(
        id: impl Into<String>,
        language: Language,
        words: &[S],
        labels: Option<Vec<Label>>,
    ) -> Result<Sentence, CorpusError> {
        let tokens = words
            .iter()
            .enumerate()
            .map(|(i, w)| Token::new(w.as_ref(), i))
            .collect();
        Sentence::new(id, language, tokens, labels)
    }

    pub fn with_language(&self, language: Language) -> Sentence {
        Sentence { language, ..self.clone() }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn language(&self) -> Language {
        self.language
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn labels(&self) -> Option<&[Label]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn is_labeled(&self) -> bool {
        self.labels.is_some()
    }

    pub fn with_labels(&self, labels: Option<Vec<Label>>) -> Result<Sentence, CorpusError> {
        Sentence::new(self.id.clone(), self.language, self.tokens.clone(), labels)
    }

    /// The set of non-O classes present, as a 3-bit mask in label order.
    pub fn signature(&self) -> u8 {
        let mut mask = 0u8;
        for label in self.labels.iter().flatten() {
            if *label != Label::O {
                mask |= 1 << label.index();
            }
        }
        mask
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LanguageStats {
    pub sentences: usize,
    pub words: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorpusStats {
    pub sentences: usize,
    pub words: usize,
    /// Token counts in label order; unlabeled sentences contribute nothing.
    pub labels: [usize; Label::COUNT],
    pub languages: BTreeMap<Language, LanguageStats>,
}

impl CorpusStats {
    pub fn count(sentences: &[Sentence]) -> CorpusStats {
        let mut stats = CorpusStats::default();
        for s in sentences {
            stats.sentences += 1;
            stats.words += s.len();
            let lang = stats.languages.entry(s.language()).or_default();
            lang.sentences += 1;
            lang.words += s.len();
            for label in s.labels().into_iter().flatten() {
                stats.labels[label.index()] += 1;
            }
        }
        stats
    }

    pub fn label_count(&self, label: Label) -> usize {
        self.labels[label.index()]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabeledCorpus {
    sentences: Vec<Sentence>,
    stats: CorpusStats,
}

impl LabeledCorpus {
    pub fn new(sentences: Vec<Sentence>) -> LabeledCorpus {
        let stats = CorpusStats::count(&sentences);
        LabeledCorpus { sentences, stats }
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }

    pub fn into_sentences(self) -> Vec<Sentence> {
        self.sentences
    }

    pub fn stats(&self) -> &CorpusStats {
        &self.stats
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn is_fully_labeled(&self) -> bool {
        self.sentences.iter().all(Sentence::is_labeled)
    }

    /// Concatenates corpora in order.
    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a LabeledCorpus>) -> LabeledCorpus {
        LabeledCorpus::new(parts.into_iter().flat_map(|c| c.sentences.iter().cloned()).collect())
    }
}
