//! Duplicated-span detection and Reparandum/Interregnum/Repair segmentation.
//!
//! A span is a reparandum, an optional interregnum, and a repair that copies
//! the reparandum token for token. The interruption point has no textual
//! trace and is not modeled.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use thiserror::Error;

use crate::corpus::{Label, Sentence};

pub const BOS: &str = "<BOS>";
pub const EOS: &str = "<EOS>";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RirError {
    #[error("span {span} is inconsistent with a sentence of {len} tokens")]
    InconsistentSpans { span: String, len: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MatchOn {
    #[default]
    Normalized,
    Surface,
}

impl MatchOn {
    pub fn as_str(self) -> &'static str {
        match self {
            MatchOn::Normalized => "normalized",
            MatchOn::Surface => "surface",
        }
    }
}

impl FromStr for MatchOn {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "normalized" => Ok(MatchOn::Normalized),
            "surface" => Ok(MatchOn::Surface),
            other => Err(format!("unknown match mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RirConfig {
    pub max_interregnum_len: usize,
    pub max_phrase_len: usize,
    pub match_on: MatchOn,
}

impl Default for RirConfig {
    fn default() -> Self {
        RirConfig { max_interregnum_len: 2, max_phrase_len: 3, match_on: MatchOn::Normalized }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RiRSpan {
    pub reparandum: Range<usize>,
    /// Empty ranges sit at `reparandum.end`.
    pub interregnum: Range<usize>,
    pub repair: Range<usize>,
}

impl RiRSpan {
    pub fn new(start: usize, phrase_len: usize, gap: usize) -> RiRSpan {
        let rep_end = start + phrase_len;
        let int_end = rep_end + gap;
        RiRSpan { reparandum: start..rep_end, interregnum: rep_end..int_end, repair: int_end..int_end + phrase_len }
    }

    pub fn gap_len(&self) -> usize {
        self.interregnum.len()
    }

    pub fn phrase_len(&self) -> usize {
        self.reparandum.len()
    }

    /// The whole region from reparandum start to repair end.
    pub fn region(&self) -> Range<usize> {
        self.reparandum.start..self.repair.end
    }

    fn is_well_formed(&self, len: usize) -> bool {
        !self.reparandum.is_empty()
            && self.reparandum.len() == self.repair.len()
            && self.reparandum.end == self.interregnum.start
            && self.interregnum.start <= self.interregnum.end
            && self.interregnum.end == self.repair.start
            && self.repair.end <= len
    }
}

impl fmt::Display for RiRSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{}\t{}",
            fmt_range(&self.reparandum),
            fmt_range(&self.interregnum),
            fmt_range(&self.repair)
        )
    }
}

pub fn fmt_range(r: &Range<usize>) -> String {
    format!("[{},{})", r.start, r.end)
}

fn match_keys(sentence: &Sentence, match_on: MatchOn) -> Vec<&str> {
    sentence
        .tokens()
        .iter()
        .map(|t| match match_on {
            MatchOn::Normalized => t.normalized.as_str(),
            MatchOn::Surface => t.surface.as_str(),
        })
        .collect()
}

/// Finds every duplicated word or phrase.
///
/// Every start position is tried independently. At each position the smallest
/// gap that admits a match wins, and within that gap the longest phrase. A
/// position yields at most one span, so chains such as `w x w w` produce two
/// spans sharing token 2. Tokens with an empty match key never match.
pub fn find_spans(sentence: &Sentence, config: &RirConfig) -> Vec<RiRSpan> {
    let keys = match_keys(sentence, config.match_on);
    let n = keys.len();
    let mut spans = Vec::new();
    for start in 0..n {
        'gaps: for gap in 0..=config.max_interregnum_len {
            for len in (1..=config.max_phrase_len).rev() {
                let repair_start = start + len + gap;
                if repair_start + len > n {
                    continue;
                }
                let rep = &keys[start..start + len];
                let repair = &keys[repair_start..repair_start + len];
                if rep.iter().all(|k| !k.is_empty()) && rep == repair {
                    spans.push(RiRSpan::new(start, len, gap));
                    break 'gaps;
                }
            }
        }
    }
    spans
}

/// Per-token structural context derived from the spans covering it.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RirRecord {
    pub in_reparandum: bool,
    pub in_repair: bool,
    pub interregnum_tokens: Vec<String>,
    pub gap_len: Option<usize>,
    pub left_word: Option<String>,
    pub right_word: Option<String>,
}

impl RirRecord {
    pub fn is_empty(&self) -> bool {
        *self == RirRecord::default()
    }
}

/// Builds one record per token. Flags accumulate over all covering spans; the
/// context fields come from the first span (in span order) covering the token.
pub fn annotate_rir_features(sentence: &Sentence, spans: &[RiRSpan]) -> Result<Vec<RirRecord>, RirError> {
    let tokens = sentence.tokens();
    let n = tokens.len();
    let mut records = vec![RirRecord::default(); n];
    for span in spans {
        if !span.is_well_formed(n) {
            return Err(RirError::InconsistentSpans { span: span.to_string(), len: n });
        }
        let interregnum: Vec<String> = tokens[span.interregnum.clone()].iter().map(|t| t.normalized.clone()).collect();
        let region = span.region();
        let left = match region.start {
            0 => BOS.to_string(),
            i => tokens[i - 1].normalized.clone(),
        };
        let right = tokens.get(region.end).map_or_else(|| EOS.to_string(), |t| t.normalized.clone());

        for i in span.reparandum.clone().chain(span.repair.clone()) {
            let rec = &mut records[i];
            if rec.gap_len.is_none() {
                rec.gap_len = Some(span.gap_len());
                rec.interregnum_tokens = interregnum.clone();
                rec.left_word = Some(left.clone());
                rec.right_word = Some(right.clone());
            }
        }
        for i in span.reparandum.clone() {
            records[i].in_reparandum = true;
        }
        for i in span.repair.clone() {
            records[i].in_repair = true;
        }
    }
    Ok(records)
}

/// Why a span was classified the way it was.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeuristicTrace {
    pub label: Label,
    pub interregnum: Vec<String>,
    /// Interregnum words found in the editing lexicon. Informational only.
    pub lexicon_hits: Vec<String>,
}

/// Zero-training rule: a non-empty interregnum means repetition, an empty
/// one means reduplication.
pub fn heuristic_trace(span: &RiRSpan, sentence: &Sentence, editing_lexicon: &BTreeSet<String>) -> HeuristicTrace {
    let interregnum: Vec<String> = sentence
        .tokens()
        .get(span.interregnum.clone())
        .unwrap_or_default()
        .iter()
        .map(|t| t.normalized.clone())
        .collect();
    let lexicon_hits = interregnum.iter().filter(|w| editing_lexicon.contains(*w)).cloned().collect();
    let label = if span.interregnum.is_empty() { Label::Redup } else { Label::Rep };
    HeuristicTrace { label, interregnum, lexicon_hits }
}

pub fn heuristic_classify(span: &RiRSpan, sentence: &Sentence, editing_lexicon: &BTreeSet<String>) -> Label {
    heuristic_trace(span, sentence, editing_lexicon).label
}
