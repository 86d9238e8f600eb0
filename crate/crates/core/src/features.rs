//! Sparse indicator features built from declarative templates.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::corpus::{LabeledCorpus, Sentence};
use crate::rir::{annotate_rir_features, find_spans, RirConfig, RirRecord, BOS, EOS};

/// Name of the reserved out-of-vocabulary feature. Sorts before every
/// template name, so it always receives id 0.
pub const OOV: &str = "<OOV>";
pub const OOV_ID: u32 = 0;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FeatureError {
    #[error("feature index is not frozen")]
    IndexNotFrozen,
    #[error("feature index is frozen")]
    IndexFrozen,
    #[error("cannot fit a feature index on an empty corpus")]
    EmptyCorpus,
    #[error("unknown template {0:?}")]
    UnknownTemplate(String),
    #[error("template {0} requires use_rir")]
    RirDisabled(Template),
    #[error("{records} RiR records for a sentence of {tokens} tokens")]
    RecordMismatch { records: usize, tokens: usize },
    #[error(transparent)]
    Rir(#[from] crate::rir::RirError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Template {
    W0,
    WPrev,
    WNext,
    EqPrev,
    EqNext,
    Prefix3,
    Suffix3,
    RirInReparandum,
    RirInRepair,
    RirInterregnumWord,
    RirGapLen,
    RirLeftWord,
    RirRightWord,
}

impl Template {
    pub const ALL: [Template; 13] = [
        Template::W0,
        Template::WPrev,
        Template::WNext,
        Template::EqPrev,
        Template::EqNext,
        Template::Prefix3,
        Template::Suffix3,
        Template::RirInReparandum,
        Template::RirInRepair,
        Template::RirInterregnumWord,
        Template::RirGapLen,
        Template::RirLeftWord,
        Template::RirRightWord,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Template::W0 => "W0",
            Template::WPrev => "W-1",
            Template::WNext => "W+1",
            Template::EqPrev => "EQ_PREV",
            Template::EqNext => "EQ_NEXT",
            Template::Prefix3 => "PREFIX3",
            Template::Suffix3 => "SUFFIX3",
            Template::RirInReparandum => "RIR_IN_REPARANDUM",
            Template::RirInRepair => "RIR_IN_REPAIR",
            Template::RirInterregnumWord => "RIR_INTERREGNUM_WORD",
            Template::RirGapLen => "RIR_GAP_LEN",
            Template::RirLeftWord => "RIR_LEFT_WORD",
            Template::RirRightWord => "RIR_RIGHT_WORD",
        }
    }

    pub fn is_rir(self) -> bool {
        self >= Template::RirInReparandum
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Template {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Template::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| FeatureError::UnknownTemplate(s.to_string()))
    }
}

/// Enabled templates. With `use_rir == false` no RIR_* template is present.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    templates: Vec<Template>,
    use_rir: bool,
}

impl TemplateSet {
    pub fn new(templates: impl IntoIterator<Item = Template>, use_rir: bool) -> Result<TemplateSet, FeatureError> {
        let mut templates: Vec<Template> = templates.into_iter().collect();
        templates.sort();
        templates.dedup();
        if let Some(t) = templates.iter().find(|t| t.is_rir() && !use_rir) {
            return Err(FeatureError::RirDisabled(*t));
        }
        Ok(TemplateSet { templates, use_rir })
    }

    /// Every template, with or without the RIR_* group.
    pub fn standard(use_rir: bool) -> TemplateSet {
        let templates = Template::ALL.into_iter().filter(|t| use_rir || !t.is_rir()).collect();
        TemplateSet { templates, use_rir }
    }

    /// Parses a comma-separated list of template names. `use_rir` is set when
    /// any RIR_* template is listed.
    pub fn parse(list: &str) -> Result<TemplateSet, FeatureError> {
        let templates = list
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<Template>, _>>()?;
        let use_rir = templates.iter().any(|t| t.is_rir());
        TemplateSet::new(templates, use_rir)
    }

    /// Same set with the RIR_* group switched on or off.
    pub fn with_rir(&self, use_rir: bool) -> TemplateSet {
        let mut templates: Vec<Template> = self.templates.iter().copied().filter(|t| !t.is_rir()).collect();
        if use_rir {
            templates.extend(Template::ALL.into_iter().filter(|t| t.is_rir()));
        }
        TemplateSet { templates, use_rir }
    }

    pub fn use_rir(&self) -> bool {
        self.use_rir
    }

    pub fn templates(&self) -> &[Template] {
        &self.templates
    }

    pub fn contains(&self, t: Template) -> bool {
        self.templates.contains(&t)
    }
}

impl fmt::Display for TemplateSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.templates.iter().map(|t| t.name()).collect();
        f.write_str(&names.join(","))
    }
}

/// Bidirectional feature-name/id map. Id 0 is the OOV feature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureIndex {
    names: Vec<String>,
    ids: HashMap<String, u32>,
    min_count: usize,
    frozen: bool,
}

impl FeatureIndex {
    pub fn new(min_count: usize) -> FeatureIndex {
        let mut index = FeatureIndex { names: Vec::new(), ids: HashMap::new(), min_count, frozen: false };
        index.names.push(OOV.to_string());
        index.ids.insert(OOV.to_string(), OOV_ID);
        index
    }

    /// Rebuilds a frozen index from names in id order, as stored in model
    /// files. Returns `None` if names are duplicated or id 0 is not OOV.
    pub fn from_names(names: Vec<String>, min_count: usize) -> Option<FeatureIndex> {
        if names.first().map(String::as_str) != Some(OOV) {
            return None;
        }
        let ids: HashMap<String, u32> = names.iter().enumerate().map(|(i, n)| (n.clone(), i as u32)).collect();
        if ids.len() != names.len() {
            return None;
        }
        Some(FeatureIndex { names, ids, min_count, frozen: true })
    }

    pub fn insert(&mut self, name: &str) -> Result<u32, FeatureError> {
        if let Some(&id) = self.ids.get(name) {
            return Ok(id);
        }
        if self.frozen {
            return Err(FeatureError::IndexFrozen);
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_string());
        self.ids.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn min_count(&self) -> usize {
        self.min_count
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.ids.get(name).copied()
    }

    /// Id for `name`, falling back to OOV.
    pub fn lookup(&self, name: &str) -> u32 {
        self.get(name).unwrap_or(OOV_ID)
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        self.names.get(id as usize).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// Sparse vector with unique, ascending ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureVector {
    entries: Vec<(u32, f64)>,
}

impl FeatureVector {
    /// Builds a vector, summing values of repeated ids.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (u32, f64)>) -> FeatureVector {
        let mut merged: BTreeMap<u32, f64> = BTreeMap::new();
        for (id, v) in pairs {
            *merged.entry(id).or_insert(0.0) += v;
        }
        FeatureVector { entries: merged.into_iter().collect() }
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn max_id(&self) -> Option<u32> {
        self.entries.last().map(|e| e.0)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Dot product with one dense row.
    pub fn dot(&self, row: &[f64]) -> f64 {
        self.entries.iter().map(|&(id, v)| row[id as usize] * v).sum()
    }
}

fn prefix3(word: &str) -> String {
    word.chars().take(3).collect()
}

fn suffix3(word: &str) -> String {
    let chars: Vec<char> = word.chars().collect();
    chars[chars.len().saturating_sub(3)..].iter().collect()
}

/// Feature names firing at each token.
pub fn feature_names(sentence: &Sentence, records: &[RirRecord], templates: &TemplateSet) -> Vec<Vec<String>> {
    let tokens = sentence.tokens();
    let word = |i: usize| tokens[i].normalized.as_str();
    let n = tokens.len();
    (0..n)
        .map(|i| {
            let mut names = Vec::new();
            let prev = if i == 0 { BOS } else { word(i - 1) };
            let next = if i + 1 == n { EOS } else { word(i + 1) };
            for &t in templates.templates() {
                if t.is_rir() && !templates.use_rir() {
                    continue;
                }
                let rec = records.get(i);
                let in_span = rec.is_some_and(|r| r.gap_len.is_some());
                match t {
                    Template::W0 => names.push(format!("W0={}", word(i))),
                    Template::WPrev => names.push(format!("W-1={prev}")),
                    Template::WNext => names.push(format!("W+1={next}")),
                    Template::EqPrev => {
                        if i > 0 && !word(i).is_empty() && word(i) == word(i - 1) {
                            names.push("EQ_PREV".into());
                        }
                    }
                    Template::EqNext => {
                        if i + 1 < n && !word(i).is_empty() && word(i) == word(i + 1) {
                            names.push("EQ_NEXT".into());
                        }
                    }
                    Template::Prefix3 => names.push(format!("PREFIX3={}", prefix3(word(i)))),
                    Template::Suffix3 => names.push(format!("SUFFIX3={}", suffix3(word(i)))),
                    _ if !in_span => {}
                    Template::RirInReparandum => {
                        if rec.is_some_and(|r| r.in_reparandum) {
                            names.push("RIR_IN_REPARANDUM".into());
                        }
                    }
                    Template::RirInRepair => {
                        if rec.is_some_and(|r| r.in_repair) {
                            names.push("RIR_IN_REPAIR".into());
                        }
                    }
                    Template::RirInterregnumWord => {
                        for w in rec.into_iter().flat_map(|r| &r.interregnum_tokens) {
                            names.push(format!("RIR_INTERREGNUM_WORD={w}"));
                        }
                    }
                    Template::RirGapLen => {
                        if let Some(g) = rec.and_then(|r| r.gap_len) {
                            names.push(format!("RIR_GAP_LEN={g}"));
                        }
                    }
                    Template::RirLeftWord => {
                        if let Some(w) = rec.and_then(|r| r.left_word.as_deref()) {
                            names.push(format!("RIR_LEFT_WORD={w}"));
                        }
                    }
                    Template::RirRightWord => {
                        if let Some(w) = rec.and_then(|r| r.right_word.as_deref()) {
                            names.push(format!("RIR_RIGHT_WORD={w}"));
                        }
                    }
                }
            }
            names
        })
        .collect()
}

/// RiR records for a sentence, or empty records when the templates do not
/// use them.
pub fn rir_records(sentence: &Sentence, templates: &TemplateSet, config: &RirConfig) -> Vec<RirRecord> {
    if !templates.use_rir() {
        return vec![RirRecord::default(); sentence.len()];
    }
    let spans = find_spans(sentence, config);
    annotate_rir_features(sentence, &spans).expect("spans from find_spans are consistent")
}

/// Builds a frozen index of every feature seen at least `min_count` times,
/// ids assigned in lexicographic name order.
pub fn fit_feature_index(
    corpus: &LabeledCorpus,
    templates: &TemplateSet,
    rir: &RirConfig,
    min_count: usize,
) -> Result<FeatureIndex, FeatureError> {
    if corpus.is_empty() {
        return Err(FeatureError::EmptyCorpus);
    }
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for s in corpus.sentences() {
        let records = rir_records(s, templates, rir);
        for name in feature_names(s, &records, templates).into_iter().flatten() {
            *counts.entry(name).or_insert(0) += 1;
        }
    }
    let mut index = FeatureIndex::new(min_count);
    for (name, count) in counts {
        if count >= min_count && name != OOV {
            index.insert(&name)?;
        }
    }
    index.freeze();
    Ok(index)
}

/// One vector per token. Unknown names map to the OOV id.
pub fn extract_features(
    sentence: &Sentence,
    records: &[RirRecord],
    index: &FeatureIndex,
    templates: &TemplateSet,
) -> Result<Vec<FeatureVector>, FeatureError> {
    if !index.is_frozen() {
        return Err(FeatureError::IndexNotFrozen);
    }
    if templates.use_rir() && records.len() != sentence.len() {
        return Err(FeatureError::RecordMismatch { records: records.len(), tokens: sentence.len() });
    }
    Ok(feature_names(sentence, records, templates)
        .into_iter()
        .map(|names| FeatureVector::from_pairs(names.iter().map(|n| (index.lookup(n), 1.0))))
        .collect())
}

/// Templates plus span-detection settings: everything needed to turn a
/// sentence into feature vectors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Featurizer {
    pub templates: TemplateSet,
    pub rir: RirConfig,
}

impl Featurizer {
    pub fn new(templates: TemplateSet, rir: RirConfig) -> Featurizer {
        Featurizer { templates, rir }
    }

    pub fn fit_index(&self, corpus: &LabeledCorpus, min_count: usize) -> Result<FeatureIndex, FeatureError> {
        fit_feature_index(corpus, &self.templates, &self.rir, min_count)
    }

    pub fn features(&self, sentence: &Sentence, index: &FeatureIndex) -> Result<Vec<FeatureVector>, FeatureError> {
        let records = rir_records(sentence, &self.templates, &self.rir);
        extract_features(sentence, &records, index, &self.templates)
    }
}
