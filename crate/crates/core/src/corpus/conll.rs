use std::fmt::Write;

use super::{CorpusError, Label, LabeledCorpus, Language, Sentence, Token};

const ID_PREFIX: &str = "# id = ";
const LANG_PREFIX: &str = "# lang = ";

#[derive(Default)]
struct Block {
    id: Option<String>,
    language: Option<Language>,
    words: Vec<String>,
    labels: Vec<Label>,
}

impl Block {
    fn finish(self, ordinal: usize) -> Result<Option<Sentence>, CorpusError> {
        if self.words.is_empty() {
            return Ok(None);
        }
        let labels = if self.labels.is_empty() { None } else { Some(self.labels) };
        let id = self.id.unwrap_or_else(|| format!("s{ordinal}"));
        let tokens = self.words.into_iter().enumerate().map(|(i, w)| Token::new(w, i)).collect();
        Sentence::new(id, self.language.unwrap_or_default(), tokens, labels).map(Some)
    }
}

/// Parses a `token<TAB>label` document with blank lines between sentences.
pub fn parse_conll(text: &str) -> Result<LabeledCorpus, CorpusError> {
    let mut sentences = Vec::new();
    let mut block = Block::default();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        if raw.trim().is_empty() {
            let done = std::mem::take(&mut block);
            if let Some(s) = done.finish(sentences.len() + 1)? {
                sentences.push(s);
            }
            continue;
        }
        if let Some(id) = raw.strip_prefix(ID_PREFIX) {
            block.id = Some(id.trim().to_string());
            continue;
        }
        if let Some(lang) = raw.strip_prefix(LANG_PREFIX) {
            block.language = Some(Language::from_tag(lang.trim()));
            continue;
        }
        if raw.starts_with("# ") {
            continue;
        }

        let fields: Vec<&str> = raw.split('\t').collect();
        let malformed = || CorpusError::MalformedLine { line: line_no, content: raw.to_string() };
        let (word, label) = match fields.as_slice() {
            [word] => (*word, None),
            [word, label] => (*word, Some(*label)),
            _ => return Err(malformed()),
        };
        if word.is_empty() || word.chars().any(char::is_whitespace) {
            return Err(malformed());
        }
        let label = label
            .map(|l| {
                l.parse::<Label>()
                    .map_err(|label| CorpusError::UnknownLabel { line: line_no, label })
            })
            .transpose()?;

        if !block.words.is_empty() && label.is_some() == block.labels.is_empty() {
            return Err(CorpusError::MixedLabeling { line: line_no });
        }
        block.words.push(word.to_string());
        if let Some(label) = label {
            block.labels.push(label);
        }
    }
    if let Some(s) = block.finish(sentences.len() + 1)? {
        sentences.push(s);
    }

    if sentences.is_empty() {
        return Err(CorpusError::EmptyDocument);
    }
    Ok(LabeledCorpus::new(sentences))
}

/// Serializes a corpus; unlabeled sentences are written as bare tokens.
pub fn write_conll(corpus: &LabeledCorpus) -> String {
    let mut out = String::new();
    for s in corpus.sentences() {
        let _ = writeln!(out, "{ID_PREFIX}{}", s.id());
        let _ = writeln!(out, "{LANG_PREFIX}{}", s.language());
        match s.labels() {
            Some(labels) => {
                for (t, l) in s.tokens().iter().zip(labels) {
                    let _ = writeln!(out, "{}\t{}", t.surface, l);
                }
            }
            None => {
                for t in s.tokens() {
                    let _ = writeln!(out, "{}", t.surface);
                }
            }
        }
        out.push('\n');
    }
    out
}
