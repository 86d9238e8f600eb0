//! Seeded template generator for labeled corpora.
//!
//! Every sentence starts as distinct words from the general lexicon. Four
//! independent injections may then be inserted as contiguous segments:
//!
//! * reduplication: `r r`, both REDUP, `r` from the reduplicable lexicon
//! * repetition: `w w` or `w i w`, copies REP, `w` from the general lexicon
//!   and `i` from the interregnum lexicon
//! * other: `x x`, both OTHER, `x` a number or abbreviation
//! * chain: `c i c c` labeled REP, O, REP, REDUP (`c` reduplicable)
//!
//! Words never repeat across segments, so the only duplications in a
//! sentence are the injected ones.

use std::collections::HashSet;
use std::fmt;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::{Label, LabeledCorpus, Language, Sentence};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicons {
    pub general: Vec<String>,
    pub reduplicable: Vec<String>,
    pub interregnum: Vec<String>,
    pub other: Vec<String>,
}

fn words(list: &[&str]) -> Vec<String> {
    list.iter().map(|w| w.to_string()).collect()
}

impl Default for Lexicons {
    fn default() -> Self {
        Lexicons {
            general: words(&[
                "main", "tum", "vah", "ghar", "school", "kitab", "paani", "khana", "dost", "bazaar", "gaadi", "sadak",
                "kaam", "din", "raat", "subah", "shaam", "log", "bachche", "maa", "pita", "bhai", "behen", "shahar",
                "gaon", "khet", "phool", "ped", "aasmaan", "suraj", "chaand", "baarish", "hawa", "kapde", "doodh",
                "chai", "roti", "sabzi", "daftar", "kursi", "mez", "darwaza", "khidki", "kamra", "rasta", "nadi",
                "pahad", "mandir", "station", "train", "bus", "paisa", "dukaan", "kahani", "gaana", "khel", "samay",
                "saal", "mahina", "hafta",
            ]),
            reduplicable: words(&[
                "bohot", "jaldi", "dheere", "garam", "thanda", "thoda", "kabhi", "alag", "chhote", "bade", "neela",
                "laal", "meetha", "saaf", "accha", "zor",
            ]),
            interregnum: words(&["nahi", "matlab", "haan", "umm", "arey", "yaani"]),
            other: words(&["ek", "do", "teen", "chaar", "paanch", "nau", "das", "sau", "bi", "ji", "em", "es"]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_sentences: usize,
    /// Inclusive bounds on the number of general words per sentence.
    pub length_range: (usize, usize),
    pub p_redup: f64,
    pub p_rep: f64,
    pub p_other: f64,
    pub p_interregnum: f64,
    pub p_confusion: f64,
    pub language: Language,
    pub lexicons: Lexicons,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            n_sentences: 1000,
            length_range: (6, 14),
            p_redup: 0.3,
            p_rep: 0.3,
            p_other: 0.1,
            p_interregnum: 0.5,
            p_confusion: 0.1,
            language: Language::Hi,
            lexicons: Lexicons::default(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |msg: String| Err(SynthError::InvalidConfig(msg));
        for (name, p) in [
            ("p_redup", self.p_redup),
            ("p_rep", self.p_rep),
            ("p_other", self.p_other),
            ("p_interregnum", self.p_interregnum),
            ("p_confusion", self.p_confusion),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is outside [0, 1]"));
            }
        }
        let (lo, hi) = self.length_range;
        if lo > hi {
            return bad(format!("length range {lo}..={hi} is empty"));
        }
        let lex = &self.lexicons;
        let lists = [
            ("general", &lex.general),
            ("reduplicable", &lex.reduplicable),
            ("interregnum", &lex.interregnum),
            ("other", &lex.other),
        ];
        let mut seen = HashSet::new();
        for (name, list) in lists {
            if let Some(w) = list.iter().find(|w| w.is_empty() || w.chars().any(char::is_whitespace)) {
                return bad(format!("{name} lexicon word {w:?} is empty or contains whitespace"));
            }
            let own: HashSet<&String> = list.iter().collect();
            if own.len() != list.len() {
                return bad(format!("{name} lexicon has duplicate words"));
            }
            if let Some(w) = list.iter().find(|w| seen.contains(*w)) {
                return bad(format!("word {w:?} appears in more than one lexicon"));
            }
            seen.extend(list.iter().cloned());
        }
        if lex.general.len() < hi + 1 {
            return bad(format!("general lexicon needs at least {} words", hi + 1));
        }
        if lex.reduplicable.len() < 2 {
            return bad("reduplicable lexicon needs at least 2 words".into());
        }
        if (self.p_rep * self.p_interregnum > 0.0 || self.p_confusion > 0.0) && lex.interregnum.len() < 2 {
            return bad("interregnum lexicon needs at least 2 words".into());
        }
        if self.p_other > 0.0 && lex.other.is_empty() {
            return bad("other lexicon is empty".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InjectionKind {
    Reduplication,
    Repetition,
    RepetitionWithInterregnum,
    Other,
    Chain,
}

impl InjectionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            InjectionKind::Reduplication => "reduplication",
            InjectionKind::Repetition => "repetition",
            InjectionKind::RepetitionWithInterregnum => "repetition+interregnum",
            InjectionKind::Other => "other",
            InjectionKind::Chain => "chain",
        }
    }

    /// Labels of the segment, token by token.
    pub fn labels(self) -> &'static [Label] {
        match self {
            InjectionKind::Reduplication => &[Label::Redup, Label::Redup],
            InjectionKind::Repetition => &[Label::Rep, Label::Rep],
            InjectionKind::RepetitionWithInterregnum => &[Label::Rep, Label::O, Label::Rep],
            InjectionKind::Other => &[Label::Other, Label::Other],
            InjectionKind::Chain => &[Label::Rep, Label::O, Label::Rep, Label::Redup],
        }
    }
}

impl fmt::Display for InjectionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Injection {
    pub kind: InjectionKind,
    /// Token indices of the whole segment, ascending and contiguous.
    pub indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceTrace {
    pub sentence_id: String,
    pub injections: Vec<Injection>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GenerationTrace {
    pub sentences: Vec<SentenceTrace>,
}

impl GenerationTrace {
    /// One line per injection: `sentence_id<TAB>kind<TAB>i,j,k`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for s in &self.sentences {
            for inj in &s.injections {
                let idx: Vec<String> = inj.indices.iter().map(usize::to_string).collect();
                out.push_str(&format!("{}\t{}\t{}\n", s.sentence_id, inj.kind, idx.join(",")));
            }
        }
        out
    }

    /// True when the recorded injections reproduce every label of the corpus,
    /// with O everywhere else.
    pub fn explains(&self, corpus: &LabeledCorpus) -> bool {
        if self.sentences.len() != corpus.len() {
            return false;
        }
        corpus.sentences().iter().zip(&self.sentences).all(|(s, t)| {
            let Some(labels) = s.labels() else { return false };
            let mut expected = vec![Label::O; s.len()];
            for inj in &t.injections {
                for (&i, &l) in inj.indices.iter().zip(inj.kind.labels()) {
                    match expected.get_mut(i) {
                        Some(slot) => *slot = l,
                        None => return false,
                    }
                }
            }
            s.id() == t.sentence_id && expected == labels
        })
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed for sentence `i`, so each sentence is generated independently of
/// the others.
fn sentence_seed(seed: u64, i: usize) -> u64 {
    splitmix64(seed ^ splitmix64(i as u64))
}

struct Picker<'a> {
    used: HashSet<&'a str>,
}

impl<'a> Picker<'a> {
    fn pick(&mut self, rng: &mut ChaCha8Rng, list: &'a [String]) -> &'a str {
        let free: Vec<&'a str> = list.iter().map(String::as_str).filter(|w| !self.used.contains(w)).collect();
        let w = *free.choose(rng).expect("lexicon sizes are validated");
        self.used.insert(w);
        w
    }
}

fn generate_sentence(config: &SynthConfig, i: usize) -> (Sentence, SentenceTrace) {
    let mut rng = ChaCha8Rng::seed_from_u64(sentence_seed(config.seed, i));
    let lex = &config.lexicons;
    let (lo, hi) = config.length_range;
    let len = rng.random_range(lo..=hi);

    let fire_redup = rng.random_bool(config.p_redup);
    let fire_rep = rng.random_bool(config.p_rep);
    let with_interregnum = rng.random_bool(config.p_interregnum);
    let fire_other = rng.random_bool(config.p_other);
    let fire_chain = rng.random_bool(config.p_confusion);

    let mut picker = Picker { used: HashSet::new() };
    let mut units: Vec<(Vec<&str>, Option<InjectionKind>)> = Vec::new();
    for _ in 0..len {
        units.push((vec![picker.pick(&mut rng, &lex.general)], None));
    }

    let mut segments: Vec<(Vec<&str>, InjectionKind)> = Vec::new();
    if fire_redup {
        let r = picker.pick(&mut rng, &lex.reduplicable);
        segments.push((vec![r, r], InjectionKind::Reduplication));
    }
    if fire_rep {
        let w = picker.pick(&mut rng, &lex.general);
        if with_interregnum {
            let int = picker.pick(&mut rng, &lex.interregnum);
            segments.push((vec![w, int, w], InjectionKind::RepetitionWithInterregnum));
        } else {
            segments.push((vec![w, w], InjectionKind::Repetition));
        }
    }
    if fire_other {
        let x = picker.pick(&mut rng, &lex.other);
        segments.push((vec![x, x], InjectionKind::Other));
    }
    if fire_chain {
        let c = picker.pick(&mut rng, &lex.reduplicable);
        let int = picker.pick(&mut rng, &lex.interregnum);
        segments.push((vec![c, int, c, c], InjectionKind::Chain));
    }
    segments.shuffle(&mut rng);
    for (words, kind) in segments {
        let at = rng.random_range(0..=units.len());
        units.insert(at, (words, Some(kind)));
    }

    let id = format!("synth-{i:06}");
    let mut tokens = Vec::new();
    let mut labels = Vec::new();
    let mut injections = Vec::new();
    for (words, kind) in units {
        let start = tokens.len();
        tokens.extend(words.iter().copied());
        match kind {
            Some(kind) => {
                labels.extend_from_slice(kind.labels());
                injections.push(Injection { kind, indices: (start..tokens.len()).collect() });
            }
            None => labels.extend(std::iter::repeat_n(Label::O, words.len())),
        }
    }
    let sentence = Sentence::from_words(id.clone(), config.language, &tokens, Some(labels))
        .expect("generated sentences are non-empty and aligned");
    (sentence, SentenceTrace { sentence_id: id, injections })
}

/// Generates `n_sentences` labeled sentences. Output depends only on the
/// config.
pub fn generate_corpus(config: &SynthConfig) -> Result<(LabeledCorpus, GenerationTrace), SynthError> {
    config.validate()?;
    let (sentences, traces): (Vec<_>, Vec<_>) = (0..config.n_sentences).map(|i| generate_sentence(config, i)).unzip();
    Ok((LabeledCorpus::new(sentences), GenerationTrace { sentences: traces }))
}

/// Expected count and standard deviation of a label total.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Expectation {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedCounts {
    pub redup: Expectation,
    pub rep: Expectation,
    pub other: Expectation,
    pub o: Expectation,
}

impl ExpectedCounts {
    pub fn get(&self, label: Label) -> Expectation {
        match label {
            Label::Redup => self.redup,
            Label::Rep => self.rep,
            Label::Other => self.other,
            Label::O => self.o,
        }
    }
}

/// Analytic label-token totals. Each sentence contributes a sum of
/// independent Bernoulli terms, scaled by the number of tokens an injection
/// adds to the label; the O total also carries the variance of the uniform
/// base length.
pub fn expected_counts(config: &SynthConfig) -> ExpectedCounts {
    let n = config.n_sentences as f64;
    let bern = |p: f64| p * (1.0 - p);
    let (pr, pp, po, pc) = (config.p_redup, config.p_rep, config.p_other, config.p_confusion);
    let q = config.p_rep * config.p_interregnum;
    let (lo, hi) = config.length_range;
    let width = (hi - lo + 1) as f64;
    let len_mean = (lo + hi) as f64 / 2.0;
    let len_var = (width * width - 1.0) / 12.0;

    let e = |mean: f64, var: f64| Expectation { mean: n * mean, sd: (n * var).sqrt() };
    ExpectedCounts {
        redup: e(2.0 * pr + pc, 4.0 * bern(pr) + bern(pc)),
        rep: e(2.0 * pp + 2.0 * pc, 4.0 * bern(pp) + 4.0 * bern(pc)),
        other: e(2.0 * po, 4.0 * bern(po)),
        o: e(len_mean + q + pc, len_var + bern(q) + bern(pc)),
    }
}
