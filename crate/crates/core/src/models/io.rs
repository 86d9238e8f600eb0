//! Plain-text model files.
//!
//! ```text
//! redrep-model v1 <kind>
//! labels reduplication repetition other O
//! templates <comma-separated names>
//! use_rir <true|false>
//! rir <max_interregnum_len> <max_phrase_len> <normalized|surface>
//! features <count> <min_count>
//! <id>\t<name>            (count lines, ids 0..count)
//! params <count>
//! <value>                 (count lines, shortest round-trip decimal)
//! end
//! ```

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use super::{CrfModel, LogRegModel, ModelError};
use crate::corpus::Label;
use crate::features::{FeatureIndex, Featurizer, Template, TemplateSet};
use crate::rir::RirConfig;

pub const FORMAT_VERSION: &str = "v1";
const MAGIC: &str = "redrep-model";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    LogReg,
    Crf,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::LogReg => "logreg",
            ModelKind::Crf => "crf",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "logreg" => Ok(ModelKind::LogReg),
            "crf" => Ok(ModelKind::Crf),
            other => Err(format!("unknown model kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    LogReg(LogRegModel),
    Crf(CrfModel),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::LogReg(_) => ModelKind::LogReg,
            Model::Crf(_) => ModelKind::Crf,
        }
    }

    pub fn params(&self) -> &[f64] {
        match self {
            Model::LogReg(m) => m.weights(),
            Model::Crf(m) => m.params(),
        }
    }
}

/// A trained model together with everything needed to featurize input.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub model: Model,
    pub index: FeatureIndex,
    pub featurizer: Featurizer,
}

pub fn model_to_text(bundle: &ModelBundle) -> String {
    let mut out = String::new();
    let fz = &bundle.featurizer;
    let labels: Vec<&str> = Label::ALL.iter().map(|l| l.as_str()).collect();
    let _ = writeln!(out, "{MAGIC} {FORMAT_VERSION} {}", bundle.model.kind());
    let _ = writeln!(out, "labels {}", labels.join(" "));
    let _ = writeln!(out, "templates {}", fz.templates);
    let _ = writeln!(out, "use_rir {}", fz.templates.use_rir());
    let _ = writeln!(
        out,
        "rir {} {} {}",
        fz.rir.max_interregnum_len,
        fz.rir.max_phrase_len,
        fz.rir.match_on.as_str()
    );
    let _ = writeln!(out, "features {} {}", bundle.index.len(), bundle.index.min_count());
    for (id, name) in bundle.index.names().iter().enumerate() {
        let _ = writeln!(out, "{id}\t{name}");
    }
    let params = bundle.model.params();
    let _ = writeln!(out, "params {}", params.len());
    for p in params {
        // Debug formatting is the shortest representation that round-trips.
        let _ = writeln!(out, "{p:?}");
    }
    out.push_str("end\n");
    out
}

struct Lines<'a> {
    inner: std::str::Lines<'a>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self, what: &str) -> Result<&'a str, ModelError> {
        self.line += 1;
        self.inner
            .next()
            .ok_or_else(|| ModelError::CorruptFile(format!("unexpected end of file, expected {what}")))
    }

    fn keyed(&mut self, key: &str) -> Result<&'a str, ModelError> {
        let line = self.next(key)?;
        line.strip_prefix(key)
            .and_then(|rest| rest.strip_prefix(' ').or((rest.is_empty()).then_some("")))
            .ok_or_else(|| self.corrupt(format!("expected {key:?}")))
    }

    fn corrupt(&self, msg: impl fmt::Display) -> ModelError {
        ModelError::CorruptFile(format!("line {}: {msg}", self.line))
    }
}

fn parse_num<T: FromStr>(lines: &Lines<'_>, s: &str) -> Result<T, ModelError> {
    s.parse().map_err(|_| lines.corrupt(format!("bad number {s:?}")))
}

pub fn model_from_text(text: &str) -> Result<ModelBundle, ModelError> {
    let mut lines = Lines { inner: text.lines(), line: 0 };

    let header: Vec<&str> = lines.next("header")?.split(' ').collect();
    if header.first() != Some(&MAGIC) {
        return Err(lines.corrupt("not a model file"));
    }
    match header.get(1) {
        Some(&FORMAT_VERSION) => {}
        Some(v) => return Err(ModelError::UnsupportedVersion(v.to_string())),
        None => return Err(lines.corrupt("missing version")),
    }
    let kind: ModelKind = header
        .get(2)
        .ok_or_else(|| lines.corrupt("missing model kind"))?
        .parse()
        .map_err(|e| lines.corrupt(e))?;

    let labels: Vec<&str> = lines.keyed("labels")?.split(' ').collect();
    let expected: Vec<&str> = Label::ALL.iter().map(|l| l.as_str()).collect();
    if labels != expected {
        return Err(lines.corrupt("label order differs"));
    }

    let templates = lines
        .keyed("templates")?
        .split(',')
        .filter(|s| !s.is_empty())
        .map(str::parse::<Template>)
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| lines.corrupt(e))?;
    let use_rir = lines.keyed("use_rir")?;
    let use_rir: bool = parse_num(&lines, use_rir)?;
    let templates = TemplateSet::new(templates, use_rir).map_err(|e| lines.corrupt(e))?;

    let rir_fields: Vec<&str> = lines.keyed("rir")?.split(' ').collect();
    let [gap, phrase, match_on] = rir_fields.as_slice() else {
        return Err(lines.corrupt("rir line needs three fields"));
    };
    let rir = RirConfig {
        max_interregnum_len: parse_num(&lines, gap)?,
        max_phrase_len: parse_num(&lines, phrase)?,
        match_on: match_on.parse().map_err(|e| lines.corrupt(e))?,
    };

    let feature_fields: Vec<&str> = lines.keyed("features")?.split(' ').collect();
    let [count, min_count] = feature_fields.as_slice() else {
        return Err(lines.corrupt("features line needs two fields"));
    };
    let count: usize = parse_num(&lines, count)?;
    let min_count: usize = parse_num(&lines, min_count)?;
    let mut names = Vec::with_capacity(count.min(1 << 16));
    for id in 0..count {
        let line = lines.next("feature")?;
        let (line_id, name) = line.split_once('\t').ok_or_else(|| lines.corrupt("bad feature line"))?;
        if parse_num::<usize>(&lines, line_id)? != id {
            return Err(lines.corrupt("feature ids out of order"));
        }
        names.push(name.to_string());
    }
    let index = FeatureIndex::from_names(names, min_count).ok_or_else(|| lines.corrupt("invalid feature index"))?;

    let num_params = lines.keyed("params")?;
    let num_params: usize = parse_num(&lines, num_params)?;
    let mut params = Vec::with_capacity(num_params.min(1 << 20));
    for _ in 0..num_params {
        let raw = lines.next("parameter")?;
        let v: f64 = parse_num(&lines, raw)?;
        if !v.is_finite() {
            return Err(lines.corrupt("non-finite parameter"));
        }
        params.push(v);
    }
    if lines.next("end")? != "end" {
        return Err(lines.corrupt("missing end marker"));
    }

    let model = match kind {
        ModelKind::LogReg => LogRegModel::from_weights(index.len(), params).map(Model::LogReg),
        ModelKind::Crf => CrfModel::from_params(index.len(), params).map(Model::Crf),
    }
    .map_err(|e| lines.corrupt(e))?;

    Ok(ModelBundle { model, index, featurizer: Featurizer::new(templates, rir) })
}

pub fn save_model(bundle: &ModelBundle, path: impl AsRef<Path>) -> Result<(), ModelError> {
    std::fs::write(path, model_to_text(bundle))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelBundle, ModelError> {
    let bytes = std::fs::read(path)?;
    let text = String::from_utf8(bytes).map_err(|_| ModelError::CorruptFile("not UTF-8".into()))?;
    model_from_text(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bundle(kind: ModelKind) -> ModelBundle {
        let mut index = FeatureIndex::new(1);
        for name in ["EQ_NEXT", "W0=bohot", "W0=शुक्रिया"] {
            index.insert(name).unwrap();
        }
        index.freeze();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = match kind {
            ModelKind::LogReg => {
                let w = (0..16).map(|_| rng.random_range(-1.0..1.0) * 1e-7).collect();
                Model::LogReg(LogRegModel::from_weights(4, w).unwrap())
            }
            ModelKind::Crf => {
                let p = (0..CrfModel::num_params_for(4)).map(|_| rng.random::<f64>() * 3.0 - 1.0).collect();
                Model::Crf(CrfModel::from_params(4, p).unwrap())
            }
        };
        ModelBundle { model, index, featurizer: Featurizer::new(TemplateSet::standard(true), RirConfig::default()) }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for kind in [ModelKind::LogReg, ModelKind::Crf] {
            let b = bundle(kind);
            let text = model_to_text(&b);
            assert!(text.starts_with(&format!("redrep-model v1 {kind}\n")));
            let back = model_from_text(&text).unwrap();
            let bits = |m: &Model| m.params().iter().map(|p| p.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&back.model), bits(&b.model));
            assert_eq!(back, b);
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.rr");
        let b = bundle(ModelKind::Crf);
        save_model(&b, &path).unwrap();
        assert_eq!(load_model(&path).unwrap(), b);
    }

    #[test]
    fn unsupported_version() {
        let text = model_to_text(&bundle(ModelKind::Crf)).replacen("v1", "v999", 1);
        assert!(matches!(model_from_text(&text), Err(ModelError::UnsupportedVersion(v)) if v == "v999"));
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let text = model_to_text(&bundle(ModelKind::Crf));
        for cut in [text.len() / 3, text.len() / 2, text.len() - 5] {
            let truncated = &text[..text.floor_char_boundary_compat(cut)];
            assert!(matches!(model_from_text(truncated), Err(ModelError::CorruptFile(_))), "cut at {cut}");
        }
        assert!(matches!(model_from_text(""), Err(ModelError::CorruptFile(_))));
        assert!(matches!(model_from_text("hello\n"), Err(ModelError::CorruptFile(_))));
    }

    #[test]
    fn tampered_label_order_is_corrupt() {
        let text = model_to_text(&bundle(ModelKind::LogReg)).replace("repetition other", "other repetition");
        assert!(matches!(model_from_text(&text), Err(ModelError::CorruptFile(_))));
    }

    trait FloorBoundary {
        fn floor_char_boundary_compat(&self, i: usize) -> usize;
    }

    impl FloorBoundary for String {
        fn floor_char_boundary_compat(&self, mut i: usize) -> usize {
            while !self.is_char_boundary(i) {
                i -= 1;
            }
            i
        }
    }
}
