//! Layered settings: built-in defaults, then a `key = value` config file,
//! then command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use redrep_core::corpus::{Language, SplitSpec};
use redrep_core::features::TemplateSet;
use redrep_core::models::ModelKind;
use redrep_core::rir::{MatchOn, RirConfig};
use redrep_core::synth::{Lexicons, SynthConfig};
use redrep_core::TrainConfig;

use crate::CliError;

pub const CONFIG_ENV: &str = "REDREP_CONFIG";

/// Keys with a default value. Path keys (`paths.*`) and lexicon files have
/// none and only appear in the effective config when set.
fn defaults() -> BTreeMap<String, String> {
    let synth = SynthConfig::default();
    let train = TrainConfig::default();
    let rir = RirConfig::default();
    let pairs: Vec<(&str, String)> = vec![
        ("seed", "0".into()),
        ("synth.n", synth.n_sentences.to_string()),
        ("synth.min_len", synth.length_range.0.to_string()),
        ("synth.max_len", synth.length_range.1.to_string()),
        ("synth.p_redup", synth.p_redup.to_string()),
        ("synth.p_rep", synth.p_rep.to_string()),
        ("synth.p_other", synth.p_other.to_string()),
        ("synth.p_interregnum", synth.p_interregnum.to_string()),
        ("synth.p_confusion", synth.p_confusion.to_string()),
        ("synth.language", synth.language.to_string()),
        ("split.ratios", "0.8,0.1,0.1".into()),
        ("split.stratify", "true".into()),
        ("rir.max_interregnum_len", rir.max_interregnum_len.to_string()),
        ("rir.max_phrase_len", rir.max_phrase_len.to_string()),
        ("rir.match_on", rir.match_on.as_str().into()),
        ("features.templates", TemplateSet::standard(false).to_string()),
        ("features.rir", "on".into()),
        ("features.min_count", "1".into()),
        ("train.model", "crf".into()),
        ("train.epochs", train.epochs.to_string()),
        ("train.batch_size", train.batch_size.to_string()),
        ("train.learning_rate", train.learning_rate.to_string()),
        ("train.l2", train.l2.to_string()),
        ("train.shuffle", train.shuffle.to_string()),
        ("eval.runs", "1".into()),
    ];
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

const OPTIONAL_KEYS: &[&str] = &[
    "synth.lexicon.general",
    "synth.lexicon.reduplicable",
    "synth.lexicon.interregnum",
    "synth.lexicon.other",
    "paths.input",
    "paths.train",
    "paths.test",
    "paths.gold",
    "paths.pred",
    "paths.model",
    "paths.out",
    "paths.out_dir",
    "paths.trace",
    "paths.report",
    "paths.lexicon",
    "verify.language",
    "verify.split",
];

fn is_known(key: &str) -> bool {
    OPTIONAL_KEYS.contains(&key) || defaults().contains_key(key)
}

/// Parses `key = value` lines. Blank lines and lines starting with `#` are
/// ignored.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected `key = value`", n + 1)))?;
        let key = key.trim();
        if !is_known(key) {
            return Err(CliError::Usage(format!("config line {}: unknown key {key:?}", n + 1)));
        }
        out.insert(key.to_string(), value.trim().to_string());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    /// Defaults overlaid with the config file (explicit path, else the
    /// `REDREP_CONFIG` variable) and then with the given flag values.
    pub fn load(
        config_path: Option<&Path>,
        flags: impl IntoIterator<Item = (&'static str, Option<String>)>,
    ) -> Result<Settings, CliError> {
        let env_path = std::env::var_os(CONFIG_ENV).filter(|p| !p.is_empty()).map(PathBuf::from);
        let mut settings = Settings { values: defaults() };
        if let Some(path) = config_path.map(Path::to_path_buf).or(env_path) {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
            settings.values.extend(parse_config_text(&text)?);
        }
        for (key, value) in flags {
            debug_assert!(is_known(key), "{key}");
            if let Some(v) = value {
                settings.values.insert(key.to_string(), v);
            }
        }
        Ok(settings)
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Settings, CliError> {
        let mut settings = Settings { values: defaults() };
        for (k, v) in pairs {
            if !is_known(k) {
                return Err(CliError::Usage(format!("unknown key {k:?}")));
            }
            settings.values.insert(k.to_string(), v.to_string());
        }
        Ok(settings)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.values.insert(key.to_string(), value.into());
    }

    /// The effective configuration, echoed into reports.
    pub fn effective(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    /// Effective entries under the given prefixes, plus `seed`.
    pub fn provenance(&self, prefixes: &[&str]) -> BTreeMap<String, String> {
        self.values
            .iter()
            .filter(|(k, _)| k.as_str() == "seed" || prefixes.iter().any(|p| k.starts_with(p)))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, CliError> {
        let raw = self.raw(key).ok_or_else(|| CliError::Usage(format!("missing value for {key}")))?;
        raw.parse().map_err(|_| CliError::Usage(format!("invalid value {raw:?} for {key}")))
    }

    pub fn flag(&self, key: &str) -> Result<bool, CliError> {
        match self.raw(key) {
            Some("true" | "on" | "yes" | "1") => Ok(true),
            Some("false" | "off" | "no" | "0") => Ok(false),
            Some(other) => Err(CliError::Usage(format!("invalid value {other:?} for {key}, expected on or off"))),
            None => Err(CliError::Usage(format!("missing value for {key}"))),
        }
    }

    pub fn path(&self, key: &str) -> Result<PathBuf, CliError> {
        self.opt_path(key)?.ok_or_else(|| {
            let flag = key.trim_start_matches("paths.").replace('_', "-");
            CliError::Usage(format!("--{flag} is required (or set {key} in the config file)"))
        })
    }

    pub fn opt_path(&self, key: &str) -> Result<Option<PathBuf>, CliError> {
        Ok(self.raw(key).filter(|p| !p.is_empty()).map(PathBuf::from))
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        self.get("seed")
    }

    pub fn rir(&self) -> Result<RirConfig, CliError> {
        let match_on: MatchOn = self.get("rir.match_on")?;
        Ok(RirConfig {
            max_interregnum_len: self.get("rir.max_interregnum_len")?,
            max_phrase_len: self.get("rir.max_phrase_len")?,
            match_on,
        })
    }

    pub fn templates(&self) -> Result<TemplateSet, CliError> {
        let raw = self.raw("features.templates").unwrap_or_default();
        let set = TemplateSet::parse(raw).map_err(|e| CliError::Usage(format!("features.templates: {e}")))?;
        Ok(set.with_rir(self.flag("features.rir")?))
    }

    pub fn model_kind(&self) -> Result<ModelKind, CliError> {
        let raw = self.raw("train.model").unwrap_or_default();
        raw.parse().map_err(|e: String| CliError::Usage(format!("train.model: {e}")))
    }

    pub fn train_config(&self, seed: u64) -> Result<TrainConfig, CliError> {
        let config = TrainConfig {
            epochs: self.get("train.epochs")?,
            batch_size: self.get("train.batch_size")?,
            learning_rate: self.get("train.learning_rate")?,
            l2: self.get("train.l2")?,
            seed,
            shuffle: self.flag("train.shuffle")?,
        };
        config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(config)
    }

    pub fn split_spec(&self) -> Result<SplitSpec, CliError> {
        let raw = self.raw("split.ratios").unwrap_or_default();
        let parts: Vec<f64> = raw
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| CliError::Usage(format!("invalid split.ratios {raw:?}")))?;
        let ratios: [f64; 3] =
            parts.try_into().map_err(|_| CliError::Usage(format!("split.ratios needs three values, got {raw:?}")))?;
        SplitSpec::new(ratios, self.seed()?, self.flag("split.stratify")?).map_err(|e| CliError::Usage(e.to_string()))
    }

    pub fn synth_config(&self) -> Result<SynthConfig, CliError> {
        let mut lexicons = Lexicons::default();
        for (key, slot) in [
            ("synth.lexicon.general", &mut lexicons.general),
            ("synth.lexicon.reduplicable", &mut lexicons.reduplicable),
            ("synth.lexicon.interregnum", &mut lexicons.interregnum),
            ("synth.lexicon.other", &mut lexicons.other),
        ] {
            if let Some(path) = self.opt_path(key)? {
                *slot = read_word_list(&path)?;
            }
        }
        let config = SynthConfig {
            seed: self.seed()?,
            n_sentences: self.get("synth.n")?,
            length_range: (self.get("synth.min_len")?, self.get("synth.max_len")?),
            p_redup: self.get("synth.p_redup")?,
            p_rep: self.get("synth.p_rep")?,
            p_other: self.get("synth.p_other")?,
            p_interregnum: self.get("synth.p_interregnum")?,
            p_confusion: self.get("synth.p_confusion")?,
            language: Language::from_tag(self.raw("synth.language").unwrap_or_default()),
            lexicons,
        };
        config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(config)
    }
}

/// One word per line; blank lines and `#` comments are skipped.
pub fn read_word_list(path: &Path) -> Result<Vec<String>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}
