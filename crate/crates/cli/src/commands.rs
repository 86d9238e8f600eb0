use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use serde_json::{json, Map, Value};

use redrep_core::corpus::fixtures::{label_totals, split_size, Split};
use redrep_core::corpus::{
    parse_conll, stratified_split, verify_statistics, write_conll, ExpectedCount, Label, LabeledCorpus, Language,
    Metric,
};
use redrep_core::eval::{build_confusion, compute_metrics, fleiss_kappa, multi_run, AgreementTable, EvalError, Metrics, RunSummary};
use redrep_core::features::{FeatureError, Featurizer};
use redrep_core::models::{load_model, save_model, ModelBundle, ModelError};
use redrep_core::pipeline::{self, PipelineError};
use redrep_core::rir::{find_spans, heuristic_classify};
use redrep_core::synth::{expected_counts, generate_corpus, Lexicons};

use crate::config::{read_word_list, Settings};
use crate::CliError;

const TRAINING_KEYS: &[&str] = &["features.", "rir.", "train.", "eval.", "paths."];

fn data_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

fn io_out(e: std::io::Error) -> CliError {
    CliError::Data(format!("cannot write output: {e}"))
}

fn read_corpus(path: &Path) -> Result<LabeledCorpus, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| data_err(path, e))?;
    parse_conll(&text).map_err(|e| data_err(path, e))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| data_err(path, e))
}

fn write_json(path: &Path, value: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    text.push('\n');
    write_file(path, &text)
}

fn pipeline_err(e: PipelineError) -> CliError {
    match e {
        PipelineError::Unlabeled(_)
        | PipelineError::Feature(FeatureError::EmptyCorpus)
        | PipelineError::Model(ModelError::EmptyData | ModelError::EmptySequence)
        | PipelineError::Eval(EvalError::ShapeMismatch(..)) => CliError::Data(e.to_string()),
        PipelineError::Model(ModelError::InvalidConfig(_)) => CliError::Usage(e.to_string()),
        other => CliError::Internal(other.to_string()),
    }
}

fn eval_err(e: EvalError) -> CliError {
    match e {
        EvalError::RunFailed { run, seed, source } => {
            let msg = format!("run {run} (seed {seed}): {source}");
            match source.downcast_ref::<CliError>() {
                Some(CliError::Usage(_)) => CliError::Usage(msg),
                Some(CliError::Data(_)) => CliError::Data(msg),
                _ => CliError::Internal(msg),
            }
        }
        EvalError::NoRuns => CliError::Usage(e.to_string()),
        other => CliError::Data(other.to_string()),
    }
}

fn load_bundle(path: &Path) -> Result<ModelBundle, CliError> {
    load_model(path).map_err(|e| data_err(path, e))
}

fn featurizer(settings: &Settings) -> Result<Featurizer, CliError> {
    Ok(Featurizer::new(settings.templates()?, settings.rir()?))
}

pub fn synth(settings: &Settings, out: &mut dyn Write) -> Result<(), CliError> {
    let config = settings.synth_config()?;
    let target = settings.path("paths.out")?;
    let (corpus, trace) = generate_corpus(&config).map_err(|e| CliError::Usage(e.to_string()))?;
    write_file(&target, &write_conll(&corpus))?;
    if let Some(path) = settings.opt_path("paths.trace")? {
        write_file(&path, &trace.to_tsv())?;
    }
    let stats = corpus.stats();
    let expected = expected_counts(&config);
    writeln!(out, "sentences {} words {}", stats.sentences, stats.words).map_err(io_out)?;
    writeln!(out, "{:<14} {:>8} {:>10} {:>8}", "label", "observed", "expected", "sd").map_err(io_out)?;
    for l in Label::ALL {
        let e = expected.get(l);
        writeln!(out, "{:<14} {:>8} {:>10.1} {:>8.2}", l.as_str(), stats.label_count(l), e.mean, e.sd)
            .map_err(io_out)?;
    }
    Ok(())
}

pub fn split(settings: &Settings, out: &mut dyn Write) -> Result<(), CliError> {
    let spec = settings.split_spec()?;
    let input = settings.path("paths.input")?;
    let dir = settings.path("paths.out_dir")?;
    let corpus = read_corpus(&input)?;
    let (train, dev, test) = stratified_split(&corpus, &spec).map_err(|e| data_err(&input, e))?;
    std::fs::create_dir_all(&dir).map_err(|e| data_err(&dir, e))?;
    for (name, part) in [("train", &train), ("dev", &dev), ("test", &test)] {
        write_file(&dir.join(format!("{name}.conll")), &write_conll(part))?;
        writeln!(out, "{name:<6} {:>7} sentences {:>8} words", part.len(), part.stats().words).map_err(io_out)?;
    }
    Ok(())
}

pub fn train(settings: &Settings, out: &mut dyn Write) -> Result<(), CliError> {
    let kind = settings.model_kind()?;
    let fz = featurizer(settings)?;
    let min_count: usize = settings.get("features.min_count")?;
    let config = settings.train_config(settings.seed()?)?;
    let train_path = settings.path("paths.train")?;
    let target = settings.path("paths.out")?;
    let corpus = read_corpus(&train_path)?;
    let bundle = pipeline::train(kind, &corpus, &fz, min_count, &config).map_err(pipeline_err)?;
    save_model(&bundle, &target).map_err(|e| data_err(&target, e))?;
    writeln!(
        out,
        "trained {kind} on {} sentences: {} features, {} parameters, span features {}",
        corpus.len(),
        bundle.index.len(),
        bundle.model.params().len(),
        if fz.templates.use_rir() { "on" } else { "off" }
    )
    .map_err(io_out)
}

pub fn predict(settings: &Settings, out: &mut dyn Write) -> Result<(), CliError> {
    let model_path = settings.path("paths.model")?;
    let input = settings.path("paths.input")?;
    let bundle = load_bundle(&model_path)?;
    let corpus = read_corpus(&input)?;
    let tagged = pipeline::tag_corpus(&bundle, &corpus).map_err(pipeline_err)?;
    let text = write_conll(&tagged);
    match settings.opt_path("paths.out")? {
        Some(path) => write_file(&path, &text),
        None => out.write_all(text.as_bytes()).map_err(io_out),
    }
}

fn model_provenance(bundle: &ModelBundle, into: &mut BTreeMap<String, String>) {
    let fz = &bundle.featurizer;
    into.insert("model.kind".into(), bundle.model.kind().to_string());
    into.insert("model.templates".into(), fz.templates.to_string());
    into.insert("model.use_rir".into(), fz.templates.use_rir().to_string());
    into.insert(
        "model.rir".into(),
        format!("{} {} {}", fz.rir.max_interregnum_len, fz.rir.max_phrase_len, fz.rir.match_on.as_str()),
    );
    into.insert("model.features".into(), bundle.index.len().to_string());
}

fn print_summary(summary: &RunSummary, out: &mut dyn Write) -> Result<(), CliError> {
    if let [report] = summary.reports.as_slice() {
        return writeln!(out, "{report}").map_err(io_out);
    }
    writeln!(out, "{} runs, seeds {:?}", summary.runs(), summary.seeds).map_err(io_out)?;
    for (k, key) in Metrics::KEYS.iter().enumerate() {
        writeln!(out, "{key:<10} {:.4} +/- {:.4}", summary.mean.0[k], summary.std.0[k]).map_err(io_out)?;
    }
    Ok(())
}

/// Trains on `train` and scores on `test` once per seed, starting at the
/// configured seed.
fn repeated_runs(
    settings: &Settings,
    fz: &Featurizer,
    train: &LabeledCorpus,
    test: &LabeledCorpus,
) -> Result<RunSummary, CliError> {
    let kind = settings.model_kind()?;
    let min_count: usize = settings.get("features.min_count")?;
    let runs: usize = settings.get("eval.runs")?;
    settings.train_config(0)?;
    let experiment = |seed: u64| -> Result<_, CliError> {
        let config = settings.train_config(seed)?;
        let bundle = pipeline::train(kind, train, fz, min_count, &config).map_err(pipeline_err)?;
        pipeline::evaluate(&bundle, test).map_err(pipeline_err)
    };
    multi_run(experiment, runs, settings.seed()?).map_err(eval_err)
}

pub fn eval(settings: &Settings, out: &mut dyn Write) -> Result<(), CliError> {
    let runs: usize = settings.get("eval.runs")?;
    if runs == 0 {
        return Err(CliError::Usage("--runs must be at least 1".into()));
    }
    let mut provenance = settings.provenance(&["eval.", "paths."]);
    let summary = if let (Some(gold_path), Some(pred_path)) =
        (settings.opt_path("paths.gold")?, settings.opt_path("paths.pred")?)
    {
        let gold = read_corpus(&gold_path)?;
        let pred = read_corpus(&pred_path)?;
        if !gold.is_fully_labeled() || !pred.is_fully_labeled() {
            return Err(CliError::Data("gold and prediction files must be fully labeled".into()));
        }
        for (g, p) in gold.sentences().iter().zip(pred.sentences()) {
            if g.id() != p.id() {
                return Err(CliError::Data(format!("sentence ids differ: {:?} vs {:?}", g.id(), p.id())));
            }
        }
        let labels = |c: &LabeledCorpus| -> Vec<Vec<Label>> {
            c.sentences().iter().map(|s| s.labels().unwrap_or_default().to_vec()).collect()
        };
        let matrix = build_confusion(&labels(&gold), &labels(&pred)).map_err(eval_err)?;
        RunSummary::from_reports(Vec::new(), vec![compute_metrics(&matrix)])
    } else if let Some(train_path) = settings.opt_path("paths.train")? {
        let test_path = settings.path("paths.test")?;
        let fz = featurizer(settings)?;
        let train = read_corpus(&train_path)?;
        let test = read_corpus(&test_path)?;
        provenance = settings.provenance(TRAINING_KEYS);
        repeated_runs(settings, &fz, &train, &test)?
    } else if let Some(model_path) = settings.opt_path("paths.model")? {
        if runs > 1 {
            return Err(CliError::Usage("--runs above 1 needs --train; a loaded model scores the same every run".into()));
        }
        let test_path = settings.path("paths.test")?;
        let bundle = load_bundle(&model_path)?;
        let test = read_corpus(&test_path)?;
        model_provenance(&bundle, &mut provenance);
        let report = pipeline::evaluate(&bundle, &test).map_err(pipeline_err)?;
        RunSummary::from_reports(Vec::new(), vec![report])
    } else {
        return Err(CliError::Usage("eval needs --model with --test, --gold with --pred, or --train with --test".into()));
    };
    print_summary(&summary, out)?;
    if let Some(path) = settings.opt_path("paths.report")? {
        write_json(&path, &summary.to_json(&provenance))?;
    }
    Ok(())
}

/// Paired reports of the same experiment without and with span features.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationReport {
    pub without_rir: RunSummary,
    pub with_rir: RunSummary,
    pub provenance: BTreeMap<String, String>,
}

impl AblationReport {
    pub fn delta_macro_f1(&self) -> f64 {
        self.with_rir.mean.macro_f1() - self.without_rir.mean.macro_f1()
    }

    pub fn to_json(&self) -> Value {
        let none = BTreeMap::new();
        let mut obj = Map::new();
        obj.insert("without_rir".into(), self.without_rir.to_json(&none));
        obj.insert("with_rir".into(), self.with_rir.to_json(&none));
        obj.insert("delta_macro_f1".into(), json!(self.delta_macro_f1()));
        for (k, v) in &self.provenance {
            obj.insert(format!("config.{k}"), json!(v));
        }
        Value::Object(obj)
    }
}

/// Trains the configured model kind twice per seed, with the RIR_* templates
/// off and on, on identical data and seeds.
pub fn run_ablation(settings: &Settings, train: &LabeledCorpus, test: &LabeledCorpus) -> Result<AblationReport, CliError> {
    let base = settings.templates()?;
    let rir = settings.rir()?;
    let without_rir = repeated_runs(settings, &Featurizer::new(base.with_rir(false), rir), train, test)?;
    let with_rir = repeated_runs(settings, &Featurizer::new(base.with_rir(true), rir), train, test)?;
    let mut provenance = settings.provenance(TRAINING_KEYS);
    provenance.remove("features.rir");
    Ok(AblationReport { without_rir, with_rir, provenance })
}

pub fn ablation(settings: &Settings, out: &mut dyn Write) -> Result<(), CliError> {
    let train_path = settings.path("paths.train")?;
    let test_path = settings.path("paths.test")?;
    let train = read_corpus(&train_path)?;
    let test = read_corpus(&test_path)?;
    let report = run_ablation(settings, &train, &test)?;
    writeln!(out, "{:<10} {:>10} {:>10}", "metric", "no-rir", "rir").map_err(io_out)?;
    for (k, key) in Metrics::KEYS.iter().enumerate() {
        writeln!(out, "{key:<10} {:>10.4} {:>10.4}", report.without_rir.mean.0[k], report.with_rir.mean.0[k])
            .map_err(io_out)?;
    }
    writeln!(out, "delta macro_f1 {:+.4}", report.delta_macro_f1()).map_err(io_out)?;
    if let Some(path) = settings.opt_path("paths.report")? {
        write_json(&path, &report.to_json())?;
    }
    Ok(())
}

fn parse_agreement(text: &str) -> Result<AgreementTable, CliError> {
    let rows: Vec<Vec<&str>> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.split_whitespace().collect())
        .collect();
    let counts: Option<Vec<Vec<u32>>> =
        rows.iter().map(|r| r.iter().map(|f| f.parse().ok()).collect()).collect();
    let table = match counts {
        Some(counts) => AgreementTable::new(counts),
        None => {
            let ratings = rows
                .iter()
                .map(|r| r.iter().map(|f| f.parse::<Label>()).collect::<Result<Vec<_>, _>>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| CliError::Data(e.to_string()))?;
            AgreementTable::from_ratings(&ratings)
        }
    };
    table.map_err(eval_err)
}

pub fn kappa(settings: &Settings, out: &mut dyn Write) -> Result<(), CliError> {
    let input = settings.path("paths.input")?;
    let text = std::fs::read_to_string(&input).map_err(|e| data_err(&input, e))?;
    let table = parse_agreement(&text).map_err(|e| data_err(&input, e))?;
    let kappa = fleiss_kappa(&table).map_err(|e| data_err(&input, e))?;
    writeln!(out, "items {} raters {} kappa {kappa:.6}", table.items(), table.raters()).map_err(io_out)?;
    if let Some(path) = settings.opt_path("paths.report")? {
        let mut obj = Map::new();
        obj.insert("kappa".into(), json!(kappa));
        obj.insert("items".into(), json!(table.items()));
        obj.insert("raters".into(), json!(table.raters()));
        for (k, v) in settings.provenance(&["paths."]) {
            obj.insert(format!("config.{k}"), json!(v));
        }
        write_json(&path, &Value::Object(obj))?;
    }
    Ok(())
}

const DATASET_LANGUAGES: [Language; 3] = [Language::Hi, Language::Te, Language::Mr];

/// Dataset counts applicable to `corpus`: sentence and word counts for
/// every dataset language present, and label totals when all three
/// languages are present. `None` compares against all splits combined.
pub fn dataset_expectations(corpus: &LabeledCorpus, split: Option<Split>) -> Vec<ExpectedCount> {
    let present: BTreeSet<Language> = corpus.stats().languages.keys().copied().collect();
    let splits: Vec<Split> = split.map_or(Split::ALL.to_vec(), |s| vec![s]);
    let mut expected = Vec::new();
    for lang in DATASET_LANGUAGES.into_iter().filter(|l| present.contains(l)) {
        let (mut sentences, mut words) = (0, 0);
        for &s in &splits {
            let (n, w) = split_size(lang, s).unwrap_or_default();
            sentences += n;
            words += w;
        }
        expected.push(ExpectedCount { metric: Metric::LanguageSentences(lang), expected: sentences });
        expected.push(ExpectedCount { metric: Metric::LanguageWords(lang), expected: words });
    }
    if DATASET_LANGUAGES.iter().all(|l| present.contains(l)) {
        expected.extend(label_totals(split));
    }
    expected
}

pub fn verify_stats(settings: &Settings, out: &mut dyn Write) -> Result<(), CliError> {
    let inputs = settings.raw("paths.input").unwrap_or_default();
    if inputs.is_empty() {
        return Err(CliError::Usage("--input is required (or set paths.input in the config file)".into()));
    }
    let language = settings.raw("verify.language").map(Language::from_tag);
    let split = match settings.raw("verify.split") {
        None | Some("all") => None,
        Some(name) => Some(
            Split::from_name(name)
                .ok_or_else(|| CliError::Usage(format!("unknown split {name:?}; use train, validation, test or all")))?,
        ),
    };
    let mut sentences = Vec::new();
    for path in inputs.split(',') {
        let corpus = read_corpus(Path::new(path))?;
        sentences.extend(corpus.into_sentences().into_iter().map(|s| match language {
            Some(lang) if s.language() == Language::Other => s.with_language(lang),
            _ => s,
        }));
    }
    let corpus = LabeledCorpus::new(sentences);
    let expected = dataset_expectations(&corpus, split);
    if expected.is_empty() {
        return Err(CliError::Data("no hi, te or mr sentences found; tag files with `# lang` or pass --language".into()));
    }
    let report = verify_statistics(&corpus, &expected);
    writeln!(out, "{report}").map_err(io_out)?;
    if report.pass() {
        Ok(())
    } else {
        Err(CliError::Data("corpus statistics differ from the dataset counts".into()))
    }
}

pub fn inspect_spans(settings: &Settings, out: &mut dyn Write) -> Result<(), CliError> {
    let rir = settings.rir()?;
    let input = settings.path("paths.input")?;
    let lexicon: BTreeSet<String> = match settings.opt_path("paths.lexicon")? {
        Some(path) => read_word_list(&path)?.into_iter().collect(),
        None => Lexicons::default().interregnum.into_iter().collect(),
    };
    let corpus = read_corpus(&input)?;
    for s in corpus.sentences() {
        for span in find_spans(s, &rir) {
            let label = heuristic_classify(&span, s, &lexicon);
            writeln!(out, "{}\t{span}\t{label}", s.id()).map_err(io_out)?;
        }
    }
    Ok(())
}
