//! Train, tag and evaluate with a [`ModelBundle`].

use thiserror::Error;

use crate::corpus::{Label, LabeledCorpus, Sentence};
use crate::eval::{build_confusion, compute_metrics, EvalError, EvalReport};
use crate::features::{FeatureError, FeatureVector, Featurizer};
use crate::models::{crf_train, crf_viterbi, logreg_train, Model, ModelBundle, ModelError, ModelKind, TrainConfig};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("sentence {0:?} has no gold labels")]
    Unlabeled(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

fn gold(sentence: &Sentence) -> Result<&[Label], PipelineError> {
    sentence.labels().ok_or_else(|| PipelineError::Unlabeled(sentence.id().to_string()))
}

/// Fits the feature index on `corpus` and trains a model of `kind` on it.
pub fn train(
    kind: ModelKind,
    corpus: &LabeledCorpus,
    featurizer: &Featurizer,
    min_count: usize,
    config: &TrainConfig,
) -> Result<ModelBundle, PipelineError> {
    let index = featurizer.fit_index(corpus, min_count)?;
    let mut sequences = Vec::with_capacity(corpus.len());
    for s in corpus.sentences() {
        let labels = gold(s)?.to_vec();
        sequences.push((featurizer.features(s, &index)?, labels));
    }
    let model = match kind {
        ModelKind::Crf => Model::Crf(crf_train(&sequences, index.len(), config)?.0),
        ModelKind::LogReg => {
            let tokens: Vec<(FeatureVector, Label)> =
                sequences.into_iter().flat_map(|(vs, ls)| vs.into_iter().zip(ls)).collect();
            Model::LogReg(logreg_train(&tokens, index.len(), config)?.0)
        }
    };
    Ok(ModelBundle { model, index, featurizer: featurizer.clone() })
}

pub fn tag_sentence(bundle: &ModelBundle, sentence: &Sentence) -> Result<Vec<Label>, PipelineError> {
    let vectors = bundle.featurizer.features(sentence, &bundle.index)?;
    let labels = match &bundle.model {
        Model::Crf(m) => crf_viterbi(m, &vectors)?.0,
        Model::LogReg(m) => vectors.iter().map(|v| m.predict_label(v)).collect::<Result<_, _>>()?,
    };
    Ok(labels)
}

/// Tags every sentence; gold labels, if any, are replaced.
pub fn tag_corpus(bundle: &ModelBundle, corpus: &LabeledCorpus) -> Result<LabeledCorpus, PipelineError> {
    let tagged = corpus
        .sentences()
        .iter()
        .map(|s| Ok(s.clone().with_labels(Some(tag_sentence(bundle, s)?)).expect("tagger emits one label per token")))
        .collect::<Result<Vec<_>, PipelineError>>()?;
    Ok(LabeledCorpus::new(tagged))
}

/// Token-level metrics of `bundle` on a gold-labeled corpus.
pub fn evaluate(bundle: &ModelBundle, corpus: &LabeledCorpus) -> Result<EvalReport, PipelineError> {
    let mut golds = Vec::with_capacity(corpus.len());
    let mut preds = Vec::with_capacity(corpus.len());
    for s in corpus.sentences() {
        golds.push(gold(s)?);
        preds.push(tag_sentence(bundle, s)?);
    }
    Ok(compute_metrics(&build_confusion(&golds, &preds)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::TemplateSet;
    use crate::rir::RirConfig;
    use crate::synth::{generate_corpus, SynthConfig};

    fn corpus(seed: u64, n: usize) -> LabeledCorpus {
        generate_corpus(&SynthConfig { seed, n_sentences: n, ..SynthConfig::default() }).unwrap().0
    }

    #[test]
    fn crf_learns_synthetic_patterns() {
        let fz = Featurizer::new(TemplateSet::standard(true), RirConfig::default());
        let bundle = train(ModelKind::Crf, &corpus(1, 300), &fz, 1, &TrainConfig::default()).unwrap();
        let report = evaluate(&bundle, &corpus(2, 100)).unwrap();
        assert!(report.macro_f1 > 0.8, "{report}");
    }

    #[test]
    fn logreg_trains_and_tags() {
        let fz = Featurizer::new(TemplateSet::standard(true), RirConfig::default());
        let train_set = corpus(3, 100);
        let bundle = train(ModelKind::LogReg, &train_set, &fz, 1, &TrainConfig::default()).unwrap();
        let tagged = tag_corpus(&bundle, &train_set).unwrap();
        assert_eq!(tagged.len(), train_set.len());
        for (a, b) in tagged.sentences().iter().zip(train_set.sentences()) {
            assert_eq!(a.len(), b.len());
            assert_eq!(a.id(), b.id());
        }
    }

    #[test]
    fn unlabeled_training_data_is_rejected() {
        let fz = Featurizer::new(TemplateSet::standard(false), RirConfig::default());
        let s = Sentence::from_words("u", crate::corpus::Language::Hi, &["a", "b"], None).unwrap();
        let c = LabeledCorpus::new(vec![s]);
        assert!(train(ModelKind::Crf, &c, &fz, 1, &TrainConfig::default()).is_err());
    }
}
