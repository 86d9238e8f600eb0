//! Shared fixtures for the benchmarks.

use redrep_core::features::{FeatureVector, Featurizer};
use redrep_core::models::{ModelBundle, ModelKind};
use redrep_core::pipeline;
use redrep_core::synth::{generate_corpus, SynthConfig};
use redrep_core::{LabeledCorpus, RirConfig, TemplateSet, TrainConfig};

/// A CRF trained on a small synthetic corpus, plus held-out sentences.
pub fn trained_crf(train_sentences: usize) -> (ModelBundle, LabeledCorpus) {
    let train = generate_corpus(&SynthConfig { seed: 1, n_sentences: train_sentences, ..SynthConfig::default() })
        .expect("default config is valid")
        .0;
    let test = generate_corpus(&SynthConfig { seed: 2, n_sentences: 200, ..SynthConfig::default() })
        .expect("default config is valid")
        .0;
    let fz = Featurizer::new(TemplateSet::standard(true), RirConfig::default());
    let bundle = pipeline::train(ModelKind::Crf, &train, &fz, 1, &TrainConfig::default()).expect("training succeeds");
    (bundle, test)
}

/// Feature vectors of every sentence under the bundle's featurizer.
pub fn featurize(bundle: &ModelBundle, corpus: &LabeledCorpus) -> Vec<Vec<FeatureVector>> {
    corpus
        .sentences()
        .iter()
        .map(|s| bundle.featurizer.features(s, &bundle.index).expect("index is frozen"))
        .collect()
}
