//! Token-level reduplication and repetition tagging.
//!
//! The crate is organized bottom-up:
//!
//! * [`corpus`] holds the data model, CoNLL-style I/O, normalization,
//!   stratified splitting and fixture verification.
//! * [`rir`] finds duplicated spans and segments them into reparandum,
//!   interregnum and repair.
//! * [`features`] turns tokens and span records into sparse indicator vectors.
//! * [`models`] provides a multinomial logistic regression baseline and a
//!   linear-chain CRF, plus the on-disk model format.
//! * [`eval`] computes confusion matrices, precision/recall/F1 and Fleiss' kappa.
//! * [`synth`] generates seeded synthetic corpora.
//! * [`pipeline`] wires featurization, training and tagging together.

pub mod corpus;
pub mod eval;
pub mod features;
pub mod math;
pub mod models;
pub mod pipeline;
pub mod rir;
pub mod synth;

pub use corpus::{Label, Language, LabeledCorpus, Sentence, Token};
pub use eval::{ConfusionMatrix, EvalReport};
pub use features::{FeatureIndex, FeatureVector, Template, TemplateSet};
pub use models::{CrfModel, LogRegModel, TrainConfig};
pub use rir::{RiRSpan, RirConfig};
