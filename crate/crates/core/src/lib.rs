//! Rhyme- and rhythm-aware lyric generation.
//!
//! The pipeline, bottom up:
//!
//! * [`vowel`] maps characters to rhyme classes (pinyin finals).
//! * [`align`] attaches beats to words from timestamps and labels songs by
//!   beat frequency.
//! * [`corpus`] parses `*`-annotated lyrics and turns songs into
//!   reverse-order feature sequences with `[BEAT]`/`[SEP]` tokens.
//! * [`model`] is a small Transformer decoder with vowel, intra-sentence
//!   position and sentence embeddings, trained with Adam.
//! * [`decode`] generates songs under the N-gram rhyme constraint.
//! * [`metrics`] scores models and corpora (PPL, rhyme accuracy/density,
//!   Combo-N, beat accuracy, beat-interval distances, rhyme repetition).
//! * [`synth`] builds synthetic corpora with known ground truth.

pub mod align;
pub mod corpus;
pub mod decode;
mod error;
pub mod metrics;
pub mod model;
pub mod synth;
pub mod vowel;

pub use align::{AlignmentResult, FreqLabel, FreqThresholds, TimedBeat, TimedWord};
pub use corpus::{EncodeConfig, FeatureSequence, Sentence, Song, Vocab, Word};
pub use decode::{GenControls, Generation, RhymeState, SamplingMode};
pub use error::{Error, Result};
pub use metrics::{IntervalDistribution, MetricsReport};
pub use model::{ModelConfig, ModelParams, NextTokenModel, TrainConfig, TrainReport};
pub use synth::{GroundTruth, SynthSpec};
pub use vowel::{Equivalence, VowelDictionary, VowelId, NULL_VOWEL};
