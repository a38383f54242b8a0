//! Fixtures shared by the benchmarks.

use bteach_core::dataset::synth::{synthesize, to_corpus};
use bteach_core::dataset::SynthParams;
use bteach_core::pipeline::train_target_model;
use bteach_core::{Corpus, ThetaParams, TrainConfig};

/// A noisy synthetic corpus annotated with its trained target parameters.
pub fn trained_corpus(n: usize, side: usize) -> (Corpus, ThetaParams) {
    let images = synthesize(&SynthParams {
        n,
        width: side,
        height: side,
        ..SynthParams::default()
    })
    .expect("valid params");
    let mut corpus = to_corpus(&images);
    let theta = train_target_model(&corpus, &TrainConfig::for_items(n))
        .expect("trains")
        .theta;
    corpus.annotate(&theta);
    (corpus, theta)
}
