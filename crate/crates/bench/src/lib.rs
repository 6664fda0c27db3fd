//! Shared fixtures for the criterion benches.

use corefkit::synth::{generate, SynthSpec};
use corefkit::Document;

/// A synthetic corpus of `documents` documents with `sentences` sentences
/// each and some chains spread over long distances.
pub fn corpus(documents: usize, sentences: usize) -> Vec<Document> {
    generate(&SynthSpec {
        documents,
        sentences_per_doc: sentences,
        singleton_rate: 0.2,
        cross_segment_rate: 0.3,
        cross_segment_gap: 8,
        seed: 11,
        ..SynthSpec::default()
    })
    .expect("valid synth spec")
}
