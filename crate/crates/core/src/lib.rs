//! Multilingual coreference toolkit for CorefUD corpora.

pub mod conllu;
pub mod decode;
pub mod error;
pub mod fixtures;
pub mod kv;
pub mod metrics;
pub mod model;
pub mod scorer;
pub mod segment;
pub mod stats;
pub mod synth;
pub mod syntax;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use model::{validate_document, Document, Entity, HeadRef, Mention, Node, NodeId};
pub use scorer::{Model, ModelConfig, SingletonMode, Span2HeadMode};
