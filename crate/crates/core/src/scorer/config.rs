use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kv::KeyValues;
use crate::syntax::SyntaxFeatureConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SingletonMode {
    #[default]
    Off,
    Dummy,
    Mask,
    Separate,
    Mentions,
}

impl SingletonMode {
    pub const ALL: [SingletonMode; 5] = [
        SingletonMode::Off,
        SingletonMode::Dummy,
        SingletonMode::Mask,
        SingletonMode::Separate,
        SingletonMode::Mentions,
    ];

    /// Whether a second virtual antecedent column is present.
    pub fn has_virtual_antecedent(self) -> bool {
        matches!(self, SingletonMode::Dummy | SingletonMode::Mask | SingletonMode::Separate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Span2HeadMode {
    #[default]
    Off,
    Multiclass,
    Binary,
}

impl Span2HeadMode {
    pub const ALL: [Span2HeadMode; 3] = [Span2HeadMode::Off, Span2HeadMode::Multiclass, Span2HeadMode::Binary];
}

macro_rules! text_enum {
    ($ty:ident { $($variant:ident => $text:literal),* $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($ty::$variant => $text),* })
            }
        }
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($ty::$variant),)*
                    _ => Err(Error::Config(format!(concat!("unknown ", stringify!($ty), " {:?}"), s))),
                }
            }
        }
    };
}

text_enum!(SingletonMode { Off => "off", Dummy => "dummy", Mask => "mask", Separate => "separate", Mentions => "mentions" });
text_enum!(Span2HeadMode { Off => "off", Multiclass => "multiclass", Binary => "binary" });

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncoderConfig {
    pub vocab_size: usize,
    pub embedding_dim: usize,
    /// Total width of the local attention window (keys within ±window/2).
    pub context_window: usize,
    /// Nodes per segment.
    pub segment_length: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            vocab_size: 2,
            embedding_dim: 64,
            context_window: 16,
            segment_length: 512,
        }
    }
}

/// Architecture of the scorer. Everything needed to allocate parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub encoder: EncoderConfig,
    /// Tree-path features; the token dimension inside is kept equal to the
    /// encoder's embedding dimension.
    pub tree_features: Option<SyntaxFeatureConfig>,
    pub num_deprels: usize,
    pub hidden_dim: usize,
    pub width_dim: usize,
    pub distance_dim: usize,
    pub max_span_width: usize,
    /// λ: fraction of words kept as mention candidates.
    pub mention_ratio: f64,
    /// c: antecedents kept per span after coarse pruning.
    pub max_antecedents: usize,
    pub heads_only: bool,
    pub singleton_mode: SingletonMode,
    pub span2head: Span2HeadMode,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            encoder: EncoderConfig::default(),
            tree_features: None,
            num_deprels: 2,
            hidden_dim: 64,
            width_dim: 16,
            distance_dim: 16,
            max_span_width: 30,
            mention_ratio: 0.4,
            max_antecedents: 50,
            heads_only: false,
            singleton_mode: SingletonMode::Off,
            span2head: Span2HeadMode::Off,
        }
    }
}

/// Number of distance buckets: 0, 1, 2, 3, 4, 5–7, 8–15, 16–31, 32–63,
/// 64+ and one for the virtual singleton antecedent.
pub const DISTANCE_BUCKETS: usize = 11;
pub const VIRTUAL_DISTANCE_BUCKET: usize = 10;

pub fn distance_bucket(d: usize) -> usize {
    match d {
        0..=4 => d,
        5..=7 => 5,
        8..=15 => 6,
        16..=31 => 7,
        32..=63 => 8,
        _ => 9,
    }
}

impl ModelConfig {
    /// Width of one encoded token vector.
    pub fn token_dim(&self) -> usize {
        let e = self.encoder.embedding_dim;
        e + self.tree_features.map_or(0, |t| t.max_tree_depth * (e + t.deprel_embedding_dim))
    }

    /// Width of a span representation g.
    pub fn span_dim(&self) -> usize {
        if self.heads_only {
            self.token_dim()
        } else {
            3 * self.token_dim() + self.width_dim
        }
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.encoder;
        if e.segment_length < e.context_window || e.context_window < 1 {
            return Err(Error::Config(
                "segment_length >= context_window >= 1 is required".into(),
            ));
        }
        if !(self.mention_ratio > 0.0 && self.mention_ratio <= 1.0) {
            return Err(Error::Config("mention_ratio must lie in (0, 1]".into()));
        }
        if self.max_antecedents < 1 || self.max_span_width < 1 {
            return Err(Error::Config("max_antecedents and max_span_width must be >= 1".into()));
        }
        if e.embedding_dim == 0 || self.hidden_dim == 0 || e.vocab_size < 2 || self.num_deprels < 2 {
            return Err(Error::Config("dimensions and vocabularies must be non-empty".into()));
        }
        if let Some(t) = self.tree_features {
            if t.token_embedding_dim != e.embedding_dim {
                return Err(Error::Config(
                    "tree feature token dimension must equal embedding_dim".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn write_kv(&self, kv: &mut KeyValues) {
        kv.push("embedding_dim", self.encoder.embedding_dim);
        kv.push("context_window", self.encoder.context_window);
        kv.push("segment_length", self.encoder.segment_length);
        kv.push("vocab_size", self.encoder.vocab_size);
        kv.push("num_deprels", self.num_deprels);
        kv.push("use_tree_features", self.tree_features.is_some());
        if let Some(t) = self.tree_features {
            kv.push("max_tree_depth", t.max_tree_depth);
            kv.push("deprel_dim", t.deprel_embedding_dim);
        }
        kv.push("hidden_dim", self.hidden_dim);
        kv.push("width_dim", self.width_dim);
        kv.push("distance_dim", self.distance_dim);
        kv.push("max_span_width", self.max_span_width);
        kv.push("mention_ratio", self.mention_ratio);
        kv.push("max_antecedents", self.max_antecedents);
        kv.push("heads_only", self.heads_only);
        kv.push("singleton_mode", self.singleton_mode);
        kv.push("span2head", self.span2head);
    }

    /// Reads the keys written by [`ModelConfig::write_kv`]; absent keys keep
    /// their defaults.
    pub fn from_kv(kv: &KeyValues) -> Result<Self> {
        let d = ModelConfig::default();
        let embedding_dim = kv.parse_value("embedding_dim")?.unwrap_or(d.encoder.embedding_dim);
        let tree_features = if kv.parse_bool("use_tree_features")?.unwrap_or(false) {
            let base = SyntaxFeatureConfig::default();
            Some(SyntaxFeatureConfig {
                max_tree_depth: kv.parse_value("max_tree_depth")?.unwrap_or(base.max_tree_depth),
                deprel_embedding_dim: kv.parse_value("deprel_dim")?.unwrap_or(base.deprel_embedding_dim),
                token_embedding_dim: embedding_dim,
            })
        } else {
            None
        };
        Ok(ModelConfig {
            encoder: EncoderConfig {
                vocab_size: kv.parse_value("vocab_size")?.unwrap_or(d.encoder.vocab_size),
                embedding_dim,
                context_window: kv.parse_value("context_window")?.unwrap_or(d.encoder.context_window),
                segment_length: kv.parse_value("segment_length")?.unwrap_or(d.encoder.segment_length),
            },
            tree_features,
            num_deprels: kv.parse_value("num_deprels")?.unwrap_or(d.num_deprels),
            hidden_dim: kv.parse_value("hidden_dim")?.unwrap_or(d.hidden_dim),
            width_dim: kv.parse_value("width_dim")?.unwrap_or(d.width_dim),
            distance_dim: kv.parse_value("distance_dim")?.unwrap_or(d.distance_dim),
            max_span_width: kv.parse_value("max_span_width")?.unwrap_or(d.max_span_width),
            mention_ratio: kv.parse_value("mention_ratio")?.unwrap_or(d.mention_ratio),
            max_antecedents: kv.parse_value("max_antecedents")?.unwrap_or(d.max_antecedents),
            heads_only: kv.parse_bool("heads_only")?.unwrap_or(d.heads_only),
            singleton_mode: kv.parse_value("singleton_mode")?.unwrap_or(d.singleton_mode),
            span2head: kv.parse_value("span2head")?.unwrap_or(d.span2head),
        })
    }
}
