use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{ModelConfig, SingletonMode, Span2HeadMode, DISTANCE_BUCKETS};
use crate::tensor::Mat;

/// How a freshly allocated array is filled.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Init {
    Embedding,
    Weight,
    Bias,
}

/// Every trainable array of the scorer, by name, in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    pub arrays: Vec<(String, Mat)>,
}

/// Shapes of all arrays the configuration needs.
fn layout(cfg: &ModelConfig) -> Vec<(String, usize, usize, Init)> {
    let e = cfg.encoder.embedding_dim;
    let d = cfg.token_dim();
    let g = cfg.span_dim();
    let h = cfg.hidden_dim;
    let mut out: Vec<(String, usize, usize, Init)> = Vec::new();
    let mut add = |name: &str, r: usize, c: usize, init: Init| out.push((name.to_string(), r, c, init));
    let ffnn = |add: &mut dyn FnMut(&str, usize, usize, Init), prefix: &str, input: usize, output: usize| {
        add(&format!("{prefix}.w1"), input, h, Init::Weight);
        add(&format!("{prefix}.b1"), 1, h, Init::Bias);
        add(&format!("{prefix}.w2"), h, output, Init::Weight);
        add(&format!("{prefix}.b2"), 1, output, Init::Bias);
    };

    add("tok_emb", cfg.encoder.vocab_size, e, Init::Embedding);
    for name in ["attn_q", "attn_k", "attn_v", "attn_o"] {
        add(name, e, e, Init::Weight);
    }
    if let Some(t) = cfg.tree_features {
        add("deprel_emb", cfg.num_deprels, t.deprel_embedding_dim, Init::Embedding);
    }
    if !cfg.heads_only {
        add("span_attn", d, 1, Init::Weight);
        add("width_emb", cfg.max_span_width, cfg.width_dim, Init::Embedding);
    }
    ffnn(&mut add, "mention", g, 1);
    add("coarse", g, g, Init::Weight);
    add("distance_emb", DISTANCE_BUCKETS, cfg.distance_dim, Init::Embedding);
    ffnn(&mut add, "antecedent", 3 * g + cfg.distance_dim, 1);
    if cfg.singleton_mode.has_virtual_antecedent() {
        add("singleton_emb", 1, g, Init::Embedding);
    }
    if cfg.singleton_mode == SingletonMode::Separate {
        ffnn(&mut add, "singleton", g, 1);
    }
    match cfg.span2head {
        Span2HeadMode::Off => {}
        Span2HeadMode::Multiclass => ffnn(&mut add, "span2head", g, cfg.max_span_width),
        Span2HeadMode::Binary => ffnn(&mut add, "span2head", g + d, 1),
    }
    out
}

impl Parameters {
    /// Randomly initialised parameters: uniform embeddings, Glorot-uniform
    /// weights and zero biases.
    pub fn init(cfg: &ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let arrays = layout(cfg)
            .into_iter()
            .map(|(name, r, c, init)| {
                let bound = match init {
                    Init::Embedding => 0.5,
                    Init::Weight => (6.0 / (r + c) as f64).sqrt(),
                    Init::Bias => 0.0,
                };
                let data = (0..r * c)
                    .map(|_| if bound == 0.0 { 0.0 } else { rng.random_range(-bound..bound) })
                    .collect();
                (name, Mat::from_vec(r, c, data))
            })
            .collect();
        Parameters { arrays }
    }

    pub fn zeros(cfg: &ModelConfig) -> Self {
        let arrays = layout(cfg)
            .into_iter()
            .map(|(name, r, c, _)| (name, Mat::zeros(r, c)))
            .collect();
        Parameters { arrays }
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.arrays.iter().position(|(n, _)| n == name)
    }

    pub fn get(&self, name: &str) -> Option<&Mat> {
        self.index(name).map(|i| &self.arrays[i].1)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Mat> {
        self.arrays.iter_mut().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.arrays.iter().map(|(n, _)| n.as_str())
    }

    pub fn num_scalars(&self) -> usize {
        self.arrays.iter().map(|(_, m)| m.len()).sum()
    }

    /// True when names and shapes agree with what `cfg` allocates.
    pub fn matches(&self, cfg: &ModelConfig) -> bool {
        let want = layout(cfg);
        want.len() == self.arrays.len()
            && want
                .iter()
                .zip(&self.arrays)
                .all(|((n, r, c, _), (name, m))| n == name && *r == m.rows && *c == m.cols)
    }
}
