//! End-to-end coreference scorer: encoder, span representations, mention
//! and antecedent scores with coarse-to-fine pruning, singleton variants
//! and Span2Head heads.

pub mod checkpoint;
mod config;
mod example;
mod forward;
mod params;
mod vocab;

pub use config::{
    distance_bucket, EncoderConfig, ModelConfig, SingletonMode, Span2HeadMode, DISTANCE_BUCKETS,
    VIRTUAL_DISTANCE_BUCKET,
};
pub use example::{enumerate_candidates, Candidate, Example, Gold};
pub use forward::{argmax, gold_sets, select_antecedents_coarse, select_kept, threshold_heads, Plan, ScoreTable};
pub use params::Parameters;
pub use vocab::{Vocab, PAD, UNK, UNK_DEPREL, ZERO};

pub(crate) use forward::forward;

use crate::error::{Error, Result};
use crate::model::Document;
use crate::tensor::{matmul, Mat, ParamGrads, Tape};

/// Configuration, vocabulary and parameters of a scorer.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub vocab: Vocab,
    pub params: Parameters,
}

impl Model {
    /// Randomly initialised model. Vocabulary sizes in `config` are taken
    /// from `vocab`.
    pub fn new(config: ModelConfig, vocab: Vocab, seed: u64) -> Result<Self> {
        let config = Self::fit_config(config, &vocab)?;
        let params = Parameters::init(&config, seed);
        Ok(Model { config, vocab, params })
    }

    /// All-zero model: every score is 0 and every decision falls to ε.
    pub fn zeros(config: ModelConfig, vocab: Vocab) -> Result<Self> {
        let config = Self::fit_config(config, &vocab)?;
        let params = Parameters::zeros(&config);
        Ok(Model { config, vocab, params })
    }

    fn fit_config(mut config: ModelConfig, vocab: &Vocab) -> Result<ModelConfig> {
        config.encoder.vocab_size = vocab.num_tokens();
        config.num_deprels = vocab.num_deprels();
        if let Some(t) = config.tree_features.as_mut() {
            t.token_embedding_dim = config.encoder.embedding_dim;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn example(&self, doc: Document, with_gold: bool, singletons_annotated: bool) -> Example {
        Example::new(doc, &self.config, &self.vocab, with_gold, singletons_annotated)
    }

    /// Pruned and scored antecedent table of one example.
    pub fn score(&self, ex: &Example) -> Result<ScoreTable> {
        Ok(forward(&self.config, &self.params, ex, None)?.table())
    }

    /// Score table plus, when Span2Head is on, the predicted head (node
    /// index) of every kept span.
    pub fn score_with_heads(&self, ex: &Example) -> Result<(ScoreTable, Option<Vec<usize>>)> {
        let mut fwd = forward(&self.config, &self.params, ex, None)?;
        let table = fwd.table();
        if self.config.span2head == Span2HeadMode::Off {
            return Ok((table, None));
        }
        let probs = fwd.span2head_probs(&self.config, ex, &table.spans)?;
        let heads = probs
            .iter()
            .zip(&table.spans)
            .map(|(p, &k)| ex.candidates[k].start + argmax(p))
            .collect();
        Ok((table, Some(heads)))
    }

    /// Loss of a gold example and its gradient. Pruning follows `plan` when
    /// given; the plan actually used is returned.
    pub fn loss_and_grads(&self, ex: &Example, plan: Option<&Plan>) -> Result<(f64, ParamGrads, Plan)> {
        loss_and_grads(&self.config, &self.params, ex, plan)
    }
}

pub fn loss_and_grads(
    cfg: &ModelConfig,
    params: &Parameters,
    ex: &Example,
    plan: Option<&Plan>,
) -> Result<(f64, ParamGrads, Plan)> {
    let mut fwd = forward(cfg, params, ex, plan)?;
    let loss = fwd.loss(cfg, ex)?;
    let grads = fwd.backward(loss);
    Ok((fwd.tape.value(loss).data[0], grads, fwd.plan))
}

/// Loss only, under a fixed plan.
pub fn loss_value(cfg: &ModelConfig, params: &Parameters, ex: &Example, plan: &Plan) -> Result<f64> {
    let mut fwd = forward(cfg, params, ex, Some(plan))?;
    let loss = fwd.loss(cfg, ex)?;
    Ok(fwd.tape.value(loss).data[0])
}

/// One vector per node; tree-path features are appended when the model
/// uses them.
pub fn encode_tokens(model: &Model, doc: &Document) -> Result<Mat> {
    let ex = model.example(doc.clone(), false, false);
    let mut tape = Tape::new(model.params.arrays.len());
    let mut b = forward::Binder::new(&model.params);
    let x = forward::encode(&model.config, &mut tape, &mut b, &ex)?;
    Ok(tape.value(x).clone())
}

/// g for the inclusive node range `span` of already encoded `tokens`.
pub fn span_representation(model: &Model, tokens: &Mat, span: (usize, usize)) -> Result<Vec<f64>> {
    let (start, end) = span;
    if start > end || end >= tokens.rows {
        return Err(Error::InvalidInput(format!("span {start}..={end} out of bounds")));
    }
    if model.config.heads_only {
        return Ok(tokens.row(start).to_vec());
    }
    let width = end - start;
    if width >= model.config.max_span_width {
        return Err(Error::InvalidInput(format!("span wider than {}", model.config.max_span_width)));
    }
    let p = &model.params;
    let attn = p.get("span_attn").expect("span mode allocates span_attn");
    let logits: Vec<f64> = (start..=end).map(|t| matmul_row(tokens.row(t), attn)[0]).collect();
    let alpha = crate::tensor::softmax(&logits);
    let mut hat = vec![0.0; tokens.cols];
    for (a, t) in alpha.iter().zip(start..=end) {
        for (h, x) in hat.iter_mut().zip(tokens.row(t)) {
            *h += a * x;
        }
    }
    let mut g = tokens.row(start).to_vec();
    g.extend_from_slice(tokens.row(end));
    g.extend(hat);
    g.extend_from_slice(p.get("width_emb").expect("span mode allocates width_emb").row(width));
    Ok(g)
}

fn matmul_row(x: &[f64], w: &Mat) -> Vec<f64> {
    matmul(&Mat::row_vector(x.to_vec()), w).data
}

fn ffnn_values(params: &Parameters, prefix: &str, x: &Mat) -> Result<Mat> {
    let mut tape = Tape::new(params.arrays.len());
    let mut b = forward::Binder::new(params);
    let xv = tape.constant(x.clone());
    let o = forward::ffnn(&mut tape, &mut b, prefix, xv)?;
    Ok(tape.value(o).clone())
}

/// s_m(g).
pub fn mention_score(model: &Model, g: &[f64]) -> Result<f64> {
    Ok(ffnn_values(&model.params, "mention", &Mat::row_vector(g.to_vec()))?.data[0])
}

/// Coarse-to-fine pruning over candidates with representations `g` (one
/// row each) and mention scores `mention_scores`.
pub fn coarse_to_fine_prune(
    model: &Model,
    mention_scores: &[f64],
    g: &Mat,
    num_words: usize,
    ratio: f64,
    max_antecedents: usize,
) -> Plan {
    let kept = select_kept(mention_scores, num_words, ratio);
    let mut gk = Mat::zeros(kept.len(), g.cols);
    for (r, &k) in kept.iter().enumerate() {
        gk.row_mut(r).copy_from_slice(g.row(k));
    }
    let wc = model.params.get("coarse").expect("coarse is always allocated");
    let gw = matmul(&gk, wc);
    let kept_scores: Vec<f64> = kept.iter().map(|&k| mention_scores[k]).collect();
    let antecedents = select_antecedents_coarse(&kept_scores, &gw, &gk, max_antecedents);
    Plan { kept, antecedents }
}

/// Score of the singleton virtual antecedent for a span with representation
/// `g`.
pub fn singleton_score(model: &Model, g: &[f64]) -> Result<f64> {
    let mode = model.config.singleton_mode;
    if !mode.has_virtual_antecedent() {
        return Err(Error::Config(format!("singleton mode {mode} has no singleton antecedent")));
    }
    let params = &model.params;
    let es = params
        .get("singleton_emb")
        .ok_or_else(|| Error::Config("singleton_emb is not allocated".into()))?;
    let gm = Mat::row_vector(g.to_vec());
    if mode == SingletonMode::Separate {
        return Ok(ffnn_values(params, "singleton", &gm)?.data[0] + ffnn_values(params, "singleton", es)?.data[0]);
    }
    let base = ffnn_values(params, "mention", &gm)?.data[0] + ffnn_values(params, "mention", es)?.data[0];
    if mode == SingletonMode::Mask {
        return Ok(base);
    }
    let prod: Vec<f64> = g.iter().zip(&es.data).map(|(a, b)| a * b).collect();
    let dist = params.get("distance_emb").expect("always allocated").row(VIRTUAL_DISTANCE_BUCKET);
    let mut feat = g.to_vec();
    feat.extend_from_slice(&es.data);
    feat.extend(prod);
    feat.extend_from_slice(dist);
    let sa = ffnn_values(params, "antecedent", &Mat::row_vector(feat))?.data[0];
    let gw = matmul_row(g, params.get("coarse").expect("always allocated"));
    let coarse: f64 = gw.iter().zip(&es.data).map(|(a, b)| a * b).sum();
    Ok(base + sa + coarse)
}

/// Head positions (relative to `span.0`) predicted for a span.
pub fn span2head_predict(model: &Model, g: &[f64], tokens: &Mat, span: (usize, usize)) -> Result<Vec<usize>> {
    let width = span.1 - span.0 + 1;
    let probs: Vec<f64> = match model.config.span2head {
        Span2HeadMode::Off => return Err(Error::Config("span2head is off".into())),
        Span2HeadMode::Multiclass => {
            let l = ffnn_values(&model.params, "span2head", &Mat::row_vector(g.to_vec()))?;
            l.data[..width.min(l.cols)].iter().map(|&v| crate::tensor::sigmoid(v)).collect()
        }
        Span2HeadMode::Binary => (span.0..=span.1)
            .map(|t| {
                let mut feat = g.to_vec();
                feat.extend_from_slice(tokens.row(t));
                ffnn_values(&model.params, "span2head", &Mat::row_vector(feat))
                    .map(|l| crate::tensor::sigmoid(l.data[0]))
            })
            .collect::<Result<_>>()?,
    };
    Ok(threshold_heads(&probs))
}
