//! Losses, training windows, the optimisation loop, corpus mixtures and
//! finite-difference gradient verification.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::conllu::parse_corpus;
use crate::decode::{predict_document, DecodeOptions};
use crate::error::{Error, Result};
use crate::kv::KeyValues;
use crate::metrics::{primary_score, ScoringOptions};
use crate::model::Document;
use crate::scorer::{loss_and_grads, loss_value, Example, Model, ModelConfig, Parameters, ScoreTable, Span2HeadMode};
use crate::segment::segment_document;
use crate::tensor::{log_sum_exp, softplus, Mat, ParamGrads};

/// −Σ_i log Σ_{y ∈ GOLD(i)} P(y | i) over a scored table. `gold[i]` masks
/// row `i`'s columns.
pub fn marginal_loss(table: &ScoreTable, gold: &[Vec<bool>]) -> Result<f64> {
    if gold.len() != table.scores.len() {
        return Err(Error::InvalidInput("one gold set per row is required".into()));
    }
    let mut total = 0.0;
    for (r, (row, mask)) in table.scores.iter().zip(gold).enumerate() {
        if mask.len() != row.len() || !mask.iter().any(|&g| g) {
            return Err(Error::InvalidInput(format!("row {r}: empty or misshapen gold set")));
        }
        let good = row.iter().zip(mask).filter(|(_, &g)| g).map(|(&s, _)| s);
        total += log_sum_exp(row.iter().copied()) - log_sum_exp(good);
    }
    Ok(total)
}

/// −Σ_i [y log σ(s_m) + (1 − y) log σ(−s_m)].
pub fn singleton_bce_loss(mention_scores: &[f64], labels: &[bool]) -> f64 {
    mention_scores
        .iter()
        .zip(labels)
        .map(|(&s, &y)| if y { softplus(-s) } else { softplus(s) })
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub model: ModelConfig,
    /// Segments per training window; 6 by default, 8 in heads-only mode.
    pub max_segments: Option<usize>,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Global gradient-norm cap; 0 disables clipping.
    pub clip_norm: f64,
    pub steps: usize,
    pub seed: u64,
    /// Dev evaluation interval in steps; 0 only evaluates at the end.
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ModelConfig::default(),
            max_segments: None,
            learning_rate: 0.02,
            momentum: 0.9,
            clip_norm: 5.0,
            steps: 1000,
            seed: 0,
            eval_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn max_segments(&self) -> usize {
        self.max_segments
            .unwrap_or(if self.model.heads_only { 8 } else { 6 })
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_segments() < 1 {
            return Err(Error::Config("max_segments must be >= 1".into()));
        }
        if self.model.heads_only && self.model.span2head != Span2HeadMode::Off {
            return Err(Error::Config("span2head requires heads_only = false".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config("momentum must lie in [0, 1)".into()));
        }
        if self.clip_norm.is_nan() || self.clip_norm < 0.0 {
            return Err(Error::Config("clip_norm must be >= 0".into()));
        }
        Ok(())
    }

    /// Model keys as in [`ModelConfig::from_kv`] plus `max_segments`,
    /// `learning_rate`, `momentum`, `clip_norm`, `steps`, `seed` and
    /// `eval_every`.
    pub fn from_kv(kv: &KeyValues) -> Result<Self> {
        let d = TrainConfig::default();
        let cfg = TrainConfig {
            model: ModelConfig::from_kv(kv)?,
            max_segments: kv.parse_value("max_segments")?,
            learning_rate: kv.parse_value("learning_rate")?.unwrap_or(d.learning_rate),
            momentum: kv.parse_value("momentum")?.unwrap_or(d.momentum),
            clip_norm: kv.parse_value("clip_norm")?.unwrap_or(d.clip_norm),
            steps: kv.parse_value("steps")?.unwrap_or(d.steps),
            seed: kv.parse_value("seed")?.unwrap_or(d.seed),
            eval_every: kv.parse_value("eval_every")?.unwrap_or(d.eval_every),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn write_kv(&self, kv: &mut KeyValues) {
        self.model.write_kv(kv);
        if let Some(m) = self.max_segments {
            kv.push("max_segments", m);
        }
        kv.push("learning_rate", self.learning_rate);
        kv.push("momentum", self.momentum);
        kv.push("clip_norm", self.clip_norm);
        kv.push("steps", self.steps);
        kv.push("seed", self.seed);
        kv.push("eval_every", self.eval_every);
    }
}

/// A named training corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub name: String,
    pub docs: Vec<Document>,
    /// The corpus marks singletons (it contains at least one).
    pub singletons_annotated: bool,
}

impl Corpus {
    pub fn new(name: impl Into<String>, docs: Vec<Document>) -> Self {
        let singletons_annotated = docs.iter().flat_map(|d| &d.entities).any(|e| e.is_singleton());
        Corpus {
            name: name.into(),
            docs,
            singletons_annotated,
        }
    }

    /// Reads a CoNLL-U file; the corpus is named after the file stem.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let name = path
            .file_stem()
            .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
        Ok(Corpus::new(name, parse_corpus(&text)?))
    }

    /// Language code: the name up to the first `_` or `-`.
    pub fn language(&self) -> &str {
        corpus_language(&self.name)
    }
}

pub fn corpus_language(name: &str) -> &str {
    name.split(['_', '-']).next().unwrap_or(name)
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Exclusion {
    #[default]
    None,
    /// Leave out the corpus with this name.
    Dataset(String),
    /// Leave out every corpus of this language.
    Language(String),
}

impl fmt::Display for Exclusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exclusion::None => f.write_str("none"),
            Exclusion::Dataset(d) => write!(f, "dataset:{d}"),
            Exclusion::Language(l) => write!(f, "language:{l}"),
        }
    }
}

impl std::str::FromStr for Exclusion {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            _ if s == "none" => Ok(Exclusion::None),
            Some(("dataset", d)) if !d.is_empty() => Ok(Exclusion::Dataset(d.into())),
            Some(("language", l)) if !l.is_empty() => Ok(Exclusion::Language(l.into())),
            _ => Err(Error::Config(format!(
                "zero-shot exclusion must be none, dataset:NAME or language:CODE, got {s:?}"
            ))),
        }
    }
}

/// Which corpora to train on.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MixtureSpec {
    pub corpora: Vec<(PathBuf, bool)>,
    pub exclusion: Exclusion,
}

impl MixtureSpec {
    /// `train = path` and `exclude = path` lines (repeatable) and an
    /// optional `zero_shot = dataset:NAME | language:CODE`.
    pub fn from_kv(kv: &KeyValues) -> Result<Self> {
        let mut corpora: Vec<(PathBuf, bool)> = kv.get_all("train").map(|p| (p.into(), true)).collect();
        corpora.extend(kv.get_all("exclude").map(|p| (p.into(), false)));
        let exclusion = kv.parse_value("zero_shot")?.unwrap_or_default();
        Ok(MixtureSpec { corpora, exclusion })
    }

    /// Whether a corpus with this name takes part in training.
    pub fn admits(&self, name: &str) -> bool {
        match &self.exclusion {
            Exclusion::None => true,
            Exclusion::Dataset(d) => name != d,
            Exclusion::Language(l) => corpus_language(name) != l,
        }
    }

    /// Loads every included, admitted corpus.
    pub fn load(&self) -> Result<Vec<Corpus>> {
        let mut out = Vec::new();
        for (path, include) in &self.corpora {
            if !include {
                continue;
            }
            let c = Corpus::load(path)?;
            if self.admits(&c.name) {
                out.push(c);
            } else {
                log::info!("excluding {} from training", c.name);
            }
        }
        if out.is_empty() {
            return Err(Error::Config("the mixture admits no training corpus".into()));
        }
        Ok(out)
    }
}

/// Corpora left after applying an exclusion.
pub fn apply_exclusion(corpora: Vec<Corpus>, exclusion: &Exclusion) -> Vec<Corpus> {
    let spec = MixtureSpec {
        corpora: Vec::new(),
        exclusion: exclusion.clone(),
    };
    corpora.into_iter().filter(|c| spec.admits(&c.name)).collect()
}

/// A block of at most `max_segments` consecutive segments starting at a
/// uniformly drawn segment, with the segment offset. Gold entities keep only
/// their mentions inside the block.
pub fn sample_training_window(
    doc: &Document,
    max_segments: usize,
    segment_length: usize,
    rng: &mut impl Rng,
) -> Result<(Document, usize)> {
    let segs = segment_document(doc, segment_length);
    if segs.len() <= max_segments {
        return Ok((doc.clone(), 0));
    }
    let offset = rng.random_range(0..=segs.len() - max_segments);
    let range = segs[offset].start..segs[offset + max_segments - 1].end;
    Ok((doc.slice(range)?, offset))
}

/// One line of the step log.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub loss: f64,
    pub corpus: String,
    pub dev: Option<f64>,
}

impl StepRecord {
    pub const HEADER: &'static str = "step\tloss\tcorpus\tdev";

    pub fn to_tsv(&self) -> String {
        let dev = self.dev.map_or_else(|| "-".to_string(), |d| d.to_string());
        format!("{}\t{}\t{}\t{}", self.step, self.loss, self.corpus, dev)
    }
}

/// Per-parameter momentum buffers.
struct Optimizer {
    velocity: Vec<Mat>,
    lr: f64,
    momentum: f64,
    clip: f64,
}

impl Optimizer {
    fn new(params: &Parameters, cfg: &TrainConfig) -> Self {
        Optimizer {
            velocity: params.arrays.iter().map(|(_, m)| Mat::zeros(m.rows, m.cols)).collect(),
            lr: cfg.learning_rate,
            momentum: cfg.momentum,
            clip: cfg.clip_norm,
        }
    }

    fn step(&mut self, params: &mut Parameters, grads: &ParamGrads) {
        let norm = grads
            .iter()
            .flatten()
            .flat_map(|g| &g.data)
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt();
        let scale = if self.clip > 0.0 && norm > self.clip { self.clip / norm } else { 1.0 };
        for (i, (_, p)) in params.arrays.iter_mut().enumerate() {
            let v = &mut self.velocity[i];
            let g = grads.get(i).and_then(Option::as_ref);
            for k in 0..p.data.len() {
                let gk = g.map_or(0.0, |g| g.data[k]) * scale;
                v.data[k] = self.momentum * v.data[k] + gk;
                p.data[k] -= self.lr * v.data[k];
            }
        }
    }
}

/// Training data plus what `train` needs to report on it.
pub struct TrainData<'a> {
    pub corpora: &'a [Corpus],
    /// Held-out documents scored every `eval_every` steps and at the end.
    pub dev: &'a [Document],
}

/// Primary score of `model` on `docs`, decoding windows of `max_segments`.
pub fn evaluate(model: &Model, docs: &[Document], max_segments: usize) -> Result<f64> {
    let opts = DecodeOptions {
        max_segments: Some(max_segments),
        ..DecodeOptions::default()
    };
    let pred = docs
        .iter()
        .map(|d| predict_document(model, d, &opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(primary_score(docs, &pred, &ScoringOptions::default())?.primary)
}

/// Gradient descent over documents drawn uniformly from the concatenated
/// corpora, one document per step. Calls `on_step` with every record.
pub fn train(
    model: &mut Model,
    data: &TrainData<'_>,
    cfg: &TrainConfig,
    mut on_step: impl FnMut(&StepRecord),
) -> Result<Vec<StepRecord>> {
    cfg.validate()?;
    if cfg.model.heads_only != model.config.heads_only {
        return Err(Error::Config("train config and model disagree on heads_only".into()));
    }
    let pool: Vec<(usize, &Document)> = data
        .corpora
        .iter()
        .enumerate()
        .flat_map(|(c, corpus)| corpus.docs.iter().map(move |d| (c, d)))
        .collect();
    if pool.is_empty() && cfg.steps > 0 {
        return Err(Error::InvalidInput("no training documents".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Optimizer::new(&model.params, cfg);
    let mut log = Vec::with_capacity(cfg.steps);
    for step in 1..=cfg.steps {
        let &(c, doc) = pool.choose(&mut rng).expect("pool is non-empty");
        let corpus = &data.corpora[c];
        let (window, _) =
            sample_training_window(doc, cfg.max_segments(), model.config.encoder.segment_length, &mut rng)?;
        let ex = model.example(window, true, corpus.singletons_annotated);
        let (loss, grads, _) = model.loss_and_grads(&ex, None)?;
        if !loss.is_finite() {
            return Err(Error::Diverged { step, loss });
        }
        opt.step(&mut model.params, &grads);
        let due = step == cfg.steps || (cfg.eval_every > 0 && step % cfg.eval_every == 0);
        let dev = if due && !data.dev.is_empty() {
            Some(evaluate(model, data.dev, cfg.max_segments())?)
        } else {
            None
        };
        let rec = StepRecord {
            step,
            loss,
            corpus: corpus.name.clone(),
            dev,
        };
        on_step(&rec);
        log.push(rec);
    }
    Ok(log)
}

/// A fresh model whose vocabulary covers the given corpora.
pub fn initial_model(cfg: &TrainConfig, corpora: &[Corpus]) -> Result<Model> {
    let vocab = crate::scorer::Vocab::build(corpora.iter().flat_map(|c| &c.docs));
    Model::new(cfg.model.clone(), vocab, cfg.seed)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    pub epsilon: f64,
    /// Coordinates sampled per array (all when the array is smaller).
    pub coords_per_array: usize,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            epsilon: 1e-4,
            coords_per_array: 32,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayCheck {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: f64,
    /// The analytic gradient is zero on every coordinate.
    pub dead: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub arrays: Vec<ArrayCheck>,
}

impl GradCheckReport {
    pub fn dead_arrays(&self) -> Vec<&str> {
        self.arrays.iter().filter(|a| a.dead).map(|a| a.name.as_str()).collect()
    }
}

/// |a − n| / max(|a|, |n|, 1e-6).
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Analytic gradients (optionally passed through `tamper`) against central
/// differences of the total loss, with pruning frozen at the unperturbed
/// plan. Half of each array's sampled coordinates come from entries with a
/// nonzero analytic gradient.
pub fn finite_difference_check(
    cfg: &ModelConfig,
    params: &Parameters,
    ex: &Example,
    opts: &GradCheckOptions,
    tamper: impl Fn(&str, &mut Mat),
) -> Result<GradCheckReport> {
    let (_, grads, plan) = loss_and_grads(cfg, params, ex, None)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut work = params.clone();
    let mut arrays = Vec::new();
    let mut worst: f64 = 0.0;
    for (i, (name, m)) in params.arrays.iter().enumerate() {
        let mut g = grads[i].clone().unwrap_or_else(|| Mat::zeros(m.rows, m.cols));
        tamper(name, &mut g);
        let n = m.data.len();
        let coords: Vec<usize> = if n <= opts.coords_per_array {
            (0..n).collect()
        } else {
            let nonzero: Vec<usize> = (0..n).filter(|&k| g.data[k] != 0.0).collect();
            let half = opts.coords_per_array / 2;
            let mut picked: HashSet<usize> = nonzero.choose_multiple(&mut rng, half).copied().collect();
            while picked.len() < opts.coords_per_array {
                picked.insert(rng.random_range(0..n));
            }
            let mut v: Vec<usize> = picked.into_iter().collect();
            v.sort_unstable();
            v
        };
        let mut max_err: f64 = 0.0;
        for &k in &coords {
            let orig = m.data[k];
            work.arrays[i].1.data[k] = orig + opts.epsilon;
            let up = loss_value(cfg, &work, ex, &plan)?;
            work.arrays[i].1.data[k] = orig - opts.epsilon;
            let down = loss_value(cfg, &work, ex, &plan)?;
            work.arrays[i].1.data[k] = orig;
            let numeric = (up - down) / (2.0 * opts.epsilon);
            max_err = max_err.max(relative_error(g.data[k], numeric));
        }
        worst = worst.max(max_err);
        arrays.push(ArrayCheck {
            name: name.clone(),
            checked: coords.len(),
            max_rel_error: max_err,
            dead: g.data.iter().all(|&x| x == 0.0),
        });
    }
    Ok(GradCheckReport {
        max_rel_error: worst,
        arrays,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::gradcheck_document;
    use crate::model::{Entity, Mention, Node, NodeId};
    use crate::scorer::{gold_sets, Plan, SingletonMode, Vocab};

    fn table(scores: Vec<Vec<f64>>) -> ScoreTable {
        let n = scores.len();
        ScoreTable {
            spans: (0..n).collect(),
            antecedents: (0..n).map(|i| (0..i).collect()).collect(),
            scores,
            singleton_column: false,
            mention_scores: vec![0.0; n],
        }
    }

    #[test]
    fn marginal_loss_cases() {
        let t = table(vec![vec![0.0]]);
        assert_eq!(marginal_loss(&t, &[vec![true]]).unwrap(), 0.0);
        let t = table(vec![vec![0.0], vec![0.0, 0.0]]);
        let l = marginal_loss(&t, &[vec![true], vec![false, true]]).unwrap();
        assert!((l - 2f64.ln()).abs() < 1e-15);
        // rows: [ε], [ε, 1], [ε, 1, 2]; third row gold = {0, 1}
        let t = table(vec![vec![0.0], vec![0.0, 2.0], vec![0.0, 1.0, -1.0]]);
        let gold = [vec![true], vec![false, true], vec![false, true, true]];
        let r1 = (1.0 + 2f64.exp()).ln() - 2.0;
        let r2 = (1.0 + 1f64.exp() + (-1f64).exp()).ln() - (1f64.exp() + (-1f64).exp()).ln();
        assert!((marginal_loss(&t, &gold).unwrap() - (r1 + r2)).abs() < 1e-14);
        assert!(marginal_loss(&t, &[vec![true], vec![false, false], vec![true, false, false]]).is_err());
    }

    #[test]
    fn bce_cases() {
        let l = singleton_bce_loss(&[0.0, 0.0, 0.0], &[true, false, true]);
        assert!((l - 3.0 * 2f64.ln()).abs() < 1e-15);
        assert!(singleton_bce_loss(&[50.0], &[true]) < 1e-20);
        let s = [1.5, -0.5];
        let hand = -(1.0 / (1.0 + (-1.5f64).exp())).ln() - (1.0 - 1.0 / (1.0 + 0.5f64.exp())).ln();
        assert!((singleton_bce_loss(&s, &[true, false]) - hand).abs() < 1e-14);
    }

    fn tiny() -> ModelConfig {
        ModelConfig {
            encoder: crate::scorer::EncoderConfig {
                vocab_size: 2,
                embedding_dim: 4,
                context_window: 4,
                segment_length: 8,
            },
            hidden_dim: 5,
            width_dim: 3,
            distance_dim: 3,
            max_span_width: 4,
            mention_ratio: 1.0,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn scalar_loss_matches_training_loss() {
        let doc = gradcheck_document();
        for mode in [SingletonMode::Off, SingletonMode::Dummy, SingletonMode::Mentions] {
            let cfg = ModelConfig {
                singleton_mode: mode,
                ..tiny()
            };
            let model = Model::new(cfg, Vocab::build([&doc]), 5).unwrap();
            let ex = model.example(doc.clone(), true, true);
            let t = model.score(&ex).unwrap();
            let plan = Plan {
                kept: t.spans.clone(),
                antecedents: t.antecedents.clone(),
            };
            let gold = ex.gold.as_ref().unwrap();
            let mut expected = marginal_loss(&t, &gold_sets(&plan, gold, t.singleton_column)).unwrap();
            if mode == SingletonMode::Mentions {
                let labels: Vec<bool> = gold.cluster.iter().map(Option::is_some).collect();
                expected += singleton_bce_loss(&t.mention_scores, &labels);
            }
            let got = loss_value(&model.config, &model.params, &ex, &plan).unwrap();
            assert!((got - expected).abs() < 1e-10, "{mode}: {got} vs {expected}");
        }
    }

    #[test]
    fn singletons_do_not_affect_loss_when_off() {
        let doc = gradcheck_document();
        let model = Model::new(tiny(), Vocab::build([&doc]), 2).unwrap();
        let mut stripped = doc.clone();
        stripped.entities.retain(|e| !e.is_singleton());
        let a = model.example(doc, true, true);
        let b = model.example(stripped, true, true);
        let (la, _, plan) = model.loss_and_grads(&a, None).unwrap();
        let lb = loss_value(&model.config, &model.params, &b, &plan).unwrap();
        assert!((la - lb).abs() < 1e-12);
        assert!(la >= 0.0);
    }

    fn long_doc(sentences: usize) -> Document {
        let sents = (0..sentences as u32)
            .map(|s| vec![Node::word(s, 1, "x", 2, "nsubj"), Node::word(s, 2, "y", 0, "root")])
            .collect();
        let m = |s: u32| Mention::new(vec![NodeId::word(s, 1)], NodeId::word(s, 1));
        Document::from_sentences("long", sents, vec![Entity::new("e1", vec![m(0), m(sentences as u32 - 1)])])
    }

    #[test]
    fn window_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let doc = long_doc(3);
        let (w, off) = sample_training_window(&doc, 6, 2, &mut rng).unwrap();
        assert_eq!((w, off), (doc.clone(), 0));
        let doc = long_doc(10);
        let mut offsets = HashSet::new();
        for _ in 0..500 {
            let (w, off) = sample_training_window(&doc, 6, 2, &mut rng).unwrap();
            assert_eq!(w.num_sentences(), 6);
            offsets.insert(off);
        }
        assert_eq!(offsets, (0..=4).collect());
    }

    #[test]
    fn window_restriction_leaves_a_singleton() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let doc = long_doc(10);
        loop {
            let (w, off) = sample_training_window(&doc, 6, 2, &mut rng).unwrap();
            if off == 0 {
                assert_eq!(w.entities.len(), 1);
                assert!(w.entities[0].is_singleton());
                break;
            }
        }
    }

    #[test]
    fn config_parsing_and_validation() {
        let kv = KeyValues::parse("heads_only = true\nsteps = 7\n").unwrap();
        let cfg = TrainConfig::from_kv(&kv).unwrap();
        assert_eq!((cfg.max_segments(), cfg.steps), (8, 7));
        assert_eq!(TrainConfig::default().max_segments(), 6);
        let bad = KeyValues::parse("heads_only = true\nspan2head = binary\n").unwrap();
        assert!(TrainConfig::from_kv(&bad).is_err());
        let mut kv = KeyValues::default();
        cfg.write_kv(&mut kv);
        assert_eq!(TrainConfig::from_kv(&kv).unwrap(), cfg);
    }

    #[test]
    fn mixture_exclusion() {
        let kv = KeyValues::parse("train = a/cs_pdt.conllu\ntrain = b/cs_pcedt.conllu\nexclude = c/en_gum.conllu\nzero_shot = language:cs\n").unwrap();
        let spec = MixtureSpec::from_kv(&kv).unwrap();
        assert_eq!(spec.corpora.len(), 3);
        assert!(!spec.admits("cs_pdt") && spec.admits("en_gum"));
        let corpora = vec![Corpus::new("cs_pdt", vec![]), Corpus::new("de_potsdam", vec![])];
        let kept = apply_exclusion(corpora, &Exclusion::Dataset("cs_pdt".into()));
        assert_eq!(kept.len(), 1);
        assert!("bogus".parse::<Exclusion>().is_err());
    }

    #[test]
    fn zero_steps_leave_parameters_unchanged() {
        let doc = gradcheck_document();
        let corpora = vec![Corpus::new("fx", vec![doc])];
        let cfg = TrainConfig {
            model: tiny(),
            steps: 0,
            ..TrainConfig::default()
        };
        let mut model = initial_model(&cfg, &corpora).unwrap();
        let before = model.params.clone();
        let log = train(&mut model, &TrainData { corpora: &corpora, dev: &[] }, &cfg, |_| {}).unwrap();
        assert!(log.is_empty());
        assert_eq!(model.params, before);
    }

    #[test]
    fn training_is_reproducible_and_reduces_loss() {
        let doc = gradcheck_document();
        let corpora = vec![Corpus::new("fx", vec![doc])];
        let cfg = TrainConfig {
            model: tiny(),
            steps: 60,
            learning_rate: 0.05,
            ..TrainConfig::default()
        };
        let run = || {
            let mut model = initial_model(&cfg, &corpora).unwrap();
            let log = train(&mut model, &TrainData { corpora: &corpora, dev: &[] }, &cfg, |_| {}).unwrap();
            (model, log)
        };
        let (m1, l1) = run();
        let (m2, l2) = run();
        assert_eq!(m1.params, m2.params);
        assert_eq!(l1, l2);
        let first: f64 = l1[..5].iter().map(|r| r.loss).sum();
        let last: f64 = l1[l1.len() - 5..].iter().map(|r| r.loss).sum();
        assert!(last < first, "{first} -> {last}");
    }

    #[test]
    fn gradcheck_and_negative_control() {
        let doc = gradcheck_document();
        let cfg = ModelConfig {
            singleton_mode: SingletonMode::Dummy,
            span2head: Span2HeadMode::Multiclass,
            ..tiny()
        };
        let model = Model::new(cfg, Vocab::build([&doc]), 3).unwrap();
        let ex = model.example(doc, true, true);
        let opts = GradCheckOptions::default();
        let ok = finite_difference_check(&model.config, &model.params, &ex, &opts, |_, _| {}).unwrap();
        assert!(ok.max_rel_error < 1e-6, "{ok:?}");
        let bad = finite_difference_check(&model.config, &model.params, &ex, &opts, |name, g| {
            if name == "mention.w1" {
                g.data.iter_mut().for_each(|x| *x *= 1.5);
            }
        })
        .unwrap();
        assert!(bad.max_rel_error > 1e-2);
    }

    #[test]
    fn zero_model_gradients_agree() {
        let doc = gradcheck_document();
        let model = Model::zeros(tiny(), Vocab::build([&doc])).unwrap();
        let ex = model.example(doc, true, true);
        let r = finite_difference_check(&model.config, &model.params, &ex, &GradCheckOptions::default(), |_, _| {})
            .unwrap();
        assert!(r.max_rel_error < 1e-6);
    }
}
