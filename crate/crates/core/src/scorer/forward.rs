use super::config::{distance_bucket, ModelConfig, SingletonMode, Span2HeadMode, VIRTUAL_DISTANCE_BUCKET};
use super::example::{Example, Gold};
use super::params::Parameters;
use crate::error::{Error, Result};
use crate::tensor::{sigmoid, softmax, Mat, ParamGrads, Tape, Var};

/// Pruning decisions: which candidates survive and which earlier survivors
/// each may link to.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Plan {
    /// Surviving candidate indices, ascending.
    pub kept: Vec<usize>,
    /// Per survivor, positions (into `kept`) of its antecedent candidates,
    /// ascending.
    pub antecedents: Vec<Vec<usize>>,
}

/// Scores of every survivor against its antecedent candidates.
///
/// Row layout: column 0 is the dummy antecedent ε (always exactly 0), then
/// the singleton antecedent when the mode has one, then the real
/// antecedents in `antecedents` order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreTable {
    pub spans: Vec<usize>,
    pub antecedents: Vec<Vec<usize>>,
    pub scores: Vec<Vec<f64>>,
    pub singleton_column: bool,
    /// s_m of every candidate, pruned or not.
    pub mention_scores: Vec<f64>,
}

impl ScoreTable {
    /// Column index of the first real antecedent.
    pub fn first_antecedent_column(&self) -> usize {
        1 + usize::from(self.singleton_column)
    }

    /// P(y | i) over the row's columns.
    pub fn probabilities(&self, row: usize) -> Vec<f64> {
        softmax(&self.scores[row])
    }
}

/// Lazily binds named parameters into a tape, once each.
pub(crate) struct Binder<'a> {
    params: &'a Parameters,
    vars: Vec<Option<Var>>,
}

impl<'a> Binder<'a> {
    pub(crate) fn new(params: &'a Parameters) -> Self {
        Binder {
            params,
            vars: vec![None; params.arrays.len()],
        }
    }

    pub(crate) fn get(&mut self, tape: &mut Tape<'a>, name: &str) -> Result<Var> {
        let i = self
            .params
            .index(name)
            .ok_or_else(|| Error::Config(format!("parameter {name} is not allocated by this configuration")))?;
        if let Some(v) = self.vars[i] {
            return Ok(v);
        }
        let v = tape.param(i, &self.params.arrays[i].1);
        self.vars[i] = Some(v);
        Ok(v)
    }
}

/// One hidden tanh layer: `tanh(x·w1 + b1)·w2 + b2`.
pub(crate) fn ffnn<'a>(tape: &mut Tape<'a>, b: &mut Binder<'a>, prefix: &str, x: Var) -> Result<Var> {
    let w1 = b.get(tape, &format!("{prefix}.w1"))?;
    let b1 = b.get(tape, &format!("{prefix}.b1"))?;
    let w2 = b.get(tape, &format!("{prefix}.w2"))?;
    let b2 = b.get(tape, &format!("{prefix}.b2"))?;
    let h = tape.matmul(x, w1);
    let h = tape.add_row(h, b1);
    let h = tape.tanh(h);
    let o = tape.matmul(h, w2);
    Ok(tape.add_row(o, b2))
}

/// Sinusoidal position table, scaled down so it does not swamp embeddings.
pub(crate) fn positional(positions: &[usize], dim: usize) -> Mat {
    let mut m = Mat::zeros(positions.len(), dim);
    for (r, &p) in positions.iter().enumerate() {
        for c in 0..dim {
            let k = (c / 2) as f64;
            let angle = p as f64 / 10000f64.powf(2.0 * k / dim as f64);
            let v = if c % 2 == 0 { angle.sin() } else { angle.cos() };
            m.set(r, c, 0.1 * v);
        }
    }
    m
}

pub(crate) struct Forward<'a> {
    pub tape: Tape<'a>,
    pub binder: Binder<'a>,
    /// Encoded tokens (nodes × token_dim).
    pub x: Var,
    /// Span representations of all candidates.
    pub g: Var,
    /// Mention scores of all candidates (column).
    pub sm: Var,
    /// Survivor × column score matrix.
    pub scores: Var,
    pub plan: Plan,
    pub valid: Vec<bool>,
    pub cols: usize,
}

pub(crate) fn encode<'a>(cfg: &ModelConfig, tape: &mut Tape<'a>, b: &mut Binder<'a>, ex: &Example) -> Result<Var> {
    let emb = b.get(tape, "tok_emb")?;
    let x0 = tape.gather_rows(emb, &ex.token_ids);
    let pos = tape.constant(positional(&ex.positions, cfg.encoder.embedding_dim));
    let x0 = tape.add(x0, pos);
    let wq = b.get(tape, "attn_q")?;
    let wk = b.get(tape, "attn_k")?;
    let wv = b.get(tape, "attn_v")?;
    let wo = b.get(tape, "attn_o")?;
    let q = tape.matmul(x0, wq);
    let k = tape.matmul(x0, wk);
    let v = tape.matmul(x0, wv);
    let a = tape.local_attention(q, k, v, ex.windows.clone());
    let a = tape.matmul(a, wo);
    let h = tape.add(x0, a);
    if cfg.tree_features.is_none() {
        return Ok(h);
    }
    let rel = b.get(tape, "deprel_emb")?;
    let mut parts = vec![h];
    for (nodes, rels) in ex.paths.iter().zip(&ex.path_deprels) {
        parts.push(tape.gather(h, nodes.clone()));
        parts.push(tape.gather_rows(rel, rels));
    }
    Ok(tape.concat(&parts))
}

pub(crate) fn span_reps<'a>(cfg: &ModelConfig, tape: &mut Tape<'a>, b: &mut Binder<'a>, ex: &Example, x: Var) -> Result<Var> {
    let starts: Vec<usize> = ex.candidates.iter().map(|c| c.start).collect();
    if cfg.heads_only {
        return Ok(tape.gather_rows(x, &starts));
    }
    let ends: Vec<usize> = ex.candidates.iter().map(|c| c.end).collect();
    let widths: Vec<usize> = ex.candidates.iter().map(|c| c.end - c.start).collect();
    let ranges = ex.candidates.iter().map(|c| (c.start, c.end)).collect();
    let xs = tape.gather_rows(x, &starts);
    let xe = tape.gather_rows(x, &ends);
    let w = b.get(tape, "span_attn")?;
    let logits = tape.matmul(x, w);
    let hat = tape.span_attend(x, logits, ranges);
    let wemb = b.get(tape, "width_emb")?;
    let wid = tape.gather_rows(wemb, &widths);
    Ok(tape.concat(&[xs, xe, hat, wid]))
}

/// Indices of the `⌈ratio·num_words⌉` best-scoring candidates, ascending.
/// Ties prefer the earlier candidate.
pub fn select_kept(mention_scores: &[f64], num_words: usize, ratio: f64) -> Vec<usize> {
    let k = ((ratio * num_words as f64).ceil() as usize).min(mention_scores.len());
    let mut order: Vec<usize> = (0..mention_scores.len()).collect();
    order.sort_by(|&a, &b| mention_scores[b].total_cmp(&mention_scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    order.sort_unstable();
    order
}

/// For each survivor, the `c` earlier survivors with the highest
/// `s_m(i) + s_m(j) + g_i·W_c·g_j`, ascending. Ties prefer the nearer one.
///
/// `gw` holds the rows `g_i·W_c` and `g` the rows `g_j` of the survivors.
pub fn select_antecedents_coarse(kept_scores: &[f64], gw: &Mat, g: &Mat, c: usize) -> Vec<Vec<usize>> {
    let k = kept_scores.len();
    (0..k)
        .map(|i| {
            let mut cands: Vec<(f64, usize)> = (0..i)
                .map(|j| {
                    let coarse: f64 = gw.row(i).iter().zip(g.row(j)).map(|(a, b)| a * b).sum();
                    (kept_scores[i] + kept_scores[j] + coarse, j)
                })
                .collect();
            cands.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.cmp(&a.1)));
            cands.truncate(c);
            let mut ants: Vec<usize> = cands.into_iter().map(|(_, j)| j).collect();
            ants.sort_unstable();
            ants
        })
        .collect()
}

pub(crate) fn forward<'a>(
    cfg: &ModelConfig,
    params: &'a Parameters,
    ex: &Example,
    plan: Option<&Plan>,
) -> Result<Forward<'a>> {
    let mut tape = Tape::new(params.arrays.len());
    let mut b = Binder::new(params);
    let x = encode(cfg, &mut tape, &mut b, ex)?;
    let g = span_reps(cfg, &mut tape, &mut b, ex, x)?;
    let sm = ffnn(&mut tape, &mut b, "mention", g)?;

    let kept = match plan {
        Some(p) => p.kept.clone(),
        None => select_kept(&tape.value(sm).data, ex.num_words(), cfg.mention_ratio),
    };
    let gk = tape.gather_rows(g, &kept);
    let wc = b.get(&mut tape, "coarse")?;
    let gkw = tape.matmul(gk, wc);
    let smk = tape.gather_rows(sm, &kept);
    let antecedents = match plan {
        Some(p) => p.antecedents.clone(),
        None => select_antecedents_coarse(
            &tape.value(smk).data,
            tape.value(gkw),
            tape.value(gk),
            cfg.max_antecedents,
        ),
    };
    let plan = Plan { kept, antecedents };

    let single = cfg.singleton_mode.has_virtual_antecedent();
    let first = 1 + usize::from(single);
    let k = plan.kept.len();
    let cols = first + plan.antecedents.iter().map(Vec::len).max().unwrap_or(0);
    let mut valid = vec![false; k * cols];
    let mut pair_i = Vec::new();
    let mut pair_j = Vec::new();
    let mut buckets = Vec::new();
    let mut positions = Vec::new();
    for (r, ants) in plan.antecedents.iter().enumerate() {
        valid[r * cols] = true;
        if single {
            valid[r * cols + 1] = true;
        }
        for (a, &j) in ants.iter().enumerate() {
            pair_i.push(r);
            pair_j.push(j);
            let d = ex.candidates[plan.kept[r]].start - ex.candidates[plan.kept[j]].start;
            buckets.push(distance_bucket(d));
            positions.push((r, first + a));
            valid[r * cols + first + a] = true;
        }
    }

    let demb = b.get(&mut tape, "distance_emb")?;
    let gi = tape.gather_rows(gk, &pair_i);
    let gj = tape.gather_rows(gk, &pair_j);
    let prod = tape.mul(gi, gj);
    let dist = tape.gather_rows(demb, &buckets);
    let feat = tape.concat(&[gi, gj, prod, dist]);
    let sa = ffnn(&mut tape, &mut b, "antecedent", feat)?;
    let gwi = tape.gather_rows(gkw, &pair_i);
    let coarse = tape.row_dot(gwi, gj);
    let smi = tape.gather_rows(smk, &pair_i);
    let smj = tape.gather_rows(smk, &pair_j);
    let total = tape.add(smi, smj);
    let total = tape.add(total, sa);
    let total = tape.add(total, coarse);
    let mut scores = tape.scatter(total, k, cols, positions);

    if single {
        let s = singleton_column(cfg, &mut tape, &mut b, gk, gkw, smk, k)?;
        let placed = tape.scatter(s, k, cols, (0..k).map(|r| (r, 1)).collect());
        scores = tape.add(scores, placed);
    }

    Ok(Forward {
        tape,
        binder: b,
        x,
        g,
        sm,
        scores,
        plan,
        valid,
        cols,
    })
}

/// Score of every survivor against the trained singleton antecedent.
fn singleton_column<'a>(
    cfg: &ModelConfig,
    tape: &mut Tape<'a>,
    b: &mut Binder<'a>,
    gk: Var,
    gkw: Var,
    smk: Var,
    k: usize,
) -> Result<Var> {
    let es = b.get(tape, "singleton_emb")?;
    let broadcast = vec![Some(0); k];
    match cfg.singleton_mode {
        SingletonMode::Dummy | SingletonMode::Mask => {
            let sme = ffnn(tape, b, "mention", es)?;
            let sme = tape.gather(sme, broadcast.clone());
            let base = tape.add(smk, sme);
            if cfg.singleton_mode == SingletonMode::Mask {
                return Ok(base);
            }
            let esb = tape.gather(es, broadcast);
            let demb = b.get(tape, "distance_emb")?;
            let dist = tape.gather_rows(demb, &vec![VIRTUAL_DISTANCE_BUCKET; k]);
            let prod = tape.mul(gk, esb);
            let feat = tape.concat(&[gk, esb, prod, dist]);
            let sa = ffnn(tape, b, "antecedent", feat)?;
            let coarse = tape.row_dot(gkw, esb);
            let t = tape.add(base, sa);
            Ok(tape.add(t, coarse))
        }
        SingletonMode::Separate => {
            let si = ffnn(tape, b, "singleton", gk)?;
            let se = ffnn(tape, b, "singleton", es)?;
            let se = tape.gather(se, broadcast);
            Ok(tape.add(si, se))
        }
        SingletonMode::Off | SingletonMode::Mentions => unreachable!("mode has no virtual antecedent"),
    }
}

impl Forward<'_> {
    pub(crate) fn table(&self) -> ScoreTable {
        let s = self.tape.value(self.scores);
        let first = self.cols - self.plan.antecedents.iter().map(Vec::len).max().unwrap_or(0);
        let scores = self
            .plan
            .antecedents
            .iter()
            .enumerate()
            .map(|(r, ants)| s.row(r)[..first + ants.len()].to_vec())
            .collect();
        ScoreTable {
            spans: self.plan.kept.clone(),
            antecedents: self.plan.antecedents.clone(),
            scores,
            singleton_column: first == 2,
            mention_scores: self.tape.value(self.sm).data.clone(),
        }
    }

    /// Per-row gold mask over the score matrix.
    pub(crate) fn gold_mask(&self, cfg: &ModelConfig, ex: &Example) -> Result<Vec<bool>> {
        let gold = ex
            .gold
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("example has no gold annotation".into()))?;
        let sets = gold_sets(&self.plan, gold, cfg.singleton_mode.has_virtual_antecedent());
        let mut mask = vec![false; self.valid.len()];
        for (r, row) in sets.iter().enumerate() {
            mask[r * self.cols..r * self.cols + row.len()].copy_from_slice(row);
        }
        Ok(mask)
    }

    /// Total training loss: the marginal log-likelihood, plus the mention
    /// cross-entropy in mentions mode, plus the Span2Head loss.
    pub(crate) fn loss(&mut self, cfg: &ModelConfig, ex: &Example) -> Result<Var> {
        let mask = self.gold_mask(cfg, ex)?;
        let gold = ex.gold.as_ref().expect("checked by gold_mask");
        let mut parts = vec![self.tape.marginal_nll(self.scores, self.valid.clone(), mask)];
        if cfg.singleton_mode == SingletonMode::Mentions && gold.singletons_annotated {
            let n = ex.candidates.len();
            let targets = gold.cluster.iter().map(|c| if c.is_some() { 1.0 } else { 0.0 }).collect();
            parts.push(self.tape.bce(self.sm, targets, vec![true; n]));
        }
        if cfg.span2head != Span2HeadMode::Off {
            let spans: Vec<(usize, usize)> = gold
                .cluster
                .iter()
                .zip(&gold.head_offset)
                .enumerate()
                .filter_map(|(k, (c, h))| c.and(*h).map(|h| (k, h)))
                .collect();
            if !spans.is_empty() {
                let idx: Vec<usize> = spans.iter().map(|&(k, _)| k).collect();
                let logits = self.span2head_logits(cfg, ex, &idx)?;
                let mut targets = Vec::new();
                let mut mask = Vec::new();
                match cfg.span2head {
                    Span2HeadMode::Multiclass => {
                        for &(k, h) in &spans {
                            let w = ex.candidates[k].width();
                            for p in 0..cfg.max_span_width {
                                targets.push(if p == h { 1.0 } else { 0.0 });
                                mask.push(p < w);
                            }
                        }
                    }
                    Span2HeadMode::Binary => {
                        for &(k, h) in &spans {
                            for p in 0..ex.candidates[k].width() {
                                targets.push(if p == h { 1.0 } else { 0.0 });
                                mask.push(true);
                            }
                        }
                    }
                    Span2HeadMode::Off => unreachable!(),
                }
                parts.push(self.tape.bce(logits, targets, mask));
            }
        }
        Ok(self.tape.sum(&parts))
    }

    /// Head logits for the given candidates. Multiclass: one row per
    /// candidate over relative positions. Binary: one row per (candidate,
    /// position) pair, positions in span order.
    pub(crate) fn span2head_logits(&mut self, cfg: &ModelConfig, ex: &Example, idx: &[usize]) -> Result<Var> {
        let tape = &mut self.tape;
        let b = &mut self.binder;
        match cfg.span2head {
            Span2HeadMode::Multiclass => {
                let gs = tape.gather_rows(self.g, idx);
                ffnn(tape, b, "span2head", gs)
            }
            Span2HeadMode::Binary => {
                let mut span_rows = Vec::new();
                let mut tok_rows = Vec::new();
                for &k in idx {
                    let c = ex.candidates[k];
                    for t in c.start..=c.end {
                        span_rows.push(k);
                        tok_rows.push(t);
                    }
                }
                let gs = tape.gather_rows(self.g, &span_rows);
                let xt = tape.gather_rows(self.x, &tok_rows);
                let feat = tape.concat(&[gs, xt]);
                ffnn(tape, b, "span2head", feat)
            }
            Span2HeadMode::Off => Err(Error::Config("span2head is off".into())),
        }
    }

    /// Head probabilities per requested candidate, one per position.
    pub(crate) fn span2head_probs(&mut self, cfg: &ModelConfig, ex: &Example, idx: &[usize]) -> Result<Vec<Vec<f64>>> {
        if idx.is_empty() {
            return Ok(Vec::new());
        }
        let logits = self.span2head_logits(cfg, ex, idx)?;
        let l = self.tape.value(logits);
        let mut out = Vec::new();
        let mut row = 0;
        for &k in idx {
            let w = ex.candidates[k].width().min(cfg.max_span_width);
            let probs = match cfg.span2head {
                Span2HeadMode::Multiclass => {
                    let p = l.row(out.len())[..w].iter().map(|&v| sigmoid(v)).collect();
                    p
                }
                _ => {
                    let w = ex.candidates[k].width();
                    let p = (row..row + w).map(|r| sigmoid(l.data[r])).collect();
                    row += w;
                    p
                }
            };
            out.push(probs);
        }
        Ok(out)
    }

    pub(crate) fn backward(&self, loss: Var) -> ParamGrads {
        self.tape.backward(loss)
    }
}

/// GOLD(i) of every survivor as a mask over its row (`[ε, singleton?,
/// antecedents…]`): same-entity antecedents, else the singleton column for
/// annotated gold singletons, else ε.
pub fn gold_sets(plan: &Plan, gold: &Gold, singleton_column: bool) -> Vec<Vec<bool>> {
    let first = 1 + usize::from(singleton_column);
    plan.antecedents
        .iter()
        .enumerate()
        .map(|(r, ants)| {
            let own = gold.cluster[plan.kept[r]];
            let mut row = vec![false; first + ants.len()];
            for (a, &j) in ants.iter().enumerate() {
                row[first + a] = own.is_some() && gold.cluster[plan.kept[j]] == own;
            }
            if !row.iter().any(|&b| b) {
                let is_singleton = own.is_some_and(|e| gold.singleton_entity[e]);
                let col = usize::from(singleton_column && gold.singletons_annotated && is_singleton);
                row[col] = true;
            }
            row
        })
        .collect()
}

/// Positions whose probability exceeds 0.5, or the argmax alone when none
/// does.
pub fn threshold_heads(probs: &[f64]) -> Vec<usize> {
    let above: Vec<usize> = (0..probs.len()).filter(|&p| probs[p] > 0.5).collect();
    if !above.is_empty() || probs.is_empty() {
        return above;
    }
    vec![argmax(probs)]
}

/// Index of the first maximum.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}
