//! Coreference evaluation: MUC, B³, CEAF-m/e under head or exact matching,
//! the singleton-free primary average, mention overlap ratio and
//! cross-segment statistics.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::hash::Hash;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{Document, Mention, NodeId};
use crate::segment::{segment_document, segment_of_nodes};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MatchMode {
    #[default]
    Head,
    Exact,
}

impl FromStr for MatchMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "head" => Ok(MatchMode::Head),
            "exact" => Ok(MatchMode::Exact),
            _ => Err(Error::Config(format!("unknown match mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ScoringOptions {
    pub match_mode: MatchMode,
    pub keep_singletons: bool,
    /// Drop singletons before head collapsing instead of after.
    pub remove_singletons_first: bool,
}

/// A mention as the scorer sees it: its head, or its full node set.
pub type Key = Vec<NodeId>;

pub fn mention_key(m: &Mention, mode: MatchMode) -> Key {
    match mode {
        MatchMode::Head => vec![m.head],
        MatchMode::Exact => m.nodes.clone(),
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Aligned {
    pub gold: Vec<Vec<Key>>,
    pub system: Vec<Vec<Key>>,
    /// Mentions dropped because their key was already taken on their side.
    pub collapsed: usize,
}

fn keyed_side(doc: &Document, opts: &ScoringOptions) -> (Vec<Vec<Key>>, usize) {
    let mut mentions: Vec<(&Mention, usize)> = doc
        .entities
        .iter()
        .enumerate()
        .filter(|(_, e)| opts.keep_singletons || !opts.remove_singletons_first || e.mentions.len() > 1)
        .flat_map(|(i, e)| e.mentions.iter().map(move |m| (m, i)))
        .collect();
    mentions.sort_by(|a, b| a.0.cmp(b.0).then(a.1.cmp(&b.1)));
    let mut seen = HashSet::new();
    let mut entities: Vec<Vec<Key>> = vec![Vec::new(); doc.entities.len()];
    let mut collapsed = 0;
    for (m, e) in mentions {
        let key = mention_key(m, opts.match_mode);
        if seen.insert(key.clone()) {
            entities[e].push(key);
        } else {
            collapsed += 1;
        }
    }
    let min = if opts.keep_singletons || opts.remove_singletons_first { 1 } else { 2 };
    entities.retain(|e| e.len() >= min);
    (entities, collapsed)
}

/// Keys both sides per match mode, collapses duplicate keys (keeping the
/// earlier mention) and removes singleton entities unless asked to keep
/// them.
pub fn prepare_for_scoring(gold: &Document, system: &Document, opts: &ScoringOptions) -> Aligned {
    let (g, cg) = keyed_side(gold, opts);
    let (s, cs) = keyed_side(system, opts);
    if cg + cs > 0 {
        log::warn!("{}: {} mentions collapsed onto an existing key", gold.doc_id, cg + cs);
    }
    Aligned {
        gold: g,
        system: s,
        collapsed: cg + cs,
    }
}

/// Precision/recall numerators and denominators, summed over documents for
/// micro averages.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Counts {
    pub p_num: f64,
    pub p_den: f64,
    pub r_num: f64,
    pub r_den: f64,
}

impl Counts {
    pub fn add(&mut self, o: &Counts) {
        self.p_num += o.p_num;
        self.p_den += o.p_den;
        self.r_num += o.r_num;
        self.r_den += o.r_den;
    }

    pub fn prf(&self) -> Prf {
        Prf::new(ratio(self.p_num, self.p_den), ratio(self.r_num, self.r_den))
    }
}

fn ratio(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        a / b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn new(precision: f64, recall: f64) -> Self {
        let f1 = if precision == recall {
            precision
        } else if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Prf { precision, recall, f1 }
    }
}

fn membership<K: Hash + Eq>(entities: &[Vec<K>]) -> HashMap<&K, usize> {
    let mut out = HashMap::new();
    for (i, e) in entities.iter().enumerate() {
        for k in e {
            out.insert(k, i);
        }
    }
    out
}

/// Σ (|K_i| − |partition of K_i by R|) and Σ (|K_i| − 1).
fn muc_side<K: Hash + Eq>(key: &[Vec<K>], response: &[Vec<K>]) -> (f64, f64) {
    let owner = membership(response);
    let mut num = 0usize;
    let mut den = 0usize;
    for e in key {
        let mut parts = HashSet::new();
        let mut unmatched = 0;
        for k in e {
            match owner.get(k) {
                Some(&r) => {
                    parts.insert(r);
                }
                None => unmatched += 1,
            }
        }
        num += e.len() - (parts.len() + unmatched);
        den += e.len().saturating_sub(1);
    }
    (num as f64, den as f64)
}

pub fn muc_counts<K: Hash + Eq>(gold: &[Vec<K>], system: &[Vec<K>]) -> Counts {
    let (r_num, r_den) = muc_side(gold, system);
    let (p_num, p_den) = muc_side(system, gold);
    Counts { p_num, p_den, r_num, r_den }
}

pub fn muc<K: Hash + Eq>(gold: &[Vec<K>], system: &[Vec<K>]) -> Prf {
    muc_counts(gold, system).prf()
}

/// Σ over key mentions of |K ∩ R| / |K|, and the key mention count.
fn b3_side<K: Hash + Eq>(key: &[Vec<K>], response: &[Vec<K>]) -> (f64, f64) {
    let owner = membership(response);
    let mut num = 0.0;
    let mut den = 0usize;
    for e in key {
        let mut overlap: HashMap<usize, usize> = HashMap::new();
        for k in e {
            if let Some(&r) = owner.get(k) {
                *overlap.entry(r).or_default() += 1;
            }
        }
        for k in e {
            den += 1;
            if let Some(r) = owner.get(k) {
                num += overlap[r] as f64 / e.len() as f64;
            }
        }
    }
    (num, den as f64)
}

pub fn b_cubed_counts<K: Hash + Eq>(gold: &[Vec<K>], system: &[Vec<K>]) -> Counts {
    let (r_num, r_den) = b3_side(gold, system);
    let (p_num, p_den) = b3_side(system, gold);
    Counts { p_num, p_den, r_num, r_den }
}

pub fn b_cubed<K: Hash + Eq>(gold: &[Vec<K>], system: &[Vec<K>]) -> Prf {
    b_cubed_counts(gold, system).prf()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CeafSimilarity {
    /// φ = |G ∩ S|
    MentionCount,
    /// φ = 2|G ∩ S| / (|G| + |S|)
    EntityF1,
}

fn phi(sim: CeafSimilarity, overlap: usize, g: usize, s: usize) -> f64 {
    match sim {
        CeafSimilarity::MentionCount => overlap as f64,
        CeafSimilarity::EntityF1 => 2.0 * overlap as f64 / (g + s) as f64,
    }
}

/// Similarity matrix φ(G_i, S_j).
pub fn ceaf_similarities<K: Hash + Eq>(gold: &[Vec<K>], system: &[Vec<K>], sim: CeafSimilarity) -> Vec<Vec<f64>> {
    let owner = membership(system);
    gold.iter()
        .map(|g| {
            let mut overlap = vec![0usize; system.len()];
            for k in g {
                if let Some(&j) = owner.get(k) {
                    overlap[j] += 1;
                }
            }
            overlap
                .iter()
                .zip(system)
                .map(|(&o, s)| phi(sim, o, g.len(), s.len()))
                .collect()
        })
        .collect()
}

pub fn ceaf_counts<K: Hash + Eq>(gold: &[Vec<K>], system: &[Vec<K>], sim: CeafSimilarity) -> Counts {
    let weights = ceaf_similarities(gold, system, sim);
    let assignment = max_weight_assignment(&weights);
    let total: f64 = assignment
        .iter()
        .enumerate()
        .filter_map(|(i, j)| j.map(|j| weights[i][j]))
        .sum();
    let self_sim = |e: &Vec<K>| phi(sim, e.len(), e.len(), e.len());
    Counts {
        p_num: total,
        p_den: system.iter().map(self_sim).sum(),
        r_num: total,
        r_den: gold.iter().map(self_sim).sum(),
    }
}

pub fn ceaf<K: Hash + Eq>(gold: &[Vec<K>], system: &[Vec<K>], sim: CeafSimilarity) -> Prf {
    ceaf_counts(gold, system, sim).prf()
}

/// Kuhn-Munkres: the one-to-one assignment of rows to columns maximising
/// the summed weight. Returns the column matched to every row (`None` when
/// rows outnumber columns).
pub fn max_weight_assignment(weights: &[Vec<f64>]) -> Vec<Option<usize>> {
    let n = weights.len();
    let m = weights.first().map_or(0, Vec::len);
    if n == 0 || m == 0 {
        return vec![None; n];
    }
    if n > m {
        let t: Vec<Vec<f64>> = (0..m).map(|j| (0..n).map(|i| weights[i][j]).collect()).collect();
        let cols = max_weight_assignment(&t);
        let mut out = vec![None; n];
        for (j, i) in cols.into_iter().enumerate() {
            if let Some(i) = i {
                out[i] = Some(j);
            }
        }
        return out;
    }
    // potentials over 1-based rows/columns, minimising −weight
    let cost = |i: usize, j: usize| -weights[i - 1][j - 1];
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0, j) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![None; n];
    for j in 1..=m {
        if p[j] != 0 {
            out[p[j] - 1] = Some(j - 1);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricReport {
    pub muc: Prf,
    pub b3: Prf,
    pub ceaf_m: Prf,
    pub ceaf_e: Prf,
    /// Mean F1 of MUC, B³ and CEAF-e.
    pub primary: f64,
}

/// Per-metric counts accumulated over documents.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CorpusCounts {
    pub muc: Counts,
    pub b3: Counts,
    pub ceaf_m: Counts,
    pub ceaf_e: Counts,
}

impl CorpusCounts {
    pub fn of(aligned: &Aligned) -> Self {
        CorpusCounts {
            muc: muc_counts(&aligned.gold, &aligned.system),
            b3: b_cubed_counts(&aligned.gold, &aligned.system),
            ceaf_m: ceaf_counts(&aligned.gold, &aligned.system, CeafSimilarity::MentionCount),
            ceaf_e: ceaf_counts(&aligned.gold, &aligned.system, CeafSimilarity::EntityF1),
        }
    }

    pub fn add(&mut self, o: &CorpusCounts) {
        self.muc.add(&o.muc);
        self.b3.add(&o.b3);
        self.ceaf_m.add(&o.ceaf_m);
        self.ceaf_e.add(&o.ceaf_e);
    }

    pub fn report(&self) -> MetricReport {
        let (muc, b3, ceaf_m, ceaf_e) = (self.muc.prf(), self.b3.prf(), self.ceaf_m.prf(), self.ceaf_e.prf());
        MetricReport {
            muc,
            b3,
            ceaf_m,
            ceaf_e,
            primary: (muc.f1 + b3.f1 + ceaf_e.f1) / 3.0,
        }
    }
}

/// Corpus-level micro scores of `system` against `gold`, documents paired by
/// id.
pub fn primary_score(gold: &[Document], system: &[Document], opts: &ScoringOptions) -> Result<MetricReport> {
    let by_id: HashMap<&str, &Document> = system.iter().map(|d| (d.doc_id.as_str(), d)).collect();
    let gold_ids: HashSet<&str> = gold.iter().map(|d| d.doc_id.as_str()).collect();
    let missing: Vec<&str> = gold
        .iter()
        .map(|d| d.doc_id.as_str())
        .filter(|id| !by_id.contains_key(id))
        .collect();
    let extra: Vec<&str> = system
        .iter()
        .map(|d| d.doc_id.as_str())
        .filter(|id| !gold_ids.contains(id))
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(Error::DocumentMismatch(format!(
            "missing from system: [{}]; missing from gold: [{}]",
            missing.join(", "),
            extra.join(", ")
        )));
    }
    let mut total = CorpusCounts::default();
    for g in gold {
        let aligned = prepare_for_scoring(g, by_id[g.doc_id.as_str()], opts);
        total.add(&CorpusCounts::of(&aligned));
    }
    Ok(total.report())
}

const ROWS: [&str; 4] = ["MUC", "B3", "CEAF-m", "CEAF-e"];

impl MetricReport {
    fn rows(&self) -> [Prf; 4] {
        [self.muc, self.b3, self.ceaf_m, self.ceaf_e]
    }

    /// Aligned plain-text table, percentages with two decimals.
    pub fn to_table(&self) -> String {
        let mut out = format!("{:<8} {:>9} {:>9} {:>9}\n", "metric", "precision", "recall", "f1");
        for (name, p) in ROWS.iter().zip(self.rows()) {
            out.push_str(&format!(
                "{:<8} {:>9.2} {:>9.2} {:>9.2}\n",
                name,
                100.0 * p.precision,
                100.0 * p.recall,
                100.0 * p.f1
            ));
        }
        out.push_str(&format!("{:<8} {:>29.2}\n", "primary", 100.0 * self.primary));
        out
    }

    /// Tab-separated rows `metric P R F1 primary`, full precision.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("metric\tprecision\trecall\tf1\tprimary\n");
        for (name, p) in ROWS.iter().zip(self.rows()) {
            out.push_str(&format!("{name}\t{}\t{}\t{}\t{}\n", p.precision, p.recall, p.f1, self.primary));
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut report = MetricReport::default();
        let mut found = [false; 4];
        let bad = |msg: String| Error::InvalidInput(format!("metric table: {msg}"));
        for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 5 {
                return Err(bad(format!("expected 5 columns in {line:?}")));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("bad number {s:?}")));
            let prf = Prf {
                precision: num(cols[1])?,
                recall: num(cols[2])?,
                f1: num(cols[3])?,
            };
            report.primary = num(cols[4])?;
            let slot = ROWS
                .iter()
                .position(|r| *r == cols[0])
                .ok_or_else(|| bad(format!("unknown metric {:?}", cols[0])))?;
            found[slot] = true;
            match slot {
                0 => report.muc = prf,
                1 => report.b3 = prf,
                2 => report.ceaf_m = prf,
                _ => report.ceaf_e = prf,
            }
        }
        if found.iter().any(|f| !f) {
            return Err(bad("missing metric rows".into()));
        }
        Ok(report)
    }
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_table())
    }
}

/// Token overlap between gold mentions and the system mention sharing their
/// head: Σ|gold ∩ system| / Σ|gold|. Each system mention pairs with at most
/// one gold mention; pairing is greedy in document order.
pub fn mention_overlap_ratio(gold: &[Document], system: &[Document]) -> f64 {
    let by_id: HashMap<&str, &Document> = system.iter().map(|d| (d.doc_id.as_str(), d)).collect();
    let mut overlap = 0usize;
    let mut total = 0usize;
    for g in gold {
        let mut gm: Vec<&Mention> = g.mentions().collect();
        gm.sort();
        let mut sm: Vec<&Mention> = by_id.get(g.doc_id.as_str()).map_or(Vec::new(), |d| d.mentions().collect());
        sm.sort();
        let mut used = vec![false; sm.len()];
        for m in gm {
            total += m.nodes.len();
            if let Some(j) = (0..sm.len()).find(|&j| !used[j] && sm[j].head == m.head) {
                used[j] = true;
                let s: HashSet<&NodeId> = sm[j].nodes.iter().collect();
                overlap += m.nodes.iter().filter(|n| s.contains(n)).count();
            }
        }
    }
    ratio(overlap as f64, total as f64)
}

/// Raw counts behind the long-document statistics, summable over
/// documents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CrossSegmentCounts {
    /// Mention pairs within one entity.
    pub links: usize,
    /// Of those, pairs lying in different N-segment blocks.
    pub cross_links: usize,
    /// Mentions with at least one earlier mention in their entity.
    pub later_mentions: usize,
    /// Of those, mentions whose nearest antecedent is in another block.
    pub nearest_cross: usize,
    pub segments: usize,
    /// Segments after the first block.
    pub segments_over: usize,
}

impl CrossSegmentCounts {
    pub fn add(&mut self, o: &CrossSegmentCounts) {
        self.links += o.links;
        self.cross_links += o.cross_links;
        self.later_mentions += o.later_mentions;
        self.nearest_cross += o.nearest_cross;
        self.segments += o.segments;
        self.segments_over += o.segments_over;
    }

    /// (cross-N link %, nearest-coref-cross-N %, segments-over-N %).
    pub fn percentages(&self) -> (f64, f64, f64) {
        let pct = |a: usize, b: usize| 100.0 * ratio(a as f64, b as f64);
        (
            pct(self.cross_links, self.links),
            pct(self.nearest_cross, self.later_mentions),
            pct(self.segments_over, self.segments),
        )
    }
}

/// Block index (segment / N) of each mention's first node, per entity, in
/// document order.
fn mention_blocks(doc: &Document, n: usize, segment_length: usize) -> Vec<Vec<(Mention, usize)>> {
    let segs = segment_document(doc, segment_length);
    let seg_of = segment_of_nodes(&segs, doc.nodes.len());
    doc.entities
        .iter()
        .map(|e| {
            let mut ms: Vec<(Mention, usize)> = e
                .mentions
                .iter()
                .map(|m| {
                    let block = doc.index_of(m.first()).map_or(0, |i| seg_of[i] / n.max(1));
                    (m.clone(), block)
                })
                .collect();
            ms.sort();
            ms
        })
        .collect()
}

pub fn cross_segment_counts(doc: &Document, n: usize, segment_length: usize) -> CrossSegmentCounts {
    let segments = segment_document(doc, segment_length).len();
    let mut c = CrossSegmentCounts {
        segments,
        segments_over: segments.saturating_sub(n),
        ..Default::default()
    };
    for ms in mention_blocks(doc, n, segment_length) {
        for i in 0..ms.len() {
            for j in 0..i {
                c.links += 1;
                if ms[i].1 != ms[j].1 {
                    c.cross_links += 1;
                }
            }
            if i > 0 {
                c.later_mentions += 1;
                if ms[i].1 != ms[i - 1].1 {
                    c.nearest_cross += 1;
                }
            }
        }
    }
    c
}

/// The three long-document percentages for blocks of `n` segments.
pub fn cross_segment_stats(doc: &Document, n: usize, segment_length: usize) -> (f64, f64, f64) {
    cross_segment_counts(doc, n, segment_length).percentages()
}

/// Recall of gold coreference links whose mentions lie in different
/// N-segment blocks: the fraction whose two mentions (matched by `mode`
/// keys) share a system entity. Returns (recalled, total).
pub fn cross_block_link_recall(
    gold: &Document,
    system: &Document,
    n: usize,
    segment_length: usize,
    mode: MatchMode,
) -> (usize, usize) {
    let mut owner: HashMap<Key, usize> = HashMap::new();
    for (i, e) in system.entities.iter().enumerate() {
        for m in &e.mentions {
            owner.entry(mention_key(m, mode)).or_insert(i);
        }
    }
    let mut hit = 0;
    let mut total = 0;
    for ms in mention_blocks(gold, n, segment_length) {
        for i in 0..ms.len() {
            for j in 0..i {
                if ms[i].1 == ms[j].1 {
                    continue;
                }
                total += 1;
                let a = owner.get(&mention_key(&ms[i].0, mode));
                let b = owner.get(&mention_key(&ms[j].0, mode));
                if a.is_some() && a == b {
                    hit += 1;
                }
            }
        }
    }
    (hit, total)
}
