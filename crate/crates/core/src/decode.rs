//! From score tables to clusters: antecedent selection, clustering,
//! singleton emission and overlapping-segment decoding of long documents.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use petgraph::unionfind::UnionFind;

use crate::error::{Error, Result};
use crate::model::{Document, Entity, Mention, NodeId};
use crate::scorer::{argmax, Model, ScoreTable, SingletonMode};
use crate::segment::segment_document;
use crate::tensor::sigmoid;

/// What one kept span resolved to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    /// The dummy antecedent: not a mention unless something links to it.
    None,
    /// A singleton mention.
    Singleton,
    /// Links to the kept span at this position.
    Antecedent(usize),
}

/// Highest-scoring column of every row (the earliest on ties, so ε wins
/// against equal scores).
pub fn select_antecedents(table: &ScoreTable, mode: SingletonMode) -> Vec<Decision> {
    let first = table.first_antecedent_column();
    table
        .scores
        .iter()
        .enumerate()
        .map(|(r, row)| {
            let col = argmax(row);
            if col >= first {
                Decision::Antecedent(table.antecedents[r][col - first])
            } else if (col == 1 && table.singleton_column)
                || (mode == SingletonMode::Mentions && sigmoid(table.mention_scores[table.spans[r]]) > 0.5)
            {
                Decision::Singleton
            } else {
                Decision::None
            }
        })
        .collect()
}

/// Groups decisions into clusters of row positions. A row is emitted when it
/// links, is linked to, or is a singleton. Members ascend; clusters are
/// ordered by first member.
pub fn build_clusters(decisions: &[Decision]) -> Vec<Vec<usize>> {
    let n = decisions.len();
    let mut uf = UnionFind::<usize>::new(n);
    let mut emitted = vec![false; n];
    for (i, d) in decisions.iter().enumerate() {
        match *d {
            Decision::Antecedent(j) => {
                uf.union(i, j);
                emitted[i] = true;
                emitted[j] = true;
            }
            Decision::Singleton => emitted[i] = true,
            Decision::None => {}
        }
    }
    let mut by_root: HashMap<usize, usize> = HashMap::new();
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for i in (0..n).filter(|&i| emitted[i]) {
        let slot = *by_root.entry(uf.find(i)).or_insert_with(|| {
            clusters.push(Vec::new());
            clusters.len() - 1
        });
        clusters[slot].push(i);
    }
    clusters
}

/// Clusters of mentions plus the example each mention came from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClusterSet {
    pub clusters: Vec<Vec<Mention>>,
    pub provenance: HashMap<Mention, usize>,
}

impl ClusterSet {
    /// Sorts mentions within clusters and clusters by first mention.
    pub fn normalize(&mut self) {
        for c in &mut self.clusters {
            c.sort();
        }
        self.clusters.retain(|c| !c.is_empty());
        self.clusters.sort_by(|a, b| a[0].cmp(&b[0]));
    }

    pub fn num_mentions(&self) -> usize {
        self.clusters.iter().map(Vec::len).sum()
    }

    /// Entities `e1, e2, …` in cluster order.
    pub fn to_entities(&self) -> Vec<Entity> {
        self.clusters
            .iter()
            .enumerate()
            .map(|(i, c)| Entity::new(format!("e{}", i + 1), c.clone()))
            .collect()
    }
}

/// Decodes one document (or window) in a single pass.
pub fn decode_document(model: &Model, doc: &Document, example_index: usize) -> Result<ClusterSet> {
    let ex = model.example(doc.clone(), false, false);
    let (table, heads) = model.score_with_heads(&ex)?;
    let decisions = select_antecedents(&table, model.config.singleton_mode);
    let mut set = ClusterSet::default();
    for rows in build_clusters(&decisions) {
        let mut cluster: Vec<Mention> = Vec::new();
        for r in rows {
            let head = heads.as_ref().map(|h| h[r]);
            let m = ex.mention(ex.candidates[table.spans[r]], model.config.heads_only, head);
            // heads-only subtrees of distinct heads never coincide, but
            // keep clusters disjoint regardless
            if set.provenance.contains_key(&m) || cluster.contains(&m) {
                continue;
            }
            cluster.push(m);
        }
        for m in &cluster {
            set.provenance.insert(m.clone(), example_index);
        }
        set.clusters.push(cluster);
    }
    set.normalize();
    Ok(set)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OverlapMode {
    #[default]
    None,
    /// Consecutive windows share one segment.
    Min,
    /// Each window adds a single new segment.
    Max,
}

impl fmt::Display for OverlapMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OverlapMode::None => "none",
            OverlapMode::Min => "min",
            OverlapMode::Max => "max",
        })
    }
}

impl FromStr for OverlapMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(OverlapMode::None),
            "min" => Ok(OverlapMode::Min),
            "max" => Ok(OverlapMode::Max),
            _ => Err(Error::Config(format!("unknown overlap mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverlapPlan {
    /// Inclusive segment ranges, one per example.
    pub windows: Vec<(usize, usize)>,
    pub mode: OverlapMode,
    pub filter_seen: bool,
}

impl OverlapPlan {
    /// First segment of window `k` not covered by window `k − 1`.
    pub fn first_new_segment(&self, k: usize) -> usize {
        if k == 0 {
            self.windows[0].0
        } else {
            self.windows[k - 1].1 + 1
        }
    }
}

pub fn plan_overlap(num_segments: usize, max_segments: usize, mode: OverlapMode) -> Result<OverlapPlan> {
    if max_segments == 0 {
        return Err(Error::Config("max_segments must be positive".into()));
    }
    if mode != OverlapMode::None && max_segments < 2 {
        return Err(Error::Config(format!(
            "{mode} overlap needs max_segments >= 2, got {max_segments}"
        )));
    }
    let stride = match mode {
        OverlapMode::None => max_segments,
        OverlapMode::Min => max_segments - 1,
        OverlapMode::Max => 1,
    };
    let mut windows = Vec::new();
    let mut start = 0;
    loop {
        let end = (start + max_segments).min(num_segments.max(1)) - 1;
        windows.push((start, end));
        if end + 1 >= num_segments {
            break;
        }
        start += stride;
    }
    Ok(OverlapPlan {
        windows,
        mode,
        filter_seen: false,
    })
}

/// Joins per-window clusters into document clusters. A mention with the
/// same node set as one already placed unions the two clusters. With
/// `filter_seen`, a later window's clusters without any mention starting in
/// its new segments are dropped first. `segment_of` maps a node to its
/// segment.
pub fn merge_overlapping_clusters(
    examples: &[ClusterSet],
    plan: &OverlapPlan,
    segment_of: impl Fn(NodeId) -> usize,
) -> ClusterSet {
    let mut mentions: Vec<Mention> = Vec::new();
    let mut index: HashMap<Vec<NodeId>, usize> = HashMap::new();
    let mut uf = UnionFind::<usize>::new(examples.iter().map(ClusterSet::num_mentions).sum());
    let mut provenance = HashMap::new();
    for (k, set) in examples.iter().enumerate() {
        let new_from = plan.first_new_segment(k.min(plan.windows.len().saturating_sub(1)));
        for cluster in &set.clusters {
            if k > 0 && plan.filter_seen && !cluster.iter().any(|m| segment_of(m.first()) >= new_from) {
                continue;
            }
            let mut anchor: Option<usize> = None;
            for m in cluster {
                let id = match index.get(&m.nodes) {
                    Some(&id) => id,
                    None => {
                        let id = mentions.len();
                        index.insert(m.nodes.clone(), id);
                        mentions.push(m.clone());
                        provenance.insert(m.clone(), set.provenance.get(m).copied().unwrap_or(k));
                        id
                    }
                };
                match anchor {
                    Some(a) => {
                        uf.union(a, id);
                    }
                    None => anchor = Some(id),
                }
            }
        }
    }
    let mut by_root: HashMap<usize, usize> = HashMap::new();
    let mut clusters: Vec<Vec<Mention>> = Vec::new();
    for (id, m) in mentions.into_iter().enumerate() {
        let slot = *by_root.entry(uf.find(id)).or_insert_with(|| {
            clusters.push(Vec::new());
            clusters.len() - 1
        });
        clusters[slot].push(m);
    }
    let mut out = ClusterSet { clusters, provenance };
    out.normalize();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodeOptions {
    /// Segments per example; `None` decodes the whole document at once.
    pub max_segments: Option<usize>,
    pub overlap: OverlapMode,
    pub filter_seen: bool,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        DecodeOptions {
            max_segments: None,
            overlap: OverlapMode::None,
            filter_seen: false,
        }
    }
}

/// Clusters of a document, decoded window by window when it has more
/// segments than `max_segments`.
pub fn decode_windows(model: &Model, doc: &Document, opts: &DecodeOptions) -> Result<ClusterSet> {
    let segs = segment_document(doc, model.config.encoder.segment_length);
    let Some(max) = opts.max_segments else {
        return decode_document(model, doc, 0);
    };
    let mut plan = plan_overlap(segs.len(), max, opts.overlap)?;
    plan.filter_seen = opts.filter_seen;
    if plan.windows.len() <= 1 {
        return decode_document(model, doc, 0);
    }
    let mut sets = Vec::with_capacity(plan.windows.len());
    for (k, &(a, b)) in plan.windows.iter().enumerate() {
        let window = doc.slice(segs[a].start..segs[b].end)?;
        sets.push(decode_document(model, &window, k)?);
    }
    let seg_of_node: HashMap<NodeId, usize> = segs
        .iter()
        .enumerate()
        .flat_map(|(s, r)| r.clone().map(move |i| (i, s)))
        .map(|(i, s)| (doc.nodes[i].id, s))
        .collect();
    Ok(merge_overlapping_clusters(&sets, &plan, |n| {
        seg_of_node.get(&n).copied().unwrap_or(0)
    }))
}

/// The document with its entities replaced by predicted ones.
pub fn predict_document(model: &Model, doc: &Document, opts: &DecodeOptions) -> Result<Document> {
    let set = decode_windows(model, doc, opts)?;
    let mut out = doc.clone();
    out.entities = set.to_entities();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NodeId;

    fn table(scores: Vec<Vec<f64>>, antecedents: Vec<Vec<usize>>, singleton_column: bool) -> ScoreTable {
        let n = scores.len();
        ScoreTable {
            spans: (0..n).collect(),
            antecedents,
            scores,
            singleton_column,
            mention_scores: vec![0.0; n],
        }
    }

    #[test]
    fn negative_scores_fall_to_dummy() {
        let t = table(
            vec![vec![0.0], vec![0.0, -1.0], vec![0.0, -2.0, -0.5]],
            vec![vec![], vec![0], vec![0, 1]],
            false,
        );
        let d = select_antecedents(&t, SingletonMode::Off);
        assert!(d.iter().all(|d| *d == Decision::None));
        assert!(build_clusters(&d).is_empty());
    }

    #[test]
    fn mention_score_emits_singleton() {
        let mut t = table(vec![vec![0.0]], vec![vec![]], false);
        t.mention_scores = vec![(0.9f64 / 0.1).ln()];
        assert_eq!(select_antecedents(&t, SingletonMode::Mentions), vec![Decision::Singleton]);
        assert_eq!(select_antecedents(&t, SingletonMode::Off), vec![Decision::None]);
        t.mention_scores = vec![-1.0];
        assert_eq!(select_antecedents(&t, SingletonMode::Mentions), vec![Decision::None]);
    }

    #[test]
    fn four_span_hand_decoding() {
        // rows: [ε, singleton, antecedents…]
        let t = table(
            vec![
                vec![0.0, 1.0],
                vec![0.0, -1.0, 2.0],
                vec![0.0, -1.0, -3.0, -2.0],
                vec![0.0, -5.0, 0.5, 3.0, 1.0],
            ],
            vec![vec![], vec![0], vec![0, 1], vec![0, 1, 2]],
            true,
        );
        let d = select_antecedents(&t, SingletonMode::Dummy);
        assert_eq!(
            d,
            vec![
                Decision::Singleton,
                Decision::Antecedent(0),
                Decision::None,
                Decision::Antecedent(1)
            ]
        );
        assert_eq!(build_clusters(&d), vec![vec![0, 1, 3]]);
    }

    #[test]
    fn transitive_links() {
        let d = [Decision::None, Decision::Antecedent(0), Decision::Antecedent(1)];
        assert_eq!(build_clusters(&d), vec![vec![0, 1, 2]]);
    }

    #[test]
    fn random_links_match_components() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let d: Vec<Decision> = (0..20)
                .map(|i| match rng.random_range(0..3) {
                    0 => Decision::None,
                    1 => Decision::Singleton,
                    _ if i == 0 => Decision::None,
                    _ => Decision::Antecedent(rng.random_range(0..i)),
                })
                .collect();
            // components by repeated relabelling
            let mut label: Vec<usize> = (0..20).collect();
            loop {
                let mut changed = false;
                for (i, x) in d.iter().enumerate() {
                    if let Decision::Antecedent(j) = *x {
                        let m = label[i].min(label[j]);
                        if label[i] != m || label[j] != m {
                            label[i] = m;
                            label[j] = m;
                            changed = true;
                        }
                    }
                }
                if !changed {
                    break;
                }
            }
            let linked: Vec<bool> = (0..20)
                .map(|i| {
                    d[i] != Decision::None || d.contains(&Decision::Antecedent(i))
                })
                .collect();
            let mut expected: Vec<Vec<usize>> = Vec::new();
            for l in 0..20 {
                let c: Vec<usize> = (0..20).filter(|&i| linked[i] && label[i] == l).collect();
                if !c.is_empty() {
                    expected.push(c);
                }
            }
            expected.sort();
            assert_eq!(build_clusters(&d), expected);
        }
    }

    #[test]
    fn overlap_plans() {
        let w = |n, m, mode| plan_overlap(n, m, mode).unwrap().windows;
        assert_eq!(w(6, 4, OverlapMode::Max), vec![(0, 3), (1, 4), (2, 5)]);
        assert_eq!(w(6, 4, OverlapMode::Min), vec![(0, 3), (3, 5)]);
        assert_eq!(w(6, 4, OverlapMode::None), vec![(0, 3), (4, 5)]);
        for mode in [OverlapMode::None, OverlapMode::Min, OverlapMode::Max] {
            assert_eq!(w(3, 4, mode), vec![(0, 2)]);
        }
        assert!(plan_overlap(6, 1, OverlapMode::Min).is_err());
        assert_eq!(w(3, 1, OverlapMode::None), vec![(0, 0), (1, 1), (2, 2)]);
    }

    fn m(s: u32) -> Mention {
        let id = NodeId::word(s, 1);
        Mention::new(vec![id], id)
    }

    fn set(clusters: Vec<Vec<Mention>>, k: usize) -> ClusterSet {
        let provenance = clusters.iter().flatten().map(|m| (m.clone(), k)).collect();
        let mut s = ClusterSet { clusters, provenance };
        s.normalize();
        s
    }

    // one sentence per segment
    fn seg(n: NodeId) -> usize {
        n.sentence_index as usize
    }

    #[test]
    fn shared_mention_unions_clusters() {
        let plan = plan_overlap(3, 2, OverlapMode::Min).unwrap();
        let a = set(vec![vec![m(0), m(1)]], 0);
        let b = set(vec![vec![m(1), m(2)]], 1);
        let merged = merge_overlapping_clusters(&[a, b], &plan, seg);
        assert_eq!(merged.clusters, vec![vec![m(0), m(1), m(2)]]);
        assert_eq!(merged.provenance[&m(2)], 1);
        assert_eq!(merged.provenance[&m(1)], 0);
    }

    #[test]
    fn filter_drops_clusters_inside_overlap() {
        let mut plan = plan_overlap(3, 2, OverlapMode::Min).unwrap();
        let a = set(vec![vec![m(0)]], 0);
        let b = set(vec![vec![m(1)], vec![m(2)]], 1);
        plan.filter_seen = false;
        let all = merge_overlapping_clusters(&[a.clone(), b.clone()], &plan, seg);
        assert_eq!(all.clusters.len(), 3);
        plan.filter_seen = true;
        let filtered = merge_overlapping_clusters(&[a, b], &plan, seg);
        assert_eq!(filtered.clusters, vec![vec![m(0)], vec![m(2)]]);
    }

    #[test]
    fn single_window_merge_is_identity() {
        let plan = plan_overlap(2, 4, OverlapMode::Max).unwrap();
        let a = set(vec![vec![m(0), m(1)], vec![m(2)]], 0);
        assert_eq!(merge_overlapping_clusters(std::slice::from_ref(&a), &plan, seg), a);
    }

    #[test]
    fn chain_across_windows_matches_whole_document() {
        // whole-document clusters; each window sees their restriction
        let whole = set(vec![vec![m(0), m(2), m(3), m(5)], vec![m(1), m(4)]], 0);
        let plan = plan_overlap(6, 4, OverlapMode::Max).unwrap();
        assert_eq!(plan.windows.len(), 3);
        let per_window: Vec<ClusterSet> = plan
            .windows
            .iter()
            .enumerate()
            .map(|(k, &(a, b))| {
                let clusters = whole
                    .clusters
                    .iter()
                    .map(|c| c.iter().filter(|x| (a..=b).contains(&seg(x.first()))).cloned().collect())
                    .collect();
                set(clusters, k)
            })
            .collect();
        let merged = merge_overlapping_clusters(&per_window, &plan, seg);
        assert_eq!(merged.clusters, whole.clusters);
    }

    #[test]
    fn no_overlap_never_links_across_windows() {
        let plan = plan_overlap(4, 2, OverlapMode::None).unwrap();
        let a = set(vec![vec![m(0), m(1)]], 0);
        let b = set(vec![vec![m(2), m(3)]], 1);
        let merged = merge_overlapping_clusters(&[a, b], &plan, seg);
        assert_eq!(merged.clusters.len(), 2);
    }
}
