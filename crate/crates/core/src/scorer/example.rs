use super::config::ModelConfig;
use super::vocab::{Vocab, PAD};
use crate::model::{Document, Mention};
use crate::segment::segment_document;
use crate::syntax::{path_indices, reconstruct_span_with, select_head_with, DepTree};

/// A candidate mention: an inclusive node-index range starting and ending
/// on regular words of one sentence. In heads-only mode `start == end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Candidate {
    pub start: usize,
    pub end: usize,
}

impl Candidate {
    pub fn width(&self) -> usize {
        self.end - self.start + 1
    }
}

/// Gold annotation aligned to candidates.
#[derive(Debug, Clone, Default)]
pub struct Gold {
    /// Entity index of the gold mention each candidate matches.
    pub cluster: Vec<Option<usize>>,
    /// Per entity: exactly one mention inside this example.
    pub singleton_entity: Vec<bool>,
    /// Offset of the gold head within the candidate, for matched candidates.
    pub head_offset: Vec<Option<usize>>,
    /// Singletons are annotated in the corpus this example comes from.
    pub singletons_annotated: bool,
    /// Gold mentions that no candidate represents (zero mentions, overlong
    /// spans, head collisions).
    pub unmatched: usize,
}

/// A document together with everything the scorer derives from it that does
/// not depend on parameters.
#[derive(Debug, Clone)]
pub struct Example {
    pub doc: Document,
    pub tree: DepTree,
    pub token_ids: Vec<usize>,
    /// Position of each node within its segment.
    pub positions: Vec<usize>,
    /// Inclusive range of nodes each node attends to.
    pub windows: Vec<(usize, usize)>,
    /// `paths[d][i]`: node `d` steps above node `i`, if any.
    pub paths: Vec<Vec<Option<usize>>>,
    /// Deprel ids matching `paths` (PAD where the path ended).
    pub path_deprels: Vec<Vec<usize>>,
    pub candidates: Vec<Candidate>,
    pub gold: Option<Gold>,
}

impl Example {
    pub fn new(doc: Document, cfg: &ModelConfig, vocab: &Vocab, with_gold: bool, singletons_annotated: bool) -> Self {
        let n = doc.nodes.len();
        let tree = DepTree::new(&doc);
        let token_ids = doc.nodes.iter().map(|node| vocab.token_id(node)).collect();

        let half = cfg.encoder.context_window / 2;
        let mut positions = vec![0; n];
        let mut windows = vec![(0, 0); n];
        for seg in segment_document(&doc, cfg.encoder.segment_length) {
            for i in seg.clone() {
                positions[i] = i - seg.start;
                windows[i] = (i.saturating_sub(half).max(seg.start), (i + half).min(seg.end - 1));
            }
        }

        let depth = cfg.tree_features.map_or(0, |t| t.max_tree_depth);
        let mut paths = vec![vec![None; n]; depth];
        let mut path_deprels = vec![vec![PAD; n]; depth];
        for i in 0..n {
            for (d, step) in path_indices(&tree, i, depth).into_iter().enumerate() {
                paths[d][i] = step;
                if let Some(p) = step {
                    path_deprels[d][i] = vocab.deprel_id(&doc.nodes[p].deprel);
                }
            }
        }

        let candidates = enumerate_candidates(&doc, cfg);
        let gold = with_gold.then(|| align_gold(&doc, &candidates, cfg, singletons_annotated));
        Example {
            doc,
            tree,
            token_ids,
            positions,
            windows,
            paths,
            path_deprels,
            candidates,
            gold,
        }
    }

    pub fn num_words(&self) -> usize {
        self.doc.num_words
    }

    pub fn candidate_index(&self, c: Candidate) -> Option<usize> {
        self.candidates.binary_search(&c).ok()
    }

    /// The mention a candidate stands for. Spans cover their words; heads
    /// expand to their dependency subtree. `head` overrides the syntactic
    /// head of a span.
    pub fn mention(&self, c: Candidate, heads_only: bool, head: Option<usize>) -> Mention {
        let doc = &self.doc;
        if heads_only {
            return reconstruct_span_with(doc, &self.tree, doc.nodes[c.start].id)
                .expect("candidate head is a document node");
        }
        let nodes: Vec<_> = (c.start..=c.end)
            .filter(|&i| !doc.nodes[i].is_empty)
            .map(|i| doc.nodes[i].id)
            .collect();
        let head = match head {
            Some(h) if !doc.nodes[h].is_empty && (c.start..=c.end).contains(&h) => doc.nodes[h].id,
            _ => select_head_with(doc, &self.tree, &nodes),
        };
        Mention::new(nodes, head)
    }
}

/// All candidates of a document in (start, end) order.
pub fn enumerate_candidates(doc: &Document, cfg: &ModelConfig) -> Vec<Candidate> {
    let mut out = Vec::new();
    for s in 0..doc.num_sentences() {
        let words: Vec<usize> = doc.sentence_range(s).filter(|&i| !doc.nodes[i].is_empty).collect();
        for (a, &start) in words.iter().enumerate() {
            if cfg.heads_only {
                out.push(Candidate { start, end: start });
                continue;
            }
            for &end in &words[a..] {
                if end - start >= cfg.max_span_width {
                    break;
                }
                out.push(Candidate { start, end });
            }
        }
    }
    out
}

fn align_gold(doc: &Document, candidates: &[Candidate], cfg: &ModelConfig, singletons_annotated: bool) -> Gold {
    let mut gold = Gold {
        cluster: vec![None; candidates.len()],
        singleton_entity: doc.entities.iter().map(|e| e.mentions.len() == 1).collect(),
        head_offset: vec![None; candidates.len()],
        singletons_annotated,
        unmatched: 0,
    };
    for (e, entity) in doc.entities.iter().enumerate() {
        for m in &entity.mentions {
            let cand = if cfg.heads_only {
                doc.index_of(m.head)
                    .filter(|&h| !doc.nodes[h].is_empty)
                    .map(|h| Candidate { start: h, end: h })
            } else {
                let words: Vec<usize> = m
                    .nodes
                    .iter()
                    .filter(|n| !n.is_empty())
                    .filter_map(|&n| doc.index_of(n))
                    .collect();
                words.first().zip(words.last()).map(|(&start, &end)| Candidate { start, end })
            };
            let slot = cand.and_then(|c| candidates.binary_search(&c).ok().map(|k| (c, k)));
            match slot {
                Some((c, k)) if gold.cluster[k].is_none() => {
                    gold.cluster[k] = Some(e);
                    gold.head_offset[k] = doc
                        .index_of(m.head)
                        .filter(|&h| h >= c.start && h <= c.end && !doc.nodes[h].is_empty)
                        .map(|h| h - c.start);
                }
                _ => gold.unmatched += 1,
            }
        }
    }
    gold
}
