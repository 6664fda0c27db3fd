//! In-memory representation of CorefUD documents.
//!
//! A [`Document`] owns its nodes in document order (regular words and empty
//! nodes interleaved), the sentence boundaries over that node list, and the
//! gold (or predicted) entities. Nothing here enforces invariants at
//! construction time; [`validate_document`] reports every violation instead,
//! so that corpus tooling can show all problems of a file at once.

use std::collections::{HashMap, HashSet};
use std::fmt;

use crate::error::{Error, Result};

/// Position of a node inside a document.
///
/// Ordering is lexicographic on `(sentence_index, token_index, empty_suffix)`,
/// which is document order: the empty node `3.1` sorts after word `3` and
/// before word `4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId {
    pub sentence_index: u32,
    /// CoNLL-U word id within the sentence (1-based for words, 0 is allowed
    /// for empty nodes placed before the first word).
    pub token_index: u32,
    /// 0 for a regular word, `k > 0` for the `k`-th empty node after
    /// `token_index`.
    pub empty_suffix: u32,
}

impl NodeId {
    pub fn word(sentence_index: u32, token_index: u32) -> Self {
        NodeId {
            sentence_index,
            token_index,
            empty_suffix: 0,
        }
    }

    pub fn empty(sentence_index: u32, token_index: u32, empty_suffix: u32) -> Self {
        NodeId {
            sentence_index,
            token_index,
            empty_suffix,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.empty_suffix > 0
    }

    /// The id as written in the CoNLL-U ID column (`7` or `7.1`).
    pub fn conllu_id(&self) -> String {
        if self.is_empty() {
            format!("{}.{}", self.token_index, self.empty_suffix)
        } else {
            self.token_index.to_string()
        }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}:{}", self.sentence_index, self.conllu_id())
    }
}

/// Dependency head of a node: another node of the same sentence or the
/// artificial root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HeadRef {
    Root,
    Node(NodeId),
}

impl From<NodeId> for HeadRef {
    fn from(id: NodeId) -> Self {
        HeadRef::Node(id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub form: String,
    pub lemma: String,
    pub upos: String,
    pub xpos: String,
    pub feats: String,
    pub head: HeadRef,
    pub deprel: String,
    /// Enhanced dependencies, kept verbatim.
    pub deps: String,
    /// MISC items other than `Entity=`, in their original order.
    pub misc: Vec<String>,
    pub is_empty: bool,
}

impl Node {
    /// A regular word. `head_token` 0 attaches the word to the root.
    pub fn word(sentence: u32, token: u32, form: &str, head_token: u32, deprel: &str) -> Self {
        let head = if head_token == 0 {
            HeadRef::Root
        } else {
            HeadRef::Node(NodeId::word(sentence, head_token))
        };
        Node {
            id: NodeId::word(sentence, token),
            form: form.to_string(),
            lemma: "_".into(),
            upos: "_".into(),
            xpos: "_".into(),
            feats: "_".into(),
            head,
            deprel: deprel.to_string(),
            deps: "_".into(),
            misc: Vec::new(),
            is_empty: false,
        }
    }

    /// An empty node `token.suffix` attached to `head`.
    pub fn empty(
        sentence: u32,
        token: u32,
        suffix: u32,
        form: &str,
        head: HeadRef,
        deprel: &str,
    ) -> Self {
        let deps = match head {
            HeadRef::Root => format!("0:{deprel}"),
            HeadRef::Node(h) => format!("{}:{deprel}", h.conllu_id()),
        };
        Node {
            id: NodeId::empty(sentence, token, suffix),
            form: form.to_string(),
            lemma: "_".into(),
            upos: "_".into(),
            xpos: "_".into(),
            feats: "_".into(),
            head,
            deprel: deprel.to_string(),
            deps,
            misc: Vec::new(),
            is_empty: true,
        }
    }
}

/// A mention: an ordered set of nodes, possibly discontinuous, with a
/// syntactic head.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mention {
    pub nodes: Vec<NodeId>,
    pub head: NodeId,
    /// Bracket attributes after the entity id, kept opaque.
    pub attrs: Vec<String>,
}

impl Mention {
    pub fn new(mut nodes: Vec<NodeId>, head: NodeId) -> Self {
        nodes.sort();
        nodes.dedup();
        Mention {
            nodes,
            head,
            attrs: Vec::new(),
        }
    }

    pub fn first(&self) -> NodeId {
        self.nodes[0]
    }

    pub fn last(&self) -> NodeId {
        *self.nodes.last().expect("mention without nodes")
    }

    /// Number of non-empty nodes.
    pub fn length(&self) -> usize {
        self.nodes.iter().filter(|n| !n.is_empty()).count()
    }

    /// A zero mention consists of empty nodes only.
    pub fn is_zero(&self) -> bool {
        self.nodes.iter().all(NodeId::is_empty)
    }

    pub fn has_empty(&self) -> bool {
        self.nodes.iter().any(NodeId::is_empty)
    }

    /// True when the mention skips at least one node between its first and
    /// last node, i.e. it cannot be written as a single bracketed span.
    pub fn has_gap(&self, doc: &Document) -> bool {
        let mut prev: Option<usize> = None;
        for id in &self.nodes {
            let Some(idx) = doc.index_of(*id) else {
                return false;
            };
            if let Some(p) = prev {
                if idx != p + 1 {
                    return true;
                }
            }
            prev = Some(idx);
        }
        false
    }

    /// Key used to order mentions deterministically.
    pub fn sort_key(&self) -> (NodeId, NodeId, &[NodeId], NodeId) {
        (self.first(), self.last(), &self.nodes, self.head)
    }
}

impl PartialOrd for Mention {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Mention {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.sort_key()
            .cmp(&other.sort_key())
            .then_with(|| self.attrs.cmp(&other.attrs))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entity {
    pub id: String,
    pub mentions: Vec<Mention>,
}

impl Entity {
    pub fn new(id: impl Into<String>, mentions: Vec<Mention>) -> Self {
        Entity {
            id: id.into(),
            mentions,
        }
    }

    pub fn is_singleton(&self) -> bool {
        self.mentions.len() == 1
    }
}

/// Per-sentence data that only matters for faithful rewriting.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SentenceMeta {
    /// Comment lines without the leading `#`.
    pub comments: Vec<String>,
    /// Multiword token lines, keyed by the index (within the sentence's
    /// node list) of the node they precede.
    pub multiword: Vec<(usize, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub doc_id: String,
    pub nodes: Vec<Node>,
    /// Index into `nodes` of the first node of every sentence.
    pub sentence_boundaries: Vec<usize>,
    pub entities: Vec<Entity>,
    /// Number of regular (non-empty) nodes.
    pub num_words: usize,
    pub sentences: Vec<SentenceMeta>,
    /// Value of the `# global.Entity` declaration, if any.
    pub entity_fields: Option<String>,
}

impl Document {
    pub fn from_sentences(
        doc_id: impl Into<String>,
        sentences: Vec<Vec<Node>>,
        entities: Vec<Entity>,
    ) -> Self {
        let mut nodes = Vec::new();
        let mut sentence_boundaries = Vec::new();
        for sentence in sentences {
            sentence_boundaries.push(nodes.len());
            nodes.extend(sentence);
        }
        let num_words = nodes.iter().filter(|n| !n.is_empty).count();
        let metas = vec![SentenceMeta::default(); sentence_boundaries.len()];
        Document {
            doc_id: doc_id.into(),
            nodes,
            sentence_boundaries,
            entities,
            num_words,
            sentences: metas,
            entity_fields: None,
        }
    }

    /// Position of `id` in `nodes`. Relies on nodes being sorted, which
    /// validation checks.
    pub fn index_of(&self, id: NodeId) -> Option<usize> {
        self.nodes.binary_search_by(|n| n.id.cmp(&id)).ok()
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.index_of(id).map(|i| &self.nodes[i])
    }

    pub fn num_sentences(&self) -> usize {
        self.sentence_boundaries.len()
    }

    /// Node index range of sentence `s`.
    pub fn sentence_range(&self, s: usize) -> std::ops::Range<usize> {
        let start = self.sentence_boundaries[s];
        let end = self
            .sentence_boundaries
            .get(s + 1)
            .copied()
            .unwrap_or(self.nodes.len());
        start..end
    }

    pub fn num_empty_nodes(&self) -> usize {
        self.nodes.len() - self.num_words
    }

    pub fn mentions(&self) -> impl Iterator<Item = &Mention> {
        self.entities.iter().flat_map(|e| e.mentions.iter())
    }

    /// Recount words after nodes were edited by hand.
    pub fn refresh_word_count(&mut self) {
        self.num_words = self.nodes.iter().filter(|n| !n.is_empty).count();
    }

    /// Copy of the document restricted to the nodes in `range`, which must
    /// start and end on sentence boundaries. Mentions not fully inside the
    /// range are dropped; entities left without mentions disappear.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Document> {
        let first_sentence = self
            .sentence_boundaries
            .iter()
            .position(|&b| b == range.start)
            .ok_or_else(|| Error::InvalidInput(format!("{} is not a sentence start", range.start)))?;
        let end_ok = range.end == self.nodes.len() || self.sentence_boundaries.contains(&range.end);
        if !end_ok {
            return Err(Error::InvalidInput(format!(
                "{} is not a sentence boundary",
                range.end
            )));
        }
        let nodes: Vec<Node> = self.nodes[range.clone()].to_vec();
        let mut sentence_boundaries = Vec::new();
        let mut sentences = Vec::new();
        for (s, &b) in self.sentence_boundaries.iter().enumerate().skip(first_sentence) {
            if b >= range.end {
                break;
            }
            sentence_boundaries.push(b - range.start);
            sentences.push(self.sentences.get(s).cloned().unwrap_or_default());
        }
        let inside: HashSet<NodeId> = nodes.iter().map(|n| n.id).collect();
        let entities = self
            .entities
            .iter()
            .filter_map(|e| {
                let mentions: Vec<Mention> = e
                    .mentions
                    .iter()
                    .filter(|m| m.nodes.iter().all(|n| inside.contains(n)))
                    .cloned()
                    .collect();
                (!mentions.is_empty()).then(|| Entity::new(e.id.clone(), mentions))
            })
            .collect();
        let num_words = nodes.iter().filter(|n| !n.is_empty).count();
        Ok(Document {
            doc_id: self.doc_id.clone(),
            nodes,
            sentence_boundaries,
            entities,
            num_words,
            sentences,
            entity_fields: self.entity_fields.clone(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    UnsortedNodes,
    DuplicateNode,
    EmptyFlagMismatch,
    UnknownHead,
    CrossSentenceHead,
    Cycle,
    SentenceBoundaries,
    WordCount,
    EmptyMention,
    UnsortedMention,
    UnknownMentionNode,
    HeadNotInMention,
    EmptyEntity,
    DuplicateMention,
    DuplicateEntityId,
    CrossSentenceMention,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub severity: Severity,
    pub kind: ViolationKind,
    pub message: String,
}

impl Violation {
    fn error(kind: ViolationKind, message: String) -> Self {
        Violation {
            severity: Severity::Error,
            kind,
            message,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{level}: {}", self.message)
    }
}

/// Check every structural invariant of `doc`.
///
/// Returns an empty list for a well-formed document. Mentions spanning
/// several sentences are reported with [`Severity::Warning`].
pub fn validate_document(doc: &Document) -> Vec<Violation> {
    use ViolationKind::*;
    let mut out = Vec::new();
    let ctx = |msg: String| format!("doc '{}': {msg}", doc.doc_id);

    let mut index: HashMap<NodeId, usize> = HashMap::with_capacity(doc.nodes.len());
    for (i, node) in doc.nodes.iter().enumerate() {
        if index.insert(node.id, i).is_some() {
            out.push(Violation::error(DuplicateNode, ctx(format!("node {} occurs twice", node.id))));
        }
        if i > 0 && doc.nodes[i - 1].id >= node.id {
            out.push(Violation::error(
                UnsortedNodes,
                ctx(format!("node {} is out of document order", node.id)),
            ));
        }
        if node.is_empty != node.id.is_empty() {
            out.push(Violation::error(
                EmptyFlagMismatch,
                ctx(format!("node {} has is_empty = {}", node.id, node.is_empty)),
            ));
        }
    }

    // sentence boundaries must agree with the sentence index of the ids
    let mut boundaries_ok = doc.sentence_boundaries.first().is_none_or(|&b| b == 0)
        && doc.sentence_boundaries.windows(2).all(|w| w[0] < w[1])
        && doc.sentence_boundaries.last().is_none_or(|&b| b < doc.nodes.len().max(1));
    if doc.sentence_boundaries.is_empty() && !doc.nodes.is_empty() {
        boundaries_ok = false;
    }
    if boundaries_ok {
        for s in 0..doc.sentence_boundaries.len() {
            let range = doc.sentence_range(s);
            let sid = doc.nodes.get(range.start).map(|n| n.id.sentence_index);
            if range.is_empty() || doc.nodes[range].iter().any(|n| Some(n.id.sentence_index) != sid) {
                boundaries_ok = false;
                break;
            }
        }
    }
    if !boundaries_ok {
        out.push(Violation::error(
            SentenceBoundaries,
            ctx("sentence boundaries do not match node sentence indices".into()),
        ));
    }

    let words = doc.nodes.iter().filter(|n| !n.is_empty).count();
    if words != doc.num_words {
        out.push(Violation::error(
            WordCount,
            ctx(format!("num_words is {} but {} words present", doc.num_words, words)),
        ));
    }

    let mut parent: Vec<Option<usize>> = vec![None; doc.nodes.len()];
    for (i, node) in doc.nodes.iter().enumerate() {
        if let HeadRef::Node(h) = node.head {
            match index.get(&h) {
                None => out.push(Violation::error(
                    UnknownHead,
                    ctx(format!("node {} has unknown head {h}", node.id)),
                )),
                Some(&hi) => {
                    if h.sentence_index != node.id.sentence_index {
                        out.push(Violation::error(
                            CrossSentenceHead,
                            ctx(format!("node {} has head {h} in another sentence", node.id)),
                        ));
                    }
                    parent[i] = Some(hi);
                }
            }
        }
    }
    for cycle in find_cycles(&parent) {
        let ids: Vec<String> = cycle.iter().map(|&i| doc.nodes[i].id.to_string()).collect();
        out.push(Violation::error(
            Cycle,
            ctx(format!("dependency cycle through {}", ids.join(" -> "))),
        ));
    }

    let mut entity_ids = HashSet::new();
    for entity in &doc.entities {
        if !entity_ids.insert(entity.id.as_str()) {
            out.push(Violation::error(
                DuplicateEntityId,
                ctx(format!("entity id '{}' used twice", entity.id)),
            ));
        }
        if entity.mentions.is_empty() {
            out.push(Violation::error(
                EmptyEntity,
                ctx(format!("entity '{}' has no mentions", entity.id)),
            ));
        }
        let mut seen: HashSet<&[NodeId]> = HashSet::new();
        for (mi, m) in entity.mentions.iter().enumerate() {
            let name = format!("mention #{mi} of entity '{}'", entity.id);
            if m.nodes.is_empty() {
                out.push(Violation::error(EmptyMention, ctx(format!("{name} has no nodes"))));
                continue;
            }
            if m.nodes.windows(2).any(|w| w[0] >= w[1]) {
                out.push(Violation::error(
                    UnsortedMention,
                    ctx(format!("{name} has unsorted or repeated nodes")),
                ));
            }
            for n in &m.nodes {
                if !index.contains_key(n) {
                    out.push(Violation::error(
                        UnknownMentionNode,
                        ctx(format!("{name} references unknown node {n}")),
                    ));
                }
            }
            if !m.nodes.contains(&m.head) {
                out.push(Violation::error(
                    HeadNotInMention,
                    ctx(format!("{name} has head {} outside its nodes", m.head)),
                ));
            }
            if !seen.insert(m.nodes.as_slice()) {
                out.push(Violation::error(
                    DuplicateMention,
                    ctx(format!("{name} duplicates another mention of the same entity")),
                ));
            }
            if m.first().sentence_index != m.last().sentence_index {
                out.push(Violation {
                    severity: Severity::Warning,
                    kind: CrossSentenceMention,
                    message: ctx(format!("{name} spans several sentences")),
                });
            }
        }
    }
    out
}

/// True when no violation of error severity is present.
pub fn is_valid(violations: &[Violation]) -> bool {
    violations.iter().all(|v| v.severity != Severity::Error)
}

/// Every cycle of a parent-pointer forest, each reported once.
fn find_cycles(parent: &[Option<usize>]) -> Vec<Vec<usize>> {
    // 0 = unvisited, 1 = on current path, 2 = done
    let mut state = vec![0u8; parent.len()];
    let mut cycles = Vec::new();
    for start in 0..parent.len() {
        if state[start] != 0 {
            continue;
        }
        let mut path = Vec::new();
        let mut cur = Some(start);
        while let Some(c) = cur {
            match state[c] {
                0 => {
                    state[c] = 1;
                    path.push(c);
                    cur = parent[c];
                }
                1 => {
                    let pos = path.iter().position(|&p| p == c).unwrap_or(0);
                    cycles.push(path[pos..].to_vec());
                    break;
                }
                _ => break,
            }
        }
        for p in path {
            state[p] = 2;
        }
    }
    cycles
}

/// Whether the mention's node set is exactly the (inclusive) dependency
/// subtree of its head.
pub fn mention_is_single_subtree(doc: &Document, m: &Mention) -> Result<bool> {
    let head = doc.index_of(m.head).ok_or(Error::UnknownNode(m.head))?;
    let tree = crate::syntax::DepTree::new(doc);
    let mut subtree: Vec<NodeId> = tree.descendants(head).into_iter().map(|i| doc.nodes[i].id).collect();
    subtree.sort();
    let mut nodes = m.nodes.clone();
    nodes.sort();
    Ok(subtree == nodes)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// Two sentences; sentence 0: "the cat sat" (cat <- the, sat root),
    /// sentence 1: "it slept".
    pub fn two_sentences() -> Document {
        let s0 = vec![
            Node::word(0, 1, "the", 2, "det"),
            Node::word(0, 2, "cat", 3, "nsubj"),
            Node::word(0, 3, "sat", 0, "root"),
        ];
        let s1 = vec![Node::word(1, 1, "it", 2, "nsubj"), Node::word(1, 2, "slept", 0, "root")];
        let cat = Mention::new(vec![NodeId::word(0, 1), NodeId::word(0, 2)], NodeId::word(0, 2));
        let it = Mention::new(vec![NodeId::word(1, 1)], NodeId::word(1, 1));
        Document::from_sentences("d1", vec![s0, s1], vec![Entity::new("e1", vec![cat, it])])
    }

    /// Five-node tree: 1 root; 2 <- 1; 3 <- 2; 4 <- 2; 5 <- 1.
    pub fn five_node_tree() -> Document {
        let s = vec![
            Node::word(0, 1, "a", 0, "root"),
            Node::word(0, 2, "b", 1, "obj"),
            Node::word(0, 3, "c", 2, "amod"),
            Node::word(0, 4, "d", 2, "nmod"),
            Node::word(0, 5, "e", 1, "obl"),
        ];
        Document::from_sentences("tree", vec![s], vec![])
    }
}
