//! Dependency-tree utilities: head selection, subtree reconstruction and
//! fixed-length paths to the root.

use crate::error::{Error, Result};
use crate::model::{Document, HeadRef, Mention, NodeId};

/// Parent/children/depth view of a document's dependency trees, indexed by
/// node position in `Document::nodes`.
#[derive(Debug, Clone)]
pub struct DepTree {
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    depth: Vec<usize>,
}

impl DepTree {
    pub fn new(doc: &Document) -> Self {
        let n = doc.nodes.len();
        let mut parent = vec![None; n];
        let mut children = vec![Vec::new(); n];
        for (i, node) in doc.nodes.iter().enumerate() {
            if let HeadRef::Node(h) = node.head {
                if let Some(hi) = doc.index_of(h) {
                    parent[i] = Some(hi);
                    children[hi].push(i);
                }
            }
        }
        // depth = number of nodes on the path to ROOT, the node included;
        // nodes caught in a cycle get usize::MAX
        let mut depth = vec![0usize; n];
        for start in 0..n {
            if depth[start] != 0 {
                continue;
            }
            let mut path = vec![start];
            let mut cur = parent[start];
            let mut base = 0usize;
            while let Some(c) = cur {
                if depth[c] != 0 {
                    base = depth[c];
                    break;
                }
                if path.contains(&c) || path.len() > n {
                    base = usize::MAX;
                    break;
                }
                path.push(c);
                cur = parent[c];
            }
            for (k, &p) in path.iter().rev().enumerate() {
                depth[p] = if base == usize::MAX {
                    usize::MAX
                } else {
                    base + k + 1
                };
            }
        }
        DepTree {
            parent,
            children,
            depth,
        }
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        self.parent[i]
    }

    pub fn children(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    /// 1 for a node attached to ROOT.
    pub fn depth(&self, i: usize) -> usize {
        self.depth[i]
    }

    /// `i` and all its descendants, sorted by node index.
    pub fn descendants(&self, i: usize) -> Vec<usize> {
        let mut out = vec![i];
        let mut stack = vec![i];
        while let Some(c) = stack.pop() {
            for &ch in &self.children[c] {
                if !out.contains(&ch) {
                    out.push(ch);
                    stack.push(ch);
                }
            }
        }
        out.sort_unstable();
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntaxFeatureConfig {
    pub max_tree_depth: usize,
    pub deprel_embedding_dim: usize,
    pub token_embedding_dim: usize,
}

impl Default for SyntaxFeatureConfig {
    fn default() -> Self {
        SyntaxFeatureConfig {
            max_tree_depth: 5,
            deprel_embedding_dim: 16,
            token_embedding_dim: 64,
        }
    }
}

impl SyntaxFeatureConfig {
    /// Width added to every token vector by the path features.
    pub fn added_width(&self) -> usize {
        self.max_tree_depth * (self.token_embedding_dim + self.deprel_embedding_dim)
    }
}

/// The mention node closest to the root; ties go to the leftmost node.
pub fn select_head(doc: &Document, m: &Mention) -> NodeId {
    let tree = DepTree::new(doc);
    select_head_with(doc, &tree, &m.nodes)
}

pub(crate) fn select_head_with(doc: &Document, tree: &DepTree, nodes: &[NodeId]) -> NodeId {
    let mut best: Option<(usize, NodeId)> = None;
    for &id in nodes {
        let depth = doc.index_of(id).map_or(usize::MAX, |i| tree.depth(i));
        // nodes are in document order, so strict < keeps the leftmost
        if best.is_none_or(|(d, _)| depth < d) {
            best = Some((depth, id));
        }
    }
    best.expect("select_head on a mention without nodes").1
}

/// The mention made of `head` and all its dependency descendants.
pub fn reconstruct_span_from_head(doc: &Document, head: NodeId) -> Result<Mention> {
    let tree = DepTree::new(doc);
    reconstruct_span_with(doc, &tree, head)
}

pub(crate) fn reconstruct_span_with(doc: &Document, tree: &DepTree, head: NodeId) -> Result<Mention> {
    let hi = doc.index_of(head).ok_or(Error::UnknownNode(head))?;
    let nodes = tree.descendants(hi).into_iter().map(|i| doc.nodes[i].id).collect();
    Ok(Mention::new(nodes, head))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PathStep {
    Node { id: NodeId, deprel: String },
    Pad,
}

/// The node itself followed by its ancestors, each with its deprel, padded
/// or truncated to exactly `cfg.max_tree_depth` steps.
pub fn tree_path_to_root(
    doc: &Document,
    start: HeadRef,
    cfg: &SyntaxFeatureConfig,
) -> Result<Vec<PathStep>> {
    let HeadRef::Node(id) = start else {
        return Err(Error::RootNotANode);
    };
    let idx = doc.index_of(id).ok_or(Error::UnknownNode(id))?;
    let tree = DepTree::new(doc);
    let indices = path_indices(&tree, idx, cfg.max_tree_depth);
    let mut out = Vec::with_capacity(cfg.max_tree_depth);
    for step in indices {
        match step {
            Some(i) => {
                let node = &doc.nodes[i];
                out.push(PathStep::Node {
                    id: node.id,
                    deprel: node.deprel.clone(),
                });
            }
            None => out.push(PathStep::Pad),
        }
    }
    Ok(out)
}

/// Node indices on the path from `start` towards ROOT, `None`-padded to
/// `len`.
pub(crate) fn path_indices(tree: &DepTree, start: usize, len: usize) -> Vec<Option<usize>> {
    let mut out = Vec::with_capacity(len);
    let mut cur = Some(start);
    while out.len() < len {
        out.push(cur);
        cur = cur.and_then(|c| tree.parent(c));
    }
    out
}
