use std::collections::HashMap;

use crate::model::{Document, Node};

pub const UNK: usize = 0;
/// Token id of an empty node without a usable form.
pub const ZERO: usize = 1;
/// Deprel id used for padding path slots.
pub const PAD: usize = 0;
pub const UNK_DEPREL: usize = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    pub tokens: Vec<String>,
    pub deprels: Vec<String>,
    token_index: HashMap<String, usize>,
    deprel_index: HashMap<String, usize>,
}

impl Default for Vocab {
    fn default() -> Self {
        Vocab::from_lists(vec![], vec![])
    }
}

impl Vocab {
    /// Vocabulary over the forms and deprels of `docs`, in first-seen order
    /// after the reserved entries.
    pub fn build<'a>(docs: impl IntoIterator<Item = &'a Document>) -> Self {
        let mut tokens = Vec::new();
        let mut deprels = Vec::new();
        let mut seen_t = std::collections::HashSet::new();
        let mut seen_d = std::collections::HashSet::new();
        for doc in docs {
            for node in &doc.nodes {
                if !is_zero_form(node) && seen_t.insert(node.form.clone()) {
                    tokens.push(node.form.clone());
                }
                if seen_d.insert(node.deprel.clone()) {
                    deprels.push(node.deprel.clone());
                }
            }
        }
        Vocab::from_lists(tokens, deprels)
    }

    /// Vocabulary from entries without the reserved prefix.
    pub fn from_lists(tokens: Vec<String>, deprels: Vec<String>) -> Self {
        let mut all_tokens = vec!["<unk>".to_string(), "<zero>".to_string()];
        all_tokens.extend(tokens);
        let mut all_deprels = vec!["<pad>".to_string(), "<unk>".to_string()];
        all_deprels.extend(deprels);
        let token_index = all_tokens.iter().enumerate().skip(2).map(|(i, t)| (t.clone(), i)).collect();
        let deprel_index = all_deprels.iter().enumerate().skip(2).map(|(i, t)| (t.clone(), i)).collect();
        Vocab {
            tokens: all_tokens,
            deprels: all_deprels,
            token_index,
            deprel_index,
        }
    }

    pub fn token_id(&self, node: &Node) -> usize {
        if is_zero_form(node) {
            return ZERO;
        }
        self.token_index.get(&node.form).copied().unwrap_or(UNK)
    }

    pub fn deprel_id(&self, deprel: &str) -> usize {
        self.deprel_index.get(deprel).copied().unwrap_or(UNK_DEPREL)
    }

    pub fn num_tokens(&self) -> usize {
        self.tokens.len()
    }

    pub fn num_deprels(&self) -> usize {
        self.deprels.len()
    }
}

fn is_zero_form(node: &Node) -> bool {
    node.is_empty && (node.form.is_empty() || node.form == "_")
}
