//! Small hand-built corpora used by the gradient checker and by tests.

use crate::conllu::parse_corpus;
use crate::model::Document;

/// One CoNLL-U token line; `id` may be an empty-node id like `2.1`.
fn row(id: &str, form: &str, head: &str, deprel: &str, deps: &str, misc: &str) -> String {
    [id, form, "_", "_", "_", "_", head, deprel, deps, misc].join("\t")
}

/// Three sentences, 18 words and one empty node. Entity e1 has a zero
/// mention, e2 two-word and one-word mentions, and e3 is a singleton.
pub fn gradcheck_conllu() -> String {
    let lines = [
        "# newdoc id = fixture".to_string(),
        "# sent_id = 1".to_string(),
        row("1", "Anna", "2", "nsubj", "_", "Entity=(e1)"),
        row("2", "saw", "0", "root", "_", "_"),
        row("2.1", "_", "_", "_", "2:nsubj", "Entity=(e1)"),
        row("3", "the", "4", "det", "_", "Entity=(e2"),
        row("4", "dog", "2", "obj", "_", "Entity=e2)"),
        row("5", "near", "7", "case", "_", "_"),
        row("6", "a", "7", "det", "_", "Entity=(e3"),
        row("7", "tree", "2", "obl", "_", "Entity=e3)"),
        row("8", ".", "2", "punct", "_", "_"),
        String::new(),
        "# sent_id = 2".to_string(),
        row("1", "She", "2", "nsubj", "_", "Entity=(e1)"),
        row("2", "liked", "0", "root", "_", "_"),
        row("3", "the", "4", "det", "_", "Entity=(e2"),
        row("4", "dog", "2", "obj", "_", "Entity=e2)"),
        row("5", ".", "2", "punct", "_", "_"),
        String::new(),
        "# sent_id = 3".to_string(),
        row("1", "It", "2", "nsubj", "_", "Entity=(e2)"),
        row("2", "barked", "0", "root", "_", "_"),
        row("3", "at", "4", "case", "_", "_"),
        row("4", "Anna", "2", "obl", "_", "Entity=(e1)"),
        row("5", ".", "2", "punct", "_", "_"),
        String::new(),
    ];
    lines.join("\n")
}

/// The gradient-check document.
pub fn gradcheck_document() -> Document {
    parse_corpus(&gradcheck_conllu())
        .expect("fixture parses")
        .pop()
        .expect("fixture has one document")
}
