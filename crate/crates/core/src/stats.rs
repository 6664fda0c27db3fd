//! Dataset, entity and mention statistics of a corpus.

use std::fmt::Write as _;

use crate::model::{mention_is_single_subtree, Document};

/// Raw counts; summable over documents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StatsReport {
    pub docs: usize,
    pub sentences: usize,
    pub words: usize,
    pub empty_nodes: usize,

    pub entities: usize,
    pub entity_len_max: usize,
    pub entity_len_sum: usize,
    /// Entities with 1, 2, 3, 4 and 5+ mentions.
    pub entity_len: [usize; 5],

    /// Mentions of non-singleton entities.
    pub mentions: usize,
    pub mention_len_max: usize,
    pub mention_len_sum: usize,
    /// Mentions with 0, 1, …, 4 and 5+ non-empty nodes.
    pub mention_len: [usize; 6],
    pub with_empty: usize,
    pub with_gap: usize,
    pub non_tree: usize,
}

impl StatsReport {
    pub fn of_document(doc: &Document) -> Self {
        let mut r = StatsReport {
            docs: 1,
            sentences: doc.num_sentences(),
            words: doc.num_words,
            empty_nodes: doc.num_empty_nodes(),
            entities: doc.entities.len(),
            ..Default::default()
        };
        for e in &doc.entities {
            let n = e.mentions.len();
            r.entity_len_max = r.entity_len_max.max(n);
            r.entity_len_sum += n;
            r.entity_len[n.clamp(1, 5) - 1] += 1;
            if n < 2 {
                continue;
            }
            for m in &e.mentions {
                let len = m.length();
                r.mentions += 1;
                r.mention_len_max = r.mention_len_max.max(len);
                r.mention_len_sum += len;
                r.mention_len[len.min(5)] += 1;
                r.with_empty += usize::from(m.has_empty());
                r.with_gap += usize::from(m.has_gap(doc));
                r.non_tree += usize::from(!mention_is_single_subtree(doc, m).unwrap_or(false));
            }
        }
        r
    }

    pub fn add(&mut self, o: &StatsReport) {
        self.docs += o.docs;
        self.sentences += o.sentences;
        self.words += o.words;
        self.empty_nodes += o.empty_nodes;
        self.entities += o.entities;
        self.entity_len_max = self.entity_len_max.max(o.entity_len_max);
        self.entity_len_sum += o.entity_len_sum;
        for (a, b) in self.entity_len.iter_mut().zip(o.entity_len) {
            *a += b;
        }
        self.mentions += o.mentions;
        self.mention_len_max = self.mention_len_max.max(o.mention_len_max);
        self.mention_len_sum += o.mention_len_sum;
        for (a, b) in self.mention_len.iter_mut().zip(o.mention_len) {
            *a += b;
        }
        self.with_empty += o.with_empty;
        self.with_gap += o.with_gap;
        self.non_tree += o.non_tree;
    }

    pub fn entities_per_1k(&self) -> f64 {
        per(self.entities, self.words) * 1000.0
    }

    pub fn mentions_per_1k(&self) -> f64 {
        per(self.mentions, self.words) * 1000.0
    }

    pub fn entity_len_avg(&self) -> f64 {
        per(self.entity_len_sum, self.entities)
    }

    pub fn mention_len_avg(&self) -> f64 {
        per(self.mention_len_sum, self.mentions)
    }

    pub fn entity_len_pct(&self) -> [f64; 5] {
        self.entity_len.map(|c| 100.0 * per(c, self.entities))
    }

    pub fn mention_len_pct(&self) -> [f64; 6] {
        self.mention_len.map(|c| 100.0 * per(c, self.mentions))
    }

    /// (%w/empty, %w/gap, %non-tree) of mentions.
    pub fn mention_type_pct(&self) -> [f64; 3] {
        [self.with_empty, self.with_gap, self.non_tree].map(|c| 100.0 * per(c, self.mentions))
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "documents       {}", self.docs);
        let _ = writeln!(s, "sentences       {}", self.sentences);
        let _ = writeln!(s, "words           {}", self.words);
        let _ = writeln!(s, "empty nodes     {}", self.empty_nodes);
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "entities        {} ({:.1} per 1k words), length max {} avg {:.1}",
            self.entities,
            self.entities_per_1k(),
            self.entity_len_max,
            self.entity_len_avg()
        );
        let [e1, e2, e3, e4, e5] = self.entity_len_pct();
        let _ = writeln!(
            s,
            "  length [%]    1: {e1:.1}  2: {e2:.1}  3: {e3:.1}  4: {e4:.1}  5+: {e5:.1}"
        );
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "mentions        {} ({:.1} per 1k words), length max {} avg {:.1}",
            self.mentions,
            self.mentions_per_1k(),
            self.mention_len_max,
            self.mention_len_avg()
        );
        let [m0, m1, m2, m3, m4, m5] = self.mention_len_pct();
        let _ = writeln!(
            s,
            "  length [%]    0: {m0:.1}  1: {m1:.1}  2: {m2:.1}  3: {m3:.1}  4: {m4:.1}  5+: {m5:.1}"
        );
        let [we, wg, nt] = self.mention_type_pct();
        let _ = writeln!(s, "  type [%]      w/empty: {we:.1}  w/gap: {wg:.1}  non-tree: {nt:.1}");
        s
    }

    /// `name<TAB>value` rows: raw counts then derived values.
    pub fn to_tsv(&self) -> String {
        let mut rows: Vec<(String, String)> = vec![
            ("docs".into(), self.docs.to_string()),
            ("sentences".into(), self.sentences.to_string()),
            ("words".into(), self.words.to_string()),
            ("empty_nodes".into(), self.empty_nodes.to_string()),
            ("entities".into(), self.entities.to_string()),
            ("entity_len_max".into(), self.entity_len_max.to_string()),
            ("entity_len_sum".into(), self.entity_len_sum.to_string()),
        ];
        let labels = ["1", "2", "3", "4", "5+"];
        for (l, c) in labels.iter().zip(self.entity_len) {
            rows.push((format!("entity_len_{l}"), c.to_string()));
        }
        rows.push(("mentions".into(), self.mentions.to_string()));
        rows.push(("mention_len_max".into(), self.mention_len_max.to_string()));
        rows.push(("mention_len_sum".into(), self.mention_len_sum.to_string()));
        let labels = ["0", "1", "2", "3", "4", "5+"];
        for (l, c) in labels.iter().zip(self.mention_len) {
            rows.push((format!("mention_len_{l}"), c.to_string()));
        }
        rows.push(("with_empty".into(), self.with_empty.to_string()));
        rows.push(("with_gap".into(), self.with_gap.to_string()));
        rows.push(("non_tree".into(), self.non_tree.to_string()));
        rows.push(("entities_per_1k".into(), format!("{:.1}", self.entities_per_1k())));
        rows.push(("entity_len_avg".into(), format!("{:.1}", self.entity_len_avg())));
        rows.push(("mentions_per_1k".into(), format!("{:.1}", self.mentions_per_1k())));
        rows.push(("mention_len_avg".into(), format!("{:.1}", self.mention_len_avg())));
        let mut s = String::from("stat\tvalue\n");
        for (k, v) in rows {
            let _ = writeln!(s, "{k}\t{v}");
        }
        s
    }
}

fn per(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

pub fn compute_stats<'a>(docs: impl IntoIterator<Item = &'a Document>) -> StatsReport {
    let mut total = StatsReport::default();
    for d in docs {
        total.add(&StatsReport::of_document(d));
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Entity, Mention, Node, NodeId};

    /// 2 sentences of 5 words, an empty node after word 2 of the first.
    fn fixture() -> Document {
        let s0 = vec![
            Node::word(0, 1, "The", 2, "det"),
            Node::word(0, 2, "cat", 3, "nsubj"),
            Node::empty(0, 2, 1, "_", NodeId::word(0, 3).into(), "obj"),
            Node::word(0, 3, "sat", 0, "root"),
            Node::word(0, 4, "down", 3, "advmod"),
            Node::word(0, 5, ".", 3, "punct"),
        ];
        let s1 = vec![
            Node::word(1, 1, "It", 2, "nsubj"),
            Node::word(1, 2, "saw", 0, "root"),
            Node::word(1, 3, "a", 4, "det"),
            Node::word(1, 4, "dog", 2, "obj"),
            Node::word(1, 5, ".", 2, "punct"),
        ];
        let w = NodeId::word;
        let a = Entity::new(
            "A",
            vec![
                Mention::new(vec![w(0, 1), w(0, 2)], w(0, 2)),
                Mention::new(vec![NodeId::empty(0, 2, 1)], NodeId::empty(0, 2, 1)),
                Mention::new(vec![w(1, 1)], w(1, 1)),
            ],
        );
        let b = Entity::new("B", vec![Mention::new(vec![w(1, 3), w(1, 4)], w(1, 4))]);
        Document::from_sentences("d", vec![s0, s1], vec![a, b])
    }

    #[test]
    fn empty_corpus_is_zero() {
        let r = compute_stats([]);
        assert_eq!(r, StatsReport::default());
        assert_eq!(r.entities_per_1k(), 0.0);
    }

    #[test]
    fn hand_counts() {
        let doc = fixture();
        let r = compute_stats([&doc]);
        assert_eq!((r.docs, r.sentences, r.words, r.empty_nodes), (1, 2, 10, 1));
        assert_eq!(r.entities, 2);
        assert_eq!(r.entity_len, [1, 0, 1, 0, 0]);
        assert_eq!(r.entity_len_pct()[0], 50.0);
        assert_eq!(r.entities_per_1k(), 200.0);
        assert_eq!(r.mentions, 3);
        assert_eq!(r.mention_len, [1, 1, 1, 0, 0, 0]);
        assert_eq!((r.with_empty, r.with_gap, r.non_tree), (1, 0, 0));
        assert_eq!(r.mention_len_max, 2);
    }

    #[test]
    fn reordering_documents_does_not_change_stats() {
        let a = fixture();
        let mut b = fixture();
        b.entities.pop();
        assert_eq!(compute_stats([&a, &b]), compute_stats([&b, &a]));
        assert_eq!(compute_stats([&a, &b]).entities, 3);
    }

    #[test]
    fn tsv_lists_raw_counts() {
        let t = compute_stats([&fixture()]).to_tsv();
        assert!(t.contains("entity_len_1\t1\n"));
        assert!(t.contains("entities_per_1k\t200.0\n"));
    }
}
