//! Synthetic corpora with a separable coreference pattern.
//!
//! Every sentence is `V subject object .` with the verb as root. Each chain
//! entity belongs to its own name class within a document: it is introduced
//! by a name `N<c>_<j>` and later referred to by the class pronoun `P<c>`,
//! the bare name or `the` + name. Singletons are object phrases `a O<k>`.
//! Slots left free hold filler words `F<k>`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{Document, Entity, Mention, Node, NodeId};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub documents: usize,
    /// Minimum sentences per document; chains may add more.
    pub sentences_per_doc: usize,
    pub entities_per_doc: usize,
    pub num_classes: usize,
    pub names_per_class: usize,
    pub num_objects: usize,
    pub num_fillers: usize,
    pub num_verbs: usize,
    /// Mentions per chain entity, at least 2.
    pub max_chain_mentions: usize,
    /// Probability that an entity is a singleton.
    pub singleton_rate: f64,
    /// Probability that a chain spreads its mentions `cross_segment_gap`
    /// sentences apart.
    pub cross_segment_rate: f64,
    pub cross_segment_gap: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            documents: 200,
            sentences_per_doc: 12,
            entities_per_doc: 4,
            num_classes: 4,
            names_per_class: 5,
            num_objects: 10,
            num_fillers: 10,
            num_verbs: 5,
            max_chain_mentions: 4,
            singleton_rate: 0.0,
            cross_segment_rate: 0.0,
            cross_segment_gap: 0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.sentences_per_doc,
            self.num_classes,
            self.names_per_class,
            self.num_objects,
            self.num_fillers,
            self.num_verbs,
        ];
        if positive.contains(&0) {
            return Err(Error::Config("synthetic vocabulary and sentence counts must be positive".into()));
        }
        if self.entities_per_doc > self.num_classes {
            return Err(Error::Config(format!(
                "entities_per_doc ({}) may not exceed num_classes ({})",
                self.entities_per_doc, self.num_classes
            )));
        }
        if self.max_chain_mentions < 2 {
            return Err(Error::Config("max_chain_mentions must be >= 2".into()));
        }
        for (name, p) in [("singleton_rate", self.singleton_rate), ("cross_segment_rate", self.cross_segment_rate)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must lie in [0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
enum Phrase {
    Filler(usize),
    /// Chain entity `e`, its `k`-th mention.
    Chain { e: usize, k: usize },
    Singleton { e: usize, object: usize },
}

#[derive(Debug, Clone, Copy)]
enum Surface {
    Name,
    Pronoun,
    TheName,
}

struct ChainEntity {
    class: usize,
    name: usize,
    surfaces: Vec<Surface>,
}

/// Generates `spec.documents` documents; deterministic in `spec.seed`.
pub fn generate(spec: &SynthSpec) -> Result<Vec<Document>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Ok((0..spec.documents).map(|d| generate_document(spec, d, &mut rng)).collect())
}

fn generate_document(spec: &SynthSpec, index: usize, rng: &mut ChaCha8Rng) -> Document {
    let mut classes: Vec<usize> = (0..spec.num_classes).collect();
    // partial shuffle: distinct classes for the chains of this document
    for i in 0..spec.entities_per_doc.min(classes.len()) {
        let j = rng.random_range(i..classes.len());
        classes.swap(i, j);
    }
    let mut slots: Vec<Option<Phrase>> = vec![None; 2 * spec.sentences_per_doc];
    let mut chains = Vec::new();
    let mut singletons = 0;
    for (e, &class) in classes.iter().enumerate().take(spec.entities_per_doc) {
        if rng.random_bool(spec.singleton_rate) {
            singletons += 1;
            continue;
        }
        let n = rng.random_range(2..=spec.max_chain_mentions);
        let spread = spec.cross_segment_gap > 0 && rng.random_bool(spec.cross_segment_rate);
        let mut surfaces = vec![Surface::Name];
        let mut prev = if spread {
            rng.random_range(0..spec.sentences_per_doc.div_ceil(4)) * 2
        } else {
            rng.random_range(0..slots.len())
        };
        prev = place(&mut slots, prev, Phrase::Chain { e, k: 0 });
        for k in 1..n {
            let gap = if spread {
                2 * spec.cross_segment_gap
            } else {
                rng.random_range(1..=6)
            };
            prev = place(&mut slots, prev + gap, Phrase::Chain { e, k });
            surfaces.push(match rng.random_range(0..3) {
                0 => Surface::Pronoun,
                1 => Surface::Name,
                _ => Surface::TheName,
            });
        }
        chains.push((
            e,
            ChainEntity {
                class,
                name: rng.random_range(0..spec.names_per_class),
                surfaces,
            },
        ));
    }
    for s in 0..singletons {
        let object = rng.random_range(0..spec.num_objects);
        // singletons prefer object slots
        let at = rng.random_range(0..slots.len()) | 1;
        place(
            &mut slots,
            at,
            Phrase::Singleton {
                e: spec.entities_per_doc + s,
                object,
            },
        );
    }
    if slots.len() % 2 == 1 {
        slots.push(None);
    }
    let slots: Vec<Phrase> = slots
        .into_iter()
        .map(|p| p.unwrap_or_else(|| Phrase::Filler(rng.random_range(0..spec.num_fillers))))
        .collect();
    let chain_of = |e: usize| chains.iter().find(|(id, _)| *id == e).map(|(_, c)| c).expect("chain exists");

    let mut sentences = Vec::new();
    let mut mentions: Vec<(usize, Mention)> = Vec::new();
    for (s, pair) in slots.chunks(2).enumerate() {
        let si = s as u32;
        let verb = rng.random_range(0..spec.num_verbs);
        let mut nodes = vec![Node::word(si, 1, &format!("V{verb}"), 0, "root")];
        for (phrase, rel) in pair.iter().zip(["nsubj", "obj"]) {
            let t = nodes.len() as u32 + 1;
            let (words, owner): (Vec<(String, &str)>, Option<usize>) = match *phrase {
                Phrase::Filler(f) => (vec![(format!("F{f}"), rel)], None),
                Phrase::Singleton { e, object } => (vec![("a".into(), "det"), (format!("O{object}"), rel)], Some(e)),
                Phrase::Chain { e, k } => {
                    let c = chain_of(e);
                    let name = format!("N{}_{}", c.class, c.name);
                    let w = match c.surfaces[k] {
                        Surface::Name => vec![(name, rel)],
                        Surface::Pronoun => vec![(format!("P{}", c.class), rel)],
                        Surface::TheName => vec![("the".into(), "det"), (name, rel)],
                    };
                    (w, Some(e))
                }
            };
            let head = t + words.len() as u32 - 1;
            let ids: Vec<NodeId> = (0..words.len() as u32).map(|i| NodeId::word(si, t + i)).collect();
            for (i, (form, deprel)) in words.iter().enumerate() {
                let h = if ids[i].token_index == head { 1 } else { head };
                nodes.push(Node::word(si, ids[i].token_index, form, h, deprel));
            }
            if let Some(e) = owner {
                mentions.push((e, Mention::new(ids, NodeId::word(si, head))));
            }
        }
        let t = nodes.len() as u32 + 1;
        nodes.push(Node::word(si, t, ".", 1, "punct"));
        sentences.push(nodes);
    }
    let entities = entities_in_order(mentions);
    Document::from_sentences(format!("synth-{index:04}"), sentences, entities)
}

/// Puts `phrase` into the first free slot at or after `at`, growing the
/// slot list if needed; returns the slot used.
fn place(slots: &mut Vec<Option<Phrase>>, at: usize, phrase: Phrase) -> usize {
    let mut i = at;
    loop {
        if i >= slots.len() {
            slots.resize(i + 1, None);
        }
        if slots[i].is_none() {
            slots[i] = Some(phrase);
            return i;
        }
        i += 1;
    }
}

/// Entities `e1, e2, …` numbered by first mention.
fn entities_in_order(mentions: Vec<(usize, Mention)>) -> Vec<Entity> {
    let mut groups: Vec<(usize, Vec<Mention>)> = Vec::new();
    for (e, m) in mentions {
        match groups.iter_mut().find(|(id, _)| *id == e) {
            Some((_, ms)) => ms.push(m),
            None => groups.push((e, vec![m])),
        }
    }
    groups.sort_by(|a, b| a.1[0].cmp(&b.1[0]));
    groups
        .into_iter()
        .enumerate()
        .map(|(i, (_, ms))| Entity::new(format!("e{}", i + 1), ms))
        .collect()
}

/// Reference system reading only the word forms: names and pronouns of one
/// class form one entity, `a O<k>` phrases are singletons.
pub fn bigram_oracle(doc: &Document) -> Document {
    let mut mentions: Vec<(usize, Mention)> = Vec::new();
    let mut singleton = usize::MAX / 2;
    for s in 0..doc.num_sentences() {
        let r = doc.sentence_range(s);
        for i in r.clone() {
            let form = doc.nodes[i].form.as_str();
            let id = doc.nodes[i].id;
            let prev = (i > r.start).then(|| (doc.nodes[i - 1].form.as_str(), doc.nodes[i - 1].id));
            let class = form
                .strip_prefix('N')
                .and_then(|rest| rest.split('_').next())
                .or_else(|| form.strip_prefix('P'))
                .and_then(|c| c.parse::<usize>().ok());
            let nodes = match prev {
                Some(("the" | "a", p)) => vec![p, id],
                _ => vec![id],
            };
            if let Some(c) = class {
                mentions.push((c, Mention::new(nodes, id)));
            } else if form.starts_with('O') && matches!(prev, Some(("a", _))) {
                mentions.push((singleton, Mention::new(nodes, id)));
                singleton += 1;
            }
        }
    }
    let mut out = doc.clone();
    out.entities = entities_in_order(mentions);
    out
}
