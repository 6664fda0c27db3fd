//! CoNLL-U reading and writing with CorefUD `Entity=` annotations.
//!
//! Coreference lives in the MISC column as bracket events: `(e1` opens a
//! mention of entity `e1`, `e1)` closes it, `(e1)` marks a one-node
//! mention. Discontinuous mentions are written as numbered parts,
//! `(e1[1/2]` ... `e1[1/2])` and `(e1[2/2]` ... `e1[2/2])`. Anything after
//! the entity id inside an opening bracket (`(e1-person-2`) is an attribute
//! list; only the head position is interpreted, and only when the
//! document's `# global.Entity` declaration names a `head` field.
//!
//! Reading accepts LF or CRLF line endings. Writing is canonical: LF line
//! endings, `Entity=` as the last MISC item, entities sorted by first
//! mention.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::{Document, Entity, HeadRef, Mention, Node, NodeId, SentenceMeta};
use crate::syntax::{select_head_with, DepTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Open,
    Close,
    Single,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityEvent {
    pub kind: EventKind,
    pub entity_id: String,
    /// `(k, n)`: this bracket is part `k` of an `n`-part mention.
    pub subspan: Option<(u32, u32)>,
    /// Attributes after the id; only opening brackets carry them.
    pub attrs: Vec<String>,
}

/// Split the value of an `Entity=` MISC item into bracket events.
pub fn parse_entity_events(value: &str) -> Result<Vec<EntityEvent>> {
    parse_entity_events_at(value, 0)
}

fn parse_entity_events_at(value: &str, line: usize) -> Result<Vec<EntityEvent>> {
    let bytes = value.as_bytes();
    let mut events = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'(' {
            let start = i + 1;
            let mut j = start;
            while j < bytes.len() && bytes[j] != b'(' && bytes[j] != b')' {
                j += 1;
            }
            let (entity_id, subspan, attrs) = parse_bracket_body(&value[start..j], line)?;
            if j < bytes.len() && bytes[j] == b')' {
                events.push(EntityEvent {
                    kind: EventKind::Single,
                    entity_id,
                    subspan,
                    attrs,
                });
                i = j + 1;
            } else {
                events.push(EntityEvent {
                    kind: EventKind::Open,
                    entity_id,
                    subspan,
                    attrs,
                });
                i = j;
            }
        } else {
            let start = i;
            let mut j = start;
            while j < bytes.len() && bytes[j] != b')' {
                if bytes[j] == b'(' {
                    return Err(Error::parse(line, format!("unterminated closing bracket in '{value}'")));
                }
                j += 1;
            }
            if j == bytes.len() {
                return Err(Error::parse(line, format!("unterminated closing bracket in '{value}'")));
            }
            let (entity_id, subspan, attrs) = parse_bracket_body(&value[start..j], line)?;
            if !attrs.is_empty() {
                return Err(Error::parse(line, format!("closing bracket with attributes in '{value}'")));
            }
            events.push(EntityEvent {
                kind: EventKind::Close,
                entity_id,
                subspan,
                attrs,
            });
            i = j + 1;
        }
    }
    Ok(events)
}

type BracketBody = (String, Option<(u32, u32)>, Vec<String>);

fn parse_bracket_body(body: &str, line: usize) -> Result<BracketBody> {
    let (id_part, attrs) = match body.find('-') {
        Some(p) => (&body[..p], body[p + 1..].split('-').map(str::to_string).collect()),
        None => (body, Vec::new()),
    };
    let (id, subspan) = match id_part.find('[') {
        Some(p) => {
            let inner = id_part[p + 1..]
                .strip_suffix(']')
                .ok_or_else(|| Error::parse(line, format!("malformed part marker in '{body}'")))?;
            let (k, n) = inner
                .split_once('/')
                .ok_or_else(|| Error::parse(line, format!("malformed part marker in '{body}'")))?;
            let k: u32 = k
                .parse()
                .map_err(|_| Error::parse(line, format!("malformed part marker in '{body}'")))?;
            let n: u32 = n
                .parse()
                .map_err(|_| Error::parse(line, format!("malformed part marker in '{body}'")))?;
            if k == 0 || k > n {
                return Err(Error::parse(line, format!("part {k}/{n} out of range in '{body}'")));
            }
            (&id_part[..p], Some((k, n)))
        }
        None => (id_part, None),
    };
    if id.is_empty() {
        return Err(Error::parse(line, format!("empty entity id in '{body}'")));
    }
    Ok((id.to_string(), subspan, attrs))
}

struct OpenBracket {
    start: usize,
    line: usize,
    subspan: Option<(u32, u32)>,
    attrs: Vec<String>,
    pending: Option<usize>,
}

struct PendingMention {
    entity: String,
    parts: Vec<Option<(usize, usize)>>,
    opened: Vec<bool>,
    attrs: Vec<String>,
    line: usize,
}

struct RawMention {
    entity: String,
    /// inclusive node-index runs
    runs: Vec<(usize, usize)>,
    attrs: Vec<String>,
}

#[derive(Default)]
struct DocBuilder {
    doc_id: String,
    entity_fields: Option<String>,
    nodes: Vec<Node>,
    boundaries: Vec<usize>,
    sentences: Vec<SentenceMeta>,
    open: HashMap<String, Vec<OpenBracket>>,
    pending: Vec<Option<PendingMention>>,
    mentions: Vec<RawMention>,
}

impl DocBuilder {
    fn new(doc_id: String) -> Self {
        DocBuilder {
            doc_id,
            ..Default::default()
        }
    }

    fn is_empty(&self) -> bool {
        self.nodes.is_empty() && self.sentences.is_empty()
    }

    fn apply_event(&mut self, ev: EntityEvent, node: usize, line: usize) -> Result<()> {
        match ev.kind {
            EventKind::Single => {
                self.finish_run(&ev.entity_id, ev.subspan, ev.attrs, (node, node), line, None)?;
            }
            EventKind::Open => {
                let pending = match ev.subspan {
                    Some((k, n)) => Some(self.pending_slot(&ev.entity_id, k, n, &ev.attrs, line)?),
                    None => None,
                };
                self.open.entry(ev.entity_id).or_default().push(OpenBracket {
                    start: node,
                    line,
                    subspan: ev.subspan,
                    attrs: ev.attrs,
                    pending,
                });
            }
            EventKind::Close => {
                let stack = self.open.get_mut(&ev.entity_id);
                let pos = stack
                    .as_ref()
                    .and_then(|s| s.iter().rposition(|o| o.subspan == ev.subspan));
                let (Some(stack), Some(pos)) = (stack, pos) else {
                    return Err(Error::parse(
                        line,
                        format!("closing bracket for '{}' without an opening one", ev.entity_id),
                    ));
                };
                let open = stack.remove(pos);
                self.finish_run(
                    &ev.entity_id,
                    open.subspan,
                    open.attrs,
                    (open.start, node),
                    open.line,
                    open.pending,
                )?;
            }
        }
        Ok(())
    }

    /// Register the opening of part `k` of an `n`-part mention and return
    /// the pending slot it belongs to.
    fn pending_slot(&mut self, entity: &str, k: u32, n: u32, attrs: &[String], line: usize) -> Result<usize> {
        let k = k as usize - 1;
        if k == 0 {
            let mut opened = vec![false; n as usize];
            opened[0] = true;
            self.pending.push(Some(PendingMention {
                entity: entity.to_string(),
                parts: vec![None; n as usize],
                opened,
                attrs: attrs.to_vec(),
                line,
            }));
            return Ok(self.pending.len() - 1);
        }
        let slot = self.pending.iter().position(|p| {
            p.as_ref()
                .is_some_and(|p| p.entity == entity && p.parts.len() == n as usize && !p.opened[k])
        });
        match slot {
            Some(s) => {
                self.pending[s].as_mut().expect("slot checked above").opened[k] = true;
                Ok(s)
            }
            None => Err(Error::parse(
                line,
                format!("part {}/{n} of '{entity}' without part 1", k + 1),
            )),
        }
    }

    fn finish_run(
        &mut self,
        entity: &str,
        subspan: Option<(u32, u32)>,
        attrs: Vec<String>,
        run: (usize, usize),
        line: usize,
        pending: Option<usize>,
    ) -> Result<()> {
        let Some((k, n)) = subspan else {
            self.mentions.push(RawMention {
                entity: entity.to_string(),
                runs: vec![run],
                attrs,
            });
            return Ok(());
        };
        let slot = match pending {
            Some(s) => s,
            // a one-node part never went through an Open event
            None => self.pending_slot(entity, k, n, &attrs, line)?,
        };
        let done = {
            let p = self.pending[slot].as_mut().expect("pending mention vanished");
            p.parts[k as usize - 1] = Some(run);
            p.parts.iter().all(Option::is_some)
        };
        if done {
            let p = self.pending[slot].take().expect("pending mention vanished");
            self.mentions.push(RawMention {
                entity: p.entity,
                runs: p.parts.into_iter().flatten().collect(),
                attrs: p.attrs,
            });
        }
        Ok(())
    }

    fn finish(mut self) -> Result<Document> {
        if let Some(open) = self.open.values().flat_map(|v| v.iter()).min_by_key(|o| o.line) {
            return Err(Error::parse(open.line, "entity bracket never closed"));
        }
        if let Some(p) = self.pending.iter().flatten().min_by_key(|p| p.line) {
            return Err(Error::parse(
                p.line,
                format!("discontinuous mention of '{}' is missing parts", p.entity),
            ));
        }
        let num_words = self.nodes.iter().filter(|n| !n.is_empty).count();
        let mut doc = Document {
            doc_id: self.doc_id,
            nodes: self.nodes,
            sentence_boundaries: self.boundaries,
            entities: Vec::new(),
            num_words,
            sentences: self.sentences,
            entity_fields: self.entity_fields,
        };
        let head_field = head_field_position(doc.entity_fields.as_deref());
        let tree = DepTree::new(&doc);
        let mut by_entity: Vec<Entity> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        for raw in std::mem::take(&mut self.mentions) {
            let mut nodes: Vec<NodeId> = raw
                .runs
                .iter()
                .flat_map(|&(a, b)| (a..=b).map(|i| doc.nodes[i].id))
                .collect();
            nodes.sort();
            nodes.dedup();
            let annotated = head_field
                .and_then(|p| raw.attrs.get(p))
                .and_then(|v| v.parse::<usize>().ok())
                .filter(|&h| h >= 1 && h <= nodes.len())
                .map(|h| nodes[h - 1]);
            let head = annotated.unwrap_or_else(|| select_head_with(&doc, &tree, &nodes));
            let mention = Mention {
                nodes,
                head,
                attrs: raw.attrs,
            };
            let slot = *index.entry(raw.entity.clone()).or_insert_with(|| {
                by_entity.push(Entity::new(raw.entity.clone(), Vec::new()));
                by_entity.len() - 1
            });
            by_entity[slot].mentions.push(mention);
        }
        for e in &mut by_entity {
            e.mentions.sort();
        }
        by_entity.sort_by(|a, b| a.mentions[0].cmp(&b.mentions[0]).then_with(|| a.id.cmp(&b.id)));
        doc.entities = by_entity;
        Ok(doc)
    }
}

/// Index into a mention's attribute list (which excludes the id) of the
/// `head` field declared by `# global.Entity`.
fn head_field_position(fields: Option<&str>) -> Option<usize> {
    let fields = fields?;
    let pos = fields.split('-').position(|f| f == "head")?;
    pos.checked_sub(1)
}

fn parse_id(s: &str, line: usize) -> Result<(u32, u32)> {
    let bad = || Error::parse(line, format!("malformed id '{s}'"));
    match s.split_once('.') {
        Some((t, k)) => {
            let t = t.parse().map_err(|_| bad())?;
            let k: u32 = k.parse().map_err(|_| bad())?;
            if k == 0 {
                return Err(bad());
            }
            Ok((t, k))
        }
        None => {
            let t: u32 = s.parse().map_err(|_| bad())?;
            if t == 0 {
                return Err(bad());
            }
            Ok((t, 0))
        }
    }
}

struct SentenceBuf {
    meta: SentenceMeta,
    nodes: Vec<(Node, usize, Vec<EntityEvent>)>,
    /// raw head references to resolve once the sentence is complete
    heads: Vec<Option<(u32, u32)>>,
}

impl SentenceBuf {
    fn new() -> Self {
        SentenceBuf {
            meta: SentenceMeta::default(),
            nodes: Vec::new(),
            heads: Vec::new(),
        }
    }
}

/// Parse a CoNLL-U stream into documents, one per `# newdoc` block (or a
/// single document when the stream has no `# newdoc` comment).
pub fn parse_corpus(text: &str) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    let mut doc = DocBuilder::new(String::new());
    let mut sent = SentenceBuf::new();
    let mut sentence_index = 0u32;

    for (lineno, raw) in text.split('\n').enumerate() {
        let line_no = lineno + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.is_empty() {
            if !sent.nodes.is_empty() {
                flush_sentence(&mut doc, &mut sent, sentence_index)?;
                sentence_index += 1;
            }
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if !sent.nodes.is_empty() {
                flush_sentence(&mut doc, &mut sent, sentence_index)?;
                sentence_index += 1;
            }
            let trimmed = comment.trim();
            if trimmed == "newdoc" || trimmed.starts_with("newdoc ") {
                if !doc.is_empty() {
                    docs.push(std::mem::replace(&mut doc, DocBuilder::new(String::new())).finish()?);
                }
                sentence_index = 0;
                let id = trimmed["newdoc".len()..]
                    .trim()
                    .strip_prefix("id")
                    .and_then(|r| r.trim_start().strip_prefix('='))
                    .map(|r| r.trim().to_string())
                    .unwrap_or_default();
                doc.doc_id = id;
            } else if let Some(v) = trimmed.strip_prefix("global.Entity") {
                let v = v.trim_start().strip_prefix('=').unwrap_or(v).trim();
                doc.entity_fields = Some(v.to_string());
            } else {
                sent.meta.comments.push(comment.to_string());
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(Error::parse(
                line_no,
                format!("expected 10 tab-separated columns, found {}", cols.len()),
            ));
        }
        if cols[0].contains('-') {
            let (a, b) = cols[0].split_once('-').expect("checked above");
            if a.parse::<u32>().is_err() || b.parse::<u32>().is_err() {
                return Err(Error::parse(line_no, format!("malformed id '{}'", cols[0])));
            }
            sent.meta.multiword.push((sent.nodes.len(), line.to_string()));
            continue;
        }
        let (token, suffix) = parse_id(cols[0], line_no)?;
        let is_empty = suffix > 0;
        let (head, deprel) = if is_empty {
            // empty nodes hang in the enhanced graph; use its first edge
            match cols[8].split('|').next().and_then(|e| e.split_once(':')) {
                Some((h, rel)) if cols[8] != "_" => (Some(parse_head(h, line_no)?), rel.to_string()),
                _ => (None, "_".to_string()),
            }
        } else {
            let h: u32 = cols[6]
                .parse()
                .map_err(|_| Error::parse(line_no, format!("malformed head '{}'", cols[6])))?;
            (if h == 0 { None } else { Some((h, 0)) }, cols[7].to_string())
        };
        let mut misc = Vec::new();
        let mut events = Vec::new();
        if cols[9] != "_" {
            for item in cols[9].split('|') {
                match item.strip_prefix("Entity=") {
                    Some(v) => events.extend(parse_entity_events_at(v, line_no)?),
                    None => misc.push(item.to_string()),
                }
            }
        }
        let node = Node {
            id: NodeId::empty(sentence_index, token, suffix),
            form: cols[1].to_string(),
            lemma: cols[2].to_string(),
            upos: cols[3].to_string(),
            xpos: cols[4].to_string(),
            feats: cols[5].to_string(),
            head: HeadRef::Root,
            deprel,
            deps: cols[8].to_string(),
            misc,
            is_empty,
        };
        sent.heads.push(head.filter(|&(t, k)| t != 0 || k != 0));
        sent.nodes.push((node, line_no, events));
    }
    if !sent.nodes.is_empty() {
        flush_sentence(&mut doc, &mut sent, sentence_index)?;
    }
    if !doc.is_empty() || docs.is_empty() && !text.trim().is_empty() {
        docs.push(doc.finish()?);
    }
    Ok(docs)
}

fn parse_head(s: &str, line: usize) -> Result<(u32, u32)> {
    if s == "0" {
        return Ok((0, 0));
    }
    parse_id(s, line)
}

fn flush_sentence(doc: &mut DocBuilder, sent: &mut SentenceBuf, sentence_index: u32) -> Result<()> {
    let buf = std::mem::replace(sent, SentenceBuf::new());
    let ids: Vec<NodeId> = buf.nodes.iter().map(|(n, _, _)| n.id).collect();
    let start = doc.nodes.len();
    doc.boundaries.push(start);
    doc.sentences.push(buf.meta);
    for (k, ((mut node, line_no, events), head)) in buf.nodes.into_iter().zip(buf.heads).enumerate() {
        if let Some((t, e)) = head {
            let target = NodeId::empty(sentence_index, t, e);
            if !ids.contains(&target) {
                return Err(Error::parse(
                    line_no,
                    format!("head {} does not exist in the sentence", target.conllu_id()),
                ));
            }
            node.head = HeadRef::Node(target);
        }
        if k > 0 && ids[k - 1] >= node.id {
            return Err(Error::parse(line_no, format!("node {} out of order", node.id.conllu_id())));
        }
        doc.nodes.push(node);
        let idx = doc.nodes.len() - 1;
        for ev in events {
            doc.apply_event(ev, idx, line_no)?;
        }
    }
    Ok(())
}

struct Bracket {
    entity: usize,
    mention: usize,
    start: usize,
    end: usize,
    subspan: Option<(u32, u32)>,
    attrs: Option<Vec<String>>,
}

fn bracket_text(id: &str, subspan: Option<(u32, u32)>) -> String {
    match subspan {
        Some((k, n)) => format!("{id}[{k}/{n}]"),
        None => id.to_string(),
    }
}

fn open_text(id: &str, b: &Bracket) -> String {
    let mut s = bracket_text(id, b.subspan);
    if let Some(attrs) = &b.attrs {
        for a in attrs {
            s.push('-');
            s.push_str(a);
        }
    }
    s
}

/// Serialize documents to canonical CoNLL-U.
pub fn write_corpus(docs: &[Document]) -> String {
    let mut out = String::new();
    for doc in docs {
        write_document(doc, &mut out);
    }
    out
}

fn write_document(doc: &Document, out: &mut String) {
    if doc.doc_id.is_empty() {
        out.push_str("# newdoc\n");
    } else {
        out.push_str(&format!("# newdoc id = {}\n", doc.doc_id));
    }
    if let Some(f) = &doc.entity_fields {
        out.push_str(&format!("# global.Entity = {f}\n"));
    }
    let head_field = head_field_position(doc.entity_fields.as_deref());

    let mut brackets = Vec::new();
    for (ei, entity) in doc.entities.iter().enumerate() {
        for (mi, m) in entity.mentions.iter().enumerate() {
            let idx: Vec<usize> = m.nodes.iter().filter_map(|&n| doc.index_of(n)).collect();
            let mut runs: Vec<(usize, usize)> = Vec::new();
            for i in idx {
                match runs.last_mut() {
                    Some((_, end)) if *end + 1 == i => *end = i,
                    _ => runs.push((i, i)),
                }
            }
            let mut attrs = m.attrs.clone();
            if let (Some(p), Some(pos)) = (head_field, m.nodes.iter().position(|&n| n == m.head)) {
                if attrs.len() <= p {
                    attrs.resize(p + 1, String::new());
                }
                attrs[p] = (pos + 1).to_string();
            }
            let n = runs.len() as u32;
            for (k, &(start, end)) in runs.iter().enumerate() {
                brackets.push(Bracket {
                    entity: ei,
                    mention: mi,
                    start,
                    end,
                    subspan: (n > 1).then_some((k as u32 + 1, n)),
                    attrs: (k == 0 && !attrs.is_empty()).then(|| attrs.clone()),
                });
            }
        }
    }
    let mut at_node: Vec<Vec<usize>> = vec![Vec::new(); doc.nodes.len()];
    for (bi, b) in brackets.iter().enumerate() {
        at_node[b.start].push(bi);
        if b.end != b.start {
            at_node[b.end].push(bi);
        }
    }

    for s in 0..doc.num_sentences() {
        let range = doc.sentence_range(s);
        let meta = doc.sentences.get(s);
        if let Some(meta) = meta {
            for c in &meta.comments {
                out.push('#');
                out.push_str(c);
                out.push('\n');
            }
        }
        for (k, i) in range.enumerate() {
            if let Some(meta) = meta {
                for (_, line) in meta.multiword.iter().filter(|(pos, _)| *pos == k) {
                    out.push_str(line);
                    out.push('\n');
                }
            }
            let node = &doc.nodes[i];
            let entity_value = entity_misc(doc, &brackets, &at_node[i], i);
            write_node(node, entity_value, out);
        }
        out.push('\n');
    }
}

fn entity_misc(doc: &Document, brackets: &[Bracket], here: &[usize], node: usize) -> Option<String> {
    if here.is_empty() {
        return None;
    }
    let mut closes: Vec<&Bracket> = Vec::new();
    let mut opens: Vec<&Bracket> = Vec::new();
    let mut singles: Vec<&Bracket> = Vec::new();
    for &bi in here {
        let b = &brackets[bi];
        if b.start == b.end {
            singles.push(b);
        } else if b.start == node {
            opens.push(b);
        } else {
            closes.push(b);
        }
    }
    // innermost (latest opened) first
    closes.sort_by(|a, b| {
        b.start
            .cmp(&a.start)
            .then(b.entity.cmp(&a.entity))
            .then(b.mention.cmp(&a.mention))
    });
    // outermost (longest) first
    opens.sort_by(|a, b| {
        b.end
            .cmp(&a.end)
            .then(a.entity.cmp(&b.entity))
            .then(a.mention.cmp(&b.mention))
    });
    singles.sort_by(|a, b| a.entity.cmp(&b.entity).then(a.mention.cmp(&b.mention)));
    let mut s = String::new();
    for b in closes {
        s.push_str(&bracket_text(&doc.entities[b.entity].id, b.subspan));
        s.push(')');
    }
    for b in opens {
        s.push('(');
        s.push_str(&open_text(&doc.entities[b.entity].id, b));
    }
    for b in singles {
        s.push('(');
        s.push_str(&open_text(&doc.entities[b.entity].id, b));
        s.push(')');
    }
    Some(s)
}

fn write_node(node: &Node, entity: Option<String>, out: &mut String) {
    let (head, deprel) = if node.is_empty {
        ("_".to_string(), "_".to_string())
    } else {
        let h = match node.head {
            HeadRef::Root => "0".to_string(),
            HeadRef::Node(h) => h.conllu_id(),
        };
        (h, node.deprel.clone())
    };
    let mut misc: Vec<String> = node.misc.clone();
    if let Some(e) = entity {
        misc.push(format!("Entity={e}"));
    }
    let misc = if misc.is_empty() { "_".to_string() } else { misc.join("|") };
    let cols = [
        node.id.conllu_id(),
        node.form.clone(),
        node.lemma.clone(),
        node.upos.clone(),
        node.xpos.clone(),
        node.feats.clone(),
        head,
        deprel,
        node.deps.clone(),
        misc,
    ];
    out.push_str(&cols.join("\t"));
    out.push('\n');
}
