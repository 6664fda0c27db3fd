//! Sentence-respecting segmentation of documents into fixed-length blocks.

use std::ops::Range;

use crate::model::Document;

/// Node-index ranges of consecutive segments covering `doc`.
///
/// Each segment ends on the last sentence boundary that keeps it within
/// `segment_length` nodes. A single sentence longer than the limit becomes
/// its own oversized segment rather than being split.
pub fn segment_document(doc: &Document, segment_length: usize) -> Vec<Range<usize>> {
    let n = doc.nodes.len();
    let mut out = Vec::new();
    let mut start = 0;
    // boundaries strictly after position 0, plus the document end
    let ends: Vec<usize> = doc
        .sentence_boundaries
        .iter()
        .copied()
        .filter(|&b| b > 0)
        .chain(std::iter::once(n))
        .collect();
    while start < n {
        let limit = start + segment_length.max(1);
        let mut end = None;
        for &b in &ends {
            if b <= start {
                continue;
            }
            if b <= limit {
                end = Some(b);
            } else {
                if end.is_none() {
                    end = Some(b);
                }
                break;
            }
        }
        let end = end.unwrap_or(n);
        out.push(start..end);
        start = end;
    }
    out
}

/// Segment index of every node.
pub fn segment_of_nodes(segments: &[Range<usize>], num_nodes: usize) -> Vec<usize> {
    let mut out = vec![0; num_nodes];
    for (s, r) in segments.iter().enumerate() {
        for i in r.clone() {
            out[i] = s;
        }
    }
    out
}
