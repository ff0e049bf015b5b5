// SPDX-License-Identifier: Apache-2.0

//! DOT and line-oriented JSON snapshots of a [`DagView`].
//!
//! Both writers walk the view in `(round, source)` order, so the output is
//! byte-stable for identical views.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Committee, DagError, DagView, PartyId, Round, Vertex, VertexId};

/// How an anchor ended up at the exporting party.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorMark {
    /// Committed directly with f+1 votes.
    Committed,
    /// Ordered through a path from a later committed anchor.
    Ordered,
    Skipped,
}

pub type AnchorMarks = BTreeMap<Round, AnchorMark>;

fn node_name(id: &VertexId) -> String {
    hex::encode(&id.0[..8])
}

pub fn write_dot(view: &DagView, marks: &AnchorMarks) -> String {
    let committee = view.committee();
    let mut out = String::from("digraph dag {\n  rankdir=RL;\n  node [shape=box, fontname=\"monospace\"];\n");
    for v in view.iter() {
        let is_anchor = committee.leader(v.round()) == Some(v.source());
        let style = match (is_anchor, marks.get(&v.round())) {
            (false, _) => String::new(),
            (true, Some(AnchorMark::Committed)) => {
                ", style=\"filled,bold\", fillcolor=\"forestgreen\", fontcolor=\"white\", tooltip=\"anchor committed\"".into()
            }
            (true, Some(AnchorMark::Ordered)) => {
                ", style=\"filled,bold\", fillcolor=\"palegreen\", tooltip=\"anchor ordered\"".into()
            }
            (true, Some(AnchorMark::Skipped)) => {
                ", style=\"dashed,bold\", color=\"red\", tooltip=\"anchor skipped\"".into()
            }
            (true, None) => ", style=\"bold\", color=\"darkgreen\", tooltip=\"anchor\"".into(),
        };
        let _ = writeln!(out, "  \"{}\" [label=\"{}\"{}];", node_name(&v.id()), v.label(), style);
    }
    for v in view.iter() {
        for parent in v.edges() {
            let _ = writeln!(out, "  \"{}\" -> \"{}\";", node_name(&v.id()), node_name(parent));
        }
    }
    out.push_str("}\n");
    out
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VertexRecord {
    id: VertexId,
    round: Round,
    source: PartyId,
    edges: Vec<VertexId>,
    block: String,
}

/// One JSON object per vertex, one vertex per line.
pub fn write_jsonl(view: &DagView) -> String {
    let mut out = String::new();
    for v in view.iter() {
        let record = VertexRecord {
            id: v.id(),
            round: v.round(),
            source: v.source(),
            edges: v.edges().iter().copied().collect(),
            block: hex::encode(v.block()),
        };
        out.push_str(&serde_json::to_string(&record).expect("record serializes"));
        out.push('\n');
    }
    out
}

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("line {line}: block is not hex")]
    Block { line: usize },
    #[error("line {line}: recorded id does not match vertex contents")]
    IdMismatch { line: usize },
    #[error("line {line}: {source}")]
    Dag { line: usize, source: DagError },
}

/// Rebuilds a view from [`write_jsonl`] output. Lines must be causally
/// ordered, which the writer guarantees.
pub fn read_jsonl(committee: Committee, text: &str) -> Result<DagView, ExportError> {
    let mut view = DagView::new(committee);
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let record: VertexRecord =
            serde_json::from_str(raw).map_err(|source| ExportError::Json { line, source })?;
        let block = hex::decode(&record.block).map_err(|_| ExportError::Block { line })?;
        let vertex = Vertex::new(record.round, record.source, block, record.edges);
        if vertex.id() != record.id {
            return Err(ExportError::IdMismatch { line });
        }
        view.insert(vertex).map_err(|source| ExportError::Dag { line, source })?;
    }
    Ok(view)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> DagView {
        let committee = Committee::new(4, 1).unwrap();
        let mut view = DagView::with_genesis(committee);
        let genesis: Vec<_> = view.round(Round(0)).map(|v| v.id()).collect();
        for p in 0..4 {
            view.insert(Vertex::new(Round(1), PartyId(p), vec![p as u8, 0xff], genesis.clone()))
                .unwrap();
        }
        let ones: Vec<_> = view.round(Round(1)).map(|v| v.id()).collect();
        view.insert(Vertex::new(Round(2), PartyId(0), vec![], ones[..3].to_vec())).unwrap();
        view
    }

    #[test]
    fn jsonl_round_trip() {
        let view = sample();
        let text = write_jsonl(&view);
        assert_eq!(text.lines().count(), view.len());
        let back = read_jsonl(*view.committee(), &text).unwrap();
        assert_eq!(back, view);
        assert_eq!(write_jsonl(&back), text);
    }

    #[test]
    fn jsonl_detects_tampering() {
        let view = sample();
        let text = write_jsonl(&view).replacen("\"round\":1", "\"round\":3", 1);
        assert!(matches!(read_jsonl(*view.committee(), &text), Err(ExportError::IdMismatch { line: 5 })));
        let bad = "{\"id\":\"00\"}\n";
        assert!(matches!(read_jsonl(*view.committee(), bad), Err(ExportError::Json { line: 1, .. })));
    }

    #[test]
    fn dot_marks_anchors() {
        let view = sample();
        let plain = write_dot(&view, &AnchorMarks::new());
        assert!(plain.contains("label=\"r2/p0\", style=\"bold\""));
        assert_eq!(plain.matches(" -> ").count(), 4 * 4 + 3);

        let marks = AnchorMarks::from([(Round(2), AnchorMark::Committed)]);
        let dot = write_dot(&view, &marks);
        assert!(dot.contains("label=\"r2/p0\", style=\"filled,bold\", fillcolor=\"forestgreen\""));
        assert_eq!(dot, write_dot(&view.clone(), &marks));
    }
}
