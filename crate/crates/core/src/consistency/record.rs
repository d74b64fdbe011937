use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::element::Element;
use crate::sim::NodeId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    Insert(Element),
    DeleteMin,
}

/// Position handed out by a protocol.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assigned {
    Pos { priority: u64, pos: u64 },
    Bottom,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperationRecord {
    pub node: NodeId,
    pub seq: u64,
    pub kind: OpKind,
    pub serial_index: u64,
    pub assigned: Option<Assigned>,
    /// For deletes: the element returned, `None` for bottom.
    pub returned: Option<Element>,
    pub epoch: u32,
}

impl OperationRecord {
    pub fn insert(node: NodeId, seq: u64, e: Element) -> Self {
        OperationRecord {
            node,
            seq,
            kind: OpKind::Insert(e),
            serial_index: 0,
            assigned: None,
            returned: None,
            epoch: 0,
        }
    }

    pub fn delete(node: NodeId, seq: u64, returned: Option<Element>) -> Self {
        OperationRecord {
            node,
            seq,
            kind: OpKind::DeleteMin,
            serial_index: 0,
            assigned: None,
            returned,
            epoch: 0,
        }
    }

    pub fn is_insert(&self) -> bool {
        matches!(self.kind, OpKind::Insert(_))
    }

    pub fn element(&self) -> Option<Element> {
        match self.kind {
            OpKind::Insert(e) => Some(e),
            OpKind::DeleteMin => None,
        }
    }
}

/// Indices sorted by `serial_index`.
pub fn order_by_serial(history: &[OperationRecord]) -> Vec<usize> {
    let mut o: Vec<usize> = (0..history.len()).collect();
    o.sort_by_key(|&i| history[i].serial_index);
    o
}

pub fn write_records_jsonl<W: Write>(history: &[OperationRecord], mut w: W) -> io::Result<()> {
    for r in history {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
