use std::io::{self, Write};

use serde::Serialize;

use super::hash::mix64;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TraceEvent {
    pub kind: &'static str,
    pub time: u64,
    pub src: u64,
    pub dst: u64,
    pub bits: u32,
}

/// Event trace. The running digest is always maintained so determinism can
/// be checked without retaining events.
#[derive(Clone, Debug, Default)]
pub struct Trace {
    keep: bool,
    events: Vec<TraceEvent>,
    digest: u64,
    count: u64,
}

impl Trace {
    pub fn new(keep: bool) -> Self {
        Trace { keep, ..Trace::default() }
    }

    pub(crate) fn push(&mut self, kind: &'static str, time: u64, src: u64, dst: u64, bits: u32) {
        let k = kind.bytes().fold(0u64, |h, b| mix64(h ^ b as u64));
        for x in [k, time, src, dst, bits as u64] {
            self.digest = mix64(self.digest ^ x);
        }
        self.count += 1;
        if self.keep {
            self.events.push(TraceEvent { kind, time, src, dst, bits });
        }
    }

    pub fn digest(&self) -> u64 {
        self.digest
    }

    pub fn len(&self) -> u64 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}
