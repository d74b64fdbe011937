use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::batch::{anchor_assign, assignment_bits, decompose, AnchorState, Assignment, Batch, ReqKind};
use crate::consistency::{Assigned, OpKind, OperationRecord};
use crate::element::Element;
use crate::overlay::{DhtStore, Kind, RouteState, Topology, VirtualId};
use crate::sim::hash::{hash64, hash_point, tag};
use crate::sim::{
    BitSizer, Engine, Envelope, Fault, MetricsSummary, NodeId, Trace, Outbox, Payload, Protocol, SimConfig,
    SimMode, TAG_BITS,
};

#[derive(Clone, Debug)]
pub struct SkeapConfig {
    pub priorities: usize,
    /// Requests generated per activation.
    pub lambda: u32,
    /// Number of waves; requests are generated during all but the last.
    pub epochs: u32,
    pub insert_prob: f64,
    pub seed: u64,
}

impl SkeapConfig {
    pub fn from_sim(c: &SimConfig) -> Self {
        SkeapConfig {
            priorities: c.priority_count as usize,
            lambda: c.lambda,
            epochs: c.epochs,
            insert_prob: 0.5,
            seed: c.seed,
        }
    }
}

#[derive(Clone, Debug)]
pub enum SkeapMsg {
    Batch { wave: u32, batch: Batch },
    Share { wave: u32, share: Assignment },
    Put { route: RouteState, key: u64, elem: Element },
    Get { route: RouteState, key: u64, from: VirtualId, record: usize },
    Reply { record: usize, elem: Element },
}

impl Payload for SkeapMsg {
    fn size_bits(&self, s: &BitSizer) -> u32 {
        TAG_BITS
            + match self {
                SkeapMsg::Batch { wave, batch } => s.nat(*wave as u64) + batch.size_bits(s),
                SkeapMsg::Share { wave, share } => s.nat(*wave as u64) + assignment_bits(share, s),
                SkeapMsg::Put { route, elem, .. } => route.size_bits(s) + s.point() + elem.size_bits(s),
                SkeapMsg::Get { route, record, .. } => {
                    route.size_bits(s) + s.point() + s.vid() + s.nat(*record as u64)
                }
                SkeapMsg::Reply { record, elem } => s.nat(*record as u64) + elem.size_bits(s),
            }
    }

    fn kind(&self) -> &'static str {
        match self {
            SkeapMsg::Batch { .. } => "batch",
            SkeapMsg::Share { .. } => "share",
            SkeapMsg::Put { .. } => "put",
            SkeapMsg::Get { .. } => "get",
            SkeapMsg::Reply { .. } => "reply",
        }
    }
}

#[derive(Clone, Debug)]
struct Pending {
    seq: u64,
    elem: Option<Element>,
    entry: usize,
}

struct Home {
    buffer: Vec<(u64, Option<Element>)>,
    inflight: Vec<Pending>,
    next_seq: u64,
    rng: ChaCha8Rng,
}

struct Slot {
    wave: u32,
    parts: Vec<Option<Batch>>,
    sent: bool,
}

/// Per-entry positions and serials still to hand out in phase 4.
struct Cursor {
    ins_next: Vec<u64>,
    ins_serial: u64,
    dels: Vec<(u64, u64)>,
    del_serial: u64,
}

pub struct SkeapSim {
    topo: Topology,
    cfg: SkeapConfig,
    homes: Vec<Home>,
    slots: Vec<Slot>,
    stores: Vec<DhtStore<Element, (VirtualId, usize)>>,
    anchor: AnchorState,
    records: Vec<OperationRecord>,
    open_gets: usize,
    /// Combined batch and assignment per wave, as seen by the anchor.
    pub anchor_log: Vec<(Batch, Assignment)>,
}

impl SkeapSim {
    pub fn new(topo: Topology, cfg: SkeapConfig) -> Self {
        let n = topo.n();
        let homes = (0..n)
            .map(|v| Home {
                buffer: Vec::new(),
                inflight: Vec::new(),
                next_seq: 0,
                rng: ChaCha8Rng::seed_from_u64(hash64(tag::WORKLOAD, &[v as u64], cfg.seed)),
            })
            .collect();
        let slots = (0..3 * n)
            .map(|i| Slot { wave: 0, parts: vec![None; 1 + topo.children(VirtualId::from_index(i)).len()], sent: false })
            .collect();
        SkeapSim {
            stores: vec![DhtStore::default(); 3 * n],
            anchor: AnchorState::new(cfg.priorities),
            records: Vec::new(),
            open_gets: 0,
            anchor_log: Vec::new(),
            homes,
            slots,
            topo,
            cfg,
        }
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn anchor_state(&self) -> &AnchorState {
        &self.anchor
    }

    pub fn records(&self) -> &[OperationRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<OperationRecord> {
        self.records
    }

    /// Queues a request at `node` as if it had been issued before the run.
    pub fn preload(&mut self, node: NodeId, req: ReqKind) {
        let h = &mut self.homes[node as usize];
        let seq = h.next_seq;
        h.next_seq += 1;
        let elem = match req {
            ReqKind::Insert(p) => Some(Element::new(p, node, seq)),
            ReqKind::Delete => None,
        };
        h.buffer.push((seq, elem));
    }

    /// Elements held in the DHT, and gets still waiting for their put.
    pub fn dht_state(&self) -> (usize, usize) {
        (self.stores.iter().map(|s| s.len()).sum(), self.stores.iter().map(|s| s.parked()).sum())
    }

    /// Keys of all elements currently held in the DHT.
    pub fn stored_keys(&self) -> Vec<u64> {
        self.stores.iter().flat_map(|s| s.keys()).collect()
    }

    fn generate(&mut self, node: NodeId) {
        let mid = VirtualId::middle(node).index();
        if self.slots[mid].wave + 1 >= self.cfg.epochs {
            return;
        }
        let p = self.cfg.priorities as u64;
        for _ in 0..self.cfg.lambda {
            let h = &mut self.homes[node as usize];
            let req = if h.rng.gen_bool(self.cfg.insert_prob) {
                ReqKind::Insert(h.rng.gen_range(1..=p))
            } else {
                ReqKind::Delete
            };
            self.preload(node, req);
        }
    }

    /// Takes the snapshot of `node`'s buffer and remembers each request's entry.
    fn snapshot(&mut self, node: NodeId) -> Batch {
        let h = &mut self.homes[node as usize];
        debug_assert!(h.inflight.is_empty());
        let reqs: Vec<ReqKind> = h
            .buffer
            .iter()
            .map(|(_, e)| e.map_or(ReqKind::Delete, |e| ReqKind::Insert(e.priority)))
            .collect();
        let batch = Batch::snapshot(self.cfg.priorities, reqs.iter().copied());
        let mut entry = 0usize;
        let mut prev_del = false;
        let mut started = false;
        for (seq, elem) in h.buffer.drain(..) {
            match elem {
                Some(_) if started && prev_del => {
                    entry += 1;
                    prev_del = false;
                }
                Some(_) => {}
                None => prev_del = true,
            }
            started = true;
            h.inflight.push(Pending { seq, elem, entry });
        }
        batch
    }

    fn try_send_up(&mut self, v: VirtualId, out: &mut Outbox<VirtualId, SkeapMsg>) -> Result<(), Fault> {
        let slot = &self.slots[v.index()];
        if slot.wave >= self.cfg.epochs || slot.sent || slot.parts[1..].iter().any(Option::is_none) {
            return Ok(());
        }
        let own = if v.kind == Kind::Middle { self.snapshot(v.owner) } else { Batch::empty(self.cfg.priorities) };
        let slot = &mut self.slots[v.index()];
        slot.parts[0] = Some(own);
        slot.sent = true;
        let wave = slot.wave;
        let combined = Batch::combine_all(self.cfg.priorities, slot.parts.iter().map(|b| b.as_ref().unwrap()));
        match self.topo.parent(v) {
            Some(p) => out.send(v, p, SkeapMsg::Batch { wave, batch: combined }),
            None => {
                let share = anchor_assign(&mut self.anchor, &combined);
                self.anchor_log.push((combined, share.clone()));
                self.on_share(v, wave, share, out)?;
            }
        }
        Ok(())
    }

    fn on_share(&mut self, v: VirtualId, wave: u32, share: Assignment, out: &mut Outbox<VirtualId, SkeapMsg>) -> Result<(), Fault> {
        let slot = &mut self.slots[v.index()];
        if slot.wave != wave || !slot.sent {
            return Err(Fault::protocol(format!("{v:?} got share for wave {wave} in wave {}", slot.wave)));
        }
        let parts: Vec<Batch> = slot.parts.iter_mut().map(|b| b.take().unwrap()).collect();
        slot.sent = false;
        slot.wave += 1;
        let refs: Vec<&Batch> = parts.iter().collect();
        let mut split = decompose(&share, &refs).map_err(|e| Fault::protocol(format!("{v:?}: {e}")))?.into_iter();
        let own = split.next().unwrap();
        let children = self.topo.children(v).to_vec();
        for (c, s) in children.into_iter().zip(split) {
            out.send(v, c, SkeapMsg::Share { wave, share: s });
        }
        if v.kind == Kind::Middle {
            self.phase4(v.owner, wave, &own, out)?;
        }
        Ok(())
    }

    fn phase4(&mut self, node: NodeId, wave: u32, share: &Assignment, out: &mut Outbox<VirtualId, SkeapMsg>) -> Result<(), Fault> {
        let home = VirtualId::middle(node);
        let inflight = std::mem::take(&mut self.homes[node as usize].inflight);
        let p = self.cfg.priorities;
        let mut cursor: Vec<Cursor> = share
            .iter()
            .map(|a| {
                let ins_next = a.ins.iter().map(|i| i.map_or(0, |(x, _)| x)).collect();
                let mut dels: Vec<(u64, u64)> = a.del_positions().collect();
                dels.reverse();
                Cursor { ins_next, ins_serial: a.ins_serial, dels, del_serial: a.del_serial }
            })
            .collect();
        let mut bottoms: Vec<u64> = share.iter().map(|a| a.bottom).collect();
        for req in inflight {
            let c = cursor.get_mut(req.entry).ok_or_else(|| Fault::protocol("share shorter than own batch"))?;
            let idx = self.records.len();
            match req.elem {
                Some(e) => {
                    let q = e.priority as usize - 1;
                    debug_assert!(q < p);
                    let pos = c.ins_next[q];
                    c.ins_next[q] += 1;
                    let serial = c.ins_serial;
                    c.ins_serial += 1;
                    self.records.push(OperationRecord {
                        node,
                        seq: req.seq,
                        kind: OpKind::Insert(e),
                        serial_index: serial,
                        assigned: Some(Assigned::Pos { priority: e.priority, pos }),
                        returned: None,
                        epoch: wave,
                    });
                    let key = self.key(e.priority, pos);
                    let msg = SkeapMsg::Put { route: RouteState::new(&self.topo, home, key), key, elem: e };
                    self.dispatch(home, msg, out)?;
                }
                None => {
                    let serial = c.del_serial;
                    c.del_serial += 1;
                    let mut rec = OperationRecord {
                        node,
                        seq: req.seq,
                        kind: OpKind::DeleteMin,
                        serial_index: serial,
                        assigned: Some(Assigned::Bottom),
                        returned: None,
                        epoch: wave,
                    };
                    if let Some((prio, pos)) = c.dels.pop() {
                        rec.assigned = Some(Assigned::Pos { priority: prio, pos });
                        self.records.push(rec);
                        self.open_gets += 1;
                        let key = self.key(prio, pos);
                        let msg = SkeapMsg::Get { route: RouteState::new(&self.topo, home, key), key, from: home, record: idx };
                        self.dispatch(home, msg, out)?;
                    } else {
                        let b = &mut bottoms[req.entry];
                        if *b == 0 {
                            return Err(Fault::protocol("more deletes than the share covers"));
                        }
                        *b -= 1;
                        self.records.push(rec);
                    }
                }
            }
        }
        Ok(())
    }

    fn key(&self, priority: u64, pos: u64) -> u64 {
        hash_point(tag::SKEAP_POS, &[priority, pos], self.cfg.seed)
    }

    /// Forwards a routed message one hop, or executes it if `at` is responsible.
    fn dispatch(&mut self, at: VirtualId, mut msg: SkeapMsg, out: &mut Outbox<VirtualId, SkeapMsg>) -> Result<(), Fault> {
        let route = match &mut msg {
            SkeapMsg::Put { route, .. } | SkeapMsg::Get { route, .. } => route,
            _ => unreachable!("only puts and gets are routed"),
        };
        if let Some(next) = route.next_hop(&self.topo, at) {
            out.send(at, next, msg);
            return Ok(());
        }
        let store = &mut self.stores[at.index()];
        match msg {
            SkeapMsg::Put { key, elem, .. } => {
                if let Some(((req, rec), e)) = store.put(key, elem).map_err(|e| Fault::protocol(e.to_string()))? {
                    out.send(at, req, SkeapMsg::Reply { record: rec, elem: e });
                }
            }
            SkeapMsg::Get { key, from, record, .. } => {
                if let Some(e) = store.get(key, (from, record)).map_err(|e| Fault::protocol(e.to_string()))? {
                    out.send(at, from, SkeapMsg::Reply { record, elem: e });
                }
            }
            _ => unreachable!(),
        }
        Ok(())
    }
}

impl Protocol for SkeapSim {
    type Addr = VirtualId;
    type Msg = SkeapMsg;

    fn node_count(&self) -> usize {
        self.topo.n()
    }

    fn on_activate(&mut self, node: NodeId, out: &mut Outbox<VirtualId, SkeapMsg>) -> Result<(), Fault> {
        self.generate(node);
        for v in [VirtualId::left(node), VirtualId::middle(node), VirtualId::right(node)] {
            self.try_send_up(v, out)?;
        }
        Ok(())
    }

    fn on_message(&mut self, env: Envelope<VirtualId, SkeapMsg>, out: &mut Outbox<VirtualId, SkeapMsg>) -> Result<(), Fault> {
        let v = env.dst;
        match env.payload {
            SkeapMsg::Batch { wave, batch } => {
                let i = self
                    .topo
                    .children(v)
                    .iter()
                    .position(|&c| c == env.src)
                    .ok_or_else(|| Fault::protocol("batch from non-child"))?;
                let slot = &mut self.slots[v.index()];
                if slot.wave != wave || slot.parts[i + 1].is_some() {
                    return Err(Fault::protocol(format!("{v:?}: unexpected batch for wave {wave}")));
                }
                slot.parts[i + 1] = Some(batch);
                Ok(())
            }
            SkeapMsg::Share { wave, share } => self.on_share(v, wave, share, out),
            m @ (SkeapMsg::Put { .. } | SkeapMsg::Get { .. }) => self.dispatch(v, m, out),
            SkeapMsg::Reply { record, elem } => {
                let r = &mut self.records[record];
                if r.returned.is_some() || r.node != v.owner {
                    return Err(Fault::protocol("reply for a settled or foreign record"));
                }
                r.returned = Some(elem);
                self.open_gets -= 1;
                Ok(())
            }
        }
    }

    fn is_done(&self) -> bool {
        self.open_gets == 0 && self.slots.iter().all(|s| s.wave >= self.cfg.epochs)
    }
}

pub struct SkeapOutcome {
    pub records: Vec<OperationRecord>,
    pub metrics: MetricsSummary,
    pub anchor: AnchorState,
    pub anchor_log: Vec<(Batch, Assignment)>,
    pub stored_keys: Vec<u64>,
    pub trace_digest: u64,
    pub trace: Trace,
    pub time: u64,
    pub max_delay: u64,
}

/// Builds the overlay, runs all waves in the configured mode and checks that
/// the DHT drained consistently with the anchor.
pub fn run_skeap(sim: &SimConfig) -> Result<SkeapOutcome, Fault> {
    sim.validate().map_err(Fault::Protocol)?;
    let topo = Topology::build(sim.n, sim.seed).map_err(|e| Fault::protocol(e.to_string()))?;
    let proto = SkeapSim::new(topo, SkeapConfig::from_sim(sim));
    run_skeap_with(proto, sim)
}

pub fn run_skeap_with(proto: SkeapSim, sim: &SimConfig) -> Result<SkeapOutcome, Fault> {
    let ecfg = sim.engine();
    let seed = ecfg.schedule_seed;
    let mut eng = Engine::new(proto, ecfg);
    let time = match sim.mode {
        SimMode::Sync => eng.run_sync()?,
        SimMode::Async => eng.run_async(seed)?,
    };
    let (stored, parked) = eng.proto.dht_state();
    if parked != 0 || stored as u64 != eng.proto.anchor.total() {
        return Err(Fault::protocol(format!(
            "DHT holds {stored} elements with {parked} parked gets, anchor expects {}",
            eng.proto.anchor.total()
        )));
    }
    let trace_digest = eng.trace().digest();
    let trace = eng.trace().clone();
    let metrics = eng.metrics().clone();
    let max_delay = eng.max_delay();
    let stored_keys = eng.proto.stored_keys();
    let p = eng.proto;
    Ok(SkeapOutcome {
        stored_keys,
        anchor: p.anchor.clone(),
        anchor_log: p.anchor_log,
        records: p.records,
        metrics,
        trace_digest,
        trace,
        time,
        max_delay,
    })
}
