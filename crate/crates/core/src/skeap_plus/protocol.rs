use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::consistency::{Assigned, OpKind, OperationRecord};
use crate::element::Element;
use crate::kselect::{Cmd, KMsg, KParams, KSelect, KStats};
use crate::overlay::{split_counts, DhtStore, Kind, RouteState, Topology, VirtualId};
use crate::sim::hash::{hash64, hash_point, tag};
use crate::sim::{
    BitSizer, Engine, Envelope, Fault, MetricsSummary, NodeId, Outbox, Payload, Protocol, SimConfig, SimMode,
    Trace, TAG_BITS,
};

#[derive(Clone, Debug)]
pub struct PlusConfig {
    /// Priorities are drawn from `1..=priorities`.
    pub priorities: u64,
    pub lambda: u32,
    /// Requests are generated during all but the last epoch.
    pub epochs: u32,
    pub insert_prob: f64,
    pub seed: u64,
    pub kselect: KParams,
}

impl PlusConfig {
    pub fn from_sim(c: &SimConfig) -> Self {
        PlusConfig {
            priorities: c.priority_count,
            lambda: c.lambda,
            epochs: c.epochs,
            insert_prob: 0.5,
            seed: c.seed,
            kselect: KParams::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Wave {
    Ins,
    Del,
    Qual,
}

#[derive(Clone, Debug)]
pub enum PlusMsg {
    Up { epoch: u32, wave: Wave, count: u64 },
    StartIns { epoch: u32, first: u64, len: u64 },
    Qualify { epoch: u32, pivot: Element },
    /// `qual` and `del` are `(first, len)` shares of `[1, k*]` and `[1, k]`;
    /// delete position `p` gets serial `serial_base + p`.
    Assign { epoch: u32, qual: (u64, u64), del: (u64, u64), k_star: u64, serial_base: u64 },
    Store { route: RouteState, key: u64, elem: Element, from: VirtualId },
    Ack,
    Move { route: RouteState, key: u64, elem: Element },
    Fetch { route: RouteState, key: u64, from: VirtualId, record: usize },
    Reply { record: usize, elem: Element },
    K(KMsg),
}

impl Payload for PlusMsg {
    fn size_bits(&self, s: &BitSizer) -> u32 {
        let e = |x: &u32| s.nat(*x as u64);
        match self {
            PlusMsg::K(k) => k.size_bits(s),
            m => {
                TAG_BITS
                    + match m {
                        PlusMsg::Up { epoch, count, .. } => e(epoch) + 2 + s.nat(*count),
                        PlusMsg::StartIns { epoch, first, len } => e(epoch) + s.nat(*first) + s.nat(*len),
                        PlusMsg::Qualify { epoch, pivot } => e(epoch) + pivot.size_bits(s),
                        PlusMsg::Assign { epoch, qual, del, k_star, serial_base } => {
                            e(epoch)
                                + s.interval(qual.0, qual.1)
                                + s.interval(del.0, del.1)
                                + s.nat(*k_star)
                                + s.nat(*serial_base)
                        }
                        PlusMsg::Store { route, elem, .. } => route.size_bits(s) + s.point() + elem.size_bits(s) + s.vid(),
                        PlusMsg::Ack => 1,
                        PlusMsg::Move { route, elem, .. } => route.size_bits(s) + s.point() + elem.size_bits(s),
                        PlusMsg::Fetch { route, record, .. } => {
                            route.size_bits(s) + s.point() + s.vid() + s.nat(*record as u64)
                        }
                        PlusMsg::Reply { record, elem } => s.nat(*record as u64) + elem.size_bits(s),
                        PlusMsg::K(_) => unreachable!(),
                    }
            }
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            PlusMsg::Up { .. } => "plus_up",
            PlusMsg::StartIns { .. } => "plus_start_ins",
            PlusMsg::Qualify { .. } => "plus_qualify",
            PlusMsg::Assign { .. } => "plus_assign",
            PlusMsg::Store { .. } => "plus_store",
            PlusMsg::Ack => "plus_ack",
            PlusMsg::Move { .. } => "plus_move",
            PlusMsg::Fetch { .. } => "plus_fetch",
            PlusMsg::Reply { .. } => "plus_reply",
            PlusMsg::K(k) => k.kind(),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct EpochStats {
    pub epoch: u32,
    pub inserts: u64,
    pub deletes: u64,
    pub k_star: u64,
    /// Heap size after the epoch.
    pub m: u64,
    pub pivot: Option<Element>,
    pub kselect: Option<KStats>,
}

struct Home {
    ins_buf: Vec<(u64, Element)>,
    del_buf: Vec<u64>,
    ins_flight: Vec<(u64, Element)>,
    del_flight: Vec<u64>,
    acks_due: u64,
    fetches_due: u64,
    next_seq: u64,
    rng: ChaCha8Rng,
}

struct VState {
    epoch: u32,
    wave: Wave,
    sent: bool,
    parts: Vec<Option<u64>>,
    ins_counts: Vec<u64>,
    del_counts: Vec<u64>,
    qual_counts: Vec<u64>,
    pivot: Option<Element>,
}

pub struct SkeapPlusSim {
    topo: Topology,
    cfg: PlusConfig,
    homes: Vec<Home>,
    vs: Vec<VState>,
    elems: Vec<DhtStore<Element, ()>>,
    slots: Vec<DhtStore<Element, (VirtualId, usize)>>,
    ks: KSelect,
    records: Vec<OperationRecord>,
    m: u64,
    serial: u64,
    pending_k: u64,
    selecting: bool,
    pub epochs: Vec<EpochStats>,
}

impl SkeapPlusSim {
    pub fn new(topo: Topology, cfg: PlusConfig) -> Self {
        let n = topo.n();
        let homes = (0..n)
            .map(|v| Home {
                ins_buf: Vec::new(),
                del_buf: Vec::new(),
                ins_flight: Vec::new(),
                del_flight: Vec::new(),
                acks_due: 0,
                fetches_due: 0,
                next_seq: 0,
                rng: ChaCha8Rng::seed_from_u64(hash64(tag::WORKLOAD, &[v as u64, 1], cfg.seed)),
            })
            .collect();
        let vs = (0..3 * n)
            .map(|i| VState {
                epoch: 0,
                wave: Wave::Ins,
                sent: false,
                parts: vec![None; 1 + topo.children(VirtualId::from_index(i)).len()],
                ins_counts: Vec::new(),
                del_counts: Vec::new(),
                qual_counts: Vec::new(),
                pivot: None,
            })
            .collect();
        SkeapPlusSim {
            ks: KSelect::new(&topo, cfg.seed, cfg.kselect.clone()),
            elems: vec![DhtStore::default(); 3 * n],
            slots: vec![DhtStore::default(); 3 * n],
            records: Vec::new(),
            m: 0,
            serial: 0,
            pending_k: 0,
            selecting: false,
            epochs: Vec::new(),
            homes,
            vs,
            topo,
            cfg,
        }
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn records(&self) -> &[OperationRecord] {
        &self.records
    }

    /// Heap size as tracked by the anchor.
    pub fn heap_size(&self) -> u64 {
        self.m
    }

    /// Elements under random keys, and elements or fetches left at position keys.
    pub fn dht_state(&self) -> (usize, usize) {
        let stored = self.elems.iter().map(|s| s.len()).sum();
        let left = self.slots.iter().map(|s| s.len() + s.parked()).sum();
        (stored, left)
    }

    /// Keys of all elements currently stored under random keys.
    pub fn stored_keys(&self) -> Vec<u64> {
        self.elems.iter().flat_map(|s| s.keys()).collect()
    }

    /// Queues a request at `node` as if issued before the run. `None` is a delete.
    pub fn preload(&mut self, node: NodeId, priority: Option<u64>) {
        let h = &mut self.homes[node as usize];
        let seq = h.next_seq;
        h.next_seq += 1;
        match priority {
            Some(p) => h.ins_buf.push((seq, Element::new(p, node, seq))),
            None => h.del_buf.push(seq),
        }
    }

    fn generate(&mut self, node: NodeId) {
        if self.vs[VirtualId::middle(node).index()].epoch + 1 >= self.cfg.epochs {
            return;
        }
        for _ in 0..self.cfg.lambda {
            let h = &mut self.homes[node as usize];
            let p = h.rng.gen_bool(self.cfg.insert_prob).then(|| h.rng.gen_range(1..=self.cfg.priorities.max(1)));
            self.preload(node, p);
        }
    }

    fn send_k(out: &mut Outbox<VirtualId, PlusMsg>) -> impl FnMut(VirtualId, VirtualId, KMsg) + '_ {
        move |a, b, m| out.send(a, b, PlusMsg::K(m))
    }

    /// Sends the open count wave up once the children have reported and the
    /// node's own work for the previous step is settled.
    fn try_up(&mut self, v: VirtualId, activation: bool, out: &mut Outbox<VirtualId, PlusMsg>) -> Result<(), Fault> {
        let st = &self.vs[v.index()];
        if st.epoch >= self.cfg.epochs || st.sent || st.parts[1..].iter().any(Option::is_none) {
            return Ok(());
        }
        let home = &mut self.homes[v.owner as usize];
        let own = match st.wave {
            Wave::Ins => {
                if !activation || (v.kind == Kind::Middle && home.fetches_due > 0) {
                    return Ok(());
                }
                if v.kind == Kind::Middle {
                    home.ins_flight = std::mem::take(&mut home.ins_buf);
                    home.ins_flight.len() as u64
                } else {
                    0
                }
            }
            Wave::Del => {
                if !activation || (v.kind == Kind::Middle && home.acks_due > 0) {
                    return Ok(());
                }
                if v.kind == Kind::Middle {
                    home.del_flight = std::mem::take(&mut home.del_buf);
                    home.del_flight.len() as u64
                } else {
                    0
                }
            }
            Wave::Qual => match st.parts[0] {
                Some(c) => c,
                None => return Ok(()),
            },
        };
        let st = &mut self.vs[v.index()];
        st.parts[0] = Some(own);
        st.sent = true;
        let counts: Vec<u64> = st.parts.iter().map(|p| p.unwrap()).collect();
        let total = counts.iter().sum();
        let (epoch, wave) = (st.epoch, st.wave);
        match wave {
            Wave::Ins => st.ins_counts = counts,
            Wave::Del => st.del_counts = counts,
            Wave::Qual => st.qual_counts = counts,
        }
        match self.topo.parent(v) {
            Some(p) => {
                out.send(v, p, PlusMsg::Up { epoch, wave, count: total });
                Ok(())
            }
            None => self.anchor_on(v, epoch, wave, total, out),
        }
    }

    fn anchor_on(&mut self, root: VirtualId, epoch: u32, wave: Wave, total: u64, out: &mut Outbox<VirtualId, PlusMsg>) -> Result<(), Fault> {
        match wave {
            Wave::Ins => {
                self.m += total;
                self.epochs.push(EpochStats { epoch, inserts: total, ..EpochStats::default() });
                let first = self.serial + 1;
                self.serial += total;
                self.on_start_ins(root, epoch, first, total, out)
            }
            Wave::Del => {
                let k_star = total.min(self.m);
                self.pending_k = total;
                let es = self.epochs.last_mut().unwrap();
                es.deletes = total;
                es.k_star = k_star;
                if k_star == 0 {
                    return self.assign(root, epoch, out);
                }
                self.selecting = true;
                self.load_candidates(root);
                let salt = (epoch as u64 + 1) << 32;
                let mut sink = Self::send_k(out);
                self.ks.start(&self.topo, k_star, salt, &mut sink)
            }
            Wave::Qual => {
                let es = self.epochs.last().unwrap();
                if total != es.k_star {
                    return Err(Fault::protocol(format!("{total} qualifying elements for k* = {}", es.k_star)));
                }
                self.assign(root, epoch, out)
            }
        }
    }

    fn assign(&mut self, root: VirtualId, epoch: u32, out: &mut Outbox<VirtualId, PlusMsg>) -> Result<(), Fault> {
        let k = self.pending_k;
        let es = self.epochs.last_mut().unwrap();
        let k_star = es.k_star;
        self.m -= k_star;
        es.m = self.m;
        let serial_base = self.serial;
        self.serial += k;
        self.on_assign(root, epoch, (1, k_star), (1, k), k_star, serial_base, out)
    }

    fn on_start_ins(&mut self, v: VirtualId, epoch: u32, first: u64, len: u64, out: &mut Outbox<VirtualId, PlusMsg>) -> Result<(), Fault> {
        let st = &mut self.vs[v.index()];
        if st.epoch != epoch || st.wave != Wave::Ins || !st.sent {
            return Err(Fault::protocol(format!("{v:?}: start of inserts out of step")));
        }
        let counts = std::mem::take(&mut st.ins_counts);
        if counts.iter().sum::<u64>() != len {
            return Err(Fault::protocol("insert share does not match the counts"));
        }
        st.wave = Wave::Del;
        st.sent = false;
        st.parts.iter_mut().for_each(|p| *p = None);
        let split = split_counts(first, &counts);
        for (&c, &(f, l)) in self.topo.children(v).iter().zip(&split[1..]) {
            out.send(v, c, PlusMsg::StartIns { epoch, first: f, len: l });
        }
        if v.kind != Kind::Middle {
            return Ok(());
        }
        let node = v.owner;
        let flight = std::mem::take(&mut self.homes[node as usize].ins_flight);
        for (i, (seq, e)) in flight.into_iter().enumerate() {
            self.records.push(OperationRecord {
                node,
                seq,
                kind: OpKind::Insert(e),
                serial_index: split[0].0 + i as u64,
                assigned: None,
                returned: None,
                epoch,
            });
            let key = hash_point(tag::PLUS_STORE, &[node as u64, seq], self.cfg.seed);
            self.homes[node as usize].acks_due += 1;
            let route = RouteState::new(&self.topo, v, key);
            self.dispatch(v, PlusMsg::Store { route, key, elem: e, from: v }, out)?;
        }
        Ok(())
    }

    fn on_qualify(&mut self, v: VirtualId, epoch: u32, pivot: Element, out: &mut Outbox<VirtualId, PlusMsg>) -> Result<(), Fault> {
        let st = &mut self.vs[v.index()];
        if st.epoch != epoch || st.wave != Wave::Del || !st.sent {
            return Err(Fault::protocol(format!("{v:?}: qualify out of step")));
        }
        st.wave = Wave::Qual;
        st.sent = false;
        st.parts.iter_mut().for_each(|p| *p = None);
        st.pivot = Some(pivot);
        let own = self.elems[v.index()].values().filter(|e| **e <= pivot).count() as u64;
        st.parts[0] = Some(own);
        for &c in self.topo.children(v) {
            out.send(v, c, PlusMsg::Qualify { epoch, pivot });
        }
        self.try_up(v, false, out)
    }

    #[allow(clippy::too_many_arguments)]
    fn on_assign(
        &mut self,
        v: VirtualId,
        epoch: u32,
        qual: (u64, u64),
        del: (u64, u64),
        k_star: u64,
        serial_base: u64,
        out: &mut Outbox<VirtualId, PlusMsg>,
    ) -> Result<(), Fault> {
        let st = &mut self.vs[v.index()];
        let selected = st.wave == Wave::Qual;
        if st.epoch != epoch || st.wave == Wave::Ins || !st.sent {
            return Err(Fault::protocol(format!("{v:?}: assignment out of step")));
        }
        let qcounts = if selected { std::mem::take(&mut st.qual_counts) } else { vec![0; st.parts.len()] };
        let dcounts = std::mem::take(&mut st.del_counts);
        if qcounts.iter().sum::<u64>() != qual.1 || dcounts.iter().sum::<u64>() != del.1 {
            return Err(Fault::protocol("assignment does not match the counts"));
        }
        let pivot = st.pivot.take();
        st.epoch += 1;
        st.wave = Wave::Ins;
        st.sent = false;
        st.parts.iter_mut().for_each(|p| *p = None);
        let qs = split_counts(qual.0, &qcounts);
        let ds = split_counts(del.0, &dcounts);
        for (i, &c) in self.topo.children(v).iter().enumerate() {
            out.send(v, c, PlusMsg::Assign { epoch, qual: qs[i + 1], del: ds[i + 1], k_star, serial_base });
        }
        if let Some(p) = pivot.filter(|_| selected) {
            let mut mine: Vec<Element> =
                self.elems[v.index()].take_where(|e| *e <= p).into_iter().map(|(_, e)| e).collect();
            mine.sort();
            if mine.len() as u64 != qs[0].1 {
                return Err(Fault::protocol("qualifying set changed during selection"));
            }
            for (i, e) in mine.into_iter().enumerate() {
                let key = self.pos_key(qs[0].0 + i as u64, epoch);
                let route = RouteState::new(&self.topo, v, key);
                self.dispatch(v, PlusMsg::Move { route, key, elem: e }, out)?;
            }
        }
        if v.kind != Kind::Middle {
            return Ok(());
        }
        let node = v.owner;
        let flight = std::mem::take(&mut self.homes[node as usize].del_flight);
        for (i, seq) in flight.into_iter().enumerate() {
            let pos = ds[0].0 + i as u64;
            let idx = self.records.len();
            let mut rec = OperationRecord {
                node,
                seq,
                kind: OpKind::DeleteMin,
                serial_index: serial_base + pos,
                assigned: Some(Assigned::Bottom),
                returned: None,
                epoch,
            };
            if pos <= k_star {
                rec.assigned = Some(Assigned::Pos { priority: 0, pos });
                self.records.push(rec);
                self.homes[node as usize].fetches_due += 1;
                let key = self.pos_key(pos, epoch);
                let route = RouteState::new(&self.topo, v, key);
                self.dispatch(v, PlusMsg::Fetch { route, key, from: v, record: idx }, out)?;
            } else {
                self.records.push(rec);
            }
        }
        Ok(())
    }

    fn pos_key(&self, pos: u64, epoch: u32) -> u64 {
        hash_point(tag::PLUS_POS, &[pos, epoch as u64], self.cfg.seed)
    }

    fn dispatch(&mut self, at: VirtualId, mut msg: PlusMsg, out: &mut Outbox<VirtualId, PlusMsg>) -> Result<(), Fault> {
        let route = match &mut msg {
            PlusMsg::Store { route, .. } | PlusMsg::Move { route, .. } | PlusMsg::Fetch { route, .. } => route,
            _ => unreachable!("only stores, moves and fetches are routed"),
        };
        if let Some(next) = route.next_hop(&self.topo, at) {
            out.send(at, next, msg);
            return Ok(());
        }
        let err = |e: crate::overlay::DhtError| Fault::protocol(e.to_string());
        match msg {
            PlusMsg::Store { key, elem, from, .. } => {
                self.elems[at.index()].put(key, elem).map_err(err)?;
                out.send(at, from, PlusMsg::Ack);
            }
            PlusMsg::Move { key, elem, .. } => {
                if let Some(((req, rec), e)) = self.slots[at.index()].put(key, elem).map_err(err)? {
                    out.send(at, req, PlusMsg::Reply { record: rec, elem: e });
                }
            }
            PlusMsg::Fetch { key, from, record, .. } => {
                if let Some(e) = self.slots[at.index()].get(key, (from, record)).map_err(err)? {
                    out.send(at, from, PlusMsg::Reply { record, elem: e });
                }
            }
            _ => unreachable!(),
        }
        Ok(())
    }

    /// Every store has been acked once the selection starts, so the element
    /// store is the complete candidate set.
    fn load_candidates(&mut self, v: VirtualId) {
        let c: Vec<Element> = self.elems[v.index()].values().copied().collect();
        self.ks.set_candidates(v, c);
    }

    fn after_kselect(&mut self, out: &mut Outbox<VirtualId, PlusMsg>) -> Result<(), Fault> {
        if !self.selecting {
            return Ok(());
        }
        let Some(res) = self.ks.result().cloned() else {
            return Ok(());
        };
        self.selecting = false;
        let pivot = res.map_err(|e| Fault::protocol(format!("kselect: {e}")))?;
        let es = self.epochs.last_mut().unwrap();
        es.pivot = Some(pivot);
        es.kselect = Some(self.ks.stats.clone());
        let epoch = es.epoch;
        self.on_qualify(self.topo.root(), epoch, pivot, out)
    }
}

impl Protocol for SkeapPlusSim {
    type Addr = VirtualId;
    type Msg = PlusMsg;

    fn node_count(&self) -> usize {
        self.topo.n()
    }

    fn on_activate(&mut self, node: NodeId, out: &mut Outbox<VirtualId, PlusMsg>) -> Result<(), Fault> {
        self.generate(node);
        for v in [VirtualId::left(node), VirtualId::middle(node), VirtualId::right(node)] {
            self.try_up(v, true, out)?;
        }
        Ok(())
    }

    fn on_message(&mut self, env: Envelope<VirtualId, PlusMsg>, out: &mut Outbox<VirtualId, PlusMsg>) -> Result<(), Fault> {
        let v = env.dst;
        match env.payload {
            PlusMsg::Up { epoch, wave, count } => {
                let i = self
                    .topo
                    .children(v)
                    .iter()
                    .position(|&c| c == env.src)
                    .ok_or_else(|| Fault::protocol("count from non-child"))?;
                let st = &mut self.vs[v.index()];
                if st.epoch != epoch || st.wave != wave || st.parts[i + 1].is_some() {
                    return Err(Fault::protocol(format!("{v:?}: unexpected {wave:?} count for epoch {epoch}")));
                }
                st.parts[i + 1] = Some(count);
                self.try_up(v, false, out)
            }
            PlusMsg::StartIns { epoch, first, len } => self.on_start_ins(v, epoch, first, len, out),
            PlusMsg::Qualify { epoch, pivot } => self.on_qualify(v, epoch, pivot, out),
            PlusMsg::Assign { epoch, qual, del, k_star, serial_base } => {
                self.on_assign(v, epoch, qual, del, k_star, serial_base, out)
            }
            m @ (PlusMsg::Store { .. } | PlusMsg::Move { .. } | PlusMsg::Fetch { .. }) => self.dispatch(v, m, out),
            PlusMsg::Ack => {
                let h = &mut self.homes[v.owner as usize];
                h.acks_due = h.acks_due.checked_sub(1).ok_or_else(|| Fault::protocol("unexpected ack"))?;
                Ok(())
            }
            PlusMsg::Reply { record, elem } => {
                let r = &mut self.records[record];
                if r.returned.is_some() || r.node != v.owner {
                    return Err(Fault::protocol("reply for a settled or foreign record"));
                }
                r.returned = Some(elem);
                self.homes[v.owner as usize].fetches_due -= 1;
                Ok(())
            }
            PlusMsg::K(k) => {
                if let KMsg::Down { cmd: Cmd::Count, .. } = k {
                    self.load_candidates(v);
                }
                {
                    let mut sink = Self::send_k(out);
                    self.ks.handle(&self.topo, v, env.src, k, &mut sink)?;
                }
                self.after_kselect(out)
            }
        }
    }

    fn is_done(&self) -> bool {
        self.vs.iter().all(|s| s.epoch >= self.cfg.epochs) && self.homes.iter().all(|h| h.fetches_due == 0)
    }
}

pub struct PlusOutcome {
    pub records: Vec<OperationRecord>,
    pub epochs: Vec<EpochStats>,
    pub metrics: MetricsSummary,
    pub heap_size: u64,
    pub stored_keys: Vec<u64>,
    pub trace_digest: u64,
    pub trace: Trace,
    pub time: u64,
    pub max_delay: u64,
}

pub fn run_skeap_plus(sim: &SimConfig) -> Result<PlusOutcome, Fault> {
    sim.validate().map_err(Fault::Protocol)?;
    let topo = Topology::build(sim.n, sim.seed).map_err(|e| Fault::protocol(e.to_string()))?;
    run_skeap_plus_with(SkeapPlusSim::new(topo, PlusConfig::from_sim(sim)), sim)
}

/// Runs a prepared instance and checks that the DHT agrees with the anchor.
pub fn run_skeap_plus_with(proto: SkeapPlusSim, sim: &SimConfig) -> Result<PlusOutcome, Fault> {
    let ecfg = sim.engine();
    let seed = ecfg.schedule_seed;
    let mut eng = Engine::new(proto, ecfg);
    let time = match sim.mode {
        SimMode::Sync => eng.run_sync()?,
        SimMode::Async => eng.run_async(seed)?,
    };
    let (stored, left) = eng.proto.dht_state();
    if left != 0 || stored as u64 != eng.proto.m {
        return Err(Fault::protocol(format!(
            "DHT holds {stored} elements and {left} position entries, anchor expects {}",
            eng.proto.m
        )));
    }
    let trace_digest = eng.trace().digest();
    let trace = eng.trace().clone();
    let metrics = eng.metrics().clone();
    let max_delay = eng.max_delay();
    let stored_keys = eng.proto.stored_keys();
    let p = eng.proto;
    Ok(PlusOutcome {
        heap_size: p.m,
        records: p.records,
        epochs: p.epochs,
        metrics,
        stored_keys,
        trace_digest,
        trace,
        time,
        max_delay,
    })
}
