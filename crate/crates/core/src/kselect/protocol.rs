use std::collections::{HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::local::{lower_stat, prune_counts, upper_stat, Ext};
use crate::element::Element;
use crate::overlay::{RouteState, Topology, VirtualId};
use crate::sim::hash::{hash64, hash_point, hash_point_sym, tag};
use crate::sim::{BitSizer, Fault, Payload, TAG_BITS};

#[derive(Clone, Debug, Serialize)]
pub struct KParams {
    pub c_delta: f64,
    /// Scales the expected sample size `s * sqrt(n)` and the phase-3 threshold.
    pub sample_factor: f64,
    pub max_phase2: u32,
    /// Check target preservation against a global sort after every
    /// iteration (simulation-side assertion, costs a full scan).
    pub audit: bool,
}

impl Default for KParams {
    fn default() -> Self {
        KParams { c_delta: 0.5, sample_factor: 8.0, max_phase2: 8, audit: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Phase {
    P1,
    P2,
    P3,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error, Serialize)]
pub enum KSelectError {
    #[error("rank {k} outside 1..={n}")]
    OutOfRange { k: u64, n: u64 },
    #[error("{n} candidates left after the phase-2 cap")]
    Aborted { n: u64 },
    #[error("target not found by the final sort")]
    Lost,
}

#[derive(Clone, Debug)]
pub enum Cmd {
    Count,
    Stats { k: u64, parts: u64 },
    Prune { lo: Ext, hi: Ext },
    /// Keep `[lo, hi]`, then sample each survivor with probability `min(1, s/n)`.
    Sample { lo: Ext, hi: Ext, s: u64, n: u64, salt: u64 },
    /// `first` is where this subtree's share of `[1, n']` starts; `want_*`
    /// is 0 when that pivot is absent.
    Positions { first: u64, n_prime: u64, want_l: u64, want_r: u64, salt: u64 },
    Rank { l: Option<Element>, r: Option<Element> },
}

#[derive(Clone, Debug)]
pub enum Rep {
    Count { n: u64, nonempty: u64, nodes: u64 },
    Stats { lo: Ext, hi: Ext },
    Pruned { below: u64, above: u64 },
    Sampled { n: u64 },
    Found { l: Option<Element>, r: Option<Element> },
    Ranks { l: u64, r: u64 },
}

impl Rep {
    fn merge(&self, o: &Rep) -> Rep {
        match (self, o) {
            (Rep::Count { n, nonempty, nodes }, Rep::Count { n: a, nonempty: b, nodes: c }) => {
                Rep::Count { n: n + a, nonempty: nonempty + b, nodes: nodes + c }
            }
            (Rep::Stats { lo, hi }, Rep::Stats { lo: a, hi: b }) => Rep::Stats { lo: *lo.min(a), hi: *hi.max(b) },
            (Rep::Pruned { below, above }, Rep::Pruned { below: a, above: b }) => {
                Rep::Pruned { below: below + a, above: above + b }
            }
            (Rep::Sampled { n }, Rep::Sampled { n: a }) => Rep::Sampled { n: n + a },
            (Rep::Found { l, r }, Rep::Found { l: a, r: b }) => Rep::Found { l: l.or(*a), r: r.or(*b) },
            (Rep::Ranks { l, r }, Rep::Ranks { l: a, r: b }) => Rep::Ranks { l: l + a, r: r + b },
            _ => panic!("mixed replies in one wave"),
        }
    }

    fn size_bits(&self, s: &BitSizer) -> u32 {
        let opt = |e: &Option<Element>| 1 + e.map_or(0, |e| e.size_bits(s));
        match self {
            Rep::Count { n, nonempty, nodes } => s.nat(*n) + s.nat(*nonempty) + s.nat(*nodes),
            Rep::Stats { lo, hi } => lo.size_bits(s) + hi.size_bits(s),
            Rep::Pruned { below, above } => s.nat(*below) + s.nat(*above),
            Rep::Sampled { n } => s.nat(*n),
            Rep::Found { l, r } => opt(l) + opt(r),
            Rep::Ranks { l, r } => s.nat(*l) + s.nat(*r),
        }
    }
}

impl Cmd {
    fn size_bits(&self, s: &BitSizer) -> u32 {
        let opt = |e: &Option<Element>| 1 + e.map_or(0, |e| e.size_bits(s));
        match self {
            Cmd::Count => 1,
            Cmd::Stats { k, parts } => s.nat(*k) + s.nat(*parts),
            Cmd::Prune { lo, hi } => lo.size_bits(s) + hi.size_bits(s),
            Cmd::Sample { lo, hi, s: x, n, salt } => {
                lo.size_bits(s) + hi.size_bits(s) + s.nat(*x) + s.nat(*n) + s.nat(*salt)
            }
            Cmd::Positions { first, n_prime, want_l, want_r, salt } => {
                s.nat(*first) + s.nat(*n_prime) + s.nat(*want_l) + s.nat(*want_r) + s.nat(*salt)
            }
            Cmd::Rank { l, r } => opt(l) + opt(r),
        }
    }
}

#[derive(Clone, Debug)]
pub enum KMsg {
    Down { step: u32, cmd: Cmd },
    Up { step: u32, rep: Rep },
    /// Sampled candidate travelling to the node that roots its copy tree.
    Root { route: RouteState, salt: u64, pos: u64, n_prime: u64, want_l: u64, want_r: u64, elem: Element },
    /// Copy-tree edge: the receiver keeps the middle of `[lo, hi]`.
    Copy { route: RouteState, salt: u64, tree: u64, lo: u64, hi: u64, parent: VirtualId, parent_copy: u64, elem: Element },
    /// Copy `copy` of candidate `tree` on its way to the pair rendezvous.
    Compare { route: RouteState, salt: u64, tree: u64, copy: u64, elem: Element, ret: VirtualId },
    Vote { salt: u64, tree: u64, copy: u64, l: u64, r: u64 },
    Tally { salt: u64, tree: u64, copy: u64, l: u64, r: u64 },
}

impl Payload for KMsg {
    fn size_bits(&self, s: &BitSizer) -> u32 {
        TAG_BITS
            + match self {
                KMsg::Down { step, cmd } => s.nat(*step as u64) + cmd.size_bits(s),
                KMsg::Up { step, rep } => s.nat(*step as u64) + rep.size_bits(s),
                KMsg::Root { route, salt, pos, n_prime, want_l, want_r, elem } => {
                    route.size_bits(s)
                        + s.nat(*salt)
                        + s.nat(*pos)
                        + s.nat(*n_prime)
                        + s.nat(*want_l)
                        + s.nat(*want_r)
                        + elem.size_bits(s)
                }
                KMsg::Copy { route, salt, tree, lo, hi, parent_copy, elem, .. } => {
                    route.size_bits(s)
                        + s.nat(*salt)
                        + s.nat(*tree)
                        + s.nat(*lo)
                        + s.nat(*hi)
                        + s.vid()
                        + s.nat(*parent_copy)
                        + elem.size_bits(s)
                }
                KMsg::Compare { route, salt, tree, copy, elem, .. } => {
                    route.size_bits(s) + s.nat(*salt) + s.nat(*tree) + s.nat(*copy) + elem.size_bits(s) + s.vid()
                }
                KMsg::Vote { salt, tree, copy, .. } => s.nat(*salt) + s.nat(*tree) + s.nat(*copy) + 2,
                KMsg::Tally { salt, tree, copy, l, r } => {
                    s.nat(*salt) + s.nat(*tree) + s.nat(*copy) + s.nat(*l) + s.nat(*r)
                }
            }
    }

    fn kind(&self) -> &'static str {
        match self {
            KMsg::Down { .. } => "ksel_down",
            KMsg::Up { .. } => "ksel_up",
            KMsg::Root { .. } => "ksel_root",
            KMsg::Copy { .. } => "ksel_copy",
            KMsg::Compare { .. } => "ksel_compare",
            KMsg::Vote { .. } => "ksel_vote",
            KMsg::Tally { .. } => "ksel_tally",
        }
    }
}

/// One line of the per-iteration diagnostic trace.
#[derive(Clone, Debug, Serialize)]
pub struct Diagnostic {
    pub phase: Phase,
    pub iteration: u32,
    #[serde(rename = "N")]
    pub n: u64,
    pub k: u64,
    pub n_prime: u64,
    pub delta: u64,
    pub pruned_below: u64,
    pub pruned_above: u64,
    pub outcome: &'static str,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct KStats {
    pub participants: u64,
    pub initial_n: u64,
    pub post_phase1_n: u64,
    pub phase1_iterations: u32,
    pub phase2_iterations: u32,
    pub retries: u32,
    pub degenerate: u32,
    pub resamples: u32,
    pub forced_phase3: bool,
    pub audit_failures: u32,
    pub waves: u32,
    /// One entry per distributed sort.
    pub sorts: Vec<SortLoad>,
}

/// Copy-tree participation in one distributed sort.
#[derive(Clone, Debug, Serialize)]
pub struct SortLoad {
    pub phase: Phase,
    pub n_prime: u64,
    /// Distinct `(tree, real node)` pairs holding at least one copy.
    pub memberships: u64,
}

impl SortLoad {
    /// Mean number of copy trees a real node takes part in.
    pub fn mean_trees_per_node(&self, n: usize) -> f64 {
        self.memberships as f64 / n as f64
    }
}

struct Slot {
    step: u32,
    active: bool,
    parts: Vec<Option<Rep>>,
}

struct Vertex {
    elem: Element,
    parent: Option<(VirtualId, u64)>,
    pending: u32,
    l: u64,
    r: u64,
    want: (u64, u64),
    n_prime: u64,
}

struct Waiting {
    tree: u64,
    copy: u64,
    elem: Element,
    ret: VirtualId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Await {
    Count,
    Stats,
    Pruned,
    Sampled,
    Found,
    Ranks,
}

struct Anchor {
    k: u64,
    n: u64,
    nonempty: u64,
    participants: u64,
    threshold: u64,
    phase: Phase,
    p1_target: u32,
    lo: Ext,
    hi: Ext,
    pending_prune: bool,
    salt: u64,
    n_prime: u64,
    delta: u64,
    want: (u64, u64),
    pivots: (Option<Element>, Option<Element>),
    awaiting: Await,
    last_stats: (Ext, Ext),
}

/// KSelect state for every participant plus the anchor's driver.
pub type Sink<'a> = dyn FnMut(VirtualId, VirtualId, KMsg) + 'a;

pub struct KSelect {
    params: KParams,
    seed: u64,
    salt_base: u64,
    cands: Vec<Vec<Element>>,
    sampled: Vec<Vec<Element>>,
    sampled_counts: Vec<Vec<u64>>,
    slots: Vec<Slot>,
    vertices: Vec<HashMap<(u64, u64), Vertex>>,
    rendezvous: Vec<HashMap<(u64, u64), Waiting>>,
    roots_done: Vec<u32>,
    roots_expected: Vec<u32>,
    found: Vec<(Option<Element>, Option<Element>)>,
    positions_active: Vec<bool>,
    step: u32,
    anchor: Option<Anchor>,
    result: Option<Result<Element, KSelectError>>,
    target: Option<Element>,
    memberships: HashSet<(u64, u32)>,
    pub stats: KStats,
    pub diagnostics: Vec<Diagnostic>,
}

fn route_arrived(topo: &Topology, at: VirtualId, route: &mut RouteState) -> Option<VirtualId> {
    route.next_hop(topo, at)
}

impl KSelect {
    pub fn new(topo: &Topology, seed: u64, params: KParams) -> Self {
        let nv = topo.virtual_count();
        let slots = (0..nv)
            .map(|i| Slot { step: 0, active: false, parts: vec![None; 1 + topo.children(VirtualId::from_index(i)).len()] })
            .collect();
        KSelect {
            params,
            seed,
            salt_base: 0,
            cands: vec![Vec::new(); nv],
            sampled: vec![Vec::new(); nv],
            sampled_counts: vec![Vec::new(); nv],
            slots,
            vertices: (0..nv).map(|_| HashMap::new()).collect(),
            rendezvous: (0..nv).map(|_| HashMap::new()).collect(),
            roots_done: vec![0; nv],
            roots_expected: vec![0; nv],
            found: vec![(None, None); nv],
            positions_active: vec![false; nv],
            step: 0,
            anchor: None,
            result: None,
            target: None,
            memberships: HashSet::new(),
            stats: KStats::default(),
            diagnostics: Vec::new(),
        }
    }

    pub fn params(&self) -> &KParams {
        &self.params
    }

    pub fn set_candidates(&mut self, v: VirtualId, mut c: Vec<Element>) {
        c.sort();
        self.cands[v.index()] = c;
    }

    pub fn candidates(&self, v: VirtualId) -> &[Element] {
        &self.cands[v.index()]
    }

    pub fn result(&self) -> Option<&Result<Element, KSelectError>> {
        self.result.as_ref()
    }

    pub fn is_running(&self) -> bool {
        self.anchor.is_some() && self.result.is_none()
    }

    /// Starts a selection of rank `k` at the anchor. `salt_base` keeps DHT
    /// keys of separate invocations apart.
    pub fn start(&mut self, topo: &Topology, k: u64, salt_base: u64, out: &mut Sink<'_>) -> Result<(), Fault> {
        self.salt_base = salt_base;
        self.result = None;
        self.stats = KStats::default();
        self.memberships.clear();
        self.diagnostics.clear();
        if self.params.audit {
            let mut all: Vec<Element> = self.cands.iter().flatten().copied().collect();
            all.sort();
            self.target = (k >= 1 && (k as usize) <= all.len()).then(|| all[k as usize - 1]);
        }
        self.anchor = Some(Anchor {
            k,
            n: 0,
            nonempty: 0,
            participants: 0,
            threshold: 1,
            phase: Phase::P1,
            p1_target: 1,
            lo: Ext::NegInf,
            hi: Ext::PosInf,
            pending_prune: false,
            salt: salt_base,
            n_prime: 0,
            delta: 0,
            want: (0, 0),
            pivots: (None, None),
            awaiting: Await::Count,
            last_stats: (Ext::NegInf, Ext::PosInf),
        });
        self.launch(topo, Cmd::Count, Await::Count, out)
    }

    fn launch(&mut self, topo: &Topology, cmd: Cmd, awaiting: Await, out: &mut Sink<'_>) -> Result<(), Fault> {
        self.step += 1;
        self.stats.waves += 1;
        self.anchor.as_mut().unwrap().awaiting = awaiting;
        self.on_down(topo, topo.root(), self.step, cmd, out)
    }

    pub fn handle(&mut self, topo: &Topology, at: VirtualId, src: VirtualId, msg: KMsg, out: &mut Sink<'_>) -> Result<(), Fault> {
        match msg {
            KMsg::Down { step, cmd } => self.on_down(topo, at, step, cmd, out),
            KMsg::Up { step, rep } => {
                let i = topo
                    .children(at)
                    .iter()
                    .position(|&c| c == src)
                    .ok_or_else(|| Fault::protocol("kselect reply from non-child"))?;
                let slot = &mut self.slots[at.index()];
                if !slot.active || slot.step != step || slot.parts[i + 1].is_some() {
                    return Err(Fault::protocol(format!("{at:?}: stray reply for step {step}")));
                }
                slot.parts[i + 1] = Some(rep);
                self.try_reply(topo, at, out)
            }
            KMsg::Root { mut route, salt, pos, n_prime, want_l, want_r, elem } => {
                if let Some(next) = route_arrived(topo, at, &mut route) {
                    out(at, next, KMsg::Root { route, salt, pos, n_prime, want_l, want_r, elem });
                    return Ok(());
                }
                let point = self.pos_key(pos, salt);
                self.create_vertex(topo, at, salt, pos, 1, n_prime, point, None, elem, (want_l, want_r), n_prime, out)
            }
            KMsg::Copy { mut route, salt, tree, lo, hi, parent, parent_copy, elem } => {
                if let Some(next) = route_arrived(topo, at, &mut route) {
                    out(at, next, KMsg::Copy { route, salt, tree, lo, hi, parent, parent_copy, elem });
                    return Ok(());
                }
                let point = route.target;
                self.create_vertex(topo, at, salt, tree, lo, hi, point, Some((parent, parent_copy)), elem, (0, 0), 0, out)
            }
            KMsg::Compare { mut route, salt, tree, copy, elem, ret } => {
                if let Some(next) = route_arrived(topo, at, &mut route) {
                    out(at, next, KMsg::Compare { route, salt, tree, copy, elem, ret });
                    return Ok(());
                }
                let key = (tree.min(copy), tree.max(copy));
                match self.rendezvous[at.index()].remove(&key) {
                    None => {
                        self.rendezvous[at.index()].insert(key, Waiting { tree, copy, elem, ret });
                    }
                    Some(w) => {
                        // Whichever candidate is larger gains one smaller element.
                        let mine_larger = elem > w.elem;
                        let (a, b) = if mine_larger { (1, 0) } else { (0, 1) };
                        out(at, ret, KMsg::Vote { salt, tree, copy, l: a, r: b });
                        out(at, w.ret, KMsg::Vote { salt, tree: w.tree, copy: w.copy, l: b, r: a });
                    }
                }
                Ok(())
            }
            KMsg::Vote { tree, copy, l, r, .. } | KMsg::Tally { tree, copy, l, r, .. } => {
                self.credit(topo, at, tree, copy, l, r, out)
            }
        }
    }

    fn pos_key(&self, pos: u64, salt: u64) -> u64 {
        hash_point(tag::KSEL_POS, &[pos, salt], self.seed)
    }

    #[allow(clippy::too_many_arguments)]
    fn create_vertex(
        &mut self,
        topo: &Topology,
        at: VirtualId,
        salt: u64,
        tree: u64,
        lo: u64,
        hi: u64,
        point: u64,
        parent: Option<(VirtualId, u64)>,
        elem: Element,
        want: (u64, u64),
        n_prime: u64,
        out: &mut Sink<'_>,
    ) -> Result<(), Fault> {
        let j = (lo + hi) / 2;
        if self.memberships.insert((tree, at.owner)) {
            if let Some(l) = self.stats.sorts.last_mut() {
                l.memberships += 1;
            }
        }
        let mut pending = 1;
        let half = point >> 1;
        if lo < j {
            pending += 1;
            let route = RouteState::single_step(point, half);
            self.forward_copy(topo, at, KMsg::Copy { route, salt, tree, lo, hi: j - 1, parent: at, parent_copy: j, elem }, out)?;
        }
        if j < hi {
            pending += 1;
            let route = RouteState::single_step(point, half | (1 << 63));
            self.forward_copy(topo, at, KMsg::Copy { route, salt, tree, lo: j + 1, hi, parent: at, parent_copy: j, elem }, out)?;
        }
        let prev = self.vertices[at.index()].insert((tree, j), Vertex { elem, parent, pending, l: 0, r: 0, want, n_prime });
        if prev.is_some() {
            return Err(Fault::protocol(format!("duplicate copy ({tree},{j}) at {at:?}")));
        }
        if j == tree {
            self.credit(topo, at, tree, j, 0, 0, out)
        } else {
            let dest = hash_point_sym(tag::KSEL_PAIR, tree, j, self.seed ^ salt);
            let route = RouteState::new(topo, at, dest);
            self.handle(topo, at, at, KMsg::Compare { route, salt, tree, copy: j, elem, ret: at }, out)
        }
    }

    fn forward_copy(&mut self, topo: &Topology, at: VirtualId, msg: KMsg, out: &mut Sink<'_>) -> Result<(), Fault> {
        // The receiver may be `at` itself; handle that without a message.
        self.handle(topo, at, at, msg, out)
    }

    #[allow(clippy::too_many_arguments)]
    fn credit(&mut self, topo: &Topology, at: VirtualId, tree: u64, copy: u64, l: u64, r: u64, out: &mut Sink<'_>) -> Result<(), Fault> {
        let vx = self.vertices[at.index()]
            .get_mut(&(tree, copy))
            .ok_or_else(|| Fault::protocol(format!("no copy ({tree},{copy}) at {at:?}")))?;
        vx.l += l;
        vx.r += r;
        vx.pending -= 1;
        if vx.pending > 0 {
            return Ok(());
        }
        let vx = self.vertices[at.index()].remove(&(tree, copy)).unwrap();
        let salt = self.anchor_salt();
        match vx.parent {
            Some((p, pc)) => {
                out(at, p, KMsg::Tally { salt, tree, copy: pc, l: vx.l, r: vx.r });
                Ok(())
            }
            None => {
                if vx.l + vx.r + 1 != vx.n_prime {
                    return Err(Fault::protocol("copy tree tally does not cover the sample"));
                }
                let order = vx.l + 1;
                let f = &mut self.found[at.index()];
                if order == vx.want.0 {
                    f.0 = Some(vx.elem);
                }
                if order == vx.want.1 {
                    f.1 = Some(vx.elem);
                }
                self.roots_done[at.index()] += 1;
                self.check_found(topo, at, out)
            }
        }
    }

    fn anchor_salt(&self) -> u64 {
        self.anchor.as_ref().map_or(0, |a| a.salt)
    }

    fn check_found(&mut self, topo: &Topology, at: VirtualId, out: &mut Sink<'_>) -> Result<(), Fault> {
        let i = at.index();
        if self.positions_active[i] && self.roots_done[i] == self.roots_expected[i] {
            self.positions_active[i] = false;
            let (l, r) = self.found[i];
            self.slots[i].parts[0] = Some(Rep::Found { l, r });
            self.try_reply(topo, at, out)?;
        }
        Ok(())
    }

    fn on_down(&mut self, topo: &Topology, at: VirtualId, step: u32, cmd: Cmd, out: &mut Sink<'_>) -> Result<(), Fault> {
        let i = at.index();
        let children = topo.children(at).to_vec();
        {
            let slot = &mut self.slots[i];
            if slot.active {
                return Err(Fault::protocol(format!("{at:?}: step {step} while step {} open", slot.step)));
            }
            slot.step = step;
            slot.active = true;
            slot.parts.iter_mut().for_each(|p| *p = None);
        }
        let own = match &cmd {
            Cmd::Count => {
                let c = self.cands[i].len() as u64;
                Some(Rep::Count { n: c, nonempty: u64::from(c > 0), nodes: 1 })
            }
            Cmd::Stats { k, parts } => {
                let c = &self.cands[i];
                Some(Rep::Stats { lo: lower_stat(c, *k, *parts), hi: upper_stat(c, *k, *parts) })
            }
            Cmd::Prune { lo, hi } => {
                let (below, above) = prune_counts(&self.cands[i], *lo, *hi);
                let c = &mut self.cands[i];
                c.drain(c.len() - above as usize..);
                c.drain(..below as usize);
                Some(Rep::Pruned { below, above })
            }
            Cmd::Sample { lo, hi, s, n, salt } => {
                let (below, above) = prune_counts(&self.cands[i], *lo, *hi);
                let c = &mut self.cands[i];
                c.drain(c.len() - above as usize..);
                c.drain(..below as usize);
                let p = if *n == 0 { 1.0 } else { (*s as f64 / *n as f64).min(1.0) };
                let mut rng = ChaCha8Rng::seed_from_u64(hash64(tag::KSEL_SAMPLE, &[i as u64, *salt], self.seed));
                self.sampled[i] = c.iter().copied().filter(|_| p >= 1.0 || rng.gen_bool(p)).collect();
                self.vertices[i].clear();
                self.rendezvous[i].clear();
                self.roots_done[i] = 0;
                self.found[i] = (None, None);
                Some(Rep::Sampled { n: self.sampled[i].len() as u64 })
            }
            Cmd::Positions { .. } => None,
            Cmd::Rank { l, r } => {
                let c = &self.cands[i];
                let below = |x: &Option<Element>| x.map_or(0, |x| c.partition_point(|e| *e < x) as u64);
                Some(Rep::Ranks { l: below(l), r: below(r) })
            }
        };
        match cmd {
            Cmd::Positions { first, n_prime, want_l, want_r, salt } => {
                let counts = self.sampled_counts[i].clone();
                if counts.len() != children.len() + 1 {
                    return Err(Fault::protocol("positions without a sample wave"));
                }
                let mut next = first + counts[0];
                for (k, &c) in children.iter().enumerate() {
                    let cmd = Cmd::Positions { first: next, n_prime, want_l, want_r, salt };
                    next += counts[k + 1];
                    out(at, c, KMsg::Down { step, cmd });
                }
                self.positions_active[i] = true;
                let mine = std::mem::take(&mut self.sampled[i]);
                for (off, elem) in mine.into_iter().enumerate() {
                    let pos = first + off as u64;
                    let key = self.pos_key(pos, salt);
                    let route = RouteState::new(topo, at, key);
                    self.handle(topo, at, at, KMsg::Root { route, salt, pos, n_prime, want_l, want_r, elem }, out)?;
                }
                self.check_found(topo, at, out)?;
            }
            other => {
                for &c in &children {
                    out(at, c, KMsg::Down { step, cmd: other.clone() });
                }
                self.slots[i].parts[0] = own;
                self.try_reply(topo, at, out)?;
            }
        }
        Ok(())
    }

    fn try_reply(&mut self, topo: &Topology, at: VirtualId, out: &mut Sink<'_>) -> Result<(), Fault> {
        let i = at.index();
        let slot = &self.slots[i];
        if !slot.active || slot.parts.iter().any(Option::is_none) {
            return Ok(());
        }
        let step = slot.step;
        let mut it = slot.parts.iter().map(|p| p.as_ref().unwrap());
        let first = it.next().unwrap().clone();
        let total = it.fold(first, |acc, r| acc.merge(r));
        if let Rep::Sampled { .. } = total {
            self.sampled_counts[i] = slot
                .parts
                .iter()
                .map(|p| match p {
                    Some(Rep::Sampled { n }) => *n,
                    _ => 0,
                })
                .collect();
        }
        self.slots[i].active = false;
        match topo.parent(at) {
            Some(p) => {
                out(at, p, KMsg::Up { step, rep: total });
                Ok(())
            }
            None => self.anchor_on(topo, total, out),
        }
    }

    fn audit(&mut self, a_k: u64, lo: Ext, hi: Ext, n: u64) {
        let Some(t) = self.target else {
            return;
        };
        let surv: Vec<Element> = self
            .cands
            .iter()
            .flatten()
            .copied()
            .filter(|e| lo.cmp_elem(e).is_le() && hi.cmp_elem(e).is_ge())
            .collect();
        let rank = surv.iter().filter(|e| **e < t).count() as u64 + 1;
        if surv.len() as u64 != n || !surv.contains(&t) || rank != a_k {
            self.stats.audit_failures += 1;
        }
    }

    fn finish(&mut self, r: Result<Element, KSelectError>) {
        self.result = Some(r);
    }

    fn anchor_on(&mut self, topo: &Topology, rep: Rep, out: &mut Sink<'_>) -> Result<(), Fault> {
        let a = self.anchor.as_mut().ok_or_else(|| Fault::protocol("reply without a selection"))?;
        match (a.awaiting, rep) {
            (Await::Count, Rep::Count { n, nonempty, nodes }) => {
                a.n = n;
                a.nonempty = nonempty.max(1);
                a.participants = nodes;
                a.threshold = ((self.params.sample_factor * (nodes as f64).sqrt()).round() as u64).max(1);
                let mut q = 1u32;
                while (nodes as f64).powi(q as i32) < n as f64 {
                    q += 1;
                }
                a.p1_target = crate::sim::ceil_log2(q as u64) + 1;
                self.stats.participants = nodes;
                self.stats.initial_n = n;
                if a.k < 1 || a.k > n {
                    let e = KSelectError::OutOfRange { k: a.k, n };
                    self.finish(Err(e));
                    return Ok(());
                }
                self.next_round(topo, out)
            }
            (Await::Stats, Rep::Stats { lo, hi }) => {
                a.last_stats = (lo, hi);
                self.launch(topo, Cmd::Prune { lo, hi }, Await::Pruned, out)
            }
            (Await::Pruned, Rep::Pruned { below, above }) => {
                let n0 = a.n;
                a.n -= below + above;
                a.k -= below;
                self.stats.phase1_iterations += 1;
                let d = Diagnostic {
                    phase: Phase::P1,
                    iteration: self.stats.phase1_iterations,
                    n: n0,
                    k: a.k,
                    n_prime: 0,
                    delta: 0,
                    pruned_below: below,
                    pruned_above: above,
                    outcome: "pruned",
                };
                let (k, n, lo, hi) = (a.k, a.n, a.last_stats.0, a.last_stats.1);
                self.diagnostics.push(d);
                self.audit(k, lo, hi, n);
                self.next_round(topo, out)
            }
            (Await::Sampled, Rep::Sampled { n: np }) => {
                a.pending_prune = false;
                a.lo = Ext::NegInf;
                a.hi = Ext::PosInf;
                if np == 0 {
                    self.stats.resamples += 1;
                    let a = self.anchor.as_ref().unwrap();
                    self.diagnostics.push(Diagnostic {
                        phase: a.phase,
                        iteration: self.stats.phase2_iterations,
                        n: a.n,
                        k: a.k,
                        n_prime: 0,
                        delta: 0,
                        pruned_below: 0,
                        pruned_above: 0,
                        outcome: "resample",
                    });
                    return self.sample(topo, out);
                }
                a.n_prime = np;
                let (want_l, want_r) = if a.phase == Phase::P3 {
                    if np != a.n {
                        return Err(Fault::protocol("phase 3 must sample every candidate"));
                    }
                    a.delta = 0;
                    (a.k, a.k)
                } else {
                    let logn = (a.participants as f64).log2().max(1.0);
                    let base = (a.n.min(a.threshold)) as f64;
                    a.delta = (self.params.c_delta * (logn * base).sqrt()).ceil() as u64;
                    let mid = a.k as f64 * np as f64 / a.n as f64;
                    let l = (mid - a.delta as f64).floor();
                    let r = (mid + a.delta as f64).ceil();
                    let wl = if l >= 1.0 { l as u64 } else { 0 };
                    let wr = if r <= np as f64 { r as u64 } else { 0 };
                    (wl, wr)
                };
                a.want = (want_l, want_r);
                // Where each sample position roots its copy tree is public.
                let (salt, phase) = (a.salt, a.phase);
                for x in self.roots_expected.iter_mut() {
                    *x = 0;
                }
                for pos in 1..=np {
                    let v = topo.responsible(self.pos_key(pos, salt));
                    self.roots_expected[v.index()] += 1;
                }
                let cmd = Cmd::Positions { first: 1, n_prime: np, want_l, want_r, salt };
                self.memberships.clear();
                self.stats.sorts.push(SortLoad { phase, n_prime: np, memberships: 0 });
                self.launch(topo, cmd, Await::Found, out)
            }
            (Await::Found, Rep::Found { l, r }) => {
                if a.phase == Phase::P3 {
                    let res = l.ok_or(KSelectError::Lost);
                    self.finish(res);
                    return Ok(());
                }
                if (a.want.0 != 0 && l.is_none()) || (a.want.1 != 0 && r.is_none()) {
                    return Err(Fault::protocol("requested pivot missing from the sort"));
                }
                a.pivots = (l, r);
                if l.is_none() && r.is_none() {
                    self.stats.degenerate += 1;
                    self.stats.phase2_iterations += 1;
                    let a = self.anchor.as_ref().unwrap();
                    self.diagnostics.push(Diagnostic {
                        phase: Phase::P2,
                        iteration: self.stats.phase2_iterations,
                        n: a.n,
                        k: a.k,
                        n_prime: a.n_prime,
                        delta: a.delta,
                        pruned_below: 0,
                        pruned_above: 0,
                        outcome: "degenerate",
                    });
                    return self.next_round(topo, out);
                }
                self.launch(topo, Cmd::Rank { l, r }, Await::Ranks, out)
            }
            (Await::Ranks, Rep::Ranks { l: lc, r: rc }) => {
                let (pl, pr) = a.pivots;
                let rank_l = if pl.is_some() { lc + 1 } else { 1 };
                let rank_r = if pr.is_some() { rc + 1 } else { a.n };
                self.stats.phase2_iterations += 1;
                let it = self.stats.phase2_iterations;
                let escaped = a.k < rank_l || a.k > rank_r;
                let mut d = Diagnostic {
                    phase: Phase::P2,
                    iteration: it,
                    n: a.n,
                    k: a.k,
                    n_prime: a.n_prime,
                    delta: a.delta,
                    pruned_below: 0,
                    pruned_above: 0,
                    outcome: "escape",
                };
                if escaped {
                    self.stats.retries += 1;
                } else {
                    d.pruned_below = rank_l - 1;
                    d.pruned_above = a.n - rank_r;
                    d.outcome = "pruned";
                    a.k -= rank_l - 1;
                    a.n = rank_r - rank_l + 1;
                    a.lo = pl.map_or(Ext::NegInf, Ext::Fin);
                    a.hi = pr.map_or(Ext::PosInf, Ext::Fin);
                    a.pending_prune = true;
                }
                let (k, n, lo, hi) = (a.k, a.n, a.lo, a.hi);
                self.diagnostics.push(d);
                if !escaped {
                    self.audit(k, lo, hi, n);
                }
                self.next_round(topo, out)
            }
            (w, rep) => Err(Fault::protocol(format!("anchor awaiting {w:?} got {rep:?}"))),
        }
    }

    /// Chooses the next wave after a completed iteration.
    fn next_round(&mut self, topo: &Topology, out: &mut Sink<'_>) -> Result<(), Fault> {
        let a = self.anchor.as_mut().unwrap();
        if a.phase == Phase::P1 {
            if a.n > a.threshold && self.stats.phase1_iterations < a.p1_target {
                let parts = a.nonempty;
                let k = a.k;
                return self.launch(topo, Cmd::Stats { k, parts }, Await::Stats, out);
            }
            self.stats.post_phase1_n = a.n;
            a.phase = Phase::P2;
        }
        if a.n <= a.threshold {
            a.phase = Phase::P3;
        } else if self.stats.phase2_iterations >= self.params.max_phase2 {
            if a.n <= a.participants {
                self.stats.forced_phase3 = true;
                a.phase = Phase::P3;
            } else {
                let n = a.n;
                self.finish(Err(KSelectError::Aborted { n }));
                return Ok(());
            }
        }
        self.sample(topo, out)
    }

    fn sample(&mut self, topo: &Topology, out: &mut Sink<'_>) -> Result<(), Fault> {
        let a = self.anchor.as_mut().unwrap();
        a.salt += 1;
        let (lo, hi) = if a.pending_prune { (a.lo, a.hi) } else { (Ext::NegInf, Ext::PosInf) };
        let s = if a.phase == Phase::P3 { a.n } else { a.threshold };
        let cmd = Cmd::Sample { lo, hi, s, n: a.n, salt: a.salt };
        self.launch(topo, cmd, Await::Sampled, out)
    }
}
