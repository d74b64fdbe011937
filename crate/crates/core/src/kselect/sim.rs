use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::protocol::{Diagnostic, KMsg, KParams, KSelect, KSelectError, KStats};
use crate::element::Element;
use crate::overlay::{Topology, VirtualId};
use crate::sim::hash::{hash64, tag};
use crate::sim::{Engine, Envelope, Fault, MetricsSummary, NodeId, Outbox, Protocol, SimConfig, SimMode, Trace};

/// Scatters `m` elements uniformly over the virtual nodes. Priorities are
/// drawn from `1..=priority_max`; ties are broken by origin and sequence.
pub fn place_uniform(topo: &Topology, m: usize, priority_max: u64, seed: u64) -> Vec<Vec<Element>> {
    let nv = topo.virtual_count();
    let mut rng = ChaCha8Rng::seed_from_u64(hash64(tag::PLACEMENT, &[m as u64, priority_max], seed));
    let mut out = vec![Vec::new(); nv];
    for seq in 0..m as u64 {
        let v = VirtualId::from_index(rng.gen_range(0..nv));
        let p = rng.gen_range(1..=priority_max.max(1));
        out[v.index()].push(Element::new(p, v.owner, seq));
    }
    out
}

/// Standalone host: the anchor's owner starts the selection on its first
/// activation.
pub struct KSelectSim {
    topo: Topology,
    pub ks: KSelect,
    k: u64,
    started: bool,
}

impl KSelectSim {
    pub fn new(topo: Topology, sets: Vec<Vec<Element>>, k: u64, seed: u64, params: KParams) -> Self {
        let mut ks = KSelect::new(&topo, seed, params);
        for (i, c) in sets.into_iter().enumerate() {
            ks.set_candidates(VirtualId::from_index(i), c);
        }
        KSelectSim { topo, ks, k, started: false }
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }
}

impl Protocol for KSelectSim {
    type Addr = VirtualId;
    type Msg = KMsg;

    fn node_count(&self) -> usize {
        self.topo.n()
    }

    fn on_activate(&mut self, node: NodeId, out: &mut Outbox<VirtualId, KMsg>) -> Result<(), Fault> {
        if self.started || node != self.topo.root().owner {
            return Ok(());
        }
        self.started = true;
        let mut sink = |a, b, m| out.send(a, b, m);
        self.ks.start(&self.topo, self.k, 0, &mut sink)
    }

    fn on_message(&mut self, env: Envelope<VirtualId, KMsg>, out: &mut Outbox<VirtualId, KMsg>) -> Result<(), Fault> {
        let mut sink = |a, b, m| out.send(a, b, m);
        self.ks.handle(&self.topo, env.dst, env.src, env.payload, &mut sink)
    }

    fn is_done(&self) -> bool {
        self.ks.result().is_some()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct KSelectOutcome {
    pub n: usize,
    pub m: usize,
    pub k: u64,
    pub result: Result<Element, KSelectError>,
    pub expected: Option<Element>,
    pub stats: KStats,
    pub diagnostics: Vec<Diagnostic>,
    pub metrics: MetricsSummary,
    /// Rounds in sync mode, scheduler steps in async mode.
    pub time: u64,
    pub trace_digest: u64,
    #[serde(skip)]
    pub trace: Trace,
}

impl KSelectOutcome {
    pub fn matches_oracle(&self) -> bool {
        matches!((&self.result, self.expected), (Ok(e), Some(x)) if *e == x)
    }
}

/// Places `m` uniform elements, selects rank `k` and compares with a sort.
pub fn run_kselect(sim: &SimConfig, m: usize, k: u64, params: KParams) -> Result<KSelectOutcome, Fault> {
    sim.validate().map_err(Fault::Protocol)?;
    let topo = Topology::build(sim.n, sim.seed).map_err(|e| Fault::protocol(e.to_string()))?;
    let pmax = sim.priority_count.max(2);
    let sets = place_uniform(&topo, m, pmax, sim.seed);
    let mut all: Vec<Element> = sets.iter().flatten().copied().collect();
    all.sort();
    let expected = (k >= 1 && k as usize <= all.len()).then(|| all[k as usize - 1]);
    let proto = KSelectSim::new(topo, sets, k, sim.seed, params);
    let ecfg = sim.engine();
    let seed = ecfg.schedule_seed;
    let mut eng = Engine::new(proto, ecfg);
    let time = match sim.mode {
        SimMode::Sync => eng.run_sync()?,
        SimMode::Async => eng.run_async(seed)?,
    };
    let metrics = eng.metrics().clone();
    let trace = eng.trace().clone();
    let ks = &eng.proto.ks;
    let result = ks.result().cloned().ok_or_else(|| Fault::protocol("selection did not finish"))?;
    Ok(KSelectOutcome {
        n: sim.n,
        m,
        k,
        result,
        expected,
        stats: ks.stats.clone(),
        diagnostics: ks.diagnostics.clone(),
        metrics,
        time,
        trace_digest: trace.digest(),
        trace,
    })
}
