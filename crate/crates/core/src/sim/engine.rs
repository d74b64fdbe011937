use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    Address, BitSizer, Envelope, Fault, MetricsSummary, NodeId, Outbox, Payload, Protocol,
    RoundMetrics, SimMode, Trace,
};

#[derive(Clone, Debug)]
pub struct EngineConfig {
    pub mode: SimMode,
    pub schedule_seed: u64,
    pub async_delay_max: u64,
    pub max_rounds: u64,
    pub max_steps: u64,
    pub keep_trace: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            mode: SimMode::Sync,
            schedule_seed: 0,
            async_delay_max: 8,
            max_rounds: 1_000_000,
            max_steps: 200_000_000,
            keep_trace: false,
        }
    }
}

type Env<P> = Envelope<<P as Protocol>::Addr, <P as Protocol>::Msg>;

pub struct Engine<P: Protocol> {
    pub proto: P,
    cfg: EngineConfig,
    sizer: BitSizer,
    pending: Vec<Env<P>>,
    time: u64,
    next_id: u64,
    metrics: MetricsSummary,
    trace: Trace,
    max_delay_seen: u64,
}

impl<P: Protocol> Engine<P> {
    pub fn new(proto: P, cfg: EngineConfig) -> Self {
        let sizer = BitSizer::new(proto.node_count());
        let trace = Trace::new(cfg.keep_trace);
        Engine {
            proto,
            cfg,
            sizer,
            pending: Vec::new(),
            time: 0,
            next_id: 0,
            metrics: MetricsSummary::default(),
            trace,
            max_delay_seen: 0,
        }
    }

    pub fn metrics(&self) -> &MetricsSummary {
        &self.metrics
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn pending(&self) -> usize {
        self.pending.len()
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    pub fn sizer(&self) -> &BitSizer {
        &self.sizer
    }

    /// Largest observed delay (delivery time minus enqueue time).
    pub fn max_delay(&self) -> u64 {
        self.max_delay_seen
    }

    /// Inject a message from outside any handler, e.g. a test stimulus.
    pub fn send(&mut self, src: P::Addr, dst: P::Addr, payload: P::Msg) -> Result<(), Fault> {
        let mut out = Outbox::default();
        out.send(src, dst, payload);
        self.flush(&mut out)
    }

    fn flush(&mut self, out: &mut Outbox<P::Addr, P::Msg>) -> Result<(), Fault> {
        for (src, dst, payload) in out.drain() {
            if !self.proto.is_valid(&dst) {
                return Err(Fault::UnknownDestination(format!("{dst:?}")));
            }
            let size_bits = payload.size_bits(&self.sizer);
            if size_bits == 0 {
                return Err(Fault::ZeroSize(payload.kind().into()));
            }
            self.trace.push("send", self.time, src.code(), dst.code(), size_bits);
            self.metrics.sent += 1;
            self.pending.push(Envelope {
                id: self.next_id,
                src,
                dst,
                payload,
                size_bits,
                enqueue_time: self.time,
            });
            self.next_id += 1;
        }
        Ok(())
    }

    fn deliver(&mut self, env: Env<P>, out: &mut Outbox<P::Addr, P::Msg>) -> Result<(), Fault> {
        self.trace.push("deliver", self.time, env.src.code(), env.dst.code(), env.size_bits);
        self.metrics.delivered += 1;
        self.metrics.record_bits(env.payload.kind(), env.size_bits);
        self.max_delay_seen = self.max_delay_seen.max(self.time - env.enqueue_time);
        self.proto.on_message(env, out)?;
        self.flush(out)
    }

    fn activate(&mut self, v: NodeId, out: &mut Outbox<P::Addr, P::Msg>) -> Result<(), Fault> {
        self.trace.push("activate", self.time, v as u64, v as u64, 0);
        self.proto.on_activate(v, out)?;
        self.flush(out)
    }

    /// One synchronous round: everything sent before the round is handled,
    /// then every node is activated once.
    pub fn step_round(&mut self) -> Result<RoundMetrics, Fault> {
        if self.cfg.mode != SimMode::Sync {
            return Err(Fault::WrongMode("sync"));
        }
        let n = self.proto.node_count();
        let mut per_node = vec![0u32; n];
        let mut max_bits = 0;
        let mut out = Outbox::default();
        self.time += 1;
        let batch = std::mem::take(&mut self.pending);
        for env in batch {
            per_node[env.dst.owner() as usize] += 1;
            max_bits = max_bits.max(env.size_bits);
            self.deliver(env, &mut out)?;
        }
        for v in 0..n {
            self.activate(v as NodeId, &mut out)?;
        }
        let m = RoundMetrics {
            round: self.time,
            max_congestion: per_node.iter().copied().max().unwrap_or(0),
            per_node_messages: per_node,
            max_message_bits: max_bits,
            activations: n as u32,
        };
        self.metrics.record_round(&m);
        Ok(m)
    }

    /// Runs rounds until the protocol is done and the channels are empty.
    pub fn run_sync(&mut self) -> Result<u64, Fault> {
        let start = self.time;
        while !(self.proto.is_done() && self.pending.is_empty()) {
            if self.time - start >= self.cfg.max_rounds {
                return Err(Fault::StepLimit(self.cfg.max_rounds));
            }
            self.step_round()?;
        }
        Ok(self.time - start)
    }

    /// Bounded-adversary asynchronous run. Every envelope draws a deadline in
    /// `[enqueue+1, enqueue+async_delay_max]`; envelopes due at a step are
    /// delivered first (in random order), then one uniformly random enabled
    /// event (pending envelope or node activation) fires.
    pub fn run_async(&mut self, schedule_seed: u64) -> Result<u64, Fault> {
        if self.cfg.mode != SimMode::Async {
            return Err(Fault::WrongMode("async"));
        }
        let dmax = self.cfg.async_delay_max.max(1);
        let n = self.proto.node_count();
        let mut rng = ChaCha8Rng::seed_from_u64(schedule_seed);
        let ring = (dmax + 1) as usize;
        let mut buckets: Vec<Vec<u64>> = vec![Vec::new(); ring];
        let mut index: HashMap<u64, usize> = HashMap::new();
        let mut out = Outbox::default();
        let start = self.time;

        // Envelopes injected before the run.
        for (i, env) in self.pending.iter().enumerate() {
            let d = self.time + rng.gen_range(1..=dmax);
            buckets[(d % ring as u64) as usize].push(env.id);
            index.insert(env.id, i);
        }

        loop {
            if self.proto.is_done() && self.pending.is_empty() {
                return Ok(self.time - start);
            }
            if self.time - start >= self.cfg.max_steps {
                return Err(Fault::StepLimit(self.cfg.max_steps));
            }
            self.time += 1;

            let slot = (self.time % ring as u64) as usize;
            let mut due = std::mem::take(&mut buckets[slot]);
            due.retain(|id| index.contains_key(id));
            due.shuffle(&mut rng);
            for id in due {
                let env = take(&mut self.pending, &mut index, id);
                self.deliver(env, &mut out)?;
                schedule_new(&self.pending, &mut buckets, &mut index, self.time, dmax, &mut rng);
            }

            let pick = rng.gen_range(0..self.pending.len() + n);
            if pick < self.pending.len() {
                let id = self.pending[pick].id;
                let env = take(&mut self.pending, &mut index, id);
                self.deliver(env, &mut out)?;
            } else {
                self.activate((pick - self.pending.len()) as NodeId, &mut out)?;
            }
            schedule_new(&self.pending, &mut buckets, &mut index, self.time, dmax, &mut rng);
            self.metrics.steps += 1;
        }
    }
}

/// Removes envelope `id` by swap-remove, keeping the index map in sync.
fn take<A, M>(pending: &mut Vec<Envelope<A, M>>, index: &mut HashMap<u64, usize>, id: u64) -> Envelope<A, M> {
    let i = index.remove(&id).expect("pending envelope indexed");
    let env = pending.swap_remove(i);
    if i < pending.len() {
        index.insert(pending[i].id, i);
    }
    env
}

/// Assigns deadlines to envelopes appended since the last call. Indexed
/// envelopes always form a prefix of `pending`.
fn schedule_new<A, M>(
    pending: &[Envelope<A, M>],
    buckets: &mut [Vec<u64>],
    index: &mut HashMap<u64, usize>,
    now: u64,
    dmax: u64,
    rng: &mut ChaCha8Rng,
) {
    let known = index.len();
    for (i, env) in pending.iter().enumerate().skip(known) {
        let d = now + rng.gen_range(1..=dmax);
        buckets[(d % buckets.len() as u64) as usize].push(env.id);
        index.insert(env.id, i);
    }
}
