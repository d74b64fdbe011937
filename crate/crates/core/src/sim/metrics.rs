use std::collections::BTreeMap;

use serde::Serialize;

use super::NodeId;

/// Returned by one synchronous round.
#[derive(Clone, Debug, Serialize)]
pub struct RoundMetrics {
    pub round: u64,
    /// Messages handled per real node, indexed by [`NodeId`].
    pub per_node_messages: Vec<u32>,
    pub max_congestion: u32,
    pub max_message_bits: u32,
    pub activations: u32,
}

impl RoundMetrics {
    pub fn delivered(&self) -> u64 {
        self.per_node_messages.iter().map(|&c| c as u64).sum()
    }

    pub fn handled_by(&self, v: NodeId) -> u32 {
        self.per_node_messages[v as usize]
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RoundSummary {
    pub round: u64,
    pub delivered: u64,
    pub max_congestion: u32,
    pub max_message_bits: u32,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct MetricsSummary {
    pub rounds: u64,
    pub steps: u64,
    pub max_congestion: u32,
    pub max_message_bits: u32,
    pub sent: u64,
    pub delivered: u64,
    pub max_bits_by_kind: BTreeMap<String, u32>,
    pub per_round: Vec<RoundSummary>,
}

impl MetricsSummary {
    pub(crate) fn record_round(&mut self, m: &RoundMetrics) {
        self.rounds += 1;
        self.max_congestion = self.max_congestion.max(m.max_congestion);
        self.max_message_bits = self.max_message_bits.max(m.max_message_bits);
        self.per_round.push(RoundSummary {
            round: m.round,
            delivered: m.delivered(),
            max_congestion: m.max_congestion,
            max_message_bits: m.max_message_bits,
        });
    }

    pub(crate) fn record_bits(&mut self, kind: &'static str, bits: u32) {
        self.max_message_bits = self.max_message_bits.max(bits);
        let e = self.max_bits_by_kind.entry(kind.to_string()).or_insert(0);
        *e = (*e).max(bits);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }
}
