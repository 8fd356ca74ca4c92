use num_rational::Ratio;

use super::TxMode;
use crate::{Millis, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrafficClass {
    Interest,
    Data,
    /// Routing control traffic (baseline beacons).
    Control,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NodeCounters {
    pub tx_broadcast: u64,
    pub tx_unicast: u64,
    pub rx: u64,
    pub drops: u64,
    pub tx_interest: u64,
    pub tx_data: u64,
    pub tx_control: u64,
}

impl NodeCounters {
    pub fn tx_total(&self) -> u64 {
        self.tx_broadcast + self.tx_unicast
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransferRecord {
    pub consumer: NodeId,
    pub content: String,
    pub chunks: usize,
    pub started_at: Millis,
    pub success: bool,
    /// Still running when the simulation hit its time limit.
    pub timed_out: bool,
    pub completion_ms: Option<Millis>,
    pub chunk_latencies: Vec<Millis>,
    pub chunk_tries: Vec<u8>,
}

/// Transmission and reception accounting for one run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MetricsLedger {
    pub nodes: Vec<NodeCounters>,
    pub transfers: Vec<TransferRecord>,
    pub end_time: Millis,
}

impl MetricsLedger {
    pub fn new(nodes: usize) -> Self {
        MetricsLedger {
            nodes: vec![NodeCounters::default(); nodes],
            transfers: Vec::new(),
            end_time: 0,
        }
    }

    pub fn node(&self, id: NodeId) -> &NodeCounters {
        &self.nodes[id.index()]
    }

    pub fn count_tx(&mut self, sender: NodeId, mode: TxMode, class: TrafficClass) {
        let c = &mut self.nodes[sender.index()];
        match mode {
            TxMode::Broadcast => c.tx_broadcast += 1,
            TxMode::Unicast(_) => c.tx_unicast += 1,
        }
        match class {
            TrafficClass::Interest => c.tx_interest += 1,
            TrafficClass::Data => c.tx_data += 1,
            TrafficClass::Control => c.tx_control += 1,
        }
    }

    pub fn count_rx(&mut self, receiver: NodeId) {
        self.nodes[receiver.index()].rx += 1;
    }

    pub fn count_drop(&mut self, node: NodeId) {
        self.nodes[node.index()].drops += 1;
    }

    fn sum(&self, f: impl Fn(&NodeCounters) -> u64) -> u64 {
        self.nodes.iter().map(f).sum()
    }

    pub fn tx_broadcast(&self) -> u64 {
        self.sum(|c| c.tx_broadcast)
    }

    pub fn tx_unicast(&self) -> u64 {
        self.sum(|c| c.tx_unicast)
    }

    pub fn tx_total(&self) -> u64 {
        self.tx_broadcast() + self.tx_unicast()
    }

    pub fn tx_interest(&self) -> u64 {
        self.sum(|c| c.tx_interest)
    }

    pub fn tx_data(&self) -> u64 {
        self.sum(|c| c.tx_data)
    }

    pub fn tx_control(&self) -> u64 {
        self.sum(|c| c.tx_control)
    }

    pub fn rx_total(&self) -> u64 {
        self.sum(|c| c.rx)
    }

    pub fn drops(&self) -> u64 {
        self.sum(|c| c.drops)
    }

    pub fn transfers_ok(&self) -> usize {
        self.transfers.iter().filter(|t| t.success).count()
    }

    pub fn transfers_failed(&self) -> usize {
        self.transfers.len() - self.transfers_ok()
    }

    pub fn all_succeeded(&self) -> bool {
        self.transfers.iter().all(|t| t.success)
    }

    /// Mean latency over every delivered chunk, exact.
    pub fn mean_chunk_latency(&self) -> Option<Ratio<u64>> {
        let (sum, count) = self
            .transfers
            .iter()
            .flat_map(|t| &t.chunk_latencies)
            .fold((0u64, 0u64), |(s, c), &l| (s + l, c + 1));
        (count > 0).then(|| Ratio::new(sum, count))
    }
}
