//! Shared lossy broadcast medium.
//!
//! Every transmission is heard independently by each neighbor of the sender
//! with that directed link's delivery probability. There is no MAC contention
//! model; a unicast frame is received (and possibly overheard) exactly like a
//! broadcast, only its addressing differs.

mod ledger;
mod queue;
mod topology;

use std::rc::Rc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use ledger::{MetricsLedger, NodeCounters, TrafficClass, TransferRecord};
pub use queue::EventQueue;
pub use topology::{gen_grid, gen_line, RadioTopology, TopologyError};

use crate::wire::MTU;
use crate::{Millis, NodeId};

/// Air time plus processing of one frame.
pub const FRAME_DELAY_MS: Millis = 5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RadioError {
    #[error("frame of {0} bytes exceeds the {MTU}-byte MTU")]
    MtuExceeded(usize),
}

/// Anything that can be put on the air.
pub trait Frame: Clone {
    fn wire_len(&self) -> usize;
}

impl Frame for Rc<[u8]> {
    fn wire_len(&self) -> usize {
        self.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TxMode {
    Broadcast,
    Unicast(NodeId),
}

/// Who a received frame was meant for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Addressing {
    Broadcast,
    ToReceiver,
    /// Unicast to another node.
    Overheard,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arrival<F> {
    pub at: Millis,
    pub receiver: NodeId,
    pub from: NodeId,
    pub addressing: Addressing,
    pub frame: F,
}

pub struct Medium<'t> {
    topology: &'t RadioTopology,
    rng: ChaCha8Rng,
    frame_delay: Millis,
}

impl<'t> Medium<'t> {
    pub fn new(topology: &'t RadioTopology, rng: ChaCha8Rng) -> Self {
        Medium {
            topology,
            rng,
            frame_delay: FRAME_DELAY_MS,
        }
    }

    pub fn topology(&self) -> &'t RadioTopology {
        self.topology
    }

    /// Puts `frame` on the air, counts the transmission and returns the
    /// receptions it produces.
    pub fn transmit<F: Frame>(
        &mut self,
        ledger: &mut MetricsLedger,
        sender: NodeId,
        frame: &F,
        mode: TxMode,
        class: TrafficClass,
        now: Millis,
    ) -> Result<Vec<Arrival<F>>, RadioError> {
        let len = frame.wire_len();
        if len > MTU {
            return Err(RadioError::MtuExceeded(len));
        }
        ledger.count_tx(sender, mode, class);
        let mut out = Vec::new();
        for &(receiver, p) in self.topology.neighbors(sender) {
            // one draw per neighbor, whatever p is, so runs stay aligned
            let heard = self.rng.gen::<f64>() < p;
            if !heard {
                continue;
            }
            ledger.count_rx(receiver);
            let addressing = match mode {
                TxMode::Broadcast => Addressing::Broadcast,
                TxMode::Unicast(dst) if dst == receiver => Addressing::ToReceiver,
                TxMode::Unicast(_) => Addressing::Overheard,
            };
            out.push(Arrival {
                at: now + self.frame_delay,
                receiver,
                from: sender,
                addressing,
                frame: frame.clone(),
            });
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn frame(len: usize) -> Rc<[u8]> {
        vec![0u8; len].into()
    }

    #[test]
    fn broadcast_reaches_only_neighbors() {
        let topo = gen_line(3, 1.0).unwrap();
        let mut medium = Medium::new(&topo, ChaCha8Rng::seed_from_u64(1));
        let mut ledger = MetricsLedger::new(topo.len());
        let out = medium
            .transmit(&mut ledger, NodeId(0), &frame(29), TxMode::Broadcast, TrafficClass::Interest, 10)
            .unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].receiver, NodeId(1));
        assert_eq!(out[0].at, 15);
        assert_eq!(out[0].addressing, Addressing::Broadcast);
        assert_eq!(ledger.tx_broadcast(), 1);
        assert_eq!(ledger.rx_total(), 1);
    }

    #[test]
    fn unidirectional_link_never_delivers_backwards() {
        let topo = RadioTopology::parse("a b 0\nb a 1.0").unwrap();
        let mut medium = Medium::new(&topo, ChaCha8Rng::seed_from_u64(7));
        let mut ledger = MetricsLedger::new(topo.len());
        let a = topo.id("a").unwrap();
        for t in 0..1000 {
            let out = medium
                .transmit(&mut ledger, a, &frame(20), TxMode::Broadcast, TrafficClass::Control, t)
                .unwrap();
            assert!(out.is_empty());
        }
        assert_eq!(ledger.tx_broadcast(), 1000);
        assert_eq!(ledger.rx_total(), 0);
    }

    #[test]
    fn unicast_is_overheard() {
        let topo = gen_grid(3, 3, 1.0).unwrap();
        let mut medium = Medium::new(&topo, ChaCha8Rng::seed_from_u64(3));
        let mut ledger = MetricsLedger::new(topo.len());
        let center = topo.id("r1c1").unwrap();
        let dst = topo.id("r0c1").unwrap();
        let out = medium
            .transmit(&mut ledger, center, &frame(58), TxMode::Unicast(dst), TrafficClass::Data, 0)
            .unwrap();
        assert_eq!(out.len(), 4);
        for a in &out {
            let expect = if a.receiver == dst { Addressing::ToReceiver } else { Addressing::Overheard };
            assert_eq!(a.addressing, expect);
        }
        assert_eq!(ledger.tx_unicast(), 1);
        assert_eq!(ledger.node(center).tx_data, 1);
    }

    #[test]
    fn loss_rate_matches_probability() {
        let topo = RadioTopology::parse("a b 0.9\nb a 0.2").unwrap();
        let mut medium = Medium::new(&topo, ChaCha8Rng::seed_from_u64(11));
        let mut ledger = MetricsLedger::new(topo.len());
        let b = topo.id("b").unwrap();
        let n = 20_000;
        let mut heard = 0;
        for t in 0..n {
            heard += medium
                .transmit(&mut ledger, b, &frame(10), TxMode::Broadcast, TrafficClass::Control, t)
                .unwrap()
                .len();
        }
        let rate = heard as f64 / n as f64;
        assert!((rate - 0.2).abs() < 0.02, "{rate}");
    }

    #[test]
    fn rejects_oversize_frame() {
        let topo = gen_line(2, 1.0).unwrap();
        let mut medium = Medium::new(&topo, ChaCha8Rng::seed_from_u64(1));
        let mut ledger = MetricsLedger::new(topo.len());
        let err = medium
            .transmit(&mut ledger, NodeId(0), &frame(65), TxMode::Broadcast, TrafficClass::Data, 0)
            .unwrap_err();
        assert_eq!(err, RadioError::MtuExceeded(65));
        assert_eq!(ledger.tx_total(), 0);
    }
}
