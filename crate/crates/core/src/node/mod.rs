//! Per-node NDN engine.
//!
//! A [`NodeState`] owns one node's FIB, PIT, content store and nonce
//! deduplication table, plus the consumer-side transfers it runs and the
//! content it produces. Every entry point is synchronous and returns the
//! [`Action`]s the radio layer has to carry out.

mod tables;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use tables::{CachePriority, ContentStore, CsEntry, CsInsert, DedupTable, Face, Fib, FibEntry, Pit, PitEntry};

use crate::strategy::{self, DataEmission, Forwarding, StrategyConfig};
use crate::wire::{Data, Interest, Name, Packet, WireError, CHUNK_PAYLOAD_LEN};
use crate::{Millis, NodeId};

/// Consumer retransmission timeout.
pub const INTEREST_TIMEOUT_MS: Millis = 400;
/// Transmissions per chunk before a transfer gives up, initial one included.
pub const MAX_TRIES: u8 = 5;
/// Lifetime of dedup records and PIT entries.
pub const NONCE_TIMEOUT_MS: Millis = 900;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NodeError {
    #[error("a transfer for {0} is already active")]
    TransferAlreadyActive(Name),
    #[error(transparent)]
    Wire(#[from] WireError),
}

/// How a frame reached this node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Reception {
    /// Unicast frame addressed to this node.
    Unicast,
    /// Link-local broadcast.
    Broadcast,
    /// Unicast frame addressed to another node.
    Overheard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DropReason {
    Malformed,
    /// Data addressed to us without a pending Interest.
    UnsolicitedData,
    HopLimit,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransferEvent {
    Chunk {
        base: Name,
        index: usize,
        latency_ms: Millis,
        tries: u8,
    },
    Completed {
        base: Name,
        at: Millis,
    },
    Failed {
        base: Name,
        chunk: usize,
        at: Millis,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    Broadcast(Packet),
    Unicast(Packet, NodeId),
    Deliver(TransferEvent),
    Drop(DropReason),
}

impl Action {
    pub fn is_transmission(&self) -> bool {
        matches!(self, Action::Broadcast(_) | Action::Unicast(..))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferStatus {
    Active,
    Completed(Millis),
    Failed(Millis),
}

/// Consumer side of one stop-and-go content fetch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransferState {
    pub base_name: Name,
    pub total_chunks: usize,
    pub next_chunk: usize,
    /// Transmissions made for `next_chunk` so far.
    pub attempts_for_current: u8,
    pub retry_deadline: Millis,
    pub started_at: Millis,
    pub status: TransferStatus,
    /// Latency of each completed chunk, measured from its first transmission.
    pub latencies: Vec<Millis>,
    /// Transmissions each completed chunk needed.
    pub tries: Vec<u8>,
    chunk_started_at: Millis,
    last_route: Option<(Name, NodeId)>,
}

impl TransferState {
    pub fn is_active(&self) -> bool {
        self.status == TransferStatus::Active
    }

    pub fn current_name(&self) -> Result<Name, WireError> {
        chunk_name(&self.base_name, self.next_chunk)
    }
}

/// Content served by a producer: chunks `0..chunks` under `prefix`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProducerContent {
    pub prefix: Name,
    pub chunks: usize,
}

impl ProducerContent {
    pub fn serves(&self, name: &Name) -> Option<usize> {
        if name.len() != self.prefix.len() + 1 || !self.prefix.is_prefix_of(name) {
            return None;
        }
        chunk_index(name.last()).filter(|&i| i < self.chunks)
    }
}

/// Suffix of chunk `index`: `a`..`z`, then `aa`, `ab`, ...
pub fn chunk_suffix(index: usize) -> String {
    let mut n = index + 1;
    let mut out = Vec::new();
    while n > 0 {
        n -= 1;
        out.push(b'a' + (n % 26) as u8);
        n /= 26;
    }
    out.reverse();
    String::from_utf8(out).expect("ascii")
}

pub fn chunk_index(suffix: &[u8]) -> Option<usize> {
    if suffix.is_empty() {
        return None;
    }
    let mut n: usize = 0;
    for &b in suffix {
        if !b.is_ascii_lowercase() {
            return None;
        }
        n = n.checked_mul(26)?.checked_add((b - b'a') as usize + 1)?;
    }
    Some(n - 1)
}

pub fn chunk_name(base: &Name, index: usize) -> Result<Name, WireError> {
    base.child(chunk_suffix(index))
}

/// Deterministic payload of chunk `index`.
pub fn chunk_payload(index: usize) -> Vec<u8> {
    (0..CHUNK_PAYLOAD_LEN).map(|j| b'A' + ((index + j) % 26) as u8).collect()
}

#[derive(Debug, Clone)]
pub struct NodeState {
    pub id: NodeId,
    pub fib: Fib,
    pub pit: Pit,
    pub cs: ContentStore,
    pub dedup: DedupTable,
    pub transfers: Vec<TransferState>,
    pub producer: Option<ProducerContent>,
    rng: ChaCha8Rng,
}

impl NodeState {
    pub fn new(id: NodeId, config: &StrategyConfig, seed: u64) -> Self {
        NodeState {
            id,
            fib: Fib::default(),
            pit: Pit::default(),
            cs: ContentStore::new(config.cache_capacity),
            dedup: DedupTable::default(),
            transfers: Vec::new(),
            producer: None,
            rng: ChaCha8Rng::seed_from_u64(seed ^ (u64::from(id.0) << 32)),
        }
    }

    pub fn with_producer(mut self, prefix: Name, chunks: usize) -> Self {
        self.producer = Some(ProducerContent { prefix, chunks });
        self
    }

    fn fresh_nonce(&mut self) -> u32 {
        loop {
            let n: u32 = self.rng.gen();
            if n != 0 {
                return n;
            }
        }
    }

    pub fn fib_lookup(&self, name: &Name, now: Millis) -> Option<NodeId> {
        self.fib.lookup(name, now).map(|e| e.face)
    }

    pub fn cs_lookup(&mut self, name: &Name, now: Millis) -> Option<Data> {
        self.cs.lookup(name, now)
    }

    pub fn cs_insert(&mut self, data: Data, priority: CachePriority, now: Millis) -> CsInsert {
        self.cs.insert(data, priority, now)
    }

    pub fn transfer(&self, base: &Name) -> Option<&TransferState> {
        self.transfers.iter().rev().find(|t| t.base_name == *base)
    }

    /// Earliest retransmission deadline among active transfers.
    pub fn next_deadline(&self) -> Option<Millis> {
        self.transfers.iter().filter(|t| t.is_active()).map(|t| t.retry_deadline).min()
    }

    /// Decodes a received frame and dispatches it.
    pub fn receive(
        &mut self,
        from: NodeId,
        frame: &[u8],
        reception: Reception,
        now: Millis,
        config: &StrategyConfig,
    ) -> Vec<Action> {
        match Packet::decode(frame) {
            Err(_) => vec![Action::Drop(DropReason::Malformed)],
            Ok(Packet::Interest(_)) if reception == Reception::Overheard => Vec::new(),
            Ok(Packet::Interest(i)) => self.on_interest(Face::Neighbor(from), i, now, config),
            Ok(Packet::Data(d)) => self.on_data(from, d, reception, now, config),
        }
    }

    pub fn on_interest(&mut self, from: Face, interest: Interest, now: Millis, config: &StrategyConfig) -> Vec<Action> {
        if self.dedup.is_fresh_duplicate(&interest.name, interest.nonce, now) {
            return Vec::new();
        }
        self.dedup
            .record(interest.name.clone(), interest.nonce, now + NONCE_TIMEOUT_MS);

        let Face::Neighbor(requester) = from else {
            return self.express_local(interest, now, config);
        };

        if let Some(index) = self.producer.as_ref().and_then(|p| p.serves(&interest.name)) {
            let data = Data::new(interest.name, chunk_payload(index));
            return vec![Action::Unicast(data.into(), requester)];
        }
        if let Some(data) = self.cs.lookup(&interest.name, now) {
            return vec![Action::Unicast(data.into(), requester)];
        }
        if let Some(entry) = self.pit.get_mut(&interest.name, now) {
            let retransmission = entry.has_face(from);
            entry.add_face(from);
            entry.nonces_seen.push((interest.nonce, now + NONCE_TIMEOUT_MS));
            if !retransmission {
                return Vec::new();
            }
            // same downstream asking again with a fresh nonce
            entry.expires_at = now + NONCE_TIMEOUT_MS;
        } else {
            self.pit
                .create(interest.name.clone(), from, interest.nonce, now, NONCE_TIMEOUT_MS);
        }
        self.forward_interest(interest, Some(requester), now, config)
            .into_iter()
            .collect()
    }

    /// Interest originated by a local consumer: register it and send it out.
    fn express_local(&mut self, interest: Interest, now: Millis, config: &StrategyConfig) -> Vec<Action> {
        match self.pit.get_mut(&interest.name, now) {
            Some(entry) => {
                entry.add_face(Face::Local);
                entry.nonces_seen.push((interest.nonce, now + NONCE_TIMEOUT_MS));
                entry.expires_at = now + NONCE_TIMEOUT_MS;
            }
            None => {
                self.pit
                    .create(interest.name.clone(), Face::Local, interest.nonce, now, NONCE_TIMEOUT_MS);
            }
        }
        self.forward_interest(interest, None, now, config)
            .into_iter()
            .collect()
    }

    fn forward_interest(
        &mut self,
        mut interest: Interest,
        requester: Option<NodeId>,
        now: Millis,
        config: &StrategyConfig,
    ) -> Option<Action> {
        if requester.is_some() {
            if interest.hop_count >= interest.hop_limit {
                return Some(Action::Drop(DropReason::HopLimit));
            }
            interest.hop_count += 1;
        }
        match strategy::decide_interest_forwarding(config, self, &interest, now) {
            Forwarding::Unicast(face) if Some(face) != requester => Some(Action::Unicast(interest.into(), face)),
            _ => Some(Action::Broadcast(interest.into())),
        }
    }

    pub fn on_data(
        &mut self,
        from: NodeId,
        mut data: Data,
        reception: Reception,
        now: Millis,
        config: &StrategyConfig,
    ) -> Vec<Action> {
        let pending = self.pit.get(&data.name, now).is_some();
        if reception == Reception::Overheard || (!pending && reception == Reception::Broadcast) {
            if !pending {
                strategy::on_overheard_data(config, self, &data, now);
            }
            return Vec::new();
        }
        let Some(entry) = self.pit.remove(&data.name).filter(|e| e.expires_at > now) else {
            return vec![Action::Drop(DropReason::UnsolicitedData)];
        };

        self.cs.insert(data.clone(), CachePriority::Solicited, now);
        strategy::on_data_install_route(config, self, &data, from, now);

        let mut actions = Vec::new();
        let downstream: Vec<NodeId> = entry.neighbor_faces().into_iter().filter(|&n| n != from).collect();
        if !downstream.is_empty() {
            let mut fwd = data.clone();
            fwd.hop_count = fwd.hop_count.saturating_add(1);
            match strategy::select_data_emission(config, &downstream) {
                DataEmission::Broadcast => actions.push(Action::Broadcast(fwd.into())),
                DataEmission::UnicastEach => {
                    actions.extend(downstream.iter().map(|&n| Action::Unicast(fwd.clone().into(), n)));
                }
            }
        }
        if entry.has_face(Face::Local) {
            data.hop_count = 0;
            actions.extend(self.deliver_local(&data.name, now, config));
        }
        actions
    }

    fn deliver_local(&mut self, name: &Name, now: Millis, config: &StrategyConfig) -> Vec<Action> {
        let Some(idx) = self
            .transfers
            .iter()
            .position(|t| t.is_active() && t.current_name().as_ref() == Ok(name))
        else {
            return Vec::new();
        };
        let mut actions = Vec::new();
        self.complete_chunk(idx, now, &mut actions);
        self.request_next(idx, now, config, &mut actions);
        actions
    }

    fn complete_chunk(&mut self, idx: usize, now: Millis, actions: &mut Vec<Action>) {
        let t = &mut self.transfers[idx];
        let latency = now - t.chunk_started_at;
        t.latencies.push(latency);
        t.tries.push(t.attempts_for_current);
        actions.push(Action::Deliver(TransferEvent::Chunk {
            base: t.base_name.clone(),
            index: t.next_chunk,
            latency_ms: latency,
            tries: t.attempts_for_current,
        }));
        t.next_chunk += 1;
        t.attempts_for_current = 0;
        t.last_route = None;
    }

    /// Requests chunks until one has to go on the air, serving local cache hits.
    fn request_next(&mut self, idx: usize, now: Millis, config: &StrategyConfig, actions: &mut Vec<Action>) {
        loop {
            let t = &mut self.transfers[idx];
            if t.next_chunk >= t.total_chunks {
                t.status = TransferStatus::Completed(now);
                actions.push(Action::Deliver(TransferEvent::Completed {
                    base: t.base_name.clone(),
                    at: now,
                }));
                return;
            }
            t.chunk_started_at = now;
            let name = match t.current_name() {
                Ok(name) => name,
                Err(_) => {
                    t.status = TransferStatus::Failed(now);
                    actions.push(Action::Deliver(TransferEvent::Failed {
                        base: t.base_name.clone(),
                        chunk: t.next_chunk,
                        at: now,
                    }));
                    return;
                }
            };
            if self.cs.lookup(&name, now).is_some() {
                self.complete_chunk(idx, now, actions);
                continue;
            }
            self.send_current(idx, name, now, config, actions);
            return;
        }
    }

    fn send_current(&mut self, idx: usize, name: Name, now: Millis, config: &StrategyConfig, actions: &mut Vec<Action>) {
        let nonce = self.fresh_nonce();
        let interest = Interest::new(name, nonce);
        let route = match strategy::decide_interest_forwarding(config, self, &interest, now) {
            Forwarding::Unicast(_) => self
                .fib
                .lookup(&interest.name, now)
                .map(|e| (e.prefix.clone(), e.face)),
            Forwarding::Flood => None,
        };
        actions.extend(self.on_interest(Face::Local, interest, now, config));
        let t = &mut self.transfers[idx];
        t.attempts_for_current += 1;
        t.retry_deadline = now + INTEREST_TIMEOUT_MS;
        t.last_route = route;
    }

    /// Starts a stop-and-go fetch of `chunks` chunks under `base`.
    pub fn start_fetch(
        &mut self,
        base: Name,
        chunks: usize,
        now: Millis,
        config: &StrategyConfig,
    ) -> Result<Vec<Action>, NodeError> {
        if self.transfers.iter().any(|t| t.is_active() && t.base_name == base) {
            return Err(NodeError::TransferAlreadyActive(base));
        }
        if chunks > 0 {
            chunk_name(&base, chunks - 1)?;
        }
        self.transfers.retain(|t| t.base_name != base);
        self.transfers.push(TransferState {
            base_name: base,
            total_chunks: chunks,
            next_chunk: 0,
            attempts_for_current: 0,
            retry_deadline: now,
            started_at: now,
            status: TransferStatus::Active,
            latencies: Vec::new(),
            tries: Vec::new(),
            chunk_started_at: now,
            last_route: None,
        });
        let idx = self.transfers.len() - 1;
        let mut actions = Vec::new();
        self.request_next(idx, now, config, &mut actions);
        Ok(actions)
    }

    /// Expires soft state and drives consumer retransmissions.
    pub fn tick(&mut self, now: Millis, config: &StrategyConfig) -> Vec<Action> {
        self.dedup.expire(now);
        self.pit.expire(now);
        self.fib.expire(now);

        let mut actions = Vec::new();
        for idx in 0..self.transfers.len() {
            let t = &mut self.transfers[idx];
            if !t.is_active() || t.retry_deadline > now {
                continue;
            }
            if t.attempts_for_current >= MAX_TRIES {
                t.status = TransferStatus::Failed(now);
                actions.push(Action::Deliver(TransferEvent::Failed {
                    base: t.base_name.clone(),
                    chunk: t.next_chunk,
                    at: now,
                }));
                continue;
            }
            // a unicast attempt timed out: forget the route so the retry floods
            if let Some((prefix, face)) = t.last_route.take() {
                self.fib.remove(&prefix, face);
            }
            let name = self.transfers[idx].current_name().expect("validated at start");
            self.send_current(idx, name, now, config, &mut actions);
        }
        actions
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(s: &str) -> Name {
        Name::parse(s).unwrap()
    }

    const A: NodeId = NodeId(1);
    const B: NodeId = NodeId(2);
    const C: NodeId = NodeId(3);

    fn interest(name: &str, nonce: u32) -> Interest {
        Interest::new(n(name), nonce)
    }

    fn data(name: &str) -> Data {
        Data::new(n(name), vec![9; 30])
    }

    fn transmissions(actions: &[Action]) -> usize {
        actions.iter().filter(|a| a.is_transmission()).count()
    }

    #[test]
    fn chunk_suffixes() {
        assert_eq!(chunk_suffix(0), "a");
        assert_eq!(chunk_suffix(1), "b");
        assert_eq!(chunk_suffix(25), "z");
        assert_eq!(chunk_suffix(26), "aa");
        assert_eq!(chunk_suffix(27), "ab");
        assert_eq!(chunk_suffix(26 + 26 * 26), "aaa");
        for i in 0..2000 {
            assert_eq!(chunk_index(chunk_suffix(i).as_bytes()), Some(i));
        }
        assert_eq!(chunk_index(b"A"), None);
    }

    #[test]
    fn producer_answers_without_flooding() {
        let cfg = StrategyConfig::vif();
        let mut p = NodeState::new(C, &cfg, 1).with_producer(n("/riot/text"), 10);
        let out = p.on_interest(Face::Neighbor(B), interest("/riot/text/a", 7), 0, &cfg);
        assert_eq!(out.len(), 1);
        match &out[0] {
            Action::Unicast(Packet::Data(d), to) => {
                assert_eq!(*to, B);
                assert_eq!(d.name, n("/riot/text/a"));
                assert_eq!(d.payload.len(), 30);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(p.pit.is_empty());
        // chunk beyond the content is not served: the interest is forwarded
        let out = p.on_interest(Face::Neighbor(B), interest("/riot/text/k", 8), 0, &cfg);
        assert!(matches!(out[0], Action::Broadcast(_)));
    }

    #[test]
    fn duplicate_nonce_is_suppressed() {
        let cfg = StrategyConfig::vif();
        let mut s = NodeState::new(B, &cfg, 1);
        let out = s.on_interest(Face::Neighbor(A), interest("/riot/text/a", 5), 0, &cfg);
        assert_eq!(transmissions(&out), 1);
        assert!(s.on_interest(Face::Neighbor(C), interest("/riot/text/a", 5), 899, &cfg).is_empty());
    }

    #[test]
    fn pit_aggregates_second_neighbor() {
        let cfg = StrategyConfig::vif();
        let mut s = NodeState::new(B, &cfg, 1);
        s.on_interest(Face::Neighbor(A), interest("/riot/text/a", 5), 0, &cfg);
        let out = s.on_interest(Face::Neighbor(C), interest("/riot/text/a", 6), 10, &cfg);
        assert!(out.is_empty());
        let entry = s.pit.get(&n("/riot/text/a"), 10).unwrap();
        assert_eq!(entry.incoming, vec![Face::Neighbor(A), Face::Neighbor(C)]);
    }

    #[test]
    fn retransmission_from_same_face_is_forwarded() {
        let cfg = StrategyConfig::vif();
        let mut s = NodeState::new(B, &cfg, 1);
        s.on_interest(Face::Neighbor(A), interest("/riot/text/a", 5), 0, &cfg);
        let out = s.on_interest(Face::Neighbor(A), interest("/riot/text/a", 6), 400, &cfg);
        assert_eq!(transmissions(&out), 1);
        assert_eq!(s.pit.get(&n("/riot/text/a"), 400).unwrap().expires_at, 1300);
    }

    #[test]
    fn cs_hit_answers() {
        let cfg = StrategyConfig::ronr().with_cache(20);
        let mut s = NodeState::new(B, &cfg, 1);
        s.cs_insert(data("/riot/text/a"), CachePriority::Solicited, 0);
        let out = s.on_interest(Face::Neighbor(A), interest("/riot/text/a", 5), 1, &cfg);
        assert!(matches!(&out[..], [Action::Unicast(Packet::Data(_), to)] if *to == A));
    }

    #[test]
    fn data_installs_route_and_unicasts() {
        let cfg = StrategyConfig::ronr();
        let mut s = NodeState::new(B, &cfg, 1);
        s.on_interest(Face::Neighbor(A), interest("/riot/text/a", 5), 0, &cfg);
        let out = s.on_data(C, data("/riot/text/a"), Reception::Unicast, 10, &cfg);
        assert!(matches!(&out[..], [Action::Unicast(Packet::Data(_), to)] if *to == A));
        assert_eq!(s.fib_lookup(&n("/riot/text/b"), 11), Some(C));
        assert!(s.pit.is_empty());
        // next interest for the same item is unicast
        let out = s.on_interest(Face::Neighbor(A), interest("/riot/text/b", 6), 20, &cfg);
        assert!(matches!(&out[..], [Action::Unicast(Packet::Interest(_), to)] if *to == C));
    }

    #[test]
    fn cfa_broadcasts_to_multiple_faces() {
        for (cfa, expect) in [(true, 1), (false, 2)] {
            let cfg = StrategyConfig::ronr().with_cfa(cfa);
            let mut s = NodeState::new(B, &cfg, 1);
            s.on_interest(Face::Neighbor(A), interest("/riot/text/a", 5), 0, &cfg);
            s.on_interest(Face::Neighbor(NodeId(9)), interest("/riot/text/a", 6), 1, &cfg);
            let out = s.on_data(C, data("/riot/text/a"), Reception::Unicast, 10, &cfg);
            assert_eq!(transmissions(&out), expect);
            assert_eq!(cfa, matches!(out[0], Action::Broadcast(_)));
        }
    }

    #[test]
    fn unsolicited_and_overheard_data() {
        let cfg = StrategyConfig::ronr().with_cache(2).with_onpc(true);
        let mut s = NodeState::new(B, &cfg, 1);
        assert_eq!(
            s.on_data(C, data("/riot/text/a"), Reception::Unicast, 0, &cfg),
            vec![Action::Drop(DropReason::UnsolicitedData)]
        );
        assert!(s.cs.is_empty());
        assert!(s.on_data(C, data("/riot/text/b"), Reception::Overheard, 0, &cfg).is_empty());
        assert_eq!(s.cs.entries()[0].priority, CachePriority::Unsolicited);
        // overheard data never satisfies a pending interest
        s.on_interest(Face::Neighbor(A), interest("/riot/text/c", 5), 0, &cfg);
        assert!(s.on_data(C, data("/riot/text/c"), Reception::Overheard, 1, &cfg).is_empty());
        assert!(s.pit.get(&n("/riot/text/c"), 1).is_some());
    }

    #[test]
    fn fetch_lifecycle() {
        let cfg = StrategyConfig::ronr();
        let mut s = NodeState::new(A, &cfg, 1);
        let out = s.start_fetch(n("/riot/text"), 2, 0, &cfg).unwrap();
        match &out[..] {
            [Action::Broadcast(Packet::Interest(i))] => assert_eq!(i.name, n("/riot/text/a")),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(
            s.start_fetch(n("/riot/text"), 2, 0, &cfg),
            Err(NodeError::TransferAlreadyActive(n("/riot/text")))
        );
        let out = s.on_data(B, data("/riot/text/a"), Reception::Unicast, 30, &cfg);
        assert!(matches!(&out[0], Action::Deliver(TransferEvent::Chunk { index: 0, latency_ms: 30, tries: 1, .. })));
        assert!(matches!(&out[1], Action::Unicast(Packet::Interest(i), to) if *to == B && i.name == n("/riot/text/b")));
        let out = s.on_data(B, data("/riot/text/b"), Reception::Unicast, 50, &cfg);
        assert!(matches!(&out[1], Action::Deliver(TransferEvent::Completed { at: 50, .. })));
        assert_eq!(s.transfer(&n("/riot/text")).unwrap().status, TransferStatus::Completed(50));
        assert_eq!(s.next_deadline(), None);
    }

    #[test]
    fn single_and_empty_fetch() {
        let cfg = StrategyConfig::vif();
        let mut s = NodeState::new(A, &cfg, 1);
        let out = s.start_fetch(n("/riot/text"), 0, 5, &cfg).unwrap();
        assert_eq!(transmissions(&out), 0);
        assert_eq!(s.transfer(&n("/riot/text")).unwrap().status, TransferStatus::Completed(5));

        let mut s = NodeState::new(A, &cfg, 1);
        s.start_fetch(n("/riot/text"), 1, 0, &cfg).unwrap();
        s.on_data(B, data("/riot/text/a"), Reception::Unicast, 20, &cfg);
        assert_eq!(s.transfer(&n("/riot/text")).unwrap().status, TransferStatus::Completed(20));
    }

    #[test]
    fn gives_up_after_five_tries() {
        let cfg = StrategyConfig::vif();
        let mut s = NodeState::new(A, &cfg, 1);
        let mut sent = transmissions(&s.start_fetch(n("/riot/text"), 3, 0, &cfg).unwrap());
        let mut nonces = std::collections::BTreeSet::new();
        let mut now = 0;
        assert!(s.tick(399, &cfg).is_empty());
        loop {
            now += INTEREST_TIMEOUT_MS;
            let out = s.tick(now, &cfg);
            if out.iter().any(|a| matches!(a, Action::Deliver(TransferEvent::Failed { chunk: 0, .. }))) {
                assert_eq!(transmissions(&out), 0);
                break;
            }
            for a in &out {
                if let Action::Broadcast(Packet::Interest(i)) = a {
                    nonces.insert(i.nonce);
                }
            }
            sent += transmissions(&out);
        }
        assert_eq!(sent, 5);
        assert_eq!(nonces.len(), 4);
        assert_eq!(now, 2000);
        assert!(s.tick(now + 400, &cfg).is_empty());
    }

    #[test]
    fn unicast_timeout_reverts_to_flooding() {
        let cfg = StrategyConfig::ronr();
        let mut s = NodeState::new(A, &cfg, 1);
        s.fib.upsert(n("/riot/text"), B, 10_000, true);
        let out = s.start_fetch(n("/riot/text"), 2, 0, &cfg).unwrap();
        assert!(matches!(&out[..], [Action::Unicast(_, to)] if *to == B));
        let out = s.tick(400, &cfg);
        assert!(matches!(&out[..], [Action::Broadcast(Packet::Interest(_))]));
        assert!(s.fib.is_empty());
    }

    #[test]
    fn consumer_serves_itself_from_cache() {
        let cfg = StrategyConfig::ronr().with_cache(20);
        let mut s = NodeState::new(A, &cfg, 1);
        s.cs_insert(data("/riot/text/a"), CachePriority::Solicited, 0);
        let out = s.start_fetch(n("/riot/text"), 2, 0, &cfg).unwrap();
        assert!(matches!(&out[0], Action::Deliver(TransferEvent::Chunk { index: 0, .. })));
        assert!(matches!(&out[1], Action::Broadcast(Packet::Interest(i)) if i.name == n("/riot/text/b")));
    }

    #[test]
    fn malformed_frames_are_counted() {
        let cfg = StrategyConfig::vif();
        let mut s = NodeState::new(A, &cfg, 1);
        assert_eq!(
            s.receive(B, &[0xff; 20], Reception::Broadcast, 0, &cfg),
            vec![Action::Drop(DropReason::Malformed)]
        );
    }

    #[test]
    fn soft_state_expires() {
        let cfg = StrategyConfig::ronr();
        let mut s = NodeState::new(B, &cfg, 1);
        s.on_interest(Face::Neighbor(A), interest("/riot/text/a", 5), 0, &cfg);
        s.fib.upsert(n("/riot/text"), C, 5_000, true);
        s.tick(900, &cfg);
        assert!(s.pit.is_empty());
        assert!(s.dedup.is_empty());
        assert_eq!(s.fib.len(), 1);
        s.tick(5_000, &cfg);
        assert!(s.fib.is_empty());
    }
}
