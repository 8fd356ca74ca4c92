//! Proactive tree routing, standing in for a 6LoWPAN/RPL/UDP stack.
//!
//! The routing tree is a breadth-first tree over links that deliver at least
//! half the frames in both directions, rooted at a border router. Routing is
//! storing mode: every node knows the next hop towards each descendant, and
//! anything else goes to the parent. While transfers are pending every node
//! broadcasts a beacon once per interval; bootstrap traffic is not counted.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::node::{INTEREST_TIMEOUT_MS, MAX_TRIES};
use crate::radio::{Addressing, Arrival, EventQueue, Frame, Medium, MetricsLedger, RadioError, RadioTopology, TrafficClass, TransferRecord, TxMode};
use crate::sim::{ConsumerSchedule, FetchScenario, SimError};
use crate::wire::CHUNK_PAYLOAD_LEN;
use crate::{Millis, NodeId};

/// Minimum per-direction delivery probability of a tree link.
pub const TREE_LINK_THRESHOLD: f64 = 0.5;
pub const DEFAULT_BEACON_INTERVAL_MS: Millis = 1_000;
/// Compressed 6LoWPAN + UDP header size.
pub const UDP_HEADER_LEN: usize = 15;
pub const BEACON_LEN: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BaselineError {
    #[error("nodes unreachable over good bidirectional links: {0:?}")]
    Unreachable(Vec<String>),
    #[error("no route from {0} to {1}")]
    NoRoute(NodeId, NodeId),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Radio(#[from] RadioError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeState {
    pub node: NodeId,
    pub rank: usize,
    pub parent: Option<NodeId>,
    pub children: BTreeSet<NodeId>,
    /// Descendant -> child through which it is reached.
    pub routes: BTreeMap<NodeId, NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoutingTree {
    pub root: NodeId,
    pub states: Vec<TreeState>,
}

fn good_link(topo: &RadioTopology, a: NodeId, b: NodeId) -> bool {
    topo.probability(a, b) >= TREE_LINK_THRESHOLD && topo.probability(b, a) >= TREE_LINK_THRESHOLD
}

/// Builds the converged routing tree rooted at `root`.
pub fn converge(topology: &RadioTopology, root: NodeId) -> Result<RoutingTree, BaselineError> {
    let n = topology.len();
    let mut rank: Vec<Option<usize>> = vec![None; n];
    rank[root.index()] = Some(0);
    let mut queue = VecDeque::from([root]);
    while let Some(u) = queue.pop_front() {
        let ru = rank[u.index()].expect("queued");
        let mut next: Vec<NodeId> = topology
            .neighbors(u)
            .iter()
            .map(|&(v, _)| v)
            .filter(|&v| rank[v.index()].is_none() && good_link(topology, u, v))
            .collect();
        next.sort_by(|a, b| topology.label(*a).cmp(topology.label(*b)));
        for v in next {
            rank[v.index()] = Some(ru + 1);
            queue.push_back(v);
        }
    }
    let unreachable: Vec<String> = topology
        .nodes()
        .filter(|id| rank[id.index()].is_none())
        .map(|id| topology.label(id).to_string())
        .collect();
    if !unreachable.is_empty() {
        return Err(BaselineError::Unreachable(unreachable));
    }

    let mut states: Vec<TreeState> = topology
        .nodes()
        .map(|id| TreeState {
            node: id,
            rank: rank[id.index()].expect("all reachable"),
            parent: None,
            children: BTreeSet::new(),
            routes: BTreeMap::new(),
        })
        .collect();
    for id in topology.nodes() {
        let r = states[id.index()].rank;
        if r == 0 {
            continue;
        }
        let parent = topology
            .neighbors(id)
            .iter()
            .map(|&(v, _)| v)
            .filter(|&v| states[v.index()].rank + 1 == r && good_link(topology, id, v))
            .min_by(|a, b| topology.label(*a).cmp(topology.label(*b)))
            .expect("bfs parent exists");
        states[id.index()].parent = Some(parent);
        states[parent.index()].children.insert(id);
    }
    // each node announces itself to every ancestor
    for id in topology.nodes() {
        let mut child = id;
        let mut cur = states[id.index()].parent;
        while let Some(p) = cur {
            states[p.index()].routes.insert(id, child);
            child = p;
            cur = states[p.index()].parent;
        }
    }
    Ok(RoutingTree { root, states })
}

impl RoutingTree {
    pub fn state(&self, node: NodeId) -> &TreeState {
        &self.states[node.index()]
    }

    pub fn depth(&self) -> usize {
        self.states.iter().map(|s| s.rank).max().unwrap_or(0)
    }

    /// Hops from `src` to `dst`: up to the lowest common ancestor, then down.
    /// Excludes `src`; empty when `src == dst`.
    pub fn route(&self, src: NodeId, dst: NodeId) -> Result<Vec<NodeId>, BaselineError> {
        let known = |n: NodeId| n.index() < self.states.len();
        if !known(src) || !known(dst) {
            return Err(BaselineError::NoRoute(src, dst));
        }
        let mut path = Vec::new();
        let mut cur = src;
        while cur != dst {
            let st = &self.states[cur.index()];
            cur = match st.routes.get(&dst) {
                Some(&child) => child,
                None => st.parent.ok_or(BaselineError::NoRoute(src, dst))?,
            };
            path.push(cur);
        }
        Ok(path)
    }

    pub fn next_hop(&self, at: NodeId, dst: NodeId) -> Option<NodeId> {
        let st = &self.states[at.index()];
        st.routes.get(&dst).copied().or(st.parent)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BaselineConfig {
    /// Border router; defaults to the producer.
    pub root: Option<NodeId>,
    /// 0 disables beacons.
    pub beacon_interval_ms: Millis,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            root: None,
            beacon_interval_ms: DEFAULT_BEACON_INTERVAL_MS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MsgKind {
    Request,
    Response,
    Beacon,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Msg {
    kind: MsgKind,
    consumer: usize,
    chunk: usize,
    dst: NodeId,
    len: usize,
}

impl Frame for Msg {
    fn wire_len(&self) -> usize {
        self.len
    }
}

enum Event {
    Start(usize),
    Beacon(NodeId),
    Arrival(Arrival<Msg>),
    Timeout { consumer: usize, chunk: usize, attempt: u8 },
}

struct Consumer {
    node: NodeId,
    started: Option<Millis>,
    chunk: usize,
    attempts: u8,
    chunk_started: Millis,
    latencies: Vec<Millis>,
    tries: Vec<u8>,
    finished: Option<(bool, Millis)>,
}

struct Driver<'t> {
    tree: RoutingTree,
    scenario: &'t FetchScenario,
    config: BaselineConfig,
    medium: Medium<'t>,
    queue: EventQueue<Event>,
    ledger: MetricsLedger,
    consumers: Vec<Consumer>,
    request_len: usize,
}

impl Driver<'_> {
    fn pending(&self) -> bool {
        self.consumers.iter().any(|c| c.finished.is_none())
    }

    fn unicast(&mut self, from: NodeId, msg: Msg, now: Millis) -> Result<(), BaselineError> {
        let to = self
            .tree
            .next_hop(from, msg.dst)
            .ok_or(BaselineError::NoRoute(from, msg.dst))?;
        for a in self
            .medium
            .transmit(&mut self.ledger, from, &msg, TxMode::Unicast(to), TrafficClass::Data, now)?
        {
            self.queue.push(a.at, Event::Arrival(a));
        }
        Ok(())
    }

    fn send_request(&mut self, ci: usize, now: Millis) -> Result<(), BaselineError> {
        let c = &mut self.consumers[ci];
        if c.chunk >= self.scenario.chunks {
            return self.finish(ci, true, now);
        }
        if c.attempts == 0 {
            c.chunk_started = now;
        }
        c.attempts += 1;
        let (node, chunk, attempt) = (c.node, c.chunk, c.attempts);
        self.queue.push(now + INTEREST_TIMEOUT_MS, Event::Timeout { consumer: ci, chunk, attempt });
        let msg = Msg {
            kind: MsgKind::Request,
            consumer: ci,
            chunk,
            dst: self.scenario.producer,
            len: self.request_len,
        };
        self.unicast(node, msg, now)
    }

    fn finish(&mut self, ci: usize, success: bool, now: Millis) -> Result<(), BaselineError> {
        self.consumers[ci].finished = Some((success, now));
        if let ConsumerSchedule::Sequential { gap_ms } = self.scenario.schedule {
            if ci + 1 < self.consumers.len() {
                self.queue.push(now + gap_ms, Event::Start(ci + 1));
            }
        }
        Ok(())
    }

    fn handle(&mut self, now: Millis, event: Event) -> Result<(), BaselineError> {
        match event {
            Event::Start(ci) => {
                self.consumers[ci].started = Some(now);
                self.send_request(ci, now)
            }
            Event::Beacon(node) => {
                if !self.pending() {
                    return Ok(());
                }
                let beacon = Msg {
                    kind: MsgKind::Beacon,
                    consumer: 0,
                    chunk: 0,
                    dst: node,
                    len: BEACON_LEN,
                };
                for a in self
                    .medium
                    .transmit(&mut self.ledger, node, &beacon, TxMode::Broadcast, TrafficClass::Control, now)?
                {
                    self.queue.push(a.at, Event::Arrival(a));
                }
                self.queue.push(now + self.config.beacon_interval_ms, Event::Beacon(node));
                Ok(())
            }
            Event::Timeout { consumer, chunk, attempt } => {
                let c = &self.consumers[consumer];
                if c.finished.is_some() || c.chunk != chunk || c.attempts != attempt {
                    return Ok(());
                }
                if attempt >= MAX_TRIES {
                    return self.finish(consumer, false, now);
                }
                self.send_request(consumer, now)
            }
            Event::Arrival(a) => {
                if a.addressing != Addressing::ToReceiver {
                    return Ok(());
                }
                let msg = a.frame;
                if a.receiver != msg.dst {
                    return self.unicast(a.receiver, msg, now);
                }
                match msg.kind {
                    MsgKind::Request => {
                        let reply = Msg {
                            kind: MsgKind::Response,
                            dst: self.consumers[msg.consumer].node,
                            len: msg.len + CHUNK_PAYLOAD_LEN,
                            ..msg
                        };
                        self.unicast(a.receiver, reply, now)
                    }
                    MsgKind::Response => {
                        let c = &mut self.consumers[msg.consumer];
                        if c.finished.is_some() || c.chunk != msg.chunk {
                            return Ok(());
                        }
                        c.latencies.push(now - c.chunk_started);
                        c.tries.push(c.attempts);
                        c.chunk += 1;
                        c.attempts = 0;
                        self.send_request(msg.consumer, now)
                    }
                    MsgKind::Beacon => Ok(()),
                }
            }
        }
    }
}

/// Runs the tree-routing stack on the same scenario the NDN stack would run.
/// Caching and strategy settings of the scenario are ignored.
pub fn run_fetch_baseline(
    scenario: &FetchScenario,
    config: &BaselineConfig,
    topology: &RadioTopology,
    seed: u64,
) -> Result<MetricsLedger, BaselineError> {
    scenario.validate(topology)?;
    let root = config.root.unwrap_or(scenario.producer);
    if root.index() >= topology.len() {
        return Err(SimError::UnknownNode(root).into());
    }
    let tree = converge(topology, root)?;
    let consumers = scenario
        .consumers
        .iter()
        .map(|&node| Consumer {
            node,
            started: None,
            chunk: 0,
            attempts: 0,
            chunk_started: 0,
            latencies: Vec::new(),
            tries: Vec::new(),
            finished: None,
        })
        .collect();
    let mut d = Driver {
        tree,
        scenario,
        config: *config,
        medium: Medium::new(topology, ChaCha8Rng::seed_from_u64(seed)),
        queue: EventQueue::new(),
        ledger: MetricsLedger::new(topology.len()),
        consumers,
        request_len: UDP_HEADER_LEN + scenario.content.encoded_len() + 2,
    };
    match scenario.schedule {
        ConsumerSchedule::Together => (0..scenario.consumers.len()).for_each(|i| d.queue.push(0, Event::Start(i))),
        ConsumerSchedule::Sequential { .. } => d.queue.push(0, Event::Start(0)),
    }
    if config.beacon_interval_ms > 0 {
        let n = topology.len() as u64;
        for id in topology.nodes() {
            let phase = u64::from(id.0) * config.beacon_interval_ms / n;
            d.queue.push(phase, Event::Beacon(id));
        }
    }
    let mut last = 0;
    while let Some(at) = d.queue.peek_time() {
        if at > scenario.max_time_ms {
            break;
        }
        let (now, event) = d.queue.pop().expect("peeked");
        last = now;
        d.handle(now, event)?;
    }
    d.ledger.end_time = last;
    for c in &d.consumers {
        d.ledger.transfers.push(TransferRecord {
            consumer: c.node,
            content: scenario.content.to_string(),
            chunks: scenario.chunks,
            started_at: c.started.unwrap_or(scenario.max_time_ms),
            success: matches!(c.finished, Some((true, _))),
            timed_out: c.finished.is_none(),
            completion_ms: match c.finished {
                Some((true, at)) => Some(at),
                _ => None,
            },
            chunk_latencies: c.latencies.clone(),
            chunk_tries: c.tries.clone(),
        });
    }
    Ok(d.ledger)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radio::{gen_grid, gen_line};
    use crate::strategy::StrategyConfig;
    use crate::wire::Name;

    fn content() -> Name {
        Name::parse("/riot/text").unwrap()
    }

    #[test]
    fn line_ranks() {
        let t = gen_line(3, 1.0).unwrap();
        let tree = converge(&t, NodeId(0)).unwrap();
        let ranks: Vec<_> = tree.states.iter().map(|s| s.rank).collect();
        assert_eq!(ranks, vec![0, 1, 2]);
        assert_eq!(tree.state(NodeId(2)).parent, Some(NodeId(1)));
        assert_eq!(tree.route(NodeId(2), NodeId(1)).unwrap(), vec![NodeId(1)]);
        assert_eq!(tree.route(NodeId(0), NodeId(2)).unwrap(), vec![NodeId(1), NodeId(2)]);
        assert!(tree.route(NodeId(1), NodeId(1)).unwrap().is_empty());
    }

    #[test]
    fn grid_corner_rank() {
        let t = gen_grid(2, 2, 1.0).unwrap();
        let tree = converge(&t, t.id("r0c0").unwrap()).unwrap();
        assert_eq!(tree.state(t.id("r1c1").unwrap()).rank, 2);
        // tie between r0c1 and r1c0 goes to the smaller label
        assert_eq!(tree.state(t.id("r1c1").unwrap()).parent, Some(t.id("r0c1").unwrap()));
        let (a, b) = (t.id("r0c1").unwrap(), t.id("r1c0").unwrap());
        assert_eq!(tree.route(a, b).unwrap(), vec![t.id("r0c0").unwrap(), b]);
    }

    #[test]
    fn weak_links_are_not_tree_links() {
        let t = RadioTopology::parse("a b 1.0\nb a 1.0\nb c 0.9\nc b 0.3").unwrap();
        match converge(&t, t.id("a").unwrap()) {
            Err(BaselineError::Unreachable(nodes)) => assert_eq!(nodes, vec!["c".to_string()]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn lossless_line_data_plane() {
        let t = gen_line(4, 1.0).unwrap();
        let mut s = FetchScenario::new(StrategyConfig::ronr(), NodeId(3), vec![NodeId(0)], content(), 5);
        let quiet = BaselineConfig {
            root: None,
            beacon_interval_ms: 0,
        };
        let l = run_fetch_baseline(&s, &quiet, &t, 1).unwrap();
        assert_eq!(l.tx_total(), 2 * 5 * 3);
        assert_eq!(l.tx_control(), 0);
        assert!(l.all_succeeded());

        let l = run_fetch_baseline(&s, &BaselineConfig::default(), &t, 1).unwrap();
        assert_eq!(l.tx_data(), 30);
        assert!(l.tx_control() > 0);
        assert_eq!(l.tx_broadcast(), l.tx_control());

        s.chunks = 0;
        let l = run_fetch_baseline(&s, &quiet, &t, 1).unwrap();
        assert_eq!(l.tx_total(), 0);
        assert!(l.all_succeeded());
    }

    #[test]
    fn beacons_cover_the_measured_window() {
        let t = gen_line(4, 1.0).unwrap();
        let s = FetchScenario::new(StrategyConfig::ronr(), NodeId(3), vec![NodeId(0)], content(), 5);
        let l = run_fetch_baseline(&s, &BaselineConfig::default(), &t, 1).unwrap();
        // transfer lasts 5 chunks * 30 ms; each node beacons once in [0, 1000)
        // and the ones whose phase falls before completion fire
        let done = l.transfers[0].completion_ms.unwrap();
        assert_eq!(done, 150);
        let expected = (0..4u64).filter(|i| i * 1000 / 4 <= done).count() as u64;
        assert_eq!(l.tx_control(), expected);
    }
}
