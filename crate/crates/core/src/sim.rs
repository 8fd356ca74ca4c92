//! Event loop tying node engines to the radio medium.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::rc::Rc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::node::{Action, NodeState, Reception, TransferEvent, TransferStatus};
use crate::radio::{Addressing, Arrival, EventQueue, Medium, MetricsLedger, RadioError, RadioTopology, TrafficClass, TransferRecord, TxMode};
use crate::strategy::{ConfigError, StrategyConfig};
use crate::wire::{Name, Packet, PacketKind, WireError};
use crate::{Millis, NodeId};

pub const DEFAULT_MAX_TIME_MS: Millis = 120_000;
/// Pause between one consumer finishing and the next one starting; longer
/// than the default temporary FIB lifetime so consumers do not inherit routes.
pub const DEFAULT_CONSUMER_GAP_MS: Millis = 6_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("node {0} is not in the topology")]
    UnknownNode(NodeId),
    #[error("producer {0} is also listed as a consumer")]
    ProducerIsConsumer(NodeId),
    #[error("consumer {0} listed twice")]
    DuplicateConsumer(NodeId),
    #[error("no consumers")]
    NoConsumers,
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Radio(#[from] RadioError),
}

/// When consumers start fetching.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConsumerSchedule {
    /// All consumers start at t = 0.
    Together,
    /// One after the other; each starts `gap_ms` after the previous finished.
    Sequential { gap_ms: Millis },
}

impl Default for ConsumerSchedule {
    fn default() -> Self {
        ConsumerSchedule::Sequential {
            gap_ms: DEFAULT_CONSUMER_GAP_MS,
        }
    }
}

/// One content item fetched by one or more consumers from a single producer.
#[derive(Debug, Clone, PartialEq)]
pub struct FetchScenario {
    pub strategy: StrategyConfig,
    pub producer: NodeId,
    pub consumers: Vec<NodeId>,
    pub content: Name,
    pub chunks: usize,
    pub schedule: ConsumerSchedule,
    pub max_time_ms: Millis,
}

impl FetchScenario {
    pub fn new(strategy: StrategyConfig, producer: NodeId, consumers: Vec<NodeId>, content: Name, chunks: usize) -> Self {
        FetchScenario {
            strategy,
            producer,
            consumers,
            content,
            chunks,
            schedule: ConsumerSchedule::default(),
            max_time_ms: DEFAULT_MAX_TIME_MS,
        }
    }

    pub fn validate(&self, topology: &RadioTopology) -> Result<(), SimError> {
        self.strategy.validate()?;
        let known = |n: NodeId| n.index() < topology.len();
        if !known(self.producer) {
            return Err(SimError::UnknownNode(self.producer));
        }
        if self.consumers.is_empty() {
            return Err(SimError::NoConsumers);
        }
        let mut seen = BTreeSet::new();
        for &c in &self.consumers {
            if !known(c) {
                return Err(SimError::UnknownNode(c));
            }
            if c == self.producer {
                return Err(SimError::ProducerIsConsumer(c));
            }
            if !seen.insert(c) {
                return Err(SimError::DuplicateConsumer(c));
            }
        }
        if self.chunks > 0 {
            crate::node::chunk_name(&self.content, self.chunks - 1)?;
        }
        Ok(())
    }
}

/// Tab-separated event log: `time_ms node event kind name nonce from to`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    pub lines: Vec<String>,
}

impl Trace {
    pub const HEADER: &'static str = "time_ms\tnode\tevent\tkind\tname\tnonce\tfrom\tto";

    #[allow(clippy::too_many_arguments)]
    pub fn push(&mut self, time: Millis, node: &str, event: &str, kind: &str, name: &str, nonce: u32, from: &str, to: &str) {
        let mut line = String::new();
        let _ = write!(line, "{time}\t{node}\t{event}\t{kind}\t{name}\t{nonce:08x}\t{from}\t{to}");
        self.lines.push(line);
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from(Self::HEADER);
        out.push('\n');
        for l in &self.lines {
            out.push_str(l);
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimOutcome {
    pub ledger: MetricsLedger,
    pub trace: Option<Trace>,
}

enum Event {
    Arrival(Arrival<Rc<[u8]>>),
    Tick(NodeId),
    Start(usize),
}

fn kind_str(kind: PacketKind) -> &'static str {
    match kind {
        PacketKind::Interest => "interest",
        PacketKind::Data => "data",
    }
}

struct Driver<'t> {
    topo: &'t RadioTopology,
    scenario: &'t FetchScenario,
    medium: Medium<'t>,
    nodes: Vec<NodeState>,
    queue: EventQueue<Event>,
    ticks: Vec<BTreeSet<Millis>>,
    ledger: MetricsLedger,
    trace: Option<Trace>,
    recorded: Vec<bool>,
}

impl Driver<'_> {
    fn schedule_tick(&mut self, node: NodeId) {
        if let Some(at) = self.nodes[node.index()].next_deadline() {
            if self.ticks[node.index()].insert(at) {
                self.queue.push(at, Event::Tick(node));
            }
        }
    }

    fn apply(&mut self, node: NodeId, actions: Vec<Action>, now: Millis) -> Result<(), SimError> {
        for action in actions {
            match action {
                Action::Broadcast(pkt) => self.send(node, pkt, TxMode::Broadcast, now)?,
                Action::Unicast(pkt, to) => self.send(node, pkt, TxMode::Unicast(to), now)?,
                Action::Deliver(ev) => self.deliver(node, ev, now),
                Action::Drop(reason) => {
                    self.ledger.count_drop(node);
                    if let Some(t) = self.trace.as_mut() {
                        let label = self.topo.label(node);
                        t.push(now, label, "drop", &format!("{reason:?}"), "-", 0, "-", "-");
                    }
                }
            }
        }
        self.schedule_tick(node);
        Ok(())
    }

    fn send(&mut self, node: NodeId, pkt: Packet, mode: TxMode, now: Millis) -> Result<(), SimError> {
        let frame: Rc<[u8]> = pkt.encode()?.into();
        let class = match pkt.kind() {
            PacketKind::Interest => TrafficClass::Interest,
            PacketKind::Data => TrafficClass::Data,
        };
        if let Some(t) = self.trace.as_mut() {
            let (event, to) = match mode {
                TxMode::Broadcast => ("tx-bcast", "*"),
                TxMode::Unicast(dst) => ("tx-ucast", self.topo.label(dst)),
            };
            let label = self.topo.label(node);
            t.push(now, label, event, kind_str(pkt.kind()), &pkt.name().to_string(), pkt.nonce(), label, to);
        }
        for arrival in self.medium.transmit(&mut self.ledger, node, &frame, mode, class, now)? {
            self.queue.push(arrival.at, Event::Arrival(arrival));
        }
        Ok(())
    }

    fn deliver(&mut self, node: NodeId, ev: TransferEvent, now: Millis) {
        let (event, name) = match &ev {
            TransferEvent::Chunk { base, index, .. } => ("chunk", format!("{base}#{index}")),
            TransferEvent::Completed { base, .. } => ("done", base.to_string()),
            TransferEvent::Failed { base, chunk, .. } => ("fail", format!("{base}#{chunk}")),
        };
        if let Some(t) = self.trace.as_mut() {
            let label = self.topo.label(node);
            t.push(now, label, event, "transfer", &name, 0, "-", label);
        }
        if matches!(ev, TransferEvent::Completed { .. } | TransferEvent::Failed { .. }) {
            self.record_transfer(node, false);
            if let ConsumerSchedule::Sequential { gap_ms } = self.scenario.schedule {
                if let Some(pos) = self.scenario.consumers.iter().position(|&c| c == node) {
                    if pos + 1 < self.scenario.consumers.len() {
                        self.queue.push(now + gap_ms, Event::Start(pos + 1));
                    }
                }
            }
        }
    }

    fn record_transfer(&mut self, node: NodeId, timed_out: bool) {
        let Some(pos) = self.scenario.consumers.iter().position(|&c| c == node) else {
            return;
        };
        if self.recorded[pos] {
            return;
        }
        self.recorded[pos] = true;
        let record = match self.nodes[node.index()].transfer(&self.scenario.content) {
            Some(t) => TransferRecord {
                consumer: node,
                content: t.base_name.to_string(),
                chunks: t.total_chunks,
                started_at: t.started_at,
                success: matches!(t.status, TransferStatus::Completed(_)),
                timed_out,
                completion_ms: match t.status {
                    TransferStatus::Completed(at) => Some(at),
                    _ => None,
                },
                chunk_latencies: t.latencies.clone(),
                chunk_tries: t.tries.clone(),
            },
            None => TransferRecord {
                consumer: node,
                content: self.scenario.content.to_string(),
                chunks: self.scenario.chunks,
                started_at: self.scenario.max_time_ms,
                success: false,
                timed_out,
                completion_ms: None,
                chunk_latencies: Vec::new(),
                chunk_tries: Vec::new(),
            },
        };
        self.ledger.transfers.push(record);
    }

    fn handle(&mut self, now: Millis, event: Event) -> Result<(), SimError> {
        let cfg = self.scenario.strategy;
        match event {
            Event::Start(i) => {
                let consumer = self.scenario.consumers[i];
                let actions = self.nodes[consumer.index()].start_fetch(
                    self.scenario.content.clone(),
                    self.scenario.chunks,
                    now,
                    &cfg,
                )
                .map_err(|e| match e {
                    crate::node::NodeError::Wire(w) => SimError::Wire(w),
                    crate::node::NodeError::TransferAlreadyActive(_) => unreachable!("one transfer per consumer"),
                })?;
                self.apply(consumer, actions, now)
            }
            Event::Tick(node) => {
                self.ticks[node.index()].remove(&now);
                let actions = self.nodes[node.index()].tick(now, &cfg);
                self.apply(node, actions, now)
            }
            Event::Arrival(a) => {
                let reception = match a.addressing {
                    Addressing::Broadcast => Reception::Broadcast,
                    Addressing::ToReceiver => Reception::Unicast,
                    Addressing::Overheard => Reception::Overheard,
                };
                if let Some(t) = self.trace.as_mut() {
                    if let Ok(pkt) = Packet::decode(&a.frame) {
                        let event = if reception == Reception::Overheard { "ovh" } else { "rx" };
                        t.push(
                            now,
                            self.topo.label(a.receiver),
                            event,
                            kind_str(pkt.kind()),
                            &pkt.name().to_string(),
                            pkt.nonce(),
                            self.topo.label(a.from),
                            self.topo.label(a.receiver),
                        );
                    }
                }
                let actions = self.nodes[a.receiver.index()].receive(a.from, &a.frame, reception, now, &cfg);
                self.apply(a.receiver, actions, now)
            }
        }
    }
}

/// Runs one NDN simulation of `scenario` on `topology`.
pub fn run(scenario: &FetchScenario, topology: &RadioTopology, seed: u64) -> Result<SimOutcome, SimError> {
    run_with(scenario, topology, seed, false)
}

/// Like [`run`], optionally recording a full event trace.
pub fn run_with(scenario: &FetchScenario, topology: &RadioTopology, seed: u64, trace: bool) -> Result<SimOutcome, SimError> {
    scenario.validate(topology)?;
    let cfg = scenario.strategy;
    let mut nodes: Vec<NodeState> = topology.nodes().map(|id| NodeState::new(id, &cfg, seed)).collect();
    let p = scenario.producer.index();
    nodes[p] = nodes[p].clone().with_producer(scenario.content.clone(), scenario.chunks);

    let mut driver = Driver {
        topo: topology,
        scenario,
        medium: Medium::new(topology, ChaCha8Rng::seed_from_u64(seed)),
        nodes,
        queue: EventQueue::new(),
        ticks: vec![BTreeSet::new(); topology.len()],
        ledger: MetricsLedger::new(topology.len()),
        trace: trace.then(Trace::default),
        recorded: vec![false; scenario.consumers.len()],
    };
    match scenario.schedule {
        ConsumerSchedule::Together => {
            for i in 0..scenario.consumers.len() {
                driver.queue.push(0, Event::Start(i));
            }
        }
        ConsumerSchedule::Sequential { .. } => driver.queue.push(0, Event::Start(0)),
    }

    let mut last = 0;
    while let Some(at) = driver.queue.peek_time() {
        if at > scenario.max_time_ms {
            break;
        }
        let (now, event) = driver.queue.pop().expect("peeked");
        last = now;
        driver.handle(now, event)?;
    }
    for &c in &scenario.consumers {
        driver.record_transfer(c, true);
    }
    driver.ledger.end_time = last;
    Ok(SimOutcome {
        ledger: driver.ledger,
        trace: driver.trace,
    })
}
