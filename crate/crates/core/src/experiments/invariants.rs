//! Protocol invariant checks over randomized runs and single-node cases.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::node::{Action, CachePriority, ContentStore, Face, NodeState, MAX_TRIES, NONCE_TIMEOUT_MS};
use crate::radio::{gen_grid, MetricsLedger};
use crate::sim::{self, ConsumerSchedule, FetchScenario, Trace};
use crate::strategy::{Routing, StrategyConfig};
use crate::wire::{Data, Interest, Name, Packet};
use crate::{Millis, NodeId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{invariant}: {detail}")]
pub struct InvariantViolation {
    pub invariant: &'static str,
    pub detail: String,
}

fn violation(invariant: &'static str, detail: impl fmt::Display) -> InvariantViolation {
    InvariantViolation {
        invariant,
        detail: detail.to_string(),
    }
}

/// A randomized whole-network run on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RunCase {
    pub rows: usize,
    pub cols: usize,
    pub p: f64,
    pub routing: Routing,
    pub cfa: bool,
    pub onpc: bool,
    pub cache: usize,
    pub producer: usize,
    /// Node indices; duplicates and the producer are filtered out.
    pub consumers: Vec<usize>,
    pub chunks: usize,
    pub together: bool,
    pub seed: u64,
}

impl RunCase {
    fn scenario(&self) -> Option<FetchScenario> {
        let n = self.rows * self.cols;
        let producer = NodeId((self.producer % n) as u16);
        let mut consumers = Vec::new();
        for &c in &self.consumers {
            let c = NodeId((c % n) as u16);
            if c != producer && !consumers.contains(&c) {
                consumers.push(c);
            }
        }
        if consumers.is_empty() {
            return None;
        }
        let strategy = StrategyConfig {
            routing: self.routing,
            cfa: self.cfa,
            onpc: self.onpc && self.cache > 0,
            cache_capacity: self.cache,
            temp_fib_lifetime_ms: crate::strategy::DEFAULT_TEMP_FIB_MS,
        };
        let content = Name::parse("/riot/text").expect("static name");
        let mut s = FetchScenario::new(strategy, producer, consumers, content, self.chunks);
        s.schedule = if self.together {
            ConsumerSchedule::Together
        } else {
            ConsumerSchedule::Sequential { gap_ms: 1_000 }
        };
        s.max_time_ms = 60_000;
        Some(s)
    }
}

struct TraceLine<'a> {
    time: Millis,
    node: &'a str,
    event: &'a str,
    kind: &'a str,
    name: &'a str,
    nonce: &'a str,
}

fn parse_line(line: &str) -> Option<TraceLine<'_>> {
    let f: Vec<&str> = line.split('\t').collect();
    if f.len() != 8 {
        return None;
    }
    Some(TraceLine {
        time: f[0].parse().ok()?,
        node: f[1],
        event: f[2],
        kind: f[3],
        name: f[4],
        nonce: f[5],
    })
}

/// No node transmits the same (name, nonce) Interest twice within the nonce timeout.
fn check_dedup(trace: &Trace) -> Result<(), InvariantViolation> {
    let mut last: HashMap<(&str, &str, &str), Millis> = HashMap::new();
    for line in &trace.lines {
        let l = parse_line(line).ok_or_else(|| violation("trace", format!("malformed line {line:?}")))?;
        if !l.event.starts_with("tx") || l.kind != "interest" {
            continue;
        }
        if let Some(prev) = last.insert((l.node, l.name, l.nonce), l.time) {
            if l.time < prev + NONCE_TIMEOUT_MS {
                return Err(violation(
                    "nonce dedup",
                    format!("{} forwarded {} nonce {} at {prev} and {}", l.node, l.name, l.nonce, l.time),
                ));
            }
        }
    }
    Ok(())
}

fn check_stop_and_go(scenario: &FetchScenario, ledger: &MetricsLedger, trace: &Trace, labels: &[String]) -> Result<(), InvariantViolation> {
    for t in &ledger.transfers {
        if let Some(&tries) = t.chunk_tries.iter().find(|&&n| n > MAX_TRIES) {
            return Err(violation("stop-and-go", format!("chunk delivered after {tries} tries")));
        }
    }
    // with one consumer every Interest it sends is its own
    if let [consumer] = scenario.consumers[..] {
        let label = labels[consumer.index()].as_str();
        let mut per_name: HashMap<&str, u32> = HashMap::new();
        for l in trace.lines.iter().filter_map(|l| parse_line(l)) {
            if l.node == label && l.kind == "interest" && l.event.starts_with("tx") {
                let count = per_name.entry(l.name).or_default();
                *count += 1;
                if *count > u32::from(MAX_TRIES) {
                    return Err(violation("stop-and-go", format!("{label} sent {} {count} times", l.name)));
                }
            }
        }
    }
    Ok(())
}

/// Runs the case twice with tracing and checks run-level invariants.
pub fn check_run_invariants(case: &RunCase) -> Result<(), InvariantViolation> {
    let topo = gen_grid(case.rows, case.cols, case.p).map_err(|e| violation("setup", e))?;
    let Some(scenario) = case.scenario() else {
        return Ok(());
    };
    let a = sim::run_with(&scenario, &topo, case.seed, true).map_err(|e| violation("setup", e))?;
    let b = sim::run_with(&scenario, &topo, case.seed, true).map_err(|e| violation("setup", e))?;
    let (ta, tb) = (a.trace.as_ref().expect("traced"), b.trace.as_ref().expect("traced"));
    if ta.to_tsv() != tb.to_tsv() || a.ledger != b.ledger {
        return Err(violation("determinism", format!("seed {} produced two different runs", case.seed)));
    }
    check_dedup(ta)?;
    let labels: Vec<String> = topo.nodes().map(|n| topo.label(n).to_string()).collect();
    check_stop_and_go(&scenario, &a.ledger, ta, &labels)?;
    let ledger = &a.ledger;
    let bound = ledger.tx_total() * topo.max_out_degree() as u64;
    if ledger.rx_total() > bound {
        return Err(violation("conservation", format!("rx {} > tx bound {bound}", ledger.rx_total())));
    }
    if ledger.transfers.len() != scenario.consumers.len() {
        return Err(violation("accounting", "missing transfer records"));
    }
    Ok(())
}

fn count_tx(actions: &[Action]) -> usize {
    actions.iter().filter(|a| a.is_transmission()).count()
}

/// Interests for one name reaching a forwarder from distinct neighbors.
#[derive(Debug, Clone, PartialEq)]
pub struct PitCase {
    pub routing: Routing,
    /// Neighbor ids (duplicates are skipped) with arrival offsets in ms.
    pub arrivals: Vec<(u16, Millis)>,
}

/// Distinct downstream neighbors within one PIT lifetime cause exactly one
/// upstream transmission.
pub fn check_pit_aggregation(case: &PitCase) -> Result<(), InvariantViolation> {
    let cfg = StrategyConfig::new(case.routing);
    let mut node = NodeState::new(NodeId(0), &cfg, 7);
    let name = Name::parse("/riot/text/a").expect("static name");
    let mut seen = Vec::new();
    let mut arrivals: Vec<_> = case.arrivals.iter().map(|&(n, t)| (n % 50 + 1, t % NONCE_TIMEOUT_MS)).collect();
    arrivals.sort_by_key(|&(_, t)| t);
    let mut upstream = 0;
    for (i, (neighbor, at)) in arrivals.into_iter().enumerate() {
        if seen.contains(&neighbor) {
            continue;
        }
        seen.push(neighbor);
        let interest = Interest::new(name.clone(), 0x1000 + i as u32);
        upstream += count_tx(&node.on_interest(Face::Neighbor(NodeId(neighbor)), interest, at, &cfg));
    }
    if !seen.is_empty() && upstream != 1 {
        return Err(violation(
            "pit aggregation",
            format!("{} downstream neighbors caused {upstream} upstream interests", seen.len()),
        ));
    }
    let entry = node.pit.get(&name, 0).ok_or_else(|| violation("pit aggregation", "no pit entry"))?;
    if entry.neighbor_faces().len() != seen.len() {
        return Err(violation("pit aggregation", "downstream faces not all recorded"));
    }
    Ok(())
}

/// Data arriving for a PIT entry with several downstream neighbors.
#[derive(Debug, Clone, PartialEq)]
pub struct CfaCase {
    pub downstream: Vec<u16>,
}

fn data_tx_for(downstream: &[u16], cfa: bool) -> usize {
    let cfg = StrategyConfig::ronr().with_cfa(cfa);
    let mut node = NodeState::new(NodeId(0), &cfg, 3);
    let name = Name::parse("/riot/text/a").expect("static name");
    for (i, &n) in downstream.iter().enumerate() {
        node.on_interest(Face::Neighbor(NodeId(n)), Interest::new(name.clone(), i as u32 + 1), 0, &cfg);
    }
    let data = Data::new(name, vec![b'x'; 4]);
    let actions = node.on_data(NodeId(999), data, crate::node::Reception::Unicast, 10, &cfg);
    actions
        .iter()
        .filter(|a| matches!(a, Action::Broadcast(Packet::Data(_)) | Action::Unicast(Packet::Data(_), _)))
        .count()
}

/// CFA never sends more Data frames than per-neighbor unicast.
pub fn check_cfa_non_increase(case: &CfaCase) -> Result<(), InvariantViolation> {
    let mut downstream: Vec<u16> = case.downstream.iter().map(|n| n % 50 + 1).collect();
    downstream.sort_unstable();
    downstream.dedup();
    let with = data_tx_for(&downstream, true);
    let without = data_tx_for(&downstream, false);
    if without != downstream.len() {
        return Err(violation("cfa", format!("{without} data frames for {} neighbors", downstream.len())));
    }
    if with > without || with > 1 {
        return Err(violation("cfa", format!("cfa sent {with} frames, plain forwarding {without}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsOp {
    Insert { chunk: u8, solicited: bool },
    Lookup { chunk: u8 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsCase {
    pub capacity: usize,
    pub ops: Vec<CsOp>,
}

/// Reference cache: (chunk, solicited, last use), scanned linearly.
struct ModelCs {
    capacity: usize,
    entries: Vec<(u8, bool, u64)>,
    clock: u64,
}

impl ModelCs {
    fn insert(&mut self, chunk: u8, solicited: bool) {
        self.clock += 1;
        if let Some(e) = self.entries.iter_mut().find(|e| e.0 == chunk) {
            e.1 |= solicited;
            e.2 = self.clock;
            return;
        }
        if self.entries.len() < self.capacity {
            self.entries.push((chunk, solicited, self.clock));
            return;
        }
        let lru = |want: bool| {
            self.entries
                .iter()
                .enumerate()
                .filter(|(_, e)| e.1 == want)
                .min_by_key(|(_, e)| e.2)
                .map(|(i, _)| i)
        };
        let victim = match lru(false) {
            Some(i) => Some(i),
            None if solicited => lru(true),
            None => None,
        };
        if let Some(i) = victim {
            self.entries[i] = (chunk, solicited, self.clock);
        }
    }

    fn lookup(&mut self, chunk: u8) -> bool {
        self.clock += 1;
        match self.entries.iter_mut().find(|e| e.0 == chunk) {
            Some(e) => {
                e.2 = self.clock;
                true
            }
            None => false,
        }
    }
}

/// Capacity bound, class priority and LRU order against a reference model.
pub fn check_cs_rules(case: &CsCase) -> Result<(), InvariantViolation> {
    let mut cs = ContentStore::new(case.capacity);
    let mut model = ModelCs {
        capacity: case.capacity,
        entries: Vec::new(),
        clock: 0,
    };
    let base = Name::parse("/riot/text").expect("static name");
    let name = |c: u8| base.child([b'a' + c % 26]).expect("short name");
    for (step, op) in case.ops.iter().enumerate() {
        match *op {
            CsOp::Insert { chunk, solicited } => {
                let solicited_before = cs.entries().iter().filter(|e| e.priority == CachePriority::Solicited).count();
                let priority = if solicited {
                    CachePriority::Solicited
                } else {
                    CachePriority::Unsolicited
                };
                cs.insert(Data::new(name(chunk), vec![chunk]), priority, step as Millis);
                if case.capacity > 0 {
                    model.insert(chunk % 26, solicited);
                }
                let solicited_after = cs.entries().iter().filter(|e| e.priority == CachePriority::Solicited).count();
                if !solicited && solicited_after < solicited_before {
                    return Err(violation("cs priority", format!("step {step}: unsolicited insert evicted solicited data")));
                }
            }
            CsOp::Lookup { chunk } => {
                let hit = cs.lookup(&name(chunk), step as Millis).is_some();
                let expected = case.capacity > 0 && model.lookup(chunk % 26);
                if hit != expected {
                    return Err(violation("cs lookup", format!("step {step}: hit {hit}, expected {expected}")));
                }
            }
        }
        if cs.len() > case.capacity {
            return Err(violation("cs capacity", format!("{} entries in a {}-chunk store", cs.len(), case.capacity)));
        }
        let mut got: Vec<(u8, bool)> = cs
            .entries()
            .iter()
            .map(|e| (e.data.payload[0] % 26, e.priority == CachePriority::Solicited))
            .collect();
        let mut want: Vec<(u8, bool)> = model.entries.iter().map(|e| (e.0, e.1)).collect();
        got.sort_unstable();
        want.sort_unstable();
        if got != want {
            return Err(violation("cs contents", format!("step {step}: store {got:?}, reference {want:?}")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_run_passes() {
        let case = RunCase {
            rows: 3,
            cols: 3,
            p: 0.8,
            routing: Routing::Ronr,
            cfa: true,
            onpc: true,
            cache: 5,
            producer: 8,
            consumers: vec![0, 2],
            chunks: 4,
            together: true,
            seed: 11,
        };
        check_run_invariants(&case).unwrap();
    }

    #[test]
    fn dedup_detects_repeats() {
        let mut t = Trace::default();
        t.push(0, "a", "tx-bcast", "interest", "/x/a", 5, "a", "*");
        t.push(100, "a", "tx-bcast", "interest", "/x/a", 5, "a", "*");
        assert_eq!(check_dedup(&t).unwrap_err().invariant, "nonce dedup");
        let mut t = Trace::default();
        t.push(0, "a", "tx-bcast", "interest", "/x/a", 5, "a", "*");
        t.push(900, "a", "tx-bcast", "interest", "/x/a", 5, "a", "*");
        t.push(900, "b", "tx-bcast", "interest", "/x/a", 5, "b", "*");
        check_dedup(&t).unwrap();
    }

    #[test]
    fn node_level_cases() {
        check_pit_aggregation(&PitCase {
            routing: Routing::Vif,
            arrivals: vec![(1, 0), (2, 10), (3, 500)],
        })
        .unwrap();
        check_cfa_non_increase(&CfaCase { downstream: vec![1, 2, 3] }).unwrap();
        check_cs_rules(&CsCase {
            capacity: 2,
            ops: vec![
                CsOp::Insert { chunk: 0, solicited: true },
                CsOp::Insert { chunk: 1, solicited: true },
                CsOp::Insert { chunk: 2, solicited: false },
                CsOp::Lookup { chunk: 2 },
                CsOp::Lookup { chunk: 0 },
                CsOp::Insert { chunk: 3, solicited: true },
                CsOp::Lookup { chunk: 1 },
            ],
        })
        .unwrap();
    }
}
