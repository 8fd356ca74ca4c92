use std::collections::BTreeMap;

use crate::wire::{Data, Name};
use crate::{Millis, NodeId};

/// Where a pending Interest came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Face {
    /// An application on this node (the consumer).
    Local,
    Neighbor(NodeId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FibEntry {
    pub prefix: Name,
    pub face: NodeId,
    pub expires_at: Millis,
    pub temporary: bool,
    installed_seq: u64,
}

/// Name-prefix to next-hop table. At most one entry per (prefix, face).
#[derive(Debug, Clone, Default)]
pub struct Fib {
    entries: Vec<FibEntry>,
    install_seq: u64,
}

impl Fib {
    /// Inserts or refreshes the entry for `(prefix, face)`. A refresh counts
    /// as the most recent install for tie-breaking.
    pub fn upsert(&mut self, prefix: Name, face: NodeId, expires_at: Millis, temporary: bool) {
        self.install_seq += 1;
        let seq = self.install_seq;
        if let Some(e) = self.entries.iter_mut().find(|e| e.prefix == prefix && e.face == face) {
            e.expires_at = expires_at;
            e.temporary = temporary;
            e.installed_seq = seq;
            return;
        }
        self.entries.push(FibEntry {
            prefix,
            face,
            expires_at,
            temporary,
            installed_seq: seq,
        });
    }

    /// Longest-prefix match among unexpired entries, most recent install wins ties.
    pub fn lookup(&self, name: &Name, now: Millis) -> Option<&FibEntry> {
        self.entries
            .iter()
            .filter(|e| e.expires_at > now && e.prefix.is_prefix_of(name))
            .max_by_key(|e| (e.prefix.len(), e.installed_seq))
    }

    pub fn remove(&mut self, prefix: &Name, face: NodeId) -> bool {
        let before = self.entries.len();
        self.entries.retain(|e| !(e.prefix == *prefix && e.face == face));
        self.entries.len() != before
    }

    pub fn expire(&mut self, now: Millis) {
        self.entries.retain(|e| e.expires_at > now);
    }

    pub fn entries(&self) -> &[FibEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PitEntry {
    pub name: Name,
    /// Downstream faces in arrival order.
    pub incoming: Vec<Face>,
    pub nonces_seen: Vec<(u32, Millis)>,
    pub expires_at: Millis,
}

impl PitEntry {
    pub fn has_face(&self, face: Face) -> bool {
        self.incoming.contains(&face)
    }

    pub fn add_face(&mut self, face: Face) {
        if !self.incoming.contains(&face) {
            self.incoming.push(face);
        }
    }

    pub fn neighbor_faces(&self) -> Vec<NodeId> {
        self.incoming
            .iter()
            .filter_map(|f| match f {
                Face::Neighbor(n) => Some(*n),
                Face::Local => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Default)]
pub struct Pit {
    entries: BTreeMap<Name, PitEntry>,
}

impl Pit {
    pub fn get(&self, name: &Name, now: Millis) -> Option<&PitEntry> {
        self.entries.get(name).filter(|e| e.expires_at > now)
    }

    pub fn get_mut(&mut self, name: &Name, now: Millis) -> Option<&mut PitEntry> {
        self.entries.get_mut(name).filter(|e| e.expires_at > now)
    }

    /// Creates a fresh entry, replacing any expired one.
    pub fn create(&mut self, name: Name, face: Face, nonce: u32, now: Millis, lifetime: Millis) -> &mut PitEntry {
        let expires_at = now + lifetime;
        let entry = PitEntry {
            name: name.clone(),
            incoming: vec![face],
            nonces_seen: vec![(nonce, expires_at)],
            expires_at,
        };
        self.entries.insert(name.clone(), entry);
        self.entries.get_mut(&name).expect("just inserted")
    }

    pub fn remove(&mut self, name: &Name) -> Option<PitEntry> {
        self.entries.remove(name)
    }

    pub fn expire(&mut self, now: Millis) {
        self.entries.retain(|_, e| e.expires_at > now);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &PitEntry> {
        self.entries.values()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CachePriority {
    /// Overheard, not requested through this node.
    Unsolicited,
    /// Arrived in answer to a PIT entry.
    Solicited,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsEntry {
    pub data: Data,
    pub priority: CachePriority,
    pub last_used: Millis,
    use_seq: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsInsert {
    Inserted,
    /// Entry existed; refreshed (and possibly promoted to Solicited).
    Refreshed,
    /// Inserted after evicting the least recently used entry of the given class.
    Evicted(CachePriority),
    /// No room for an unsolicited chunk.
    Refused,
    /// Caching disabled.
    Disabled,
}

/// Bounded content store. Unsolicited entries never displace solicited ones;
/// within a class the least recently used entry goes first.
#[derive(Debug, Clone)]
pub struct ContentStore {
    capacity: usize,
    entries: Vec<CsEntry>,
    use_seq: u64,
    refused: u64,
}

impl ContentStore {
    pub fn new(capacity: usize) -> Self {
        ContentStore {
            capacity,
            entries: Vec::with_capacity(capacity),
            use_seq: 0,
            refused: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn refused(&self) -> u64 {
        self.refused
    }

    pub fn entries(&self) -> &[CsEntry] {
        &self.entries
    }

    fn next_seq(&mut self) -> u64 {
        self.use_seq += 1;
        self.use_seq
    }

    /// Exact-name lookup; a hit refreshes recency.
    pub fn lookup(&mut self, name: &Name, now: Millis) -> Option<Data> {
        let seq = self.next_seq();
        let e = self.entries.iter_mut().find(|e| e.data.name == *name)?;
        e.last_used = now;
        e.use_seq = seq;
        Some(e.data.clone())
    }

    pub fn contains(&self, name: &Name) -> bool {
        self.entries.iter().any(|e| e.data.name == *name)
    }

    pub fn insert(&mut self, data: Data, priority: CachePriority, now: Millis) -> CsInsert {
        if self.capacity == 0 {
            return CsInsert::Disabled;
        }
        let seq = self.next_seq();
        if let Some(e) = self.entries.iter_mut().find(|e| e.data.name == data.name) {
            e.data = data;
            e.priority = e.priority.max(priority);
            e.last_used = now;
            e.use_seq = seq;
            return CsInsert::Refreshed;
        }
        let entry = CsEntry {
            data,
            priority,
            last_used: now,
            use_seq: seq,
        };
        if self.entries.len() < self.capacity {
            self.entries.push(entry);
            return CsInsert::Inserted;
        }
        let victim = self
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.priority <= priority)
            .min_by_key(|(_, e)| (e.priority, e.use_seq))
            .map(|(i, e)| (i, e.priority));
        match victim {
            Some((i, class)) => {
                self.entries[i] = entry;
                CsInsert::Evicted(class)
            }
            None => {
                self.refused += 1;
                CsInsert::Refused
            }
        }
    }
}

/// Recently seen (name, nonce) pairs.
#[derive(Debug, Clone, Default)]
pub struct DedupTable {
    seen: BTreeMap<(Name, u32), Millis>,
}

impl DedupTable {
    pub fn is_fresh_duplicate(&self, name: &Name, nonce: u32, now: Millis) -> bool {
        // avoids cloning the name for the common miss
        self.seen
            .range((name.clone(), nonce)..=(name.clone(), nonce))
            .next()
            .is_some_and(|(_, &exp)| exp > now)
    }

    pub fn record(&mut self, name: Name, nonce: u32, expires_at: Millis) {
        self.seen.insert((name, nonce), expires_at);
    }

    pub fn expire(&mut self, now: Millis) {
        self.seen.retain(|_, exp| *exp > now);
    }

    pub fn len(&self) -> usize {
        self.seen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seen.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(s: &str) -> Name {
        Name::parse(s).unwrap()
    }

    fn chunk(i: usize) -> Data {
        Data::new(n(&format!("/c/{i}")), vec![i as u8])
    }

    #[test]
    fn fib_longest_prefix_then_recency() {
        let mut fib = Fib::default();
        assert!(fib.lookup(&n("/riot/text/a"), 0).is_none());
        fib.upsert(n("/riot"), NodeId(1), 100, true);
        fib.upsert(n("/riot/text"), NodeId(2), 100, true);
        assert_eq!(fib.lookup(&n("/riot/text/a"), 0).unwrap().face, NodeId(2));
        assert_eq!(fib.lookup(&n("/riot/temp/a"), 0).unwrap().face, NodeId(1));
        fib.upsert(n("/riot/text"), NodeId(3), 100, true);
        assert_eq!(fib.lookup(&n("/riot/text/c"), 0).unwrap().face, NodeId(3));
        fib.upsert(n("/riot/text"), NodeId(2), 100, true);
        assert_eq!(fib.lookup(&n("/riot/text/c"), 0).unwrap().face, NodeId(2));
        assert_eq!(fib.len(), 3);
        assert!(fib.lookup(&n("/riot/text/c"), 100).is_none());
        fib.expire(100);
        assert!(fib.is_empty());
    }

    #[test]
    fn cs_lru_within_solicited() {
        let mut cs = ContentStore::new(20);
        for i in 0..20 {
            assert_eq!(cs.insert(chunk(i), CachePriority::Solicited, i as u64), CsInsert::Inserted);
        }
        // touching chunk 0 makes chunk 1 the oldest
        assert!(cs.lookup(&n("/c/0"), 30).is_some());
        assert_eq!(cs.insert(chunk(20), CachePriority::Solicited, 31), CsInsert::Evicted(CachePriority::Solicited));
        assert_eq!(cs.len(), 20);
        assert!(cs.contains(&n("/c/0")));
        assert!(!cs.contains(&n("/c/1")));
        assert!(cs.contains(&n("/c/20")));
    }

    #[test]
    fn cs_unsolicited_never_displaces_solicited() {
        let mut cs = ContentStore::new(2);
        cs.insert(chunk(0), CachePriority::Solicited, 0);
        cs.insert(chunk(1), CachePriority::Solicited, 1);
        assert_eq!(cs.insert(chunk(2), CachePriority::Unsolicited, 2), CsInsert::Refused);
        assert_eq!(cs.refused(), 1);
        assert!(!cs.contains(&n("/c/2")));
    }

    #[test]
    fn cs_solicited_evicts_unsolicited_first() {
        let mut cs = ContentStore::new(2);
        cs.insert(chunk(0), CachePriority::Unsolicited, 0);
        cs.insert(chunk(1), CachePriority::Solicited, 1);
        cs.lookup(&n("/c/0"), 2);
        assert_eq!(cs.insert(chunk(2), CachePriority::Solicited, 3), CsInsert::Evicted(CachePriority::Unsolicited));
        assert!(cs.contains(&n("/c/1")));
        // re-inserting as solicited promotes
        cs.insert(chunk(3), CachePriority::Unsolicited, 4);
        assert_eq!(cs.insert(chunk(1), CachePriority::Solicited, 5), CsInsert::Refreshed);
    }

    #[test]
    fn cs_disabled_and_miss() {
        let mut cs = ContentStore::new(0);
        assert_eq!(cs.insert(chunk(0), CachePriority::Solicited, 0), CsInsert::Disabled);
        assert!(cs.lookup(&n("/c/0"), 0).is_none());
        let mut cs = ContentStore::new(3);
        assert!(cs.lookup(&n("/never/seen"), 0).is_none());
    }

    #[test]
    fn dedup_expiry() {
        let mut d = DedupTable::default();
        d.record(n("/a"), 7, 900);
        assert!(d.is_fresh_duplicate(&n("/a"), 7, 899));
        assert!(!d.is_fresh_duplicate(&n("/a"), 8, 0));
        assert!(!d.is_fresh_duplicate(&n("/a"), 7, 900));
        d.expire(900);
        assert!(d.is_empty());
    }
}
