use std::collections::{BTreeMap, HashMap, VecDeque};

use thiserror::Error;

use crate::NodeId;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TopologyError {
    #[error("line {line}: bad delivery probability {text:?}")]
    BadProbability { line: usize, text: String },
    #[error("line {line}: duplicate edge {src} -> {dst}")]
    DuplicateEdge { line: usize, src: String, dst: String },
    #[error("line {line}: self loop on {node}")]
    SelfLoop { line: usize, node: String },
    #[error("line {line}: expected \"src dst probability\"")]
    BadLine { line: usize },
    #[error("bad dimension: {0}")]
    BadDimension(String),
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("too many nodes")]
    TooManyNodes,
    #[error("topology has no nodes")]
    Empty,
}

/// Directed graph of radio links weighted by per-direction delivery probability.
///
/// A node `d` is a neighbor of `s` iff `p(s -> d) > 0`, so links may be
/// asymmetric or unidirectional.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RadioTopology {
    labels: Vec<String>,
    index: HashMap<String, NodeId>,
    edges: BTreeMap<(NodeId, NodeId), f64>,
    neighbors: Vec<Vec<(NodeId, f64)>>,
}

impl RadioTopology {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the id of `label`, adding the node if it is new.
    pub fn add_node(&mut self, label: &str) -> Result<NodeId, TopologyError> {
        if let Some(&id) = self.index.get(label) {
            return Ok(id);
        }
        let id = NodeId(u16::try_from(self.labels.len()).map_err(|_| TopologyError::TooManyNodes)?);
        self.labels.push(label.to_string());
        self.index.insert(label.to_string(), id);
        self.neighbors.push(Vec::new());
        Ok(id)
    }

    /// Sets `p(src -> dst)`. Zero removes the directed link.
    pub fn set_edge(&mut self, src: NodeId, dst: NodeId, p: f64) {
        assert!(src != dst, "self loop");
        assert!((0.0..=1.0).contains(&p), "probability out of range");
        let list = &mut self.neighbors[src.index()];
        list.retain(|(n, _)| *n != dst);
        if p > 0.0 {
            self.edges.insert((src, dst), p);
            let at = list.partition_point(|(n, _)| *n < dst);
            list.insert(at, (dst, p));
        } else {
            self.edges.remove(&(src, dst));
        }
    }

    pub fn set_link(&mut self, a: NodeId, b: NodeId, p: f64) {
        self.set_edge(a, b, p);
        self.set_edge(b, a, p);
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.labels.len()).map(|i| NodeId(i as u16))
    }

    pub fn label(&self, id: NodeId) -> &str {
        &self.labels[id.index()]
    }

    pub fn id(&self, label: &str) -> Result<NodeId, TopologyError> {
        self.index
            .get(label)
            .copied()
            .ok_or_else(|| TopologyError::UnknownNode(label.to_string()))
    }

    /// Delivery probability of `src -> dst`; 0 for unlisted directions.
    pub fn probability(&self, src: NodeId, dst: NodeId) -> f64 {
        self.edges.get(&(src, dst)).copied().unwrap_or(0.0)
    }

    /// Receivers of `src` in id order.
    pub fn neighbors(&self, src: NodeId) -> &[(NodeId, f64)] {
        &self.neighbors[src.index()]
    }

    pub fn directed_edges(&self) -> impl Iterator<Item = (NodeId, NodeId, f64)> + '_ {
        self.edges.iter().map(|(&(s, d), &p)| (s, d, p))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn max_out_degree(&self) -> usize {
        self.neighbors.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Hop distances from `src` over directed links with `p > 0`.
    pub fn hop_distances(&self, src: NodeId) -> Vec<Option<usize>> {
        self.bfs(src, |s, d| self.probability(s, d) > 0.0)
    }

    pub fn hops(&self, src: NodeId, dst: NodeId) -> Option<usize> {
        self.hop_distances(src)[dst.index()]
    }

    pub(crate) fn bfs(&self, src: NodeId, admit: impl Fn(NodeId, NodeId) -> bool) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.len()];
        dist[src.index()] = Some(0);
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u.index()].expect("queued nodes have a distance");
            for &(v, _) in self.neighbors(u) {
                if dist[v.index()].is_none() && admit(u, v) {
                    dist[v.index()] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Parses `src dst probability` lines. Probabilities are decimals in
    /// `[0, 1]` or percentages (`90%`); `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, TopologyError> {
        let mut topo = RadioTopology::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or_default().trim();
            if content.is_empty() {
                continue;
            }
            let fields: Vec<&str> = content.split_whitespace().collect();
            let &[src, dst, prob] = fields.as_slice() else {
                return Err(TopologyError::BadLine { line });
            };
            if src == dst {
                return Err(TopologyError::SelfLoop {
                    line,
                    node: src.to_string(),
                });
            }
            let p = parse_probability(prob).ok_or_else(|| TopologyError::BadProbability {
                line,
                text: prob.to_string(),
            })?;
            let s = topo.add_node(src)?;
            let d = topo.add_node(dst)?;
            if topo.edges.contains_key(&(s, d)) {
                return Err(TopologyError::DuplicateEdge {
                    line,
                    src: src.to_string(),
                    dst: dst.to_string(),
                });
            }
            if p > 0.0 {
                topo.set_edge(s, d, p);
            } else {
                // keep explicit zero edges from being listed twice
                topo.edges.insert((s, d), 0.0);
            }
        }
        topo.edges.retain(|_, p| *p > 0.0);
        if topo.is_empty() {
            return Err(TopologyError::Empty);
        }
        Ok(topo)
    }

    /// Serializes to the text format accepted by [`RadioTopology::parse`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (s, d, p) in self.directed_edges() {
            out.push_str(&format!("{} {} {}\n", self.label(s), self.label(d), p));
        }
        out
    }
}

fn parse_probability(text: &str) -> Option<f64> {
    let p = match text.strip_suffix('%') {
        Some(pct) => pct.parse::<f64>().ok()? / 100.0,
        None => text.parse::<f64>().ok()?,
    };
    (p.is_finite() && (0.0..=1.0).contains(&p)).then_some(p)
}

fn check_p_good(p_good: f64) -> Result<(), TopologyError> {
    if p_good > 0.0 && p_good <= 1.0 {
        Ok(())
    } else {
        Err(TopologyError::BadDimension(format!("link probability {p_good} not in (0, 1]")))
    }
}

/// Chain `n0 - n1 - ... - n{n-1}` with symmetric links.
pub fn gen_line(n: usize, p_good: f64) -> Result<RadioTopology, TopologyError> {
    if n < 2 {
        return Err(TopologyError::BadDimension(format!("line needs at least 2 nodes, got {n}")));
    }
    check_p_good(p_good)?;
    let mut topo = RadioTopology::new();
    let ids = (0..n)
        .map(|i| topo.add_node(&format!("n{i}")))
        .collect::<Result<Vec<_>, _>>()?;
    for w in ids.windows(2) {
        topo.set_link(w[0], w[1], p_good);
    }
    Ok(topo)
}

/// `rows x cols` 4-neighbor grid, nodes labelled `r{row}c{col}`.
pub fn gen_grid(rows: usize, cols: usize, p_good: f64) -> Result<RadioTopology, TopologyError> {
    if rows == 0 || cols == 0 || rows * cols < 2 {
        return Err(TopologyError::BadDimension(format!("grid {rows}x{cols} has fewer than 2 nodes")));
    }
    check_p_good(p_good)?;
    let mut topo = RadioTopology::new();
    let mut ids = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            ids.push(topo.add_node(&format!("r{r}c{c}"))?);
        }
    }
    for r in 0..rows {
        for c in 0..cols {
            let here = ids[r * cols + c];
            if c + 1 < cols {
                topo.set_link(here, ids[r * cols + c + 1], p_good);
            }
            if r + 1 < rows {
                topo.set_link(here, ids[(r + 1) * cols + c], p_good);
            }
        }
    }
    Ok(topo)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_asymmetric_pair() {
        let t = RadioTopology::parse("a b 0.9\nb a 0.2").unwrap();
        let (a, b) = (t.id("a").unwrap(), t.id("b").unwrap());
        assert_eq!(t.probability(a, b), 0.9);
        assert_eq!(t.probability(b, a), 0.2);
    }

    #[test]
    fn percent_and_defaults() {
        let t = RadioTopology::parse("# header\na b 100%  # trailing\n\nb c 45%").unwrap();
        let id = |l| t.id(l).unwrap();
        assert_eq!(t.probability(id("a"), id("b")), 1.0);
        assert_eq!(t.probability(id("b"), id("a")), 0.0);
        assert!((t.probability(id("b"), id("c")) - 0.45).abs() < 1e-12);
        assert!(t.neighbors(id("b")).iter().all(|(n, _)| *n != id("a")));
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(RadioTopology::parse("a a 0.5"), Err(TopologyError::SelfLoop { .. })));
        assert!(matches!(RadioTopology::parse("a b 1.5"), Err(TopologyError::BadProbability { .. })));
        assert!(matches!(RadioTopology::parse("a b x"), Err(TopologyError::BadProbability { .. })));
        assert!(matches!(RadioTopology::parse("a b 101%"), Err(TopologyError::BadProbability { .. })));
        assert!(matches!(
            RadioTopology::parse("a b 0.5\na b 0.6"),
            Err(TopologyError::DuplicateEdge { line: 2, .. })
        ));
        assert!(matches!(
            RadioTopology::parse("a b 0\na b 0.6"),
            Err(TopologyError::DuplicateEdge { .. })
        ));
        assert!(matches!(RadioTopology::parse("a b"), Err(TopologyError::BadLine { line: 1 })));
        assert_eq!(RadioTopology::parse("# nothing"), Err(TopologyError::Empty));
    }

    #[test]
    fn zero_edge_is_not_a_neighbor() {
        let t = RadioTopology::parse("a b 0.8\nb a 0").unwrap();
        assert_eq!(t.edge_count(), 1);
        assert!(t.neighbors(t.id("b").unwrap()).is_empty());
    }

    #[test]
    fn generated_line() {
        let t = gen_line(4, 1.0).unwrap();
        assert_eq!(t.len(), 4);
        assert_eq!(t.edge_count(), 6);
        assert_eq!(t.hops(NodeId(0), NodeId(3)), Some(3));
        assert!(gen_line(1, 1.0).is_err());
        assert!(gen_line(3, 0.0).is_err());
    }

    #[test]
    fn generated_grids() {
        let t = gen_grid(2, 2, 1.0).unwrap();
        assert_eq!(t.len(), 4);
        assert_eq!(t.edge_count(), 8);
        assert_eq!(t.hops(t.id("r0c0").unwrap(), t.id("r1c1").unwrap()), Some(2));

        let t = gen_grid(3, 3, 0.8).unwrap();
        assert_eq!(t.len(), 9);
        // brute-force count of 4-neighbor adjacencies
        let mut expected = 0;
        for a in 0..9i32 {
            for b in 0..9i32 {
                let (ra, ca, rb, cb) = (a / 3, a % 3, b / 3, b % 3);
                if (ra - rb).abs() + (ca - cb).abs() == 1 {
                    expected += 1;
                }
            }
        }
        assert_eq!(expected, 24);
        assert_eq!(t.edge_count(), expected);
        assert!(t.directed_edges().all(|(_, _, p)| p == 0.8));
        assert!(gen_grid(1, 1, 1.0).is_err());
    }

    #[test]
    fn text_round_trip() {
        let t = gen_grid(2, 3, 0.75).unwrap();
        let back = RadioTopology::parse(&t.to_text()).unwrap();
        assert_eq!(back.edge_count(), t.edge_count());
        for (s, d, p) in t.directed_edges() {
            let (s2, d2) = (back.id(t.label(s)).unwrap(), back.id(t.label(d)).unwrap());
            assert_eq!(back.probability(s2, d2), p);
        }
    }
}
