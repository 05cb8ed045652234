//! Time-varying graphs over discrete time.
//!
//! A [`TimeVaryingGraph`] is a fixed node set plus, for every unordered node
//! pair that is ever connected, an [`EdgeSchedule`]: a sorted list of closed
//! presence intervals, each carrying the constant latency of messages sent
//! during it. Presence, latency and the reliable-channel-delivery predicate
//! are all answered from that schedule.
//!
//! Nodes are identified by dense indices `0..n`. Files may use arbitrary
//! distinct integer labels; they are normalized on load and restored on save.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A tick of the global discrete clock.
pub type Time = u32;

/// Dense node index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u32> for NodeId {
    fn from(v: u32) -> Self {
        NodeId(v)
    }
}

/// Closed presence interval `[start, end]` with the latency of any message
/// sent while it is active.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    pub start: Time,
    pub end: Time,
    pub latency: Time,
}

impl Interval {
    pub fn new(start: Time, end: Time, latency: Time) -> Self {
        Interval { start, end, latency }
    }

    #[inline]
    pub fn contains(&self, t: Time) -> bool {
        self.start <= t && t <= self.end
    }
}

impl From<(Time, Time, Time)> for Interval {
    fn from((start, end, latency): (Time, Time, Time)) -> Self {
        Interval::new(start, end, latency)
    }
}

/// Presence and latency schedule of one undirected channel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeSchedule {
    u: NodeId,
    v: NodeId,
    intervals: Vec<Interval>,
    // Maximal runs of send instants for which the channel stays up for the
    // whole transit; `latency` is the transit time of sends in the run.
    rcd_windows: Vec<Interval>,
}

impl EdgeSchedule {
    pub fn new(u: NodeId, v: NodeId, intervals: Vec<Interval>) -> Result<Self> {
        if u == v {
            return Err(Error::SelfLoop(u, v));
        }
        let (u, v) = if u < v { (u, v) } else { (v, u) };
        for iv in &intervals {
            if iv.start > iv.end {
                return Err(Error::InvertedInterval {
                    u,
                    v,
                    start: iv.start,
                    end: iv.end,
                });
            }
            if iv.latency == 0 {
                return Err(Error::ZeroLatency { u, v });
            }
        }
        for pair in intervals.windows(2) {
            if pair[1].start <= pair[0].end {
                return Err(Error::OverlappingIntervals {
                    u,
                    v,
                    at: pair[1].start,
                });
            }
        }
        let rcd_windows = rcd_windows(&intervals);
        Ok(EdgeSchedule {
            u,
            v,
            intervals,
            rcd_windows,
        })
    }

    /// Endpoints with the smaller id first.
    pub fn endpoints(&self) -> (NodeId, NodeId) {
        (self.u, self.v)
    }

    /// The endpoint that is not `x`. `x` must be an endpoint.
    pub fn other(&self, x: NodeId) -> NodeId {
        if x == self.u {
            self.v
        } else {
            self.u
        }
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    /// Runs of send instants at which reliable delivery holds.
    pub fn rcd_windows(&self) -> &[Interval] {
        &self.rcd_windows
    }

    fn interval_at(&self, t: Time) -> Option<&Interval> {
        let i = self.intervals.partition_point(|iv| iv.end < t);
        self.intervals.get(i).filter(|iv| iv.start <= t)
    }

    pub fn is_present(&self, t: Time) -> bool {
        self.interval_at(t).is_some()
    }

    pub fn latency_at(&self, t: Time) -> Option<Time> {
        self.interval_at(t).map(|iv| iv.latency)
    }

    /// Latency of a send at `t` if that send is reliably delivered.
    pub fn rcd_latency(&self, t: Time) -> Option<Time> {
        let i = self.rcd_windows.partition_point(|w| w.end < t);
        self.rcd_windows.get(i).filter(|w| w.start <= t).map(|w| w.latency)
    }

    pub fn max_latency(&self) -> Option<Time> {
        self.intervals.iter().map(|iv| iv.latency).max()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }
}

fn rcd_windows(intervals: &[Interval]) -> Vec<Interval> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < intervals.len() {
        // Adjacent intervals form one contiguous block of presence.
        let mut j = i;
        while j + 1 < intervals.len() && intervals[j + 1].start == intervals[j].end + 1 {
            j += 1;
        }
        let block_end = intervals[j].end;
        for iv in &intervals[i..=j] {
            if let Some(last_send) = block_end.checked_sub(iv.latency) {
                let end = iv.end.min(last_send);
                if end >= iv.start {
                    out.push(Interval::new(iv.start, end, iv.latency));
                }
            }
        }
        i = j + 1;
    }
    out
}

/// Declared recurrence class of a TVG.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassKind {
    #[default]
    Generic,
    Er,
    Tber,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphClass {
    pub kind: ClassKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<Time>,
}

impl GraphClass {
    pub fn tber(delta: Time) -> Self {
        GraphClass {
            kind: ClassKind::Tber,
            delta: Some(delta),
        }
    }

    pub fn er(delta: Option<Time>) -> Self {
        GraphClass {
            kind: ClassKind::Er,
            delta,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TimeVaryingGraph {
    labels: Vec<u64>,
    horizon: Time,
    edges: Vec<EdgeSchedule>,
    lookup: HashMap<(NodeId, NodeId), usize>,
    adjacency: Vec<Vec<(NodeId, usize)>>,
    class: GraphClass,
}

impl PartialEq for TimeVaryingGraph {
    fn eq(&self, other: &Self) -> bool {
        self.labels == other.labels
            && self.horizon == other.horizon
            && self.class == other.class
            && self.edges == other.edges
    }
}

impl Eq for TimeVaryingGraph {}

impl TimeVaryingGraph {
    /// Builds a graph on nodes `0..node_count`. Edges are stored sorted by
    /// endpoint pair.
    pub fn new(node_count: usize, horizon: Time, edges: Vec<EdgeSchedule>) -> Result<Self> {
        Self::with_labels((0..node_count as u64).collect(), horizon, edges)
    }

    pub fn with_labels(labels: Vec<u64>, horizon: Time, mut edges: Vec<EdgeSchedule>) -> Result<Self> {
        let n = labels.len();
        let distinct: BTreeSet<_> = labels.iter().collect();
        if distinct.len() != n {
            return Err(Error::invalid("node labels must be distinct"));
        }
        edges.sort_by_key(|e| e.endpoints());
        let mut lookup = HashMap::with_capacity(edges.len());
        let mut adjacency = vec![Vec::new(); n];
        for (idx, e) in edges.iter().enumerate() {
            let (u, v) = e.endpoints();
            if v.index() >= n {
                return Err(Error::UnknownNode(v));
            }
            if lookup.insert((u, v), idx).is_some() {
                return Err(Error::DuplicateEdge { u, v });
            }
            if let Some(last) = e.intervals().last() {
                if last.end > horizon {
                    return Err(Error::BeyondHorizon {
                        u,
                        v,
                        end: last.end,
                        horizon,
                    });
                }
            }
            adjacency[u.index()].push((v, idx));
            adjacency[v.index()].push((u, idx));
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }
        Ok(TimeVaryingGraph {
            labels,
            horizon,
            edges,
            lookup,
            adjacency,
            class: GraphClass::default(),
        })
    }

    pub fn with_class(mut self, class: GraphClass) -> Self {
        self.class = class;
        self
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.labels.len() as u32).map(NodeId)
    }

    pub fn contains(&self, p: NodeId) -> bool {
        p.index() < self.labels.len()
    }

    pub fn horizon(&self) -> Time {
        self.horizon
    }

    pub fn class(&self) -> GraphClass {
        self.class
    }

    pub fn label(&self, p: NodeId) -> u64 {
        self.labels[p.index()]
    }

    pub fn labels(&self) -> &[u64] {
        &self.labels
    }

    pub fn node_by_label(&self, label: u64) -> Option<NodeId> {
        self.labels.iter().position(|&l| l == label).map(|i| NodeId(i as u32))
    }

    pub fn edges(&self) -> &[EdgeSchedule] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edge(&self, a: NodeId, b: NodeId) -> Option<&EdgeSchedule> {
        let key = if a < b { (a, b) } else { (b, a) };
        self.lookup.get(&key).map(|&i| &self.edges[i])
    }

    /// Neighbors of `p` in the underlying graph, with their edge schedules.
    pub fn incident(&self, p: NodeId) -> impl Iterator<Item = (NodeId, &EdgeSchedule)> + '_ {
        self.adjacency[p.index()]
            .iter()
            .map(move |&(q, idx)| (q, &self.edges[idx]))
    }

    pub(crate) fn incident_indices(&self, p: NodeId) -> &[(NodeId, usize)] {
        &self.adjacency[p.index()]
    }

    fn check(&self, p: NodeId) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::UnknownNode(p))
        }
    }

    /// Whether the channel between `a` and `b` is up at `t`.
    pub fn presence(&self, a: NodeId, b: NodeId, t: Time) -> Result<bool> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.edge(a, b).is_some_and(|e| e.is_present(t)))
    }

    /// Transit time of a message sent over `(a, b)` at `t`; `None` when the
    /// channel is down.
    pub fn latency(&self, a: NodeId, b: NodeId, t: Time) -> Result<Option<Time>> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.edge(a, b).and_then(|e| e.latency_at(t)))
    }

    /// Reliable channel delivery: a message sent from `a` to `b` at `t`
    /// arrives because the channel is up at every instant of
    /// `[t, t + latency(t)]`.
    pub fn rcd(&self, a: NodeId, b: NodeId, t: Time) -> Result<bool> {
        if a == b {
            return Err(Error::invalid(format!("rcd needs two distinct nodes, got {a} twice")));
        }
        let Some(delay) = self.latency(a, b, t)? else {
            return Ok(false);
        };
        for tau in t..=t.saturating_add(delay) {
            if !self.presence(a, b, tau)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn snapshot(&self, t: Time) -> Result<StaticGraph> {
        if t > self.horizon {
            return Err(Error::OutOfRange {
                t,
                horizon: self.horizon,
            });
        }
        let edges = self.edges.iter().filter(|e| e.is_present(t)).map(|e| e.endpoints());
        StaticGraph::new(self.node_count(), edges)
    }

    pub fn underlying_graph(&self) -> StaticGraph {
        let edges = self.edges.iter().filter(|e| !e.is_empty()).map(|e| e.endpoints());
        StaticGraph::new(self.node_count(), edges).expect("schedules are validated on construction")
    }

    pub fn max_latency(&self) -> Option<Time> {
        self.edges.iter().filter_map(|e| e.max_latency()).max()
    }

    /// Audits the time-bounded recurrence property within the horizon.
    ///
    /// For every edge of the underlying graph with maximum latency `l`, each
    /// window of `delta` consecutive send instants `[w, w + delta - 1]` with
    /// `w + delta - 1 + l <= horizon` must contain an instant at which
    /// reliable delivery holds, and the edge must be usable at least once.
    /// Recurrence beyond the horizon is assumed, not checked.
    pub fn validate_tber(&self, delta: Time) -> Result<bool> {
        if delta == 0 {
            return Err(Error::invalid("delta must be at least 1"));
        }
        Ok(self.edges.iter().filter(|e| !e.is_empty()).all(|e| {
            let windows = e.rcd_windows();
            let Some(first) = windows.first() else {
                return false;
            };
            let slack = e.max_latency().unwrap_or(1) as i64 + delta as i64 - 1;
            let limit = self.horizon as i64 - slack;
            if limit < 0 {
                return true;
            }
            if first.start as i64 >= delta as i64 {
                return false;
            }
            for pair in windows.windows(2) {
                let gap_from = pair[0].end as i64 + 1;
                let gap_to = pair[1].start as i64 - delta as i64;
                if gap_from <= gap_to && gap_from <= limit {
                    return false;
                }
            }
            let last = windows.last().expect("nonempty").end as i64;
            last + 1 > limit
        }))
    }

    /// Same graph with every edge incident to `removed` deleted. Node ids are
    /// kept, so the removed nodes remain as isolated vertices.
    pub fn without_nodes(&self, removed: &BTreeSet<NodeId>) -> TimeVaryingGraph {
        let edges = self
            .edges
            .iter()
            .filter(|e| {
                let (u, v) = e.endpoints();
                !removed.contains(&u) && !removed.contains(&v)
            })
            .cloned()
            .collect();
        TimeVaryingGraph::with_labels(self.labels.clone(), self.horizon, edges)
            .expect("subgraph of a valid graph")
            .with_class(self.class)
    }

    /// Rewrites the latency of every interval.
    pub fn map_latencies(&self, mut f: impl FnMut(&EdgeSchedule, &Interval) -> Time) -> Result<Self> {
        let mut edges = Vec::with_capacity(self.edges.len());
        for e in &self.edges {
            let intervals = e
                .intervals()
                .iter()
                .map(|iv| Interval::new(iv.start, iv.end, f(e, iv)))
                .collect();
            let (u, v) = e.endpoints();
            edges.push(EdgeSchedule::new(u, v, intervals)?);
        }
        Ok(TimeVaryingGraph::with_labels(self.labels.clone(), self.horizon, edges)?.with_class(self.class))
    }

    /// A copy in which every underlying edge is present over the whole
    /// horizon with the given latency.
    pub fn always_present(&self, latency: Time) -> Result<Self> {
        let edges = self
            .underlying_graph()
            .edges()
            .map(|(u, v)| EdgeSchedule::new(u, v, vec![Interval::new(0, self.horizon, latency)]))
            .collect::<Result<Vec<_>>>()?;
        TimeVaryingGraph::with_labels(self.labels.clone(), self.horizon, edges)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: TvgFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        file.into_graph()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&TvgFile::from_graph(self)).expect("serializable") + "\n"
    }
}

/// Incremental constructor for small hand-written graphs.
#[derive(Clone, Debug, Default)]
pub struct TvgBuilder {
    node_count: usize,
    horizon: Time,
    edges: Vec<(u32, u32, Vec<Interval>)>,
    class: GraphClass,
}

impl TvgBuilder {
    pub fn new(node_count: usize, horizon: Time) -> Self {
        TvgBuilder {
            node_count,
            horizon,
            ..Default::default()
        }
    }

    /// Adds a channel between `u` and `v` with `(start, end, latency)`
    /// intervals.
    pub fn edge(mut self, u: u32, v: u32, intervals: &[(Time, Time, Time)]) -> Self {
        self.edges
            .push((u, v, intervals.iter().copied().map(Interval::from).collect()));
        self
    }

    pub fn class(mut self, class: GraphClass) -> Self {
        self.class = class;
        self
    }

    pub fn build(self) -> Result<TimeVaryingGraph> {
        let edges = self
            .edges
            .into_iter()
            .map(|(u, v, ivs)| EdgeSchedule::new(NodeId(u), NodeId(v), ivs))
            .collect::<Result<Vec<_>>>()?;
        Ok(TimeVaryingGraph::new(self.node_count, self.horizon, edges)?.with_class(self.class))
    }
}

/// Simple undirected graph on nodes `0..n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StaticGraph {
    adjacency: Vec<Vec<NodeId>>,
    edge_count: usize,
}

impl StaticGraph {
    pub fn new(node_count: usize, edges: impl IntoIterator<Item = (NodeId, NodeId)>) -> Result<Self> {
        let mut sets = vec![BTreeSet::new(); node_count];
        for (a, b) in edges {
            if a == b {
                return Err(Error::SelfLoop(a, b));
            }
            for x in [a, b] {
                if x.index() >= node_count {
                    return Err(Error::UnknownNode(x));
                }
            }
            sets[a.index()].insert(b);
            sets[b.index()].insert(a);
        }
        let edge_count = sets.iter().map(BTreeSet::len).sum::<usize>() / 2;
        Ok(StaticGraph {
            adjacency: sets.into_iter().map(|s| s.into_iter().collect()).collect(),
            edge_count,
        })
    }

    /// Convenience constructor from raw index pairs.
    pub fn from_pairs(node_count: usize, pairs: &[(u32, u32)]) -> Result<Self> {
        Self::new(node_count, pairs.iter().map(|&(a, b)| (NodeId(a), NodeId(b))))
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.adjacency.len() as u32).map(NodeId)
    }

    pub fn contains(&self, p: NodeId) -> bool {
        p.index() < self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Sorted neighbor list.
    pub fn neighbors(&self, p: NodeId) -> &[NodeId] {
        &self.adjacency[p.index()]
    }

    pub fn has_edge(&self, a: NodeId, b: NodeId) -> bool {
        self.contains(a) && self.adjacency[a.index()].binary_search(&b).is_ok()
    }

    /// Edges as `(smaller, larger)` pairs in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(i, adj)| {
            let u = NodeId(i as u32);
            adj.iter().filter(move |&&v| v > u).map(move |&v| (u, v))
        })
    }

    pub fn without_nodes(&self, removed: &BTreeSet<NodeId>) -> StaticGraph {
        let edges = self
            .edges()
            .filter(|(u, v)| !removed.contains(u) && !removed.contains(v));
        StaticGraph::new(self.node_count(), edges).expect("subgraph of a valid graph")
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TvgFile {
    nodes: Vec<u64>,
    edges: Vec<EdgeFile>,
    horizon: Time,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    class: Option<GraphClass>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeFile {
    u: u64,
    v: u64,
    intervals: Vec<Interval>,
}

impl TvgFile {
    fn from_graph(g: &TimeVaryingGraph) -> Self {
        let class = (g.class != GraphClass::default()).then_some(g.class);
        TvgFile {
            nodes: g.labels.clone(),
            edges: g
                .edges
                .iter()
                .map(|e| {
                    let (u, v) = e.endpoints();
                    EdgeFile {
                        u: g.label(u),
                        v: g.label(v),
                        intervals: e.intervals().to_vec(),
                    }
                })
                .collect(),
            horizon: g.horizon,
            class,
        }
    }

    fn into_graph(self) -> Result<TimeVaryingGraph> {
        let mut index = BTreeMap::new();
        for (i, &label) in self.nodes.iter().enumerate() {
            if index.insert(label, NodeId(i as u32)).is_some() {
                return Err(Error::Parse(format!("node {label} listed twice")));
            }
        }
        let mut seen = BTreeSet::new();
        let mut edges = Vec::with_capacity(self.edges.len());
        for e in self.edges {
            let name = format!("edge {{u: {}, v: {}}}", e.u, e.v);
            let lookup = |label: u64| {
                index
                    .get(&label)
                    .copied()
                    .ok_or_else(|| Error::Parse(format!("{name}: unknown node {label}")))
            };
            let (u, v) = (lookup(e.u)?, lookup(e.v)?);
            if u == v {
                return Err(Error::Parse(format!("{name}: self-loop")));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::Parse(format!("{name}: duplicate edge")));
            }
            if let Some(iv) = e.intervals.iter().find(|iv| iv.end > self.horizon) {
                return Err(Error::Parse(format!(
                    "{name}: interval end {} exceeds horizon {}",
                    iv.end, self.horizon
                )));
            }
            let schedule = EdgeSchedule::new(u, v, e.intervals).map_err(|err| {
                let what = match err {
                    Error::OverlappingIntervals { at, .. } => {
                        format!("overlapping or unsorted intervals at t={at}")
                    }
                    Error::InvertedInterval { start, end, .. } => {
                        format!("interval [{start}, {end}] has start after end")
                    }
                    Error::ZeroLatency { .. } => "latency must be at least 1".to_string(),
                    other => other.to_string(),
                };
                Error::Parse(format!("{name}: {what}"))
            })?;
            edges.push(schedule);
        }
        let class = self.class.unwrap_or_default();
        if class.delta == Some(0) {
            return Err(Error::Parse("class.delta must be at least 1".into()));
        }
        Ok(TimeVaryingGraph::with_labels(self.nodes, self.horizon, edges)?.with_class(class))
    }
}
