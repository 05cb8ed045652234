//! Minimum k-level orderings.
//!
//! [`compute_mklo`] layers a static graph outward from a source: the source
//! alone, then all of its neighbors, then repeatedly every remaining node with
//! at least `k` neighbors in earlier layers. [`compute_tmklo`] is the temporal
//! analogue on a [`TimeVaryingGraph`]: each node is keyed by the earliest
//! instant at which the k-acceptance function holds for it.
//!
//! The k-acceptance function itself is available as [`acceptance`] /
//! [`AcceptanceOracle`], a literal table evaluation that does not share code
//! with the sweep and is used to cross-check it.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::tvg::{NodeId, StaticGraph, Time, TimeVaryingGraph};

/// Common view over static and temporal orderings.
pub trait LevelOrdering {
    fn source(&self) -> NodeId;
    fn k(&self) -> usize;
    /// Nodes that never enter a level, sorted.
    fn uncovered(&self) -> &[NodeId];
    fn level_count(&self) -> usize;

    fn covers_all(&self) -> bool {
        self.uncovered().is_empty()
    }
}

/// True iff every node was placed in some level.
pub fn covers_all<O: LevelOrdering + ?Sized>(ordering: &O) -> bool {
    ordering.covers_all()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StaticLevelOrdering {
    source: NodeId,
    k: usize,
    levels: Vec<Vec<NodeId>>,
    level_of: Vec<Option<usize>>,
    uncovered: Vec<NodeId>,
}

impl StaticLevelOrdering {
    pub fn levels(&self) -> &[Vec<NodeId>] {
        &self.levels
    }

    pub fn level_of(&self, p: NodeId) -> Option<usize> {
        self.level_of.get(p.index()).copied().flatten()
    }

    pub fn to_report(&self, labels: &[u64]) -> String {
        serde_json::to_string_pretty(&self.report(labels)).expect("serializable") + "\n"
    }

    pub(crate) fn report(&self, labels: &[u64]) -> Report {
        Report {
            kind: "mklo",
            source: labels[self.source.index()],
            k: self.k,
            t_br: None,
            levels: self
                .levels
                .iter()
                .enumerate()
                .map(|(i, nodes)| ReportLevel {
                    index: Some(i),
                    time: None,
                    nodes: sorted_labels(nodes, labels),
                })
                .collect(),
            uncovered: sorted_labels(&self.uncovered, labels),
        }
    }
}

impl LevelOrdering for StaticLevelOrdering {
    fn source(&self) -> NodeId {
        self.source
    }
    fn k(&self) -> usize {
        self.k
    }
    fn uncovered(&self) -> &[NodeId] {
        &self.uncovered
    }
    fn level_count(&self) -> usize {
        self.levels.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TemporalLevelOrdering {
    source: NodeId,
    k: usize,
    t_br: Time,
    levels: BTreeMap<Time, Vec<NodeId>>,
    accepted_at: Vec<Option<Time>>,
    uncovered: Vec<NodeId>,
}

impl TemporalLevelOrdering {
    fn from_acceptance(params: &AcceptanceParams, accepted_at: Vec<Option<Time>>) -> Self {
        let mut levels: BTreeMap<Time, Vec<NodeId>> = BTreeMap::new();
        let mut uncovered = Vec::new();
        for (i, at) in accepted_at.iter().enumerate() {
            match at {
                Some(t) => levels.entry(*t).or_default().push(NodeId(i as u32)),
                None => uncovered.push(NodeId(i as u32)),
            }
        }
        TemporalLevelOrdering {
            source: params.source,
            k: params.k,
            t_br: params.t_br,
            levels,
            accepted_at,
            uncovered,
        }
    }

    pub fn t_br(&self) -> Time {
        self.t_br
    }

    pub fn levels(&self) -> &BTreeMap<Time, Vec<NodeId>> {
        &self.levels
    }

    /// Earliest acceptance instant of `p`, if any.
    pub fn level_of(&self, p: NodeId) -> Option<Time> {
        self.accepted_at.get(p.index()).copied().flatten()
    }

    /// Time key of the last level.
    pub fn last_level_time(&self) -> Time {
        *self.levels.keys().next_back().expect("source level always exists")
    }

    pub fn to_report(&self, labels: &[u64]) -> String {
        serde_json::to_string_pretty(&self.report(labels)).expect("serializable") + "\n"
    }

    pub(crate) fn report(&self, labels: &[u64]) -> Report {
        Report {
            kind: "tmklo",
            source: labels[self.source.index()],
            k: self.k,
            t_br: Some(self.t_br),
            levels: self
                .levels
                .iter()
                .map(|(&t, nodes)| ReportLevel {
                    index: None,
                    time: Some(t),
                    nodes: sorted_labels(nodes, labels),
                })
                .collect(),
            uncovered: sorted_labels(&self.uncovered, labels),
        }
    }
}

impl LevelOrdering for TemporalLevelOrdering {
    fn source(&self) -> NodeId {
        self.source
    }
    fn k(&self) -> usize {
        self.k
    }
    fn uncovered(&self) -> &[NodeId] {
        &self.uncovered
    }
    fn level_count(&self) -> usize {
        self.levels.len()
    }
}

#[derive(Serialize)]
pub(crate) struct Report {
    kind: &'static str,
    source: u64,
    k: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_br: Option<Time>,
    levels: Vec<ReportLevel>,
    uncovered: Vec<u64>,
}

#[derive(Serialize)]
struct ReportLevel {
    #[serde(skip_serializing_if = "Option::is_none")]
    index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    time: Option<Time>,
    nodes: Vec<u64>,
}

fn sorted_labels(nodes: &[NodeId], labels: &[u64]) -> Vec<u64> {
    let mut out: Vec<u64> = nodes.iter().map(|p| labels[p.index()]).collect();
    out.sort_unstable();
    out
}

/// Source, threshold and start instant of a broadcast.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AcceptanceParams {
    pub k: usize,
    pub source: NodeId,
    pub t_br: Time,
}

impl AcceptanceParams {
    pub fn new(k: usize, source: NodeId, t_br: Time) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        Ok(AcceptanceParams { k, source, t_br })
    }

    fn check(&self, g: &TimeVaryingGraph) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if !g.contains(self.source) {
            return Err(Error::UnknownNode(self.source));
        }
        if self.t_br > g.horizon() {
            return Err(Error::OutOfRange {
                t: self.t_br,
                horizon: g.horizon(),
            });
        }
        Ok(())
    }
}

/// Minimum k-level ordering of a static graph, by counter-based peeling.
pub fn compute_mklo(g: &StaticGraph, source: NodeId, k: usize) -> Result<StaticLevelOrdering> {
    if !g.contains(source) {
        return Err(Error::UnknownNode(source));
    }
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let n = g.node_count();
    let mut level_of = vec![None; n];
    let mut support = vec![0usize; n];
    let mut levels = vec![vec![source]];
    level_of[source.index()] = Some(0);

    let first: Vec<NodeId> = g.neighbors(source).to_vec();
    for &p in &first {
        level_of[p.index()] = Some(1);
    }
    let mut frontier = first;
    while !frontier.is_empty() {
        let depth = levels.len();
        let mut next = Vec::new();
        for &p in &frontier {
            for &q in g.neighbors(p) {
                if level_of[q.index()].is_some() {
                    continue;
                }
                support[q.index()] += 1;
                if support[q.index()] == k {
                    next.push(q);
                }
            }
        }
        for &q in &next {
            level_of[q.index()] = Some(depth + 1);
        }
        frontier.sort_unstable();
        levels.push(std::mem::replace(&mut frontier, next));
    }

    let uncovered = (0..n as u32)
        .map(NodeId)
        .filter(|p| level_of[p.index()].is_none())
        .collect();
    Ok(StaticLevelOrdering {
        source,
        k,
        levels,
        level_of,
        uncovered,
    })
}

/// Temporal minimum k-level ordering by a forward sweep over the snapshots.
///
/// Each covered node pushes a certificate over every incident channel at
/// every instant where reliable delivery holds; the certificate takes effect
/// at the arrival instant. A node is covered at the first instant where it
/// holds a certificate from the source, or certificates from `k` distinct
/// covered neighbors. Only the earliest pending arrival per channel is kept.
pub fn compute_tmklo(g: &TimeVaryingGraph, params: &AcceptanceParams) -> Result<TemporalLevelOrdering> {
    params.check(g)?;
    let n = g.node_count();
    let m = g.edge_count();
    let horizon = g.horizon();
    let edges = g.edges();

    let mut accepted_at: Vec<Option<Time>> = vec![None; n];
    let mut support = vec![0usize; n];
    let mut counted = vec![false; m];
    let mut earliest = vec![Time::MAX; m];
    let mut cursor = vec![0usize; m];
    let mut arrivals: Vec<Vec<(usize, NodeId)>> = vec![Vec::new(); horizon as usize + 1];
    let mut active: Vec<usize> = Vec::new();
    let mut covered = 0usize;

    let cover = |p: NodeId, t: Time, accepted_at: &mut Vec<Option<Time>>, active: &mut Vec<usize>| {
        accepted_at[p.index()] = Some(t);
        active.extend(g.incident_indices(p).iter().map(|&(_, idx)| idx));
    };

    cover(params.source, params.t_br, &mut accepted_at, &mut active);
    covered += 1;

    for t in params.t_br..=horizon {
        for (idx, receiver) in std::mem::take(&mut arrivals[t as usize]) {
            if accepted_at[receiver.index()].is_some() || counted[idx] {
                continue;
            }
            counted[idx] = true;
            let sender = edges[idx].other(receiver);
            support[receiver.index()] += 1;
            if sender == params.source || support[receiver.index()] >= params.k {
                cover(receiver, t, &mut accepted_at, &mut active);
                covered += 1;
            }
        }
        if covered == n {
            break;
        }

        active.retain(|&idx| {
            let (u, v) = edges[idx].endpoints();
            let (sender, receiver) = match (accepted_at[u.index()], accepted_at[v.index()]) {
                (Some(_), None) => (u, v),
                (None, Some(_)) => (v, u),
                _ => return false,
            };
            debug_assert!(accepted_at[sender.index()].is_some_and(|a| a <= t));
            let windows = edges[idx].rcd_windows();
            let c = &mut cursor[idx];
            while *c < windows.len() && windows[*c].end < t {
                *c += 1;
            }
            if *c == windows.len() {
                return false;
            }
            let w = windows[*c];
            if w.start <= t {
                let arrival = t + w.latency;
                if arrival < earliest[idx] {
                    earliest[idx] = arrival;
                    arrivals[arrival as usize].push((idx, receiver));
                }
            }
            true
        });
    }

    Ok(TemporalLevelOrdering::from_acceptance(params, accepted_at))
}

/// Table-driven evaluation of the k-acceptance function.
///
/// Rows are filled in increasing time order; a row only consults earlier
/// rows, since any relay contributing to acceptance at `t` was sent at some
/// `t' <= t - 1`. Channel predicates go through [`TimeVaryingGraph::rcd`],
/// which scans presence directly.
#[derive(Debug)]
pub struct AcceptanceOracle<'g> {
    g: &'g TimeVaryingGraph,
    params: AcceptanceParams,
    // rows[t][p]: acceptance of p at t
    rows: Vec<Vec<bool>>,
    // held[t][p]: acceptance of p at some instant <= t
    held: Vec<Vec<bool>>,
}

impl<'g> AcceptanceOracle<'g> {
    pub fn new(g: &'g TimeVaryingGraph, params: AcceptanceParams) -> Result<Self> {
        params.check(g)?;
        Ok(AcceptanceOracle {
            g,
            params,
            rows: Vec::new(),
            held: Vec::new(),
        })
    }

    pub fn accepts(&mut self, p: NodeId, t: Time) -> Result<bool> {
        if !self.g.contains(p) {
            return Err(Error::UnknownNode(p));
        }
        if t > self.g.horizon() {
            return Err(Error::OutOfRange {
                t,
                horizon: self.g.horizon(),
            });
        }
        while self.rows.len() <= t as usize {
            self.fill_next_row()?;
        }
        Ok(self.rows[t as usize][p.index()])
    }

    /// Minimum instant at which `p` is accepted, within the horizon.
    pub fn earliest(&mut self, p: NodeId) -> Result<Option<Time>> {
        for t in 0..=self.g.horizon() {
            if self.accepts(p, t)? {
                return Ok(Some(t));
            }
        }
        Ok(None)
    }

    fn fill_next_row(&mut self) -> Result<()> {
        let g = self.g;
        let AcceptanceParams { k, source, t_br } = self.params;
        let t = self.rows.len() as Time;
        let mut row = vec![false; g.node_count()];
        for p in g.nodes() {
            // AK1
            if p == source {
                row[p.index()] = t >= t_br;
                continue;
            }
            // AK2
            let mut direct = false;
            for sent in t_br..=t {
                if g.rcd(source, p, sent)? {
                    let delay = g.latency(source, p, sent)?.expect("rcd implies presence");
                    if t >= sent + delay {
                        direct = true;
                        break;
                    }
                }
            }
            if direct {
                row[p.index()] = true;
                continue;
            }
            // AK3
            let mut certified = 0;
            for q in g.nodes().filter(|&q| q != p) {
                let mut supports = false;
                for sent in 0..t {
                    if !self.held[sent as usize][q.index()] || !g.rcd(p, q, sent)? {
                        continue;
                    }
                    let delay = g.latency(q, p, sent)?.expect("rcd implies presence");
                    if t >= sent + delay {
                        supports = true;
                        break;
                    }
                }
                if supports {
                    certified += 1;
                }
            }
            row[p.index()] = certified >= k;
        }
        let held = match self.held.last() {
            Some(prev) => prev.iter().zip(&row).map(|(a, b)| *a || *b).collect(),
            None => row.clone(),
        };
        self.rows.push(row);
        self.held.push(held);
        Ok(())
    }

    /// Ordering induced by the minima of the acceptance function.
    pub fn ordering(&mut self) -> Result<TemporalLevelOrdering> {
        let accepted_at = self.g.nodes().map(|p| self.earliest(p)).collect::<Result<Vec<_>>>()?;
        Ok(TemporalLevelOrdering::from_acceptance(&self.params, accepted_at))
    }
}

/// Value of the k-acceptance function for `p` at `t`.
pub fn acceptance(g: &TimeVaryingGraph, params: &AcceptanceParams, p: NodeId, t: Time) -> Result<bool> {
    AcceptanceOracle::new(g, *params)?.accepts(p, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::tvg::TvgBuilder;

    fn n(i: u32) -> NodeId {
        NodeId(i)
    }

    fn ids(v: &[u32]) -> Vec<NodeId> {
        v.iter().copied().map(NodeId).collect()
    }

    /// Literal level-by-level construction of the definition.
    fn brute_mklo(g: &StaticGraph, s: NodeId, k: usize) -> (Vec<Vec<NodeId>>, Vec<NodeId>) {
        let mut placed = vec![false; g.node_count()];
        placed[s.index()] = true;
        let mut levels = vec![vec![s]];
        let l1: Vec<_> = g.neighbors(s).to_vec();
        if !l1.is_empty() {
            for p in &l1 {
                placed[p.index()] = true;
            }
            levels.push(l1);
            loop {
                let next: Vec<NodeId> = g
                    .nodes()
                    .filter(|p| !placed[p.index()])
                    .filter(|p| g.neighbors(*p).iter().filter(|q| placed[q.index()]).count() >= k)
                    .collect();
                if next.is_empty() {
                    break;
                }
                for p in &next {
                    placed[p.index()] = true;
                }
                levels.push(next);
            }
        }
        let rest = g.nodes().filter(|p| !placed[p.index()]).collect();
        (levels, rest)
    }

    #[test]
    fn mklo_star() {
        let g = StaticGraph::from_pairs(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]).unwrap();
        for k in 1..4 {
            let o = compute_mklo(&g, n(0), k).unwrap();
            assert_eq!(o.levels(), &[ids(&[0]), ids(&[1, 2, 3, 4])]);
            assert!(o.covers_all());
        }
    }

    #[test]
    fn mklo_complete_graph() {
        let pairs: Vec<_> = (0..5).flat_map(|a| (a + 1..5).map(move |b| (a, b))).collect();
        let g = StaticGraph::from_pairs(5, &pairs).unwrap();
        let o = compute_mklo(&g, n(0), 3).unwrap();
        assert_eq!(o.levels(), &[ids(&[0]), ids(&[1, 2, 3, 4])]);
    }

    #[test]
    fn mklo_path_leaves_tail_uncovered() {
        let g = StaticGraph::from_pairs(3, &[(0, 1), (1, 2)]).unwrap();
        let o = compute_mklo(&g, n(0), 2).unwrap();
        assert_eq!(o.levels(), &[ids(&[0]), ids(&[1])]);
        assert_eq!(o.uncovered(), &ids(&[2])[..]);
        assert!(!covers_all(&o));
        assert_eq!(brute_mklo(&g, n(0), 2), (vec![ids(&[0]), ids(&[1])], ids(&[2])));
    }

    #[test]
    fn mklo_rejects_unknown_source() {
        let g = StaticGraph::from_pairs(2, &[(0, 1)]).unwrap();
        assert_eq!(compute_mklo(&g, n(4), 1), Err(Error::UnknownNode(n(4))));
        assert!(compute_mklo(&g, n(0), 0).is_err());
    }

    #[test]
    fn mklo_matches_brute_force_on_small_graphs() {
        for seed in 0..300u64 {
            let nodes = 2 + (seed % 7) as usize;
            let g = crate::generate::random_static_graph(nodes, 0.45, seed).unwrap();
            for k in 1..4 {
                let o = compute_mklo(&g, n(0), k).unwrap();
                let (levels, rest) = brute_mklo(&g, n(0), k);
                assert_eq!(o.levels(), &levels[..], "seed {seed} k {k}");
                assert_eq!(o.uncovered(), &rest[..]);
            }
        }
    }

    #[test]
    fn worked_example_acceptance_values() {
        let g = fixtures::worked_example();
        let params = AcceptanceParams::new(2, fixtures::P_S, 0).unwrap();
        let mut oracle = AcceptanceOracle::new(&g, params).unwrap();
        for t in 0..=4 {
            assert!(oracle.accepts(fixtures::P_S, t).unwrap());
        }
        assert!(!oracle.accepts(fixtures::P_1, 0).unwrap());
        for t in 1..=4 {
            assert!(oracle.accepts(fixtures::P_1, t).unwrap());
        }
        assert!(!oracle.accepts(fixtures::P_4, 3).unwrap());
        assert!(oracle.accepts(fixtures::P_4, 4).unwrap());
        assert!(oracle.accepts(n(9), 0).is_err());
        assert!(oracle.accepts(fixtures::P_4, 5).is_err());
    }

    #[test]
    fn worked_example_tmklo() {
        let g = fixtures::worked_example();
        let params = AcceptanceParams::new(2, fixtures::P_S, 0).unwrap();
        let o = compute_tmklo(&g, &params).unwrap();
        let expected: BTreeMap<Time, Vec<NodeId>> = [
            (0, vec![fixtures::P_S]),
            (1, vec![fixtures::P_1]),
            (2, vec![fixtures::P_3]),
            (4, vec![fixtures::P_2, fixtures::P_4]),
        ]
        .into_iter()
        .collect();
        assert_eq!(o.levels(), &expected);
        assert!(o.covers_all());
        assert_eq!(o.last_level_time(), 4);
    }

    #[test]
    fn stranded_leaves_two_uncovered() {
        let g = fixtures::stranded();
        let params = AcceptanceParams::new(2, fixtures::P_S, 0).unwrap();
        let o = compute_tmklo(&g, &params).unwrap();
        assert_eq!(o.uncovered(), &[fixtures::P_3, fixtures::P_4]);
        assert_eq!(o, AcceptanceOracle::new(&g, params).unwrap().ordering().unwrap());
    }

    #[test]
    fn single_node_graph() {
        let g = TvgBuilder::new(1, 3).build().unwrap();
        let params = AcceptanceParams::new(1, n(0), 2).unwrap();
        let o = compute_tmklo(&g, &params).unwrap();
        assert_eq!(o.levels().len(), 1);
        assert_eq!(o.levels()[&2], vec![n(0)]);
        assert!(o.covers_all());
    }

    #[test]
    fn late_send_with_short_latency_wins() {
        // a send at 1 takes 5 ticks; a send at 2 takes 1
        let g = TvgBuilder::new(2, 8)
            .edge(0, 1, &[(1, 1, 5), (2, 7, 1)])
            .build()
            .unwrap();
        let params = AcceptanceParams::new(1, n(0), 0).unwrap();
        let o = compute_tmklo(&g, &params).unwrap();
        assert_eq!(o.level_of(n(1)), Some(3));
        assert_eq!(o, AcceptanceOracle::new(&g, params).unwrap().ordering().unwrap());
    }

    #[test]
    fn repeated_certificates_from_one_neighbor_count_once() {
        // 0 - 1 - 2 path; 1 re-sends to 2 many times but k = 2
        let g = TvgBuilder::new(3, 10)
            .edge(0, 1, &[(0, 10, 1)])
            .edge(1, 2, &[(0, 10, 1)])
            .build()
            .unwrap();
        let params = AcceptanceParams::new(2, n(0), 0).unwrap();
        let o = compute_tmklo(&g, &params).unwrap();
        assert_eq!(o.uncovered(), &[n(2)]);
    }

    #[test]
    fn report_is_sorted_and_stable() {
        let g = fixtures::worked_example();
        let params = AcceptanceParams::new(2, fixtures::P_S, 0).unwrap();
        let o = compute_tmklo(&g, &params).unwrap();
        let report = o.to_report(g.labels());
        let v: serde_json::Value = serde_json::from_str(&report).unwrap();
        assert_eq!(v["levels"][3]["time"], 4);
        assert_eq!(v["levels"][3]["nodes"], serde_json::json!([2, 4]));
        assert_eq!(report, o.to_report(g.labels()));
    }
}
