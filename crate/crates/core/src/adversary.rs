//! f-locally bounded Byzantine placements and Byzantine behaviors.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::Payload;
use crate::tvg::{NodeId, StaticGraph, TimeVaryingGraph};

/// A set of Byzantine nodes together with the local bound it is meant to
/// respect.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Placement {
    f: usize,
    byzantine: BTreeSet<NodeId>,
}

impl Placement {
    pub fn new(f: usize, byzantine: impl IntoIterator<Item = NodeId>) -> Self {
        Placement {
            f,
            byzantine: byzantine.into_iter().collect(),
        }
    }

    /// No Byzantine nodes at all.
    pub fn none(f: usize) -> Self {
        Placement::new(f, [])
    }

    pub fn f(&self) -> usize {
        self.f
    }

    pub fn byzantine(&self) -> &BTreeSet<NodeId> {
        &self.byzantine
    }

    pub fn contains(&self, p: NodeId) -> bool {
        self.byzantine.contains(&p)
    }

    pub fn is_empty(&self) -> bool {
        self.byzantine.is_empty()
    }

    pub fn len(&self) -> usize {
        self.byzantine.len()
    }

    /// Checks the local bound on `g` and that `source` stays correct.
    pub fn check(&self, g: &StaticGraph, source: NodeId) -> Result<()> {
        if self.contains(source) {
            return Err(Error::invalid(format!("source {source} cannot be Byzantine")));
        }
        if let Some(p) = self.byzantine.iter().find(|p| !g.contains(**p)) {
            return Err(Error::UnknownNode(*p));
        }
        if !validate_placement(g, self) {
            return Err(Error::invalid(format!(
                "placement {:?} exceeds {} Byzantine neighbors at some node",
                self.byzantine, self.f
            )));
        }
        Ok(())
    }

    pub fn from_json(text: &str, g: &TimeVaryingGraph) -> Result<Self> {
        let file: PlacementFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let byzantine = file
            .byzantine
            .iter()
            .map(|&label| {
                g.node_by_label(label)
                    .ok_or_else(|| Error::Parse(format!("placement names unknown node {label}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Placement::new(file.f, byzantine))
    }

    pub fn to_json(&self, g: &TimeVaryingGraph) -> String {
        let file = PlacementFile {
            f: self.f,
            byzantine: self.byzantine.iter().map(|&p| g.label(p)).collect(),
        };
        serde_json::to_string_pretty(&file).expect("serializable") + "\n"
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlacementFile {
    f: usize,
    byzantine: Vec<u64>,
}

/// Whether every node of `g` has at most `f` neighbors in the placement.
pub fn validate_placement(g: &StaticGraph, placement: &Placement) -> bool {
    if placement.byzantine.iter().any(|p| !g.contains(*p)) {
        return false;
    }
    g.nodes()
        .all(|p| g.neighbors(p).iter().filter(|q| placement.contains(**q)).count() <= placement.f)
}

/// Every valid placement that excludes `source`, in lexicographic order of
/// the sorted node lists. Exponential; refused above `max_n` nodes.
pub fn enumerate_placements(
    g: &StaticGraph,
    f: usize,
    source: NodeId,
    max_n: usize,
) -> Result<std::vec::IntoIter<Placement>> {
    if !g.contains(source) {
        return Err(Error::UnknownNode(source));
    }
    if g.node_count() > max_n {
        return Err(Error::TooLarge {
            n: g.node_count(),
            max_n,
        });
    }
    let mut out = Vec::new();
    let mut load = vec![0usize; g.node_count()];
    let mut chosen = Vec::new();
    extend(g, f, source, 0, &mut load, &mut chosen, &mut out);
    Ok(out.into_iter())
}

// Depth-first pre-order over increasing node ids. Adding a node can only
// raise neighbor loads, so a violation prunes the whole subtree.
fn extend(
    g: &StaticGraph,
    f: usize,
    source: NodeId,
    from: usize,
    load: &mut [usize],
    chosen: &mut Vec<NodeId>,
    out: &mut Vec<Placement>,
) {
    out.push(Placement::new(f, chosen.iter().copied()));
    for i in from..g.node_count() {
        let p = NodeId(i as u32);
        if p == source {
            continue;
        }
        let nbrs = g.neighbors(p);
        if nbrs.iter().any(|q| load[q.index()] + 1 > f) {
            continue;
        }
        for q in nbrs {
            load[q.index()] += 1;
        }
        chosen.push(p);
        extend(g, f, source, i + 1, load, chosen, out);
        chosen.pop();
        for q in nbrs {
            load[q.index()] -= 1;
        }
    }
}

/// The inclusion-maximal placements among [`enumerate_placements`].
pub fn maximal_placements(g: &StaticGraph, f: usize, source: NodeId, max_n: usize) -> Result<Vec<Placement>> {
    let all: Vec<Placement> = enumerate_placements(g, f, source, max_n)?.collect();
    Ok(all
        .iter()
        .filter(|b| {
            g.nodes().filter(|p| *p != source && !b.contains(*p)).all(|p| {
                let mut bigger = (*b).clone();
                bigger.byzantine.insert(p);
                !validate_placement(g, &bigger)
            })
        })
        .cloned()
        .collect())
}

/// What a Byzantine node does during a run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BehaviorPolicy {
    /// Never sends anything.
    Silent,
    /// Receives but never forwards.
    MuteRelay,
    /// Once it has heard a message from a source, relays a forged payload
    /// under that source id at every tick.
    ForgeContent { forged: Payload },
    /// Emits a forged payload under the broadcast source id at every tick
    /// from the broadcast start, unprompted.
    FloodForge { forged: Payload },
}

impl BehaviorPolicy {
    /// One of each policy; the forging ones use `forged`.
    pub fn all(forged: &Payload) -> [BehaviorPolicy; 4] {
        [
            BehaviorPolicy::Silent,
            BehaviorPolicy::MuteRelay,
            BehaviorPolicy::ForgeContent { forged: forged.clone() },
            BehaviorPolicy::FloodForge { forged: forged.clone() },
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            BehaviorPolicy::Silent => "silent",
            BehaviorPolicy::MuteRelay => "mute-relay",
            BehaviorPolicy::ForgeContent { .. } => "forge-content",
            BehaviorPolicy::FloodForge { .. } => "flood-forge",
        }
    }
}

pub type Behaviors = BTreeMap<NodeId, BehaviorPolicy>;

/// Assigns the same policy to every Byzantine node of the placement.
pub fn uniform_behaviors(placement: &Placement, policy: &BehaviorPolicy) -> Behaviors {
    placement.byzantine().iter().map(|&p| (p, policy.clone())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn n(i: u32) -> NodeId {
        NodeId(i)
    }

    fn k4() -> StaticGraph {
        StaticGraph::from_pairs(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]).unwrap()
    }

    fn brute(g: &StaticGraph, f: usize, source: NodeId) -> Vec<Placement> {
        let others: Vec<NodeId> = g.nodes().filter(|p| *p != source).collect();
        let mut out: Vec<Placement> = (0u32..1 << others.len())
            .map(|mask| {
                Placement::new(
                    f,
                    others
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| mask & (1 << i) != 0)
                        .map(|(_, p)| *p),
                )
            })
            .filter(|b| validate_placement(g, b))
            .collect();
        out.sort_by(|a, b| a.byzantine.iter().cmp(b.byzantine.iter()));
        out
    }

    #[test]
    fn validate_examples() {
        assert!(validate_placement(&k4(), &Placement::new(1, [n(1)])));
        assert!(!validate_placement(&k4(), &Placement::new(1, [n(1), n(2)])));
        let fig = fixtures::stranded().underlying_graph();
        assert!(validate_placement(&fig, &Placement::new(1, [fixtures::P_2])));
    }

    #[test]
    fn path_enumeration() {
        let path = StaticGraph::from_pairs(3, &[(0, 1), (1, 2)]).unwrap();
        let all: Vec<_> = enumerate_placements(&path, 1, n(0), 10).unwrap().collect();
        let sets: Vec<Vec<NodeId>> = all.iter().map(|b| b.byzantine().iter().copied().collect()).collect();
        assert_eq!(sets, vec![vec![], vec![n(1)], vec![n(1), n(2)], vec![n(2)]]);
        let maximal = maximal_placements(&path, 1, n(0), 10).unwrap();
        assert_eq!(maximal, vec![Placement::new(1, [n(1), n(2)])]);
    }

    #[test]
    fn f_zero_yields_only_empty() {
        let all: Vec<_> = enumerate_placements(&k4(), 0, n(0), 10).unwrap().collect();
        assert_eq!(all, vec![Placement::none(0)]);
    }

    #[test]
    fn k4_maximal_are_singletons() {
        let maximal = maximal_placements(&k4(), 1, n(0), 10).unwrap();
        assert_eq!(
            maximal,
            vec![
                Placement::new(1, [n(1)]),
                Placement::new(1, [n(2)]),
                Placement::new(1, [n(3)])
            ]
        );
    }

    #[test]
    fn matches_subset_brute_force() {
        for seed in 0..60u64 {
            let nodes = 3 + (seed % 8) as usize;
            let g = crate::generate::random_static_graph(nodes, 0.35, seed).unwrap();
            for f in 0..3 {
                let fast: Vec<_> = enumerate_placements(&g, f, n(0), 10).unwrap().collect();
                assert_eq!(fast, brute(&g, f, n(0)), "seed {seed} f {f}");
                assert!(fast.iter().all(|b| !b.contains(n(0))));
            }
        }
    }

    #[test]
    fn guard_refuses_large_graphs() {
        let g = crate::generate::random_static_graph(12, 0.3, 1).unwrap();
        assert_eq!(
            enumerate_placements(&g, 1, n(0), 10).err(),
            Some(Error::TooLarge { n: 12, max_n: 10 })
        );
    }

    #[test]
    fn check_rejects_source_and_overload() {
        assert!(Placement::new(1, [n(0)]).check(&k4(), n(0)).is_err());
        assert!(Placement::new(1, [n(1), n(2)]).check(&k4(), n(0)).is_err());
        assert!(Placement::new(1, [n(1)]).check(&k4(), n(0)).is_ok());
    }

    #[test]
    fn placement_file_uses_labels() {
        let g = TimeVaryingGraph::from_json(r#"{"nodes":[5,7,9],"edges":[{"u":5,"v":7,"intervals":[]}],"horizon":3}"#)
            .unwrap();
        let p = Placement::from_json(r#"{"f":1,"byzantine":[9]}"#, &g).unwrap();
        assert_eq!(p, Placement::new(1, [n(2)]));
        assert_eq!(Placement::from_json(&p.to_json(&g), &g).unwrap(), p);
        assert!(Placement::from_json(r#"{"f":1,"byzantine":[4]}"#, &g).is_err());
    }
}
