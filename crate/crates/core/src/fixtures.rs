//! Named example graphs.
//!
//! Node `0` plays the broadcast source `p_s`; nodes `1..=4` are `p_1..p_4`.
//! All channels have latency 1.
//!
//! In [`stranded`], `p_3` is never reliably reachable from
//! the source, and the channels `p_2`–`p_4` and `p_3`–`p_4` are up only
//! before either endpoint could relay, so with `p_2` Byzantine neither `p_3`
//! nor `p_4` can ever collect enough copies. Its underlying graph nonetheless
//! supports a static broadcast under any 1-locally bounded adversary.

use crate::tvg::{NodeId, TimeVaryingGraph, TvgBuilder};

pub const P_S: NodeId = NodeId(0);
pub const P_1: NodeId = NodeId(1);
pub const P_2: NodeId = NodeId(2);
pub const P_3: NodeId = NodeId(3);
pub const P_4: NodeId = NodeId(4);

/// Five-instant example whose temporal 2-level ordering from `p_s` is
/// `{0: [p_s], 1: [p_1], 2: [p_3], 4: [p_2, p_4]}`.
pub fn worked_example() -> TimeVaryingGraph {
    TvgBuilder::new(5, 4)
        .edge(0, 1, &[(0, 1, 1)])
        .edge(0, 3, &[(1, 2, 1)])
        .edge(0, 2, &[(3, 4, 1)])
        .edge(1, 4, &[(1, 2, 1)])
        .edge(3, 4, &[(3, 4, 1)])
        .build()
        .expect("fixture is well formed")
}

/// TVG on which the static ordering of the underlying graph
/// looks fine while the temporal one strands `p_3` and `p_4`.
pub fn stranded() -> TimeVaryingGraph {
    TvgBuilder::new(5, 5)
        .edge(0, 1, &[(0, 1, 1)])
        .edge(0, 2, &[(0, 1, 1)])
        .edge(0, 3, &[(2, 2, 1)])
        .edge(2, 3, &[(2, 3, 1)])
        .edge(1, 4, &[(2, 3, 1)])
        .edge(2, 4, &[(0, 1, 1)])
        .edge(3, 4, &[(0, 1, 1)])
        .build()
        .expect("fixture is well formed")
}

/// Same underlying graph as [`stranded`] with every channel always up.
pub fn stranded_always_present() -> TimeVaryingGraph {
    stranded().always_present(1).expect("fixture is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example_rcd_facts() {
        let g = worked_example();
        assert!(g.presence(P_S, P_1, 0).unwrap());
        assert!(g.presence(P_S, P_1, 1).unwrap());
        assert!(g.rcd(P_S, P_1, 0).unwrap());
        assert!(g.rcd(P_1, P_4, 1).unwrap());
        assert!(g.rcd(P_3, P_4, 3).unwrap());
        for t in 0..=4 {
            assert_eq!(g.latency(P_S, P_1, t).unwrap().unwrap_or(1), 1);
        }
        let s0 = g.snapshot(0).unwrap();
        assert!(s0.has_edge(P_S, P_1));
        assert!(!s0.has_edge(P_S, P_2));
    }

    #[test]
    fn stranded_source_never_reaches_p3() {
        let g = stranded();
        for t in 0..=g.horizon() {
            assert!(!g.rcd(P_S, P_3, t).unwrap());
        }
        assert_eq!(g.underlying_graph(), stranded_always_present().underlying_graph());
    }

    #[test]
    fn shipped_files_match_code() {
        let files = [
            (include_str!("../fixtures/worked_example.json"), worked_example()),
            (include_str!("../fixtures/stranded.json"), stranded()),
        ];
        for (text, g) in files {
            assert_eq!(TimeVaryingGraph::from_json(text).unwrap(), g);
        }
    }
}
