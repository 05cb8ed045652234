use std::collections::BTreeSet;

use dcpa::{
    acceptance, compute_mklo, compute_tmklo, enumerate_placements, generate, run, uniform_behaviors,
    validate_placement, AcceptanceOracle, AcceptanceParams, BehaviorPolicy, BroadcastScenario, GeneratorSpec,
    LatencyRange, LevelOrdering, NodeId, Payload, Placement, StaticGraph, Time, TimeVaryingGraph,
};
use proptest::prelude::*;

fn random_tvg(nodes: usize, horizon: Time, presence: f64, max_latency: Time, seed: u64) -> TimeVaryingGraph {
    let spec = GeneratorSpec::Random {
        nodes,
        presence_probability: presence,
        horizon,
        latency: LatencyRange::new(1, max_latency),
    };
    generate(&spec, seed).unwrap()
}

fn tvg() -> impl Strategy<Value = TimeVaryingGraph> {
    (1usize..=7, 0u32..=12, 0.1f64..0.9, 1u32..=3, any::<u64>())
        .prop_map(|(n, h, p, l, seed)| random_tvg(n, h, p, l, seed))
}

fn tvg_with_source() -> impl Strategy<Value = (TimeVaryingGraph, NodeId, Time)> {
    tvg().prop_flat_map(|g| {
        let n = g.node_count() as u32;
        let h = g.horizon();
        (Just(g), (0..n).prop_map(NodeId), 0..=h.min(3))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn rcd_is_symmetric(g in tvg()) {
        for a in g.nodes() {
            for b in g.nodes().filter(|b| *b != a) {
                for t in 0..=g.horizon() {
                    prop_assert_eq!(g.rcd(a, b, t).unwrap(), g.rcd(b, a, t).unwrap());
                    prop_assert_eq!(g.presence(a, b, t).unwrap(), g.presence(b, a, t).unwrap());
                }
            }
        }
    }

    #[test]
    fn underlying_graph_is_union_of_snapshots(g in tvg()) {
        let mut union = BTreeSet::new();
        for t in 0..=g.horizon() {
            union.extend(g.snapshot(t).unwrap().edges());
        }
        let underlying: BTreeSet<_> = g.underlying_graph().edges().collect();
        prop_assert_eq!(union, underlying);
    }

    #[test]
    fn sweep_matches_oracle((g, source, t_br) in tvg_with_source(), k in 1usize..=3) {
        let params = AcceptanceParams::new(k, source, t_br).unwrap();
        let sweep = compute_tmklo(&g, &params).unwrap();
        let mut oracle = AcceptanceOracle::new(&g, params).unwrap();
        for p in g.nodes() {
            prop_assert_eq!(sweep.level_of(p), oracle.earliest(p).unwrap());
        }
    }

    #[test]
    fn acceptance_is_monotone_in_time((g, source, t_br) in tvg_with_source(), k in 1usize..=3) {
        let params = AcceptanceParams::new(k, source, t_br).unwrap();
        for p in g.nodes() {
            let mut seen = false;
            for t in 0..=g.horizon() {
                let now = acceptance(&g, &params, p, t).unwrap();
                prop_assert!(!seen || now);
                seen = now;
            }
        }
    }

    #[test]
    fn higher_threshold_never_accepts_earlier((g, source, t_br) in tvg_with_source(), k in 1usize..=3) {
        let lo = compute_tmklo(&g, &AcceptanceParams::new(k, source, t_br).unwrap()).unwrap();
        let hi = compute_tmklo(&g, &AcceptanceParams::new(k + 1, source, t_br).unwrap()).unwrap();
        for p in g.nodes() {
            match (lo.level_of(p), hi.level_of(p)) {
                (_, None) => {}
                (Some(a), Some(b)) => prop_assert!(a <= b),
                (None, Some(_)) => prop_assert!(false, "{p} covered only with the higher threshold"),
            }
        }
    }

    #[test]
    fn always_present_unit_latency_reduces_to_static(g in tvg(), k in 1usize..=3) {
        let n = g.node_count() as Time;
        let full = dcpa::TvgBuilder::new(g.node_count(), n + 1);
        let full = g.underlying_graph().edges().fold(full, |b, (u, v)| b.edge(u.0, v.0, &[(0, n + 1, 1)]));
        let full = full.build().unwrap();
        let source = NodeId(0);
        let temporal = compute_tmklo(&full, &AcceptanceParams::new(k, source, 0).unwrap()).unwrap();
        let static_ = compute_mklo(&g.underlying_graph(), source, k).unwrap();
        for p in g.nodes() {
            prop_assert_eq!(temporal.level_of(p).map(|t| t as usize), static_.level_of(p));
        }
    }

    #[test]
    fn correct_deliveries_follow_the_f_plus_one_ordering(
        (g, source, t_br) in tvg_with_source(),
        f in 0usize..=2,
        pick in any::<prop::sample::Index>(),
        policy_ix in 0usize..4,
    ) {
        let placements: Vec<Placement> =
            enumerate_placements(&g.underlying_graph(), f, source, 10).unwrap().collect();
        let placement = pick.get(&placements).clone();
        let policy = BehaviorPolicy::all(&Payload::from("x"))[policy_ix].clone();
        let sc = BroadcastScenario::new(source, t_br, f, "m");
        let trace = run(&g, &sc, &placement, &uniform_behaviors(&placement, &policy), g.horizon()).unwrap();
        let ordering = compute_tmklo(
            &g.without_nodes(placement.byzantine()),
            &AcceptanceParams::new(f + 1, source, t_br).unwrap(),
        ).unwrap();
        for p in g.nodes().filter(|p| !placement.contains(*p)) {
            prop_assert_eq!(trace.delivery_time(p), ordering.level_of(p));
        }
    }

    #[test]
    fn enumerated_placements_are_valid_and_exclude_source(g in tvg(), f in 0usize..=2) {
        let u = g.underlying_graph();
        for b in enumerate_placements(&u, f, NodeId(0), 10).unwrap() {
            prop_assert!(validate_placement(&u, &b));
            prop_assert!(!b.contains(NodeId(0)));
        }
    }

    #[test]
    fn mklo_levels_partition_covered_nodes(seed in any::<u64>(), n in 1usize..=9, k in 1usize..=3) {
        let g = dcpa::random_static_graph(n, 0.4, seed).unwrap();
        let o = compute_mklo(&g, NodeId(0), k).unwrap();
        let placed: usize = o.levels().iter().map(Vec::len).sum();
        prop_assert_eq!(placed + o.uncovered().len(), n);
        prop_assert!(o.level_count() <= n);
    }

    #[test]
    fn file_round_trip(g in tvg()) {
        prop_assert_eq!(TimeVaryingGraph::from_json(&g.to_json()).unwrap(), g);
    }

    #[test]
    fn generation_is_deterministic(seed in any::<u64>(), delta in 1u32..=4) {
        let underlying = dcpa::random_static_graph(5, 0.5, seed).unwrap();
        let spec = GeneratorSpec::Tber { underlying, delta, horizon: 30, latency: LatencyRange::new(1, 3) };
        let a = generate(&spec, seed).unwrap();
        prop_assert_eq!(&a, &generate(&spec, seed).unwrap());
        prop_assert!(a.validate_tber(delta).unwrap());
    }
}

#[test]
fn path_has_expected_static_levels() {
    let g = StaticGraph::from_pairs(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
    let o = compute_mklo(&g, NodeId(0), 1).unwrap();
    assert_eq!(o.levels().len(), 4);
}
