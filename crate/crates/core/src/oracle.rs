//! Knowledge oracles, termination verdicts and broadcast-latency bounds.
//!
//! A verdict answers whether every correct process will deliver the
//! source's message, given what the source knows about the graph:
//!
//! * [`conscious_termination_fko`] sees the whole TVG and works with
//!   temporal orderings.
//! * [`conscious_termination_pko_er`] sees only the underlying graph. It is
//!   meaningful for edge-recurrent TVGs only, where reliable channels come
//!   back forever.
//!
//! Both follow the same ladder. A non-covering `f+1` ordering means
//! [`VerdictStatus::Impossible`], and a covering `2f+1` ordering means
//! [`VerdictStatus::GuaranteedSufficient`]. Otherwise every valid placement
//! is removed in turn and the `f+1` ordering recomputed, provided the graph
//! is small enough; if it is not, the answer is [`VerdictStatus::Unknown`].

use std::collections::BTreeSet;

use serde::Serialize;

use crate::adversary::{enumerate_placements, Placement};
use crate::error::{Error, Result};
use crate::klo::{
    compute_mklo, compute_tmklo, AcceptanceParams, LevelOrdering, Report, StaticLevelOrdering, TemporalLevelOrdering,
};
use crate::sim::BroadcastScenario;
use crate::tvg::{ClassKind, NodeId, StaticGraph, Time, TimeVaryingGraph};

/// Largest graph on which the exhaustive placement check runs by default.
pub const DEFAULT_STRICT_MAX_N: usize = 10;

/// What the source is allowed to know.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OracleView {
    Full(TimeVaryingGraph),
    Partial(StaticGraph),
    Size(usize),
}

impl OracleView {
    pub fn fko(g: &TimeVaryingGraph) -> Self {
        OracleView::Full(g.clone())
    }

    pub fn pko(g: &TimeVaryingGraph) -> Self {
        OracleView::Partial(g.underlying_graph())
    }

    pub fn sko(g: &TimeVaryingGraph) -> Self {
        OracleView::Size(g.node_count())
    }

    pub fn name(&self) -> &'static str {
        match self {
            OracleView::Full(_) => "FKO",
            OracleView::Partial(_) => "PKO",
            OracleView::Size(_) => "SKO",
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            OracleView::Full(g) => g.node_count(),
            OracleView::Partial(g) => g.node_count(),
            OracleView::Size(n) => *n,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum VerdictStatus {
    GuaranteedSufficient,
    GuaranteedStrict,
    Impossible,
    Unknown,
}

impl VerdictStatus {
    pub fn is_guaranteed(self) -> bool {
        matches!(
            self,
            VerdictStatus::GuaranteedSufficient | VerdictStatus::GuaranteedStrict
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WitnessOrdering {
    Static(StaticLevelOrdering),
    Temporal(TemporalLevelOrdering),
}

impl WitnessOrdering {
    pub fn uncovered(&self) -> &[NodeId] {
        match self {
            WitnessOrdering::Static(o) => o.uncovered(),
            WitnessOrdering::Temporal(o) => o.uncovered(),
        }
    }

    pub fn covers_all(&self) -> bool {
        self.uncovered().is_empty()
    }

    fn report(&self, labels: &[u64]) -> Report {
        match self {
            WitnessOrdering::Static(o) => o.report(labels),
            WitnessOrdering::Temporal(o) => o.report(labels),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Witness {
    /// The covering `2f+1` ordering, or the non-covering `f+1` one.
    Ordering(WitnessOrdering),
    /// A placement whose removal leaves a correct node uncovered, with the
    /// `f+1` ordering computed without it.
    FailingPlacement {
        placement: Placement,
        ordering: WitnessOrdering,
    },
    PlacementsChecked(usize),
    None,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TerminationVerdict {
    pub oracle: &'static str,
    pub f: usize,
    pub status: VerdictStatus,
    pub witness: Witness,
}

impl TerminationVerdict {
    /// JSON report with the witness inlined; node ids written as labels.
    pub fn to_report(&self, labels: &[u64]) -> String {
        #[derive(Serialize)]
        #[serde(rename_all = "snake_case")]
        enum W {
            Ordering(Report),
            FailingPlacement { byzantine: Vec<u64>, ordering: Report },
            PlacementsChecked(usize),
        }
        #[derive(Serialize)]
        struct Out {
            oracle: &'static str,
            f: usize,
            status: VerdictStatus,
            #[serde(skip_serializing_if = "Option::is_none")]
            witness: Option<W>,
        }
        let witness = match &self.witness {
            Witness::Ordering(o) => Some(W::Ordering(o.report(labels))),
            Witness::FailingPlacement { placement, ordering } => Some(W::FailingPlacement {
                byzantine: placement.byzantine().iter().map(|p| labels[p.index()]).collect(),
                ordering: ordering.report(labels),
            }),
            Witness::PlacementsChecked(n) => Some(W::PlacementsChecked(*n)),
            Witness::None => None,
        };
        let out = Out {
            oracle: self.oracle,
            f: self.f,
            status: self.status,
            witness,
        };
        serde_json::to_string_pretty(&out).expect("serializable") + "\n"
    }
}

/// Runs the decision ladder. `ordering(removed, k)` computes the level
/// ordering with the nodes of `removed` deleted.
fn ladder(
    oracle: &'static str,
    underlying: &StaticGraph,
    sc: &BroadcastScenario,
    strict_max_n: usize,
    ordering: impl Fn(&BTreeSet<NodeId>, usize) -> Result<WitnessOrdering>,
) -> Result<TerminationVerdict> {
    let f = sc.f;
    let verdict = |status, witness| TerminationVerdict {
        oracle,
        f,
        status,
        witness,
    };
    let none = BTreeSet::new();
    let necessary = ordering(&none, f + 1)?;
    if !necessary.covers_all() {
        return Ok(verdict(VerdictStatus::Impossible, Witness::Ordering(necessary)));
    }
    let sufficient = ordering(&none, 2 * f + 1)?;
    if sufficient.covers_all() {
        return Ok(verdict(
            VerdictStatus::GuaranteedSufficient,
            Witness::Ordering(sufficient),
        ));
    }
    if underlying.node_count() > strict_max_n {
        return Ok(verdict(VerdictStatus::Unknown, Witness::None));
    }
    // Every valid placement, not only the maximal ones: a node lying in every
    // maximal placement is never required to deliver there, yet a smaller
    // placement can leave it correct and stranded.
    let mut checked = 0;
    for placement in enumerate_placements(underlying, f, sc.source, strict_max_n)? {
        checked += 1;
        if placement.is_empty() {
            continue;
        }
        let without = ordering(placement.byzantine(), f + 1)?;
        if without.uncovered().iter().any(|p| !placement.contains(*p)) {
            return Ok(verdict(
                VerdictStatus::Impossible,
                Witness::FailingPlacement {
                    placement,
                    ordering: without,
                },
            ));
        }
    }
    Ok(verdict(
        VerdictStatus::GuaranteedStrict,
        Witness::PlacementsChecked(checked),
    ))
}

/// Verdict with full knowledge of the TVG.
pub fn conscious_termination_fko(
    g: &TimeVaryingGraph,
    sc: &BroadcastScenario,
    strict_max_n: usize,
) -> Result<TerminationVerdict> {
    sc.check(g)?;
    ladder("FKO", &g.underlying_graph(), sc, strict_max_n, |removed, k| {
        let params = AcceptanceParams::new(k, sc.source, sc.t_br)?;
        let ordering = if removed.is_empty() {
            compute_tmklo(g, &params)?
        } else {
            compute_tmklo(&g.without_nodes(removed), &params)?
        };
        Ok(WitnessOrdering::Temporal(ordering))
    })
}

/// Verdict from the underlying graph alone, valid for edge-recurrent TVGs.
pub fn conscious_termination_pko_er(
    view: &OracleView,
    sc: &BroadcastScenario,
    strict_max_n: usize,
) -> Result<TerminationVerdict> {
    let OracleView::Partial(g) = view else {
        return Err(Error::invalid(format!("expected a PKO view, got {}", view.name())));
    };
    if !g.contains(sc.source) {
        return Err(Error::UnknownNode(sc.source));
    }
    ladder("PKO", g, sc, strict_max_n, |removed, k| {
        Ok(WitnessOrdering::Static(compute_mklo(
            &g.without_nodes(removed),
            sc.source,
            k,
        )?))
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BoundMethod {
    #[serde(rename = "FKO-TMKLO")]
    FkoTmklo,
    #[serde(rename = "TBER-SKO")]
    TberSko,
    #[serde(rename = "TBER-PKO")]
    TberPko,
}

/// Bounds on the broadcast latency, relative to the broadcast start.
/// `None` means the bound does not exist for this instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct LatencyBounds {
    pub lower: Option<Time>,
    pub upper: Option<Time>,
    pub method: BoundMethod,
    /// TBER-PKO only: the bound when the ordering size is read as its node
    /// count instead of its level count.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alt_upper: Option<Time>,
}

impl LatencyBounds {
    pub fn to_report(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable") + "\n"
    }
}

/// Last-level times of the `f+1` and `2f+1` temporal orderings.
pub fn bl_bounds_fko(g: &TimeVaryingGraph, sc: &BroadcastScenario) -> Result<LatencyBounds> {
    sc.check(g)?;
    let last = |k: usize| -> Result<Option<Time>> {
        let o = compute_tmklo(g, &AcceptanceParams::new(k, sc.source, sc.t_br)?)?;
        Ok(o.covers_all().then(|| o.last_level_time() - sc.t_br))
    };
    Ok(LatencyBounds {
        lower: last(sc.f + 1)?,
        upper: last(2 * sc.f + 1)?,
        method: BoundMethod::FkoTmklo,
        alt_upper: None,
    })
}

/// Declared recurrence bound and maximum latency of a TBER graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TberParams {
    pub delta: Time,
    pub delta_max: Time,
}

impl TberParams {
    pub fn new(delta: Time, delta_max: Time) -> Result<Self> {
        if delta == 0 || delta_max == 0 {
            return Err(Error::invalid("delta and delta_max must be at least 1"));
        }
        Ok(TberParams { delta, delta_max })
    }

    /// Reads the declared bound from the graph's class and takes the largest
    /// latency found on any interval.
    pub fn from_graph(g: &TimeVaryingGraph) -> Result<Self> {
        let class = g.class();
        let delta = match (class.kind, class.delta) {
            (ClassKind::Tber | ClassKind::Er, Some(d)) => d,
            _ => return Err(Error::invalid("graph does not declare a recurrence bound")),
        };
        TberParams::new(delta, g.max_latency().unwrap_or(1))
    }

    fn per_level(&self) -> Time {
        self.delta + self.delta_max
    }
}

/// Upper bound on the broadcast latency of a TBER graph.
///
/// An SKO view yields `|V|·(δ_max+Δ)`. A PKO (or FKO) view yields
/// `S·(δ_max+Δ)` with `S` the level count of the covering `2f+1` static
/// ordering, taken from `mklo` when given; the upper bound is undefined when
/// that ordering does not cover.
pub fn bl_bound_tber(
    view: &OracleView,
    params: &TberParams,
    sc: &BroadcastScenario,
    mklo: Option<&StaticLevelOrdering>,
) -> Result<LatencyBounds> {
    let step = params.per_level();
    let underlying = match view {
        OracleView::Size(n) => {
            return Ok(LatencyBounds {
                lower: None,
                upper: Some(*n as Time * step),
                method: BoundMethod::TberSko,
                alt_upper: None,
            })
        }
        OracleView::Partial(g) => g.clone(),
        OracleView::Full(g) => g.underlying_graph(),
    };
    let k = 2 * sc.f + 1;
    let computed;
    let ordering = match mklo {
        Some(o) if o.k() != k || o.source() != sc.source => {
            return Err(Error::invalid(format!(
                "ordering has k={} from {}, expected k={k} from {}",
                o.k(),
                o.source(),
                sc.source
            )))
        }
        Some(o) => o,
        None => {
            computed = compute_mklo(&underlying, sc.source, k)?;
            &computed
        }
    };
    let covers = ordering.covers_all();
    Ok(LatencyBounds {
        lower: None,
        upper: covers.then(|| ordering.level_count() as Time * step),
        method: BoundMethod::TberPko,
        alt_upper: covers.then(|| underlying.node_count() as Time * step),
    })
}
