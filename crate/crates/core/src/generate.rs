//! Seeded generators for random, edge-recurrent and time-bounded recurrent
//! TVGs. Output is a pure function of the spec and the seed.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tvg::{EdgeSchedule, GraphClass, Interval, NodeId, StaticGraph, Time, TimeVaryingGraph};

/// Inclusive latency range sampled per interval or per edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LatencyRange {
    pub min: Time,
    pub max: Time,
}

impl LatencyRange {
    pub fn fixed(latency: Time) -> Self {
        LatencyRange {
            min: latency,
            max: latency,
        }
    }

    pub fn new(min: Time, max: Time) -> Self {
        LatencyRange { min, max }
    }

    fn check(&self) -> Result<()> {
        if self.min == 0 || self.min > self.max {
            return Err(Error::invalid(format!(
                "latency range [{}, {}] must satisfy 1 <= min <= max",
                self.min, self.max
            )));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut impl Rng) -> Time {
        rng.gen_range(self.min..=self.max)
    }
}

#[derive(Clone, Debug)]
pub enum GeneratorSpec {
    /// Every pair is present at every instant independently with the given
    /// probability; each maximal run of presence gets its own latency.
    Random {
        nodes: usize,
        presence_probability: f64,
        horizon: Time,
        latency: LatencyRange,
    },
    /// Each underlying edge recurs with its own period in `1..=max_period`
    /// and a random phase.
    ErPeriodic {
        underlying: StaticGraph,
        max_period: Time,
        horizon: Time,
        latency: LatencyRange,
    },
    /// Each underlying edge is reliably usable at instants whose gaps are
    /// drawn from `1..=delta`, starting within the first `delta` instants.
    Tber {
        underlying: StaticGraph,
        delta: Time,
        horizon: Time,
        latency: LatencyRange,
    },
}

pub fn generate(spec: &GeneratorSpec, seed: u64) -> Result<TimeVaryingGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match spec {
        GeneratorSpec::Random {
            nodes,
            presence_probability,
            horizon,
            latency,
        } => {
            latency.check()?;
            if !(0.0..=1.0).contains(presence_probability) {
                return Err(Error::invalid("presence probability must lie in [0, 1]"));
            }
            if *nodes == 0 {
                return Err(Error::invalid("graph needs at least one node"));
            }
            let mut edges = Vec::new();
            for u in 0..*nodes as u32 {
                for v in u + 1..*nodes as u32 {
                    let mut intervals: Vec<Interval> = Vec::new();
                    let mut run_start = None;
                    for t in 0..=*horizon {
                        let up = rng.gen_bool(*presence_probability);
                        match (up, run_start) {
                            (true, None) => run_start = Some(t),
                            (false, Some(s)) => {
                                intervals.push(Interval::new(s, t - 1, latency.sample(&mut rng)));
                                run_start = None;
                            }
                            _ => {}
                        }
                    }
                    if let Some(s) = run_start {
                        intervals.push(Interval::new(s, *horizon, latency.sample(&mut rng)));
                    }
                    if !intervals.is_empty() {
                        edges.push(EdgeSchedule::new(NodeId(u), NodeId(v), intervals)?);
                    }
                }
            }
            TimeVaryingGraph::new(*nodes, *horizon, edges)
        }
        GeneratorSpec::ErPeriodic {
            underlying,
            max_period,
            horizon,
            latency,
        } => {
            latency.check()?;
            if *max_period == 0 {
                return Err(Error::invalid("max_period must be at least 1"));
            }
            if *horizon < max_period - 1 + latency.max {
                return Err(Error::invalid(format!(
                    "horizon {horizon} too short for period {max_period} and latency {}",
                    latency.max
                )));
            }
            let mut edges = Vec::new();
            for (u, v) in underlying.edges() {
                let period = rng.gen_range(1..=*max_period);
                let phase = rng.gen_range(0..period);
                let delay = latency.sample(&mut rng);
                let sends = std::iter::successors(Some(phase), |s| Some(s + period));
                edges.push(EdgeSchedule::new(u, v, intervals_for_sends(sends, delay, *horizon))?);
            }
            Ok(TimeVaryingGraph::new(underlying.node_count(), *horizon, edges)?
                .with_class(GraphClass::er(Some(*max_period))))
        }
        GeneratorSpec::Tber {
            underlying,
            delta,
            horizon,
            latency,
        } => {
            latency.check()?;
            if *delta == 0 {
                return Err(Error::invalid("delta must be at least 1"));
            }
            if *horizon < delta - 1 + latency.max {
                return Err(Error::invalid(format!(
                    "horizon {horizon} too short for delta {delta} and latency {}",
                    latency.max
                )));
            }
            let mut edges = Vec::new();
            for (u, v) in underlying.edges() {
                let delay = latency.sample(&mut rng);
                let mut sends = Vec::new();
                let mut s = rng.gen_range(0..*delta);
                while s + delay <= *horizon {
                    sends.push(s);
                    s += rng.gen_range(1..=*delta);
                }
                edges.push(EdgeSchedule::new(u, v, intervals_for_sends(sends, delay, *horizon))?);
            }
            Ok(TimeVaryingGraph::new(underlying.node_count(), *horizon, edges)?.with_class(GraphClass::tber(*delta)))
        }
    }
}

/// One interval `[s, s + delay]` per usable send instant, merging overlaps.
fn intervals_for_sends(sends: impl IntoIterator<Item = Time>, delay: Time, horizon: Time) -> Vec<Interval> {
    let mut out: Vec<Interval> = Vec::new();
    for s in sends {
        if s + delay > horizon {
            break;
        }
        match out.last_mut() {
            Some(last) if s <= last.end => last.end = s + delay,
            _ => out.push(Interval::new(s, s + delay, delay)),
        }
    }
    out
}

/// Erdős–Rényi `G(n, p)` graph, used to seed the recurrent generators.
pub fn random_static_graph(nodes: usize, edge_probability: f64, seed: u64) -> Result<StaticGraph> {
    if !(0.0..=1.0).contains(&edge_probability) {
        return Err(Error::invalid("edge probability must lie in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..nodes as u32 {
        for v in u + 1..nodes as u32 {
            if rng.gen_bool(edge_probability) {
                edges.push((NodeId(u), NodeId(v)));
            }
        }
    }
    StaticGraph::new(nodes, edges)
}
