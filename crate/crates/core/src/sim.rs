//! Deterministic synchronous execution of dynamic certified propagation.
//!
//! Each tick `t` runs three phases:
//!
//! 1. *receive*: envelopes whose arrival instant is `t` are handed to their
//!    receivers, which apply the acceptance rules immediately. The source
//!    delivers its own message at the broadcast start (AC1); a message
//!    relayed by its claimed source is delivered at once (AC2); otherwise the
//!    copy is buffered until `f + 1` distinct senders vouched for the same
//!    `(source, content)` pair (AC3).
//! 2. *send*: every correct process re-sends each message it has delivered
//!    to all neighbors whose channel is up at `t`, including messages
//!    delivered during this tick's receive phase. Byzantine processes follow
//!    their [`BehaviorPolicy`].
//! 3. Each send is enqueued for `t + latency` only if the channel stays up
//!    for the whole transit; otherwise it is logged as dropped.
//!
//! Retransmission is unbounded in principle and truncated at the run
//! horizon here.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::adversary::{BehaviorPolicy, Behaviors, Placement};
use crate::error::{Error, Result};
use crate::tvg::{NodeId, Time, TimeVaryingGraph};

/// Opaque message content.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Payload(Arc<[u8]>);

impl Payload {
    pub fn new(bytes: impl Into<Vec<u8>>) -> Self {
        Payload(bytes.into().into())
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    /// A payload guaranteed to differ from `self`.
    pub fn corrupted(&self) -> Payload {
        let mut bytes = self.0.to_vec();
        match bytes.first_mut() {
            Some(b) => *b ^= 0x01,
            None => bytes.push(0xff),
        }
        Payload::new(bytes)
    }
}

impl From<&str> for Payload {
    fn from(s: &str) -> Self {
        Payload::new(s.as_bytes().to_vec())
    }
}

impl fmt::Display for Payload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&String::from_utf8_lossy(&self.0))
    }
}

impl fmt::Debug for Payload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", String::from_utf8_lossy(&self.0))
    }
}

impl Serialize for Payload {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&String::from_utf8_lossy(&self.0))
    }
}

impl<'de> Deserialize<'de> for Payload {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d).map(|s| Payload::from(s.as_str()))
    }
}

/// A broadcast of `content` from a correct `source` starting at `t_br`,
/// against an `f`-locally bounded adversary.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BroadcastScenario {
    pub source: NodeId,
    pub t_br: Time,
    pub f: usize,
    pub content: Payload,
}

impl BroadcastScenario {
    pub fn new(source: NodeId, t_br: Time, f: usize, content: impl Into<Payload>) -> Self {
        BroadcastScenario {
            source,
            t_br,
            f,
            content: content.into(),
        }
    }

    pub fn check(&self, g: &TimeVaryingGraph) -> Result<()> {
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

    pub fn from_json(text: &str, g: &TimeVaryingGraph) -> Result<Self> {
        let file: ScenarioFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let source = g
            .node_by_label(file.source)
            .ok_or_else(|| Error::Parse(format!("scenario source {} is not a node", file.source)))?;
        Ok(BroadcastScenario::new(source, file.t_br, file.f, file.content))
    }

    pub fn to_json(&self, g: &TimeVaryingGraph) -> String {
        let file = ScenarioFile {
            source: g.label(self.source),
            t_br: self.t_br,
            f: self.f,
            content: self.content.clone(),
        };
        serde_json::to_string_pretty(&file).expect("serializable") + "\n"
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    source: u64,
    t_br: Time,
    f: usize,
    content: Payload,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MessageEnvelope {
    /// Claimed author.
    pub source: NodeId,
    /// Relaying neighbor, as seen by the receiver.
    pub sender: NodeId,
    pub receiver: NodeId,
    pub content: Payload,
    pub sent_at: Time,
    pub arrives_at: Time,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Outcome {
    AC1,
    AC2,
    AC3,
    #[serde(rename = "buffered")]
    Buffered,
    #[serde(rename = "dropped")]
    Dropped,
}

/// One event: a receipt at `t` (AC1..AC3, buffered) or a send dropped at `t`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LogRecord {
    pub t: Time,
    pub sender: NodeId,
    pub receiver: NodeId,
    pub source: NodeId,
    pub content: Payload,
    pub outcome: Outcome,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Delivery {
    pub node: NodeId,
    pub source: NodeId,
    pub content: Payload,
    pub time: Time,
    pub rule: Outcome,
}

type MessageKey = (NodeId, Payload);

/// Per-process state of a correct node.
#[derive(Clone, Debug, Default)]
pub struct ProcessState {
    pub delivered: BTreeMap<MessageKey, Time>,
    pub evidence: BTreeMap<MessageKey, BTreeSet<NodeId>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimTrace {
    t_br: Time,
    delivery_time: Vec<Option<Time>>,
    messages_sent: u64,
    log: Vec<LogRecord>,
    deliveries: Vec<Delivery>,
}

impl SimTrace {
    /// When `p` delivered the scenario's message, if ever.
    pub fn delivery_time(&self, p: NodeId) -> Option<Time> {
        self.delivery_time[p.index()]
    }

    pub fn delivery_times(&self) -> &[Option<Time>] {
        &self.delivery_time
    }

    pub fn messages_sent(&self) -> u64 {
        self.messages_sent
    }

    pub fn log(&self) -> &[LogRecord] {
        &self.log
    }

    /// Every delivery by a correct process, of any `(source, content)`.
    pub fn deliveries(&self) -> &[Delivery] {
        &self.deliveries
    }

    /// Deliveries of a payload other than the scenario's under the
    /// scenario's source id.
    pub fn safety_violations<'a>(&'a self, sc: &'a BroadcastScenario) -> impl Iterator<Item = &'a Delivery> + 'a {
        self.deliveries
            .iter()
            .filter(move |d| d.source == sc.source && d.content != sc.content)
    }

    /// Line-oriented export: one JSON object per event, then one summary
    /// object. Node ids are written as graph labels.
    pub fn to_jsonl(&self, g: &TimeVaryingGraph, sc: &BroadcastScenario, placement: &Placement) -> String {
        #[derive(Serialize)]
        struct Line<'a> {
            t: Time,
            sender: u64,
            receiver: u64,
            source: u64,
            content: &'a Payload,
            outcome: Outcome,
        }
        #[derive(Serialize)]
        struct NodeDelivery {
            node: u64,
            time: Option<Time>,
        }
        #[derive(Serialize)]
        struct Summary {
            t_br: Time,
            byzantine: Vec<u64>,
            delivery: Vec<NodeDelivery>,
            broadcast_latency: Option<Time>,
            messages_sent: u64,
        }
        #[derive(Serialize)]
        struct Wrapper {
            summary: Summary,
        }

        let mut out = String::new();
        for r in &self.log {
            let line = Line {
                t: r.t,
                sender: g.label(r.sender),
                receiver: g.label(r.receiver),
                source: g.label(r.source),
                content: &r.content,
                outcome: r.outcome,
            };
            out.push_str(&serde_json::to_string(&line).expect("serializable"));
            out.push('\n');
        }
        let summary = Summary {
            t_br: self.t_br,
            byzantine: placement.byzantine().iter().map(|&p| g.label(p)).collect(),
            delivery: g
                .nodes()
                .map(|p| NodeDelivery {
                    node: g.label(p),
                    time: self.delivery_time(p),
                })
                .collect(),
            broadcast_latency: broadcast_latency(self, sc, placement),
            messages_sent: self.messages_sent,
        };
        out.push_str(&serde_json::to_string(&Wrapper { summary }).expect("serializable"));
        out.push('\n');
        out
    }
}

/// Largest delay between the broadcast start and a correct delivery; `None`
/// (never) if some correct process did not deliver.
pub fn broadcast_latency(trace: &SimTrace, sc: &BroadcastScenario, placement: &Placement) -> Option<Time> {
    let mut latest = 0;
    for (i, at) in trace.delivery_time.iter().enumerate() {
        if placement.contains(NodeId(i as u32)) {
            continue;
        }
        latest = latest.max(at.as_ref()?.saturating_sub(sc.t_br));
    }
    Some(latest)
}

/// Channel misbehavior for the negative-control runs.
#[derive(Clone, Debug, Default)]
pub struct ChannelFaults {
    pub seed: u64,
    /// Probability that an envelope's content is altered in flight.
    pub corrupt_probability: f64,
    /// Probability that an envelope's sender id is rewritten in flight.
    pub forge_sender_probability: f64,
    /// Restricts faults to these channels; all channels when `None`.
    pub edges: Option<BTreeSet<(NodeId, NodeId)>>,
}

impl ChannelFaults {
    fn affects(&self, a: NodeId, b: NodeId) -> bool {
        self.edges
            .as_ref()
            .is_none_or(|set| set.contains(&(a.min(b), a.max(b))))
    }
}

/// Runs the protocol over authenticated, reliable channels.
pub fn run(
    g: &TimeVaryingGraph,
    sc: &BroadcastScenario,
    placement: &Placement,
    behaviors: &Behaviors,
    horizon: Time,
) -> Result<SimTrace> {
    Engine::new(g, sc, placement, behaviors, horizon, None)?.execute()
}

/// Runs the protocol over channels that may corrupt payloads or rewrite
/// sender ids. Only meant to show that safety then breaks.
pub fn run_unreliable(
    g: &TimeVaryingGraph,
    sc: &BroadcastScenario,
    placement: &Placement,
    behaviors: &Behaviors,
    horizon: Time,
    faults: &ChannelFaults,
) -> Result<SimTrace> {
    for p in [faults.corrupt_probability, faults.forge_sender_probability] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid("fault probabilities must lie in [0, 1]"));
        }
    }
    let faulty = Some((faults, ChaCha8Rng::seed_from_u64(faults.seed)));
    Engine::new(g, sc, placement, behaviors, horizon, faulty)?.execute()
}

struct Engine<'a> {
    g: &'a TimeVaryingGraph,
    sc: &'a BroadcastScenario,
    behaviors: &'a Behaviors,
    horizon: Time,
    faults: Option<(&'a ChannelFaults, ChaCha8Rng)>,
    correct: Vec<Option<ProcessState>>,
    // claimed sources a Byzantine node has heard from
    heard: BTreeMap<NodeId, BTreeSet<NodeId>>,
    in_flight: BTreeMap<Time, Vec<MessageEnvelope>>,
    trace: SimTrace,
}

impl<'a> Engine<'a> {
    fn new(
        g: &'a TimeVaryingGraph,
        sc: &'a BroadcastScenario,
        placement: &'a Placement,
        behaviors: &'a Behaviors,
        horizon: Time,
        faults: Option<(&'a ChannelFaults, ChaCha8Rng)>,
    ) -> Result<Self> {
        sc.check(g)?;
        if sc.t_br > horizon {
            return Err(Error::OutOfRange { t: sc.t_br, horizon });
        }
        if placement.f() != sc.f {
            return Err(Error::invalid(format!(
                "placement bound f={} differs from scenario f={}",
                placement.f(),
                sc.f
            )));
        }
        placement.check(&g.underlying_graph(), sc.source)?;
        if let Some(p) = placement.byzantine().iter().find(|p| !behaviors.contains_key(p)) {
            return Err(Error::invalid(format!("no behavior given for Byzantine node {p}")));
        }
        if let Some(p) = behaviors.keys().find(|p| !placement.contains(**p)) {
            return Err(Error::invalid(format!("behavior given for correct node {p}")));
        }
        let n = g.node_count();
        Ok(Engine {
            g,
            sc,
            behaviors,
            horizon,
            faults,
            correct: g
                .nodes()
                .map(|p| (!placement.contains(p)).then(ProcessState::default))
                .collect(),
            heard: BTreeMap::new(),
            in_flight: BTreeMap::new(),
            trace: SimTrace {
                t_br: sc.t_br,
                delivery_time: vec![None; n],
                messages_sent: 0,
                log: Vec::new(),
                deliveries: Vec::new(),
            },
        })
    }

    fn execute(mut self) -> Result<SimTrace> {
        for t in self.sc.t_br..=self.horizon {
            if t == self.sc.t_br {
                let (s, content) = (self.sc.source, self.sc.content.clone());
                self.log(t, s, s, s, content.clone(), Outcome::AC1);
                self.deliver(s, (s, content), t, Outcome::AC1);
            }
            if let Some(batch) = self.in_flight.remove(&t) {
                for env in batch {
                    self.receive(env, t);
                }
            }
            for p in self.g.nodes() {
                let outgoing = self.outgoing(p, t);
                if !outgoing.is_empty() {
                    self.send(p, &outgoing, t);
                }
            }
        }
        Ok(self.trace)
    }

    fn log(&mut self, t: Time, sender: NodeId, receiver: NodeId, source: NodeId, content: Payload, outcome: Outcome) {
        self.trace.log.push(LogRecord {
            t,
            sender,
            receiver,
            source,
            content,
            outcome,
        });
    }

    fn deliver(&mut self, p: NodeId, key: MessageKey, t: Time, rule: Outcome) {
        let state = self.correct[p.index()].as_mut().expect("only correct nodes deliver");
        if key.0 == self.sc.source && key.1 == self.sc.content {
            self.trace.delivery_time[p.index()] = Some(t);
        }
        self.trace.deliveries.push(Delivery {
            node: p,
            source: key.0,
            content: key.1.clone(),
            time: t,
            rule,
        });
        state.evidence.remove(&key);
        state.delivered.insert(key, t);
    }

    fn receive(&mut self, env: MessageEnvelope, t: Time) {
        let MessageEnvelope {
            source,
            sender,
            receiver,
            content,
            ..
        } = env;
        let quorum = self.sc.f + 1;
        let outcome = match self.correct[receiver.index()].as_mut() {
            None => {
                self.heard.entry(receiver).or_default().insert(source);
                Outcome::Buffered
            }
            Some(state) => {
                let key = (source, content.clone());
                if state.delivered.contains_key(&key) {
                    Outcome::Buffered
                } else if sender == source {
                    self.deliver(receiver, key, t, Outcome::AC2);
                    Outcome::AC2
                } else {
                    let vouchers = state.evidence.entry(key.clone()).or_default();
                    vouchers.insert(sender);
                    if vouchers.len() >= quorum {
                        self.deliver(receiver, key, t, Outcome::AC3);
                        Outcome::AC3
                    } else {
                        Outcome::Buffered
                    }
                }
            }
        };
        self.log(t, sender, receiver, source, content, outcome);
    }

    fn outgoing(&self, p: NodeId, t: Time) -> Vec<MessageKey> {
        if let Some(state) = &self.correct[p.index()] {
            return state.delivered.keys().cloned().collect();
        }
        match &self.behaviors[&p] {
            BehaviorPolicy::Silent | BehaviorPolicy::MuteRelay => Vec::new(),
            BehaviorPolicy::ForgeContent { forged } => self
                .heard
                .get(&p)
                .into_iter()
                .flatten()
                .map(|&s| (s, forged.clone()))
                .collect(),
            BehaviorPolicy::FloodForge { forged } => {
                if t >= self.sc.t_br {
                    vec![(self.sc.source, forged.clone())]
                } else {
                    Vec::new()
                }
            }
        }
    }

    fn send(&mut self, p: NodeId, outgoing: &[MessageKey], t: Time) {
        let g = self.g;
        for (q, edge) in g.incident(p) {
            if !edge.is_present(t) {
                continue;
            }
            let delay = edge.rcd_latency(t);
            for (source, content) in outgoing {
                self.trace.messages_sent += 1;
                let Some(delay) = delay else {
                    self.log(t, p, q, *source, content.clone(), Outcome::Dropped);
                    continue;
                };
                let mut env = MessageEnvelope {
                    source: *source,
                    sender: p,
                    receiver: q,
                    content: content.clone(),
                    sent_at: t,
                    arrives_at: t + delay,
                };
                self.tamper(&mut env);
                self.in_flight.entry(env.arrives_at).or_default().push(env);
            }
        }
    }

    fn tamper(&mut self, env: &mut MessageEnvelope) {
        let n = self.g.node_count() as u32;
        let Some((faults, rng)) = self.faults.as_mut() else {
            return;
        };
        if !faults.affects(env.sender, env.receiver) {
            return;
        }
        if rng.gen_bool(faults.corrupt_probability) {
            env.content = env.content.corrupted();
        }
        if rng.gen_bool(faults.forge_sender_probability) {
            // any id but the receiver's own
            let pick = rng.gen_range(0..n - 1);
            env.sender = NodeId(if pick >= env.receiver.0 { pick + 1 } else { pick });
        }
    }
}
