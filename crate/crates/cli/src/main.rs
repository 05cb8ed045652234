use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use dcpa::{
    bl_bound_tber, bl_bounds_fko, broadcast_latency, compute_mklo, compute_tmklo, conscious_termination_fko,
    conscious_termination_pko_er, enumerate_placements, generate, random_static_graph, run, uniform_behaviors,
    AcceptanceParams, BehaviorPolicy, BroadcastScenario, ClassKind, GeneratorSpec, LatencyRange, NodeId, OracleView,
    Payload, Placement, TberParams, Time, TimeVaryingGraph, VerdictStatus, DEFAULT_STRICT_MAX_N,
};

const EXIT_INVARIANT: u8 = 1;
const EXIT_IMPOSSIBLE: u8 = 2;
const EXIT_UNKNOWN: u8 = 3;
const EXIT_INPUT: u8 = 4;
const EXIT_GUARD: u8 = 5;

#[derive(Parser)]
#[command(name = "dcpa", version, about = "Reliable broadcast on time-varying graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random TVG file.
    Gen(GenArgs),
    /// Check a TVG file and its declared class.
    Validate { tvg: PathBuf },
    /// Static k-level ordering of the underlying graph.
    Mklo(OrderingArgs),
    /// Temporal k-level ordering.
    Tmklo(OrderingArgs),
    /// Decide whether every correct process will deliver.
    Verdict {
        tvg: PathBuf,
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, value_enum, default_value_t = Oracle::Fko)]
        oracle: Oracle,
        #[arg(long, default_value_t = DEFAULT_STRICT_MAX_N)]
        strict_max_n: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Broadcast-latency bounds.
    Bounds {
        tvg: PathBuf,
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, value_enum, default_value_t = Method::Fko)]
        method: Method,
        /// Overrides the recurrence bound declared in the file.
        #[arg(long)]
        delta: Option<Time>,
        /// Overrides the largest latency found in the file.
        #[arg(long)]
        delta_max: Option<Time>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run one simulation.
    Simulate {
        tvg: PathBuf,
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Placement file; no Byzantine nodes when omitted.
        #[arg(long)]
        placement: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Behavior::Silent)]
        behavior: Behavior,
        #[arg(long, default_value = "forged")]
        forged: String,
        /// Defaults to the graph's horizon.
        #[arg(long)]
        horizon: Option<Time>,
        /// Write the event log as JSON lines.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Simulate every valid placement under every behavior and check the
    /// verdict and bounds against the outcomes.
    Sweep {
        tvg: PathBuf,
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value_t = DEFAULT_STRICT_MAX_N)]
        max_n: usize,
        #[arg(long, default_value = "forged")]
        forged: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    model: Model,
    #[arg(long)]
    nodes: usize,
    #[arg(long)]
    horizon: Time,
    #[arg(long)]
    seed: u64,
    /// Per-instant presence probability (random model).
    #[arg(long, default_value_t = 0.5)]
    presence: f64,
    /// Edge probability of the underlying graph (er and tber models).
    #[arg(long, default_value_t = 0.5)]
    edge_probability: f64,
    /// Recurrence bound; the largest period for the er model.
    #[arg(long, default_value_t = 3)]
    delta: Time,
    #[arg(long, default_value_t = 1)]
    latency_min: Time,
    #[arg(long, default_value_t = 1)]
    latency_max: Time,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct OrderingArgs {
    tvg: PathBuf,
    /// Source node label.
    #[arg(long)]
    source: u64,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    t_br: Time,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario file; overrides the individual flags.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Source node label.
    #[arg(long)]
    source: Option<u64>,
    #[arg(long, default_value_t = 0)]
    t_br: Time,
    #[arg(long, default_value_t = 0)]
    f: usize,
    #[arg(long, default_value = "m")]
    content: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Random,
    Er,
    Tber,
}

#[derive(Clone, Copy, ValueEnum)]
enum Oracle {
    Fko,
    Pko,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Fko,
    TberSko,
    TberPko,
}

#[derive(Clone, Copy, ValueEnum)]
enum Behavior {
    Silent,
    MuteRelay,
    ForgeContent,
    FloodForge,
}

impl Behavior {
    fn policy(self, forged: &str) -> BehaviorPolicy {
        let forged = Payload::from(forged);
        match self {
            Behavior::Silent => BehaviorPolicy::Silent,
            Behavior::MuteRelay => BehaviorPolicy::MuteRelay,
            Behavior::ForgeContent => BehaviorPolicy::ForgeContent { forged },
            Behavior::FloodForge => BehaviorPolicy::FloodForge { forged },
        }
    }
}

enum Failure {
    Input(String),
    Guard(String),
}

impl From<dcpa::Error> for Failure {
    fn from(e: dcpa::Error) -> Self {
        match e {
            dcpa::Error::TooLarge { .. } => Failure::Guard(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_tvg(path: &Path) -> CliResult<TimeVaryingGraph> {
    TimeVaryingGraph::from_json(&read(path)?).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn emit(text: &str, output: Option<&Path>) -> CliResult<()> {
    match output {
        Some(path) => fs::write(path, text).map_err(|e| Failure::Input(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn node(g: &TimeVaryingGraph, label: u64) -> CliResult<NodeId> {
    g.node_by_label(label)
        .ok_or_else(|| Failure::Input(format!("no node labelled {label}")))
}

impl ScenarioArgs {
    fn load(&self, g: &TimeVaryingGraph) -> CliResult<BroadcastScenario> {
        let sc = match &self.scenario {
            Some(path) => BroadcastScenario::from_json(&read(path)?, g)
                .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?,
            None => {
                let label = self
                    .source
                    .ok_or_else(|| Failure::Input("either --scenario or --source is required".into()))?;
                BroadcastScenario::new(node(g, label)?, self.t_br, self.f, self.content.as_str())
            }
        };
        sc.check(g)?;
        Ok(sc)
    }
}

fn cmd_gen(args: &GenArgs) -> CliResult<u8> {
    let latency = LatencyRange::new(args.latency_min, args.latency_max);
    let spec = match args.model {
        Model::Random => GeneratorSpec::Random {
            nodes: args.nodes,
            presence_probability: args.presence,
            horizon: args.horizon,
            latency,
        },
        Model::Er => GeneratorSpec::ErPeriodic {
            underlying: random_static_graph(args.nodes, args.edge_probability, args.seed)?,
            max_period: args.delta,
            horizon: args.horizon,
            latency,
        },
        Model::Tber => GeneratorSpec::Tber {
            underlying: random_static_graph(args.nodes, args.edge_probability, args.seed)?,
            delta: args.delta,
            horizon: args.horizon,
            latency,
        },
    };
    let g = generate(&spec, args.seed)?;
    emit(&g.to_json(), args.output.as_deref())?;
    Ok(0)
}

fn cmd_validate(path: &Path) -> CliResult<u8> {
    #[derive(Serialize)]
    struct Summary {
        nodes: usize,
        edges: usize,
        horizon: Time,
        class: ClassKind,
        #[serde(skip_serializing_if = "Option::is_none")]
        delta: Option<Time>,
        /// Whether the declared recurrence bound holds within the horizon.
        #[serde(skip_serializing_if = "Option::is_none")]
        class_holds: Option<bool>,
    }
    let g = load_tvg(path)?;
    let class = g.class();
    let class_holds = match class.delta {
        Some(d) if class.kind != ClassKind::Generic => Some(g.validate_tber(d)?),
        _ => None,
    };
    let summary = Summary {
        nodes: g.node_count(),
        edges: g.underlying_graph().edge_count(),
        horizon: g.horizon(),
        class: class.kind,
        delta: class.delta,
        class_holds,
    };
    emit(
        &(serde_json::to_string_pretty(&summary).expect("serializable") + "\n"),
        None,
    )?;
    if class_holds == Some(false) {
        return Err(Failure::Input(format!(
            "{}: declared recurrence bound {} does not hold within the horizon",
            path.display(),
            class.delta.unwrap_or_default()
        )));
    }
    Ok(0)
}

fn cmd_ordering(args: &OrderingArgs, temporal: bool) -> CliResult<u8> {
    let g = load_tvg(&args.tvg)?;
    let source = node(&g, args.source)?;
    let report = if temporal {
        compute_tmklo(&g, &AcceptanceParams::new(args.k, source, args.t_br)?)?.to_report(g.labels())
    } else {
        compute_mklo(&g.underlying_graph(), source, args.k)?.to_report(g.labels())
    };
    emit(&report, args.output.as_deref())?;
    Ok(0)
}

fn status_code(status: VerdictStatus) -> u8 {
    match status {
        VerdictStatus::GuaranteedSufficient | VerdictStatus::GuaranteedStrict => 0,
        VerdictStatus::Impossible => EXIT_IMPOSSIBLE,
        VerdictStatus::Unknown => EXIT_UNKNOWN,
    }
}

fn cmd_verdict(
    path: &Path,
    scenario: &ScenarioArgs,
    oracle: Oracle,
    strict_max_n: usize,
    output: Option<&Path>,
) -> CliResult<u8> {
    let g = load_tvg(path)?;
    let sc = scenario.load(&g)?;
    let verdict = match oracle {
        Oracle::Fko => conscious_termination_fko(&g, &sc, strict_max_n)?,
        Oracle::Pko => conscious_termination_pko_er(&OracleView::pko(&g), &sc, strict_max_n)?,
    };
    emit(&verdict.to_report(g.labels()), output)?;
    Ok(status_code(verdict.status))
}

fn cmd_bounds(
    path: &Path,
    scenario: &ScenarioArgs,
    method: Method,
    delta: Option<Time>,
    delta_max: Option<Time>,
    output: Option<&Path>,
) -> CliResult<u8> {
    let g = load_tvg(path)?;
    let sc = scenario.load(&g)?;
    let tber = || -> CliResult<TberParams> {
        let declared = TberParams::from_graph(&g).ok();
        let delta = delta
            .or(declared.map(|p| p.delta))
            .ok_or_else(|| Failure::Input("no recurrence bound declared; pass --delta".into()))?;
        let delta_max = delta_max
            .or(declared.map(|p| p.delta_max))
            .or(g.max_latency())
            .unwrap_or(1);
        Ok(TberParams::new(delta, delta_max)?)
    };
    let bounds = match method {
        Method::Fko => bl_bounds_fko(&g, &sc)?,
        Method::TberSko => bl_bound_tber(&OracleView::sko(&g), &tber()?, &sc, None)?,
        Method::TberPko => bl_bound_tber(&OracleView::pko(&g), &tber()?, &sc, None)?,
    };
    emit(&bounds.to_report(), output)?;
    Ok(0)
}

fn time_or_never(t: Option<Time>) -> String {
    t.map_or_else(|| "NEVER".to_string(), |t| t.to_string())
}

fn bound(t: Option<Time>) -> String {
    t.map_or_else(|| "undefined".to_string(), |t| t.to_string())
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    path: &Path,
    scenario: &ScenarioArgs,
    placement: Option<&Path>,
    behavior: Behavior,
    forged: &str,
    horizon: Option<Time>,
    trace_path: Option<&Path>,
) -> CliResult<u8> {
    let g = load_tvg(path)?;
    let sc = scenario.load(&g)?;
    let placement = match placement {
        Some(p) => Placement::from_json(&read(p)?, &g).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?,
        None => Placement::none(sc.f),
    };
    let horizon = horizon.unwrap_or(g.horizon());
    let behaviors = uniform_behaviors(&placement, &behavior.policy(forged));
    let trace = run(&g, &sc, &placement, &behaviors, horizon)?;
    if let Some(out) = trace_path {
        fs::write(out, trace.to_jsonl(&g, &sc, &placement))
            .map_err(|e| Failure::Input(format!("{}: {e}", out.display())))?;
    }
    let mut text = String::from("node\tdelivered\n");
    for p in g.nodes() {
        let cell = if placement.contains(p) {
            "byzantine".to_string()
        } else {
            time_or_never(trace.delivery_time(p))
        };
        let _ = writeln!(text, "{}\t{cell}", g.label(p));
    }
    let _ = writeln!(
        text,
        "broadcast latency: {}",
        time_or_never(broadcast_latency(&trace, &sc, &placement))
    );
    let _ = writeln!(text, "messages sent: {}", trace.messages_sent());
    emit(&text, None)?;
    Ok(0)
}

fn cmd_sweep(path: &Path, scenario: &ScenarioArgs, max_n: usize, forged: &str, output: Option<&Path>) -> CliResult<u8> {
    let g = load_tvg(path)?;
    let sc = scenario.load(&g)?;
    let verdict = conscious_termination_fko(&g, &sc, max_n)?;
    let bounds = bl_bounds_fko(&g, &sc)?;
    let placements: Vec<Placement> = enumerate_placements(&g.underlying_graph(), sc.f, sc.source, max_n)?.collect();
    let forged = Payload::from(forged);

    let mut text = String::from("byzantine\tbehavior\tbroadcast_latency\tunsafe\tnote\n");
    let (mut runs, mut violations, mut all_delivered) = (0, 0, true);
    for placement in &placements {
        for policy in BehaviorPolicy::all(&forged) {
            let trace = run(&g, &sc, placement, &uniform_behaviors(placement, &policy), g.horizon())?;
            runs += 1;
            let bl = broadcast_latency(&trace, &sc, placement);
            all_delivered &= bl.is_some();
            let unsafe_count = trace
                .deliveries()
                .iter()
                .filter(|d| !placement.contains(d.source) && (d.source != sc.source || d.content != sc.content))
                .count();
            let mut notes = Vec::new();
            if unsafe_count > 0 {
                notes.push("safety");
            }
            if verdict.status.is_guaranteed() && bl.is_none() {
                notes.push("liveness");
            }
            if bounds.upper.is_some_and(|u| bl.is_none_or(|bl| bl > u)) {
                notes.push("upper-bound");
            }
            violations += usize::from(!notes.is_empty());
            let labels: Vec<String> = placement.byzantine().iter().map(|p| g.label(*p).to_string()).collect();
            let _ = writeln!(
                text,
                "{{{}}}\t{}\t{}\t{unsafe_count}\t{}",
                labels.join(","),
                policy.name(),
                time_or_never(bl),
                if notes.is_empty() {
                    "-".to_string()
                } else {
                    notes.join(",")
                }
            );
        }
    }
    // a guaranteed delivery that never failed must not have been declared impossible
    if verdict.status == VerdictStatus::Impossible && all_delivered {
        violations += 1;
        text.push_str("verdict IMPOSSIBLE but every run delivered\n");
    }
    let _ = writeln!(
        text,
        "verdict {}; bounds [{}, {}]; {} placements, {runs} runs, {violations} violations",
        serde_json::to_value(verdict.status)
            .expect("serializable")
            .as_str()
            .unwrap_or_default(),
        bound(bounds.lower),
        bound(bounds.upper),
        placements.len()
    );
    emit(&text, output)?;
    Ok(if violations > 0 { EXIT_INVARIANT } else { 0 })
}

fn dispatch(cli: &Cli) -> CliResult<u8> {
    match &cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Validate { tvg } => cmd_validate(tvg),
        Command::Mklo(args) => cmd_ordering(args, false),
        Command::Tmklo(args) => cmd_ordering(args, true),
        Command::Verdict {
            tvg,
            scenario,
            oracle,
            strict_max_n,
            output,
        } => cmd_verdict(tvg, scenario, *oracle, *strict_max_n, output.as_deref()),
        Command::Bounds {
            tvg,
            scenario,
            method,
            delta,
            delta_max,
            output,
        } => cmd_bounds(tvg, scenario, *method, *delta, *delta_max, output.as_deref()),
        Command::Simulate {
            tvg,
            scenario,
            placement,
            behavior,
            forged,
            horizon,
            trace,
        } => cmd_simulate(
            tvg,
            scenario,
            placement.as_deref(),
            *behavior,
            forged,
            *horizon,
            trace.as_deref(),
        ),
        Command::Sweep {
            tvg,
            scenario,
            max_n,
            forged,
            output,
        } => cmd_sweep(tvg, scenario, *max_n, forged, output.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { 0 });
        }
    };
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INPUT)
        }
        Err(Failure::Guard(msg)) => {
            eprintln!("refused: {msg}");
            ExitCode::from(EXIT_GUARD)
        }
    }
}
