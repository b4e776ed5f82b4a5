//! `hardcore` command-line front end. Every subcommand prints one JSON
//! document with a run manifest embedded; failures print a JSON error object
//! on stderr and exit with 2 (usage) or 1 (numerical or domain).

mod manifest;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hardcore::backward::{backward_map, BackwardOracle, NoisyOracle, OracleSpec};
use hardcore::graph::{generate_graph, parse_graph, Graph, GraphKind};
use hardcore::polytope::{
    enumerate_facets, membership, normalization_findings, shrunken_membership, Mode,
    ReductionConfig, MEMBERSHIP_TOLERANCE,
};
use hardcore::reduction::{
    estimate_partition_function, estimate_partition_function_via_reduction,
    exact_marginals_at_zero, projected_threshold_gradient, ReductionTrace,
};
use hardcore::verify::{run_suite, Suite};
use hardcore::{HardcoreModel, MeanParams};
use serde::Serialize;
use serde_json::{json, Value};

use manifest::RunManifest;

#[derive(Parser)]
#[command(
    name = "hardcore",
    version,
    about = "Forward and backward mappings of the hard-core model, marginal-polytope geometry, and the thresholding reduction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Log-partition function, marginals and optionally the covariance at theta.
    Forward(ForwardArgs),
    /// Canonical parameters whose marginals equal mu.
    Backward(BackwardArgs),
    /// Marginal-polytope membership of x, with a certificate.
    Member(MemberArgs),
    /// Facets of the marginal polytope (p <= 6).
    Facets(GraphArg),
    /// Thresholded projected gradient run estimating the marginals at zero.
    Reduce(ReduceArgs),
    /// Partition function at zero by node-removal telescoping.
    EstimateZ(EstimateZArgs),
    /// Runs the bound-checking suite.
    Verify(VerifyArgs),
    /// Writes a graph from one of the built-in families.
    GenGraph(GenGraphArgs),
}

/// A JSON array of numbers, such as `[0.3,0.3]`.
#[derive(Clone, Debug, Serialize)]
#[serde(transparent)]
struct Vector(Vec<f64>);

fn parse_vector(s: &str) -> Result<Vector, String> {
    serde_json::from_str::<Vec<f64>>(s)
        .map(Vector)
        .map_err(|e| format!("expected a JSON array of numbers: {e}"))
}

#[derive(Args, Serialize)]
struct GraphArg {
    /// Edge-list file (`p=N` then `i j` lines) or JSON `{p, edges}`.
    #[arg(long)]
    graph: PathBuf,
}

#[derive(Args, Serialize)]
struct ForwardArgs {
    #[command(flatten)]
    #[serde(flatten)]
    graph: GraphArg,
    /// Defaults to all zeros.
    #[arg(long, value_parser = parse_vector)]
    theta: Option<Vector>,
    /// Also report the covariance matrix.
    #[arg(long)]
    cov: bool,
}

#[derive(Args, Serialize)]
struct BackwardArgs {
    #[command(flatten)]
    #[serde(flatten)]
    graph: GraphArg,
    #[arg(long, value_parser = parse_vector)]
    mu: Vector,
    /// Sup-norm tolerance on the marginal residual.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
}

#[derive(Args, Serialize)]
struct MemberArgs {
    #[command(flatten)]
    #[serde(flatten)]
    graph: GraphArg,
    #[arg(long, value_parser = parse_vector)]
    x: Vector,
    /// Also test the shrunken polytope under the desk constants.
    #[arg(long)]
    shrunken: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Serialize)]
struct ReduceArgs {
    #[command(flatten)]
    #[serde(flatten)]
    graph: GraphArg,
    /// Multiplicative oracle noise level.
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    /// `desk` or `paper` constants.
    #[arg(long, default_value = "desk")]
    mode: Mode,
    /// Iteration budget (default 1000).
    #[arg(long = "T", alias = "iterations")]
    iterations: Option<usize>,
    /// Desk mode only: pick the step and budget for this objective accuracy.
    #[arg(long, conflicts_with = "iterations")]
    delta: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the full trace here instead of printing it.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Via {
    Exact,
    Reduction,
}

#[derive(Args, Serialize)]
struct EstimateZArgs {
    #[command(flatten)]
    #[serde(flatten)]
    graph: GraphArg,
    #[arg(long, value_enum, default_value_t = Via::Exact)]
    via: Via,
    /// Iteration budget per marginal when estimating via the reduction.
    #[arg(long = "T", alias = "iterations", default_value_t = 1000)]
    iterations: usize,
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Serialize)]
struct VerifyArgs {
    /// `default` or `fast`.
    #[arg(long, default_value = "default")]
    suite: Suite,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the full report here.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct GenGraphArgs {
    /// empty, path, cycle, complete, star, random-regular, erdos-renyi.
    #[arg(long)]
    kind: String,
    #[arg(long)]
    p: usize,
    /// Degree for random-regular graphs (default 3).
    #[arg(long)]
    degree: Option<usize>,
    /// Edge probability for erdos-renyi graphs (default 0.3).
    #[arg(long)]
    edge_prob: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the edge list here, with the manifest as comment lines.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum CliError {
    Usage(String),
    Domain { kind: &'static str, message: String },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain { .. } => 1,
        }
    }

    fn to_json(&self, command: &str) -> Value {
        let (kind, message) = match self {
            CliError::Usage(m) => ("usage", m.as_str()),
            CliError::Domain { kind, message } => (*kind, message.as_str()),
        };
        json!({
            "error": {
                "command": command,
                "kind": kind,
                "message": message,
                "exit_code": self.exit_code(),
            }
        })
    }
}

fn error_kind(e: &hardcore::Error) -> &'static str {
    use hardcore::Error as E;
    match e {
        E::Malformed { .. } => "malformed",
        E::LabelOutOfRange { .. } => "label_out_of_range",
        E::SelfLoop(_) => "self_loop",
        E::DuplicateEdge(..) => "duplicate_edge",
        E::InfeasibleGraph(_) => "infeasible_graph",
        E::EnumerationCap { .. } => "enumeration_cap",
        E::FacetCap { .. } => "facet_cap",
        E::Dimension { .. } => "dimension",
        E::NodeOutOfRange { .. } => "node_out_of_range",
        E::InvalidArgument(_) => "invalid_argument",
        E::Divergence { .. } => "divergence",
        E::SingularHessian { .. } => "singular_hessian",
        E::NotConverged { .. } => "not_converged",
        E::LinearProgram(_) => "linear_program",
        E::DegenerateHull(_) => "degenerate_hull",
        E::MarginalNotBelowOne { .. } => "marginal_not_below_one",
        E::SamplerStarvation(_) => "sampler_starvation",
    }
}

impl From<hardcore::Error> for CliError {
    fn from(e: hardcore::Error) -> Self {
        CliError::Domain {
            kind: error_kind(&e),
            message: e.to_string(),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Domain {
        kind: "io",
        message: format!("{}: {e}", path.display()),
    }
}

fn load_graph(path: &Path, manifest: &mut RunManifest) -> CliResult<Graph> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::Usage(format!("cannot read graph {}: {e}", path.display())))?;
    manifest.record_input(&path.display().to_string(), &bytes);
    let text = String::from_utf8(bytes)
        .map_err(|_| CliError::Usage(format!("graph {} is not UTF-8", path.display())))?;
    let bad = |m: String| CliError::Usage(format!("graph {}: {m}", path.display()));
    if text.trim_start().starts_with('{') {
        let mut value: Value = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        // Accept the document printed by `gen-graph` as well as a bare graph.
        if let Some(inner) = value.get_mut("graph") {
            value = inner.take();
        }
        serde_json::from_value(value).map_err(|e| bad(e.to_string()))
    } else {
        parse_graph(&text).map_err(|e| bad(e.to_string()))
    }
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| io_error(path, e))
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn cmd_forward(args: ForwardArgs) -> CliResult<Value> {
    let mut m = RunManifest::new("forward", &args, None);
    let g = load_graph(&args.graph.graph, &mut m)?;
    let model = HardcoreModel::new(&g)?;
    let theta = args.theta.map_or_else(|| vec![0.0; g.p()], |v| v.0);
    let moments = model.moments(&theta, args.cov)?;
    let mut out = json!({
        "theta": theta,
        "phi": moments.log_partition,
        "mu": moments.mu,
    });
    if args.cov {
        let cov = model.covariance(&theta)?;
        out["cov"] = json!(cov);
    }
    Ok(m.wrap(out))
}

fn cmd_backward(args: BackwardArgs) -> CliResult<Value> {
    let mut m = RunManifest::new("backward", &args, None);
    let g = load_graph(&args.graph.graph, &mut m)?;
    let model = HardcoreModel::new(&g)?;
    let mu = MeanParams::new(args.mu.0)?;
    let sol = backward_map(&model, &mu, args.tol)?;
    Ok(m.wrap(json!({
        "mu": mu.to_vec(),
        "theta": sol.theta.to_vec(),
        "iterations": sol.iterations,
        "converged": sol.converged,
        "final_grad_norm": sol.final_grad_norm,
    })))
}

fn cmd_member(args: MemberArgs) -> CliResult<Value> {
    let mut m = RunManifest::new("member", &args, None);
    let g = load_graph(&args.graph.graph, &mut m)?;
    let model = HardcoreModel::new(&g)?;
    let x = &args.x.0;
    let verdict = membership(model.family(), x, MEMBERSHIP_TOLERANCE)?;
    let vertices: Vec<Vec<usize>> = model
        .family()
        .sets()
        .iter()
        .map(|&s| {
            (0..g.p())
                .filter(|i| s >> i & 1 == 1)
                .map(|i| i + 1)
                .collect()
        })
        .collect();
    let mut out = json!({
        "x": x,
        "status": verdict.status,
        "certificate": verdict.certificate,
        "margin": verdict.margin,
        "vertices": vertices,
    });
    if args.shrunken {
        let cfg = ReductionConfig::desk(g.p(), 1)?;
        out["shrunken"] = json!({
            "epsilon": cfg.epsilon,
            "q": cfg.q,
            "inside": shrunken_membership(model.family(), x, &cfg)?,
        });
    }
    Ok(m.wrap(out))
}

fn cmd_facets(args: GraphArg) -> CliResult<Value> {
    let mut m = RunManifest::new("facets", &args, None);
    let g = load_graph(&args.graph, &mut m)?;
    let model = HardcoreModel::new(&g)?;
    let facets = enumerate_facets(model.family())?;
    let odd = normalization_findings(&facets);
    Ok(m.wrap(json!({
        "graph": g,
        "count": facets.len(),
        "facets": facets,
        "normalization_counterexamples": odd,
    })))
}

fn reduce_config(args: &ReduceArgs, p: usize) -> CliResult<ReductionConfig> {
    let cfg = match (args.mode, args.delta) {
        (Mode::Desk, Some(delta)) => ReductionConfig::desk_for_accuracy(p, delta)?,
        (Mode::Desk, None) => ReductionConfig::desk(p, args.iterations.unwrap_or(1000))?,
        (Mode::Paper, Some(_)) => {
            return Err(CliError::Usage("--delta applies to desk mode only".into()))
        }
        (Mode::Paper, None) => {
            ReductionConfig::paper(p)?.with_iterations(args.iterations.unwrap_or(1000))?
        }
    };
    if cfg.iterations == 0 {
        return Err(CliError::Usage("--T must be at least 1".into()));
    }
    Ok(cfg.with_gamma(args.gamma)?)
}

fn trace_csv(trace: &ReductionTrace, manifest: &Value) -> String {
    let p = trace.config.p;
    let mut out = format!("# manifest: {manifest}\n");
    let cols = |prefix: &'static str| (1..=p).map(move |i| format!("{prefix}_{i}"));
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain(cols("x"))
        .chain(cols("theta_hat"))
        .chain(cols("average"))
        .collect();
    out.push_str(&header.join(","));
    out.push('\n');
    let blank = vec![String::new(); p];
    let fmt = |v: Option<&Vec<f64>>| {
        v.map_or_else(|| blank.clone(), |v| v.iter().map(f64::to_string).collect())
    };
    for (t, x) in trace.iterates.iter().enumerate() {
        let row: Vec<String> = std::iter::once((t + 1).to_string())
            .chain(fmt(Some(x)))
            .chain(fmt(trace.oracle_outputs.get(t)))
            .chain(fmt(trace.averages.get(t)))
            .collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

fn cmd_reduce(args: ReduceArgs) -> CliResult<(Value, Option<CliError>)> {
    let mut m = RunManifest::new("reduce", &args, Some(args.seed));
    let g = load_graph(&args.graph.graph, &mut m)?;
    let model = HardcoreModel::new(&g)?;
    let cfg = reduce_config(&args, g.p())?;
    let mut oracle = NoisyOracle::new(
        &model,
        OracleSpec {
            gamma: args.gamma,
            seed: args.seed,
        },
    )?;
    let trace = projected_threshold_gradient(&mut oracle, &cfg)?;
    let exact = exact_marginals_at_zero(&g)?;
    let mut summary = json!({
        "config": cfg,
        "estimate": trace.final_estimate,
        "exact_marginals": exact,
        "error_vs_exact": sup_diff(&trace.final_estimate, &exact),
        "error_bound": cfg.marginal_error_bound(),
        "oracle_calls": oracle.calls(),
        "stated_oracle_calls": cfg.stated_oracle_calls(),
        "argued_iterations": cfg.argued_iterations(),
        "failure": trace.failure,
    });
    let failure = trace.failure.as_ref().map(|f| CliError::Domain {
        kind: "oracle_failure",
        message: format!("oracle failed at iterate {}: {}", f.step, f.message),
    });
    let with_iterates = |mut v: Value| {
        v["iterates"] = json!(trace.iterates);
        v["averages"] = json!(trace.averages);
        v["oracle_outputs"] = json!(trace.oracle_outputs);
        v
    };
    match &args.trace {
        Some(path) => {
            let full = m.wrap(with_iterates(summary.clone()));
            let contents = match args.format {
                Format::Json => pretty(&full),
                Format::Csv => trace_csv(&trace, &full["manifest"]),
            };
            write_file(path, &contents)?;
            summary["trace_file"] = json!(path.display().to_string());
            Ok((m.wrap(summary), failure))
        }
        None => Ok((m.wrap(with_iterates(summary)), failure)),
    }
}

fn cmd_estimate_z(args: EstimateZArgs) -> CliResult<Value> {
    let seed = matches!(args.via, Via::Reduction).then_some(args.seed);
    let mut m = RunManifest::new("estimate-z", &args, seed);
    let g = load_graph(&args.graph.graph, &mut m)?;
    let est = match args.via {
        Via::Exact => estimate_partition_function(&g, exact_marginals_at_zero)?,
        Via::Reduction => {
            estimate_partition_function_via_reduction(&g, args.iterations, args.gamma, args.seed)?
        }
    };
    let exact_log_z = HardcoreModel::new(&g)?.log_partition(&vec![0.0; g.p()])?;
    let exact_z = exact_log_z.exp();
    Ok(m.wrap(json!({
        "via": args.via,
        "Z": est.z,
        "log_Z": est.log_z,
        "steps": est.steps,
        "exact_Z": exact_z,
        "relative_error": (est.z - exact_z).abs() / exact_z,
    })))
}

fn cmd_verify(args: VerifyArgs) -> CliResult<(Value, Option<CliError>)> {
    let m = RunManifest::new("verify", &args, Some(args.seed));
    let report = run_suite(args.suite, args.seed)?;
    let mut summary = json!({
        "suite": report.suite,
        "seed": report.seed,
        "summary": report.summary,
        "passed": report.passed,
    });
    if let Some(path) = &args.report {
        let full = serde_json::to_value(&report).expect("report serializes");
        write_file(path, &pretty(&m.wrap(full)))?;
        summary["report_file"] = json!(path.display().to_string());
    }
    let failure = (!report.passed).then(|| {
        let failing: Vec<&str> = report
            .summary
            .iter()
            .filter(|s| !s.passed)
            .map(|s| s.check.as_str())
            .collect();
        CliError::Domain {
            kind: "verification_failed",
            message: format!("failing checks: {}", failing.join(", ")),
        }
    });
    Ok((m.wrap(summary), failure))
}

fn cmd_gen_graph(args: GenGraphArgs) -> CliResult<Value> {
    let m = RunManifest::new("gen-graph", &args, Some(args.seed));
    let kind = match (GraphKind::from_str(&args.kind), args.degree, args.edge_prob) {
        (Err(e), _, _) => return Err(CliError::Usage(e.to_string())),
        (Ok(GraphKind::RandomRegular { .. }), Some(degree), None) => {
            GraphKind::RandomRegular { degree }
        }
        (Ok(GraphKind::ErdosRenyi { .. }), None, Some(edge_prob)) => {
            GraphKind::ErdosRenyi { edge_prob }
        }
        (Ok(kind), None, None) => kind,
        (Ok(_), _, _) => {
            return Err(CliError::Usage(
                "--degree applies to random-regular and --edge-prob to erdos-renyi".into(),
            ))
        }
    };
    let g = generate_graph(kind, args.p, args.seed)?;
    let mut out = json!({ "graph": g, "edge_list": g.to_edge_list() });
    if let Some(path) = &args.out {
        let doc = m.wrap(json!({}));
        let contents = format!("# manifest: {}\n{}", doc["manifest"], g.to_edge_list());
        write_file(path, &contents)?;
        out["file"] = json!(path.display().to_string());
    }
    Ok(m.wrap(out))
}

fn run(command: Command) -> CliResult<(Value, Option<CliError>)> {
    let plain = |v: CliResult<Value>| v.map(|v| (v, None));
    match command {
        Command::Forward(a) => plain(cmd_forward(a)),
        Command::Backward(a) => plain(cmd_backward(a)),
        Command::Member(a) => plain(cmd_member(a)),
        Command::Facets(a) => plain(cmd_facets(a)),
        Command::Reduce(a) => cmd_reduce(a),
        Command::EstimateZ(a) => plain(cmd_estimate_z(a)),
        Command::Verify(a) => cmd_verify(a),
        Command::GenGraph(a) => plain(cmd_gen_graph(a)),
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Forward(_) => "forward",
        Command::Backward(_) => "backward",
        Command::Member(_) => "member",
        Command::Facets(_) => "facets",
        Command::Reduce(_) => "reduce",
        Command::EstimateZ(_) => "estimate-z",
        Command::Verify(_) => "verify",
        Command::GenGraph(_) => "gen-graph",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = command_name(&cli.command);
    // A run can print its result and still fail (a verification violation
    // or an oracle failure partway through a trace).
    let failure = match run(cli.command) {
        Ok((doc, failure)) => {
            print!("{}", pretty(&doc));
            failure
        }
        Err(e) => Some(e),
    };
    match failure {
        None => ExitCode::SUCCESS,
        Some(e) => {
            eprint!("{}", pretty(&e.to_json(name)));
            ExitCode::from(e.exit_code())
        }
    }
}
