//! Command-line front end.
//!
//! Exit codes: 0 success, 1 verification reject, 2 usage error, 3 I/O error.
//! Failures are reported on stderr as one JSON object.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde_json::json;

use vinf::attacks::{
    pass_rate_table, run_attack, write_report_csv, AttackConfig, AttackMethod, Metric, OptimizerKind, TABLE1_THRESHOLDS,
    TABLE2_THRESHOLDS,
};
use vinf::bench::{run_bench, BenchConfig};
use vinf::model::io::{parse_query, read_model, read_trace, write_model, write_trace, FormatError, QuerySet};
use vinf::model::{Activation, Architecture, Model, OutputFn};
use vinf::path_test::{Challenge, PathSampling, DEFAULT_TOL};
use vinf::protocol::{commit_model, gen_params, prove1, prove2, verify, ProtocolConfig, PublicParams, Transcript};
use vinf::refereed::{run_bisection, Referee, RefereeError, TraceParty};
use vinf::separation::report::write_jsonl;
use vinf::separation::{run_family, DatasetBuilder, TestConfig};

#[derive(Parser)]
#[command(name = "vinf", version, about = "Verifiable inference by random path testing")]
struct Cli {
    /// Worker threads for hashing and attack rounds (default: logical cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random dense model
    GenModel(GenModelArgs),
    /// Print the commitment to a model
    CommitModel(CommitModelArgs),
    /// Evaluate a model and write its execution trace
    Trace(TraceArgs),
    /// Prover, round 1: commit to the trace and write a partial transcript
    Prove(ProveArgs),
    /// Verifier: add a challenge to a partial transcript
    Challenge(ChallengeArgs),
    /// Prover, round 2: answer the challenge
    Respond(RespondArgs),
    /// Verifier: check a full transcript
    Verify(VerifyArgs),
    /// Run the two-prover bisection game on two traces
    Referee(RefereeArgs),
    /// Estimate separation thresholds against adversarial models
    Estimate(EstimateArgs),
    /// Run a trace-forgery attack and print the pass-rate table
    Attack(AttackArgs),
    /// Benchmark the row-wise commitment on a synthetic trace
    Bench(BenchArgs),
}

#[derive(Args)]
struct ParamArgs {
    /// Security parameter recorded in the public parameters
    #[arg(long, default_value_t = 128)]
    lambda: u32,
    /// Paths checked per challenge
    #[arg(long, default_value_t = 1)]
    num_paths: usize,
    /// Tolerance of each local check
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    /// Bit-exact local checks (same as --tol 0)
    #[arg(long)]
    strict: bool,
    /// How output nodes are assigned to paths
    #[arg(long, value_enum, default_value_t = PathSampling::Independent)]
    sampling: PathSampling,
}

impl ParamArgs {
    fn params(&self) -> Result<PublicParams> {
        let cfg = ProtocolConfig {
            num_paths: self.num_paths,
            tol: if self.strict { 0.0 } else { self.tol },
            sampling: self.sampling,
        };
        gen_params(self.lambda, cfg).map_err(|e| usage(e.to_string()))
    }
}

#[derive(Args)]
struct GenModelArgs {
    /// Layer widths, input first, e.g. 4,64,32,3
    #[arg(long, value_delimiter = ',', required = true)]
    arch: Vec<usize>,
    /// Hidden-layer activation
    #[arg(long, value_enum, default_value_t = Activation::Relu)]
    hidden: Activation,
    /// Output function applied to the last layer
    #[arg(long, value_enum, default_value_t = OutputFn::Identity)]
    out_fn: OutputFn,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file (.bin or .mdl for binary, JSON otherwise)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CommitModelArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    params: ParamArgs,
    /// Write the hex commitment here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TraceArgs {
    #[arg(long)]
    model: PathBuf,
    /// Query file: JSON array, query-set JSON (first query) or comma-separated numbers
    #[arg(long)]
    query: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ProveArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    query: PathBuf,
    #[command(flatten)]
    params: ParamArgs,
    /// Partial transcript to write
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ChallengeArgs {
    #[arg(long)]
    transcript: PathBuf,
    /// Derive the challenge from this seed instead of OS randomness
    #[arg(long, conflicts_with = "rho")]
    seed: Option<u64>,
    /// Use this 64-hex-digit challenge
    #[arg(long)]
    rho: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RespondArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    transcript: PathBuf,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    /// Full transcript to check
    #[arg(long, required_unless_present = "self_play")]
    transcript: Option<PathBuf>,
    #[command(flatten)]
    params: ParamArgs,
    /// Expected model commitment (hex, or a file holding it)
    #[arg(long)]
    commitment: Option<String>,
    /// Run all three rounds honestly in-process
    #[arg(long, requires_all = ["model", "query"])]
    self_play: bool,
    /// Model for --self-play
    #[arg(long)]
    model: Option<PathBuf>,
    /// Query for --self-play
    #[arg(long)]
    query: Option<PathBuf>,
    /// Challenge seed for --self-play
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the --self-play transcript here
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RefereeArgs {
    #[arg(long)]
    model: PathBuf,
    /// Trace claimed by prover 1 (VINF-TRC)
    #[arg(long)]
    p1_trace: PathBuf,
    /// Trace claimed by prover 2 (VINF-TRC)
    #[arg(long)]
    p2_trace: PathBuf,
    #[arg(long)]
    query: PathBuf,
    /// Tolerance of the final local check
    #[arg(long, default_value_t = 0.0)]
    tol: f64,
    /// Write the session log (JSON lines) here
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    /// The honest model
    #[arg(long)]
    model: PathBuf,
    /// Adversarial models (repeat the flag for several)
    #[arg(long = "adv-model", required = true)]
    adv_models: Vec<PathBuf>,
    /// Query-set JSON file
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    eps_sep: f64,
    #[arg(long)]
    eps_target: f64,
    /// Path tests per adversarial trace
    #[arg(long, default_value_t = 50)]
    repetitions: usize,
    #[arg(long, default_value_t = 1)]
    num_paths: usize,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long, value_enum, default_value_t = PathSampling::Independent)]
    sampling: PathSampling,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the separation dataset (JSON lines) here
    #[arg(long)]
    dataset_out: Option<PathBuf>,
}

#[derive(Args)]
struct AttackArgs {
    #[arg(long, value_enum)]
    method: AttackMethod,
    #[arg(long)]
    model: PathBuf,
    /// Query-set JSON file
    #[arg(long)]
    queries: PathBuf,
    /// Config file (JSON or key = value lines); flags below override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use only the first N queries
    #[arg(long)]
    inputs: Option<usize>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    l2_lambda: Option<f64>,
    #[arg(long)]
    convergence_loss: Option<f64>,
    #[arg(long, value_enum)]
    optimizer: Option<OptimizerKind>,
    #[arg(long)]
    seed: Option<u64>,
    /// Pass-rate thresholds (default depends on the method)
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,
    /// Per-round separation CSV
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Pass-rate table as JSON
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Shape {
    LlamaSynthetic,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum, default_value_t = Shape::LlamaSynthetic)]
    shape: Shape,
    /// Thread counts to time the commitment with
    #[arg(long, value_delimiter = ',', default_value = "1,8")]
    commit_threads: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the JSON report here
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A failure with its exit code and category.
#[derive(Debug)]
struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}

fn usage(message: impl Into<String>) -> anyhow::Error {
    Failure {
        code: 2,
        kind: "usage",
        message: message.into(),
    }
    .into()
}

fn classify(err: &anyhow::Error) -> (u8, &'static str) {
    for cause in err.chain() {
        if let Some(f) = cause.downcast_ref::<Failure>() {
            return (f.code, f.kind);
        }
        if let Some(f) = cause.downcast_ref::<FormatError>() {
            return match f {
                FormatError::Io { .. } => (3, "io"),
                FormatError::Parse(_) => (3, "parse"),
                FormatError::Model(_) => (2, "usage"),
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return (3, "io");
        }
    }
    (2, "usage")
}

/// Joins the error chain, skipping causes already spelled out by their parent.
fn chain_message(err: &anyhow::Error) -> String {
    let mut message = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if message.contains(&text) {
            continue;
        }
        if !message.is_empty() {
            message.push_str(": ");
        }
        message.push_str(&text);
    }
    message
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let msg = e.render().to_string();
            eprintln!("{}", json!({"error": {"kind": "usage", "message": msg.trim_end()}}));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            let (code, kind) = classify(&err);
            eprintln!("{}", json!({"error": {"kind": kind, "message": chain_message(&err)}}));
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| usage(e.to_string()))?;
    }
    match cli.command {
        Command::GenModel(a) => gen_model(a),
        Command::CommitModel(a) => commit_model_cmd(a),
        Command::Trace(a) => trace_cmd(a),
        Command::Prove(a) => prove(a),
        Command::Challenge(a) => challenge(a),
        Command::Respond(a) => respond(a),
        Command::Verify(a) => verify_cmd(a),
        Command::Referee(a) => referee(a),
        Command::Estimate(a) => estimate(a),
        Command::Attack(a) => attack(a),
        Command::Bench(a) => bench(a),
    }
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn read_query(path: &Path) -> Result<Vec<f32>> {
    let text = fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    parse_query(&text).with_context(|| format!("query file {}", path.display()))
}

fn load_model(path: &Path) -> Result<Model> {
    read_model(path).with_context(|| format!("model file {}", path.display()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| FormatError::io(path, e).into())
}

fn gen_model(a: GenModelArgs) -> Result<u8> {
    let arch = Architecture::dense(&a.arch, a.hidden, a.out_fn).map_err(|e| usage(e.to_string()))?;
    let model = Model::random(&arch, a.seed);
    write_model(&a.out, &model)?;
    print_json(&json!({"out": a.out, "widths": arch.widths(), "nodes": arch.total_nodes()}))?;
    Ok(0)
}

fn commit_model_cmd(a: CommitModelArgs) -> Result<u8> {
    let model = load_model(&a.model)?;
    let pp = a.params.params()?;
    let cm = commit_model(&pp, &model)?;
    match a.out {
        Some(p) => write_file(&p, format!("{}\n", cm.to_hex()).as_bytes())?,
        None => println!("{}", cm.to_hex()),
    }
    Ok(0)
}

fn trace_cmd(a: TraceArgs) -> Result<u8> {
    let model = load_model(&a.model)?;
    let qry = read_query(&a.query)?;
    let trace = model.eval_trace(&qry).map_err(|e| usage(e.to_string()))?;
    write_trace(&a.out, &trace)?;
    let output = trace.output(model.architecture())?;
    print_json(&json!({"out": a.out, "output": output}))?;
    Ok(0)
}

fn prove(a: ProveArgs) -> Result<u8> {
    let model = load_model(&a.model)?;
    let qry = read_query(&a.query)?;
    let pp = a.params.params()?;
    let cm = commit_model(&pp, &model)?;
    let (proof1, _) = prove1(&pp, &model, &qry).map_err(|e| usage(e.to_string()))?;
    let t = Transcript {
        pp_hash: pp.digest(),
        cm,
        qry,
        proof1,
        rho: None,
        proof2: None,
    };
    t.write(&a.out)?;
    print_json(&json!({"out": a.out, "claimed_output": t.proof1.claimed_output}))?;
    Ok(0)
}

fn read_transcript(path: &Path) -> Result<Transcript> {
    Transcript::read(path).with_context(|| format!("transcript {}", path.display()))
}

fn parse_rho(text: &str) -> Result<Challenge> {
    Challenge::from_hex(text.trim()).map_err(|e| usage(format!("--rho: {e}")))
}

fn challenge(a: ChallengeArgs) -> Result<u8> {
    let mut t = read_transcript(&a.transcript)?;
    if t.rho.is_some() {
        return Err(usage("transcript already has a challenge"));
    }
    let rho = match (&a.rho, a.seed) {
        (Some(hex), _) => parse_rho(hex)?,
        (None, Some(seed)) => Challenge::random(&mut ChaCha20Rng::seed_from_u64(seed)),
        (None, None) => Challenge::random(&mut rand::rng()),
    };
    t.rho = Some(rho);
    t.write(&a.out)?;
    print_json(&json!({"out": a.out, "rho": rho.to_hex()}))?;
    Ok(0)
}

fn respond(a: RespondArgs) -> Result<u8> {
    let model = load_model(&a.model)?;
    let pp = a.params.params()?;
    let mut t = read_transcript(&a.transcript)?;
    if t.pp_hash != pp.digest() {
        return Err(usage("transcript was produced under different public parameters"));
    }
    let rho = t.rho.ok_or_else(|| usage("transcript has no challenge yet"))?;
    if t.proof2.is_some() {
        return Err(usage("transcript already has a response"));
    }
    if commit_model(&pp, &model)? != t.cm {
        return Err(usage("model does not match the commitment in the transcript"));
    }
    let (proof1, state) = prove1(&pp, &model, &t.qry).map_err(|e| usage(e.to_string()))?;
    if proof1 != t.proof1 {
        return Err(usage("model and query do not reproduce the first proof message"));
    }
    let proof2 = prove2(&state, &rho)?;
    let openings = proof2.num_openings();
    t.proof2 = Some(proof2);
    t.write(&a.out)?;
    print_json(&json!({"out": a.out, "openings": openings}))?;
    Ok(0)
}

fn reject(reason: &str, detail: String) -> Result<u8> {
    print_json(&json!({"accept": false, "reason": reason, "detail": detail}))?;
    Ok(1)
}

fn verify_cmd(a: VerifyArgs) -> Result<u8> {
    let pp = a.params.params()?;
    let t = if a.self_play {
        let model = load_model(a.model.as_deref().expect("required by clap"))?;
        let qry = read_query(a.query.as_deref().expect("required by clap"))?;
        let rho = Challenge::random(&mut ChaCha20Rng::seed_from_u64(a.seed));
        let (t, _) = vinf::protocol::self_play(&pp, &model, &qry, &rho).map_err(|e| usage(e.to_string()))?;
        if let Some(out) = &a.out {
            t.write(out)?;
        }
        t
    } else {
        let path = a.transcript.as_deref().expect("required by clap");
        let bytes = fs::read(path).map_err(|e| FormatError::io(path, e))?;
        match Transcript::from_bytes(&bytes) {
            Ok(t) => t,
            Err(FormatError::Parse(e)) => return reject("malformed", e.to_string()),
            Err(e) => return Err(e.into()),
        }
    };
    if t.pp_hash != pp.digest() {
        return reject("params-mismatch", "transcript was produced under different public parameters".into());
    }
    if let Some(expected) = &a.commitment {
        let expected = if Path::new(expected).is_file() {
            fs::read_to_string(expected).map_err(|e| FormatError::io(Path::new(expected), e))?
        } else {
            expected.clone()
        };
        if !expected.trim().eq_ignore_ascii_case(&t.cm.to_hex()) {
            return reject("commitment-mismatch", format!("transcript commits to {}", t.cm.to_hex()));
        }
    }
    let (Some(rho), Some(proof2)) = (&t.rho, &t.proof2) else {
        return reject("incomplete", "transcript lacks the challenge or the response".into());
    };
    let verdict = verify(&pp, &t.cm, &t.qry, &t.proof1.claimed_output, &t.proof1, rho, proof2);
    print_json(&verdict)?;
    Ok(if verdict.accept { 0 } else { 1 })
}

fn referee(a: RefereeArgs) -> Result<u8> {
    let model = load_model(&a.model)?;
    let qry = read_query(&a.query)?;
    let t1 = read_trace(&a.p1_trace).with_context(|| format!("trace {}", a.p1_trace.display()))?;
    let t2 = read_trace(&a.p2_trace).with_context(|| format!("trace {}", a.p2_trace.display()))?;
    let pp = gen_params(128, ProtocolConfig::default())?;
    let mut referee = Referee::new(commit_model(&pp, &model)?).with_tol(a.tol);
    let mut p1 = TraceParty::with_values(&model, t1.values());
    let mut p2 = TraceParty::with_values(&model, t2.values());
    let result = run_bisection(&mut p1, &mut p2, &mut referee, &qry);
    if let Some(path) = &a.log {
        let mut buf = Vec::new();
        referee.write_log(&mut buf)?;
        write_file(path, &buf)?;
    }
    match result {
        Ok(v) => print_json(&v)?,
        Err(RefereeError::NoDispute) => print_json(&json!({"dispute": false}))?,
        Err(e) => return Err(usage(e.to_string())),
    }
    Ok(0)
}

fn estimate(a: EstimateArgs) -> Result<u8> {
    let model = load_model(&a.model)?;
    let advs = a.adv_models.iter().map(|p| load_model(p)).collect::<Result<Vec<_>>>()?;
    let queries = QuerySet::read(&a.queries).with_context(|| format!("query file {}", a.queries.display()))?.queries;
    if !(0.0..1.0).contains(&a.eps_sep) || !(0.0..=1.0).contains(&a.eps_target) {
        return Err(usage("--eps-sep must be in [0, 1) and --eps-target in [0, 1]"));
    }
    let cfg = TestConfig {
        repetitions: a.repetitions,
        num_paths: a.num_paths,
        tol: a.tol,
        sampling: a.sampling,
        seed: a.seed,
    };
    let builder = DatasetBuilder::default();
    if let Some(path) = &a.dataset_out {
        let ds = builder.build(&model, &advs, &queries).map_err(|e| usage(e.to_string()))?;
        let mut buf = Vec::new();
        write_jsonl(&ds.records, &mut buf)?;
        write_file(path, &buf)?;
    }
    let result = run_family(&model, &advs, &queries, &builder, a.eps_sep, a.eps_target, &cfg).map_err(|e| usage(e.to_string()))?;
    print_json(&result)?;
    Ok(0)
}

fn attack(a: AttackArgs) -> Result<u8> {
    let model = load_model(&a.model)?;
    let mut queries = QuerySet::read(&a.queries).with_context(|| format!("query file {}", a.queries.display()))?.queries;
    if let Some(n) = a.inputs {
        queries.truncate(n);
    }
    let mut cfg = match &a.config {
        Some(p) => AttackConfig::read_or(p, a.method).map_err(|e| anyhow!(Failure { code: 3, kind: "parse", message: e.to_string() }))?,
        None => AttackConfig::preset(a.method),
    };
    if a.config.is_some() && cfg.method != a.method {
        bail!(usage(format!(
            "config selects method {} but --method is {}",
            method_name(cfg.method),
            method_name(a.method)
        )));
    }
    cfg.method = a.method;
    cfg.rounds = a.rounds.unwrap_or(cfg.rounds);
    cfg.max_iters = a.max_iters.unwrap_or(cfg.max_iters);
    cfg.learning_rate = a.learning_rate.unwrap_or(cfg.learning_rate);
    cfg.l2_lambda = a.l2_lambda.unwrap_or(cfg.l2_lambda);
    cfg.convergence_loss = a.convergence_loss.unwrap_or(cfg.convergence_loss);
    cfg.optimizer = a.optimizer.unwrap_or(cfg.optimizer);
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    cfg.validate().map_err(|e| usage(e.to_string()))?;

    let results = run_attack(&model, &queries, &cfg).map_err(|e| usage(e.to_string()))?;
    let thresholds = a.thresholds.unwrap_or_else(|| match a.method.inverse() {
        Some(_) => TABLE2_THRESHOLDS.to_vec(),
        None => TABLE1_THRESHOLDS.to_vec(),
    });
    let table = pass_rate_table(&results, &thresholds, &Metric::ALL).map_err(|e| usage(e.to_string()))?;
    print!("{}", table.render());
    if let Some(p) = &a.csv {
        let mut buf = Vec::new();
        write_report_csv(&results, &mut buf)?;
        write_file(p, &buf)?;
    }
    if let Some(p) = &a.json {
        write_file(p, &serde_json::to_vec_pretty(&json!({"config": cfg, "table": table, "results": results}))?)?;
    }
    Ok(0)
}

fn method_name(m: AttackMethod) -> String {
    clap::ValueEnum::to_possible_value(&m).map_or_else(|| format!("{m:?}"), |v| v.get_name().to_string())
}

fn bench(a: BenchArgs) -> Result<u8> {
    let cfg = match a.shape {
        Shape::LlamaSynthetic => BenchConfig {
            threads: a.commit_threads,
            seed: a.seed,
            ..BenchConfig::llama_synthetic()
        },
    };
    let report = run_bench(&cfg).map_err(|e| usage(e.to_string()))?;
    if let Some(p) = &a.out {
        write_file(p, &serde_json::to_vec_pretty(&report)?)?;
    }
    print_json(&report)?;
    Ok(0)
}
