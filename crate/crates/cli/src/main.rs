//! `swarmcommand`: validate trees, run scenarios, evaluate corpora, generate
//! synthetic data and serve the session API.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use swarmcommand_core::bt_runtime::RunOutcome;
use swarmcommand_core::datagen::{self, BehaviorWeights, TemplateBank};
use swarmcommand_core::eval::{self, parse_reports_json, render_report, ReportFormat, TABLE3_SUMMARY_JSON};
use swarmcommand_core::nl_pipeline::{CommandInput, Pipeline, PipelineConfig};
use swarmcommand_core::swarm_sim::{load_scenario, run_scenario, DEFAULT_SEED, TICK_BUDGET};
use swarmcommand_core::{default_whitelist, parse_document, BehaviorTree, NodeWhitelist};

/// Exit codes. Validation failures use the category codes 1..=4.
mod code {
    pub const OK: u8 = 0;
    pub const SAFETY_REJECTED: u8 = 5;
    pub const SCENARIO_FAILED: u8 = 10;
    pub const TIMEOUT: u8 = 11;
    pub const USAGE: u8 = 64;
    pub const DATA: u8 = 65;
    pub const UNAVAILABLE: u8 = 69;
    pub const INTERNAL: u8 = 70;
    pub const CANT_CREATE: u8 = 73;
    pub const CONFIG: u8 = 78;
}

#[derive(Debug, Parser)]
#[command(name = "swarmcommand", version, about = "Natural-language control of simulated robot swarms")]
struct Cli {
    /// Pipeline configuration (JSON).
    #[arg(long, global = true, env = "SWARMCOMMAND_CONFIG")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a behavior-tree document against the parser gate.
    Validate(ValidateArgs),
    /// Execute a tree in one of the five scenarios.
    Run(RunArgs),
    /// Score a corpus and render the comparison grid.
    Eval(EvalArgs),
    /// Write a synthetic instruction/tree corpus as JSON lines.
    Datagen(DatagenArgs),
    /// Start the HTTP/WebSocket session service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct ValidateArgs {
    file: PathBuf,
    /// Whitelist file replacing the default vocabulary.
    #[arg(long)]
    whitelist: Option<PathBuf>,
    /// Print the full validation report as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    scenario: u8,
    /// Tree document; the scenario's reference tree when neither this nor
    /// --from-llm is given.
    #[arg(long, conflicts_with = "from_llm")]
    tree: Option<PathBuf>,
    /// Generate the tree from a command through the full pipeline.
    #[arg(long = "from-llm", value_name = "COMMAND")]
    from_llm: Option<String>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = TICK_BUDGET)]
    ticks: u64,
    /// Accepted for compatibility; runs are always headless.
    #[arg(long)]
    headless: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// JSON-lines corpus.
    #[arg(long, required_unless_present = "fixture", conflicts_with = "fixture")]
    corpus: Option<PathBuf>,
    /// Render a bundled summary instead of scoring a corpus.
    #[arg(long, value_parser = ["table3"])]
    fixture: Option<String>,
    #[arg(long, default_value = "table")]
    format: ReportFormat,
    #[arg(long, default_value = "model,shots")]
    group_by: String,
    /// Fill missing candidates from the configured model.
    #[arg(long)]
    generate: bool,
    /// Shot settings used with --generate.
    #[arg(long, value_delimiter = ',', default_values_t = [0u8])]
    shots: Vec<u8>,
    /// Label for generated candidates.
    #[arg(long)]
    model_label: Option<String>,
}

#[derive(Debug, Args)]
struct DatagenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: u64,
    /// Output file, or `-` for stdout.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
    /// JSON map of behavior name to weight.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Template bank replacing the bundled one.
    #[arg(long)]
    bank: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value_t = swarmcommand_service::DEFAULT_STEPS_PER_SECOND)]
    steps_per_second: f64,
    /// Directory for per-session audit logs.
    #[arg(long)]
    audit_dir: Option<PathBuf>,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

type CmdResult = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { code::USAGE } else { code::OK });
        }
    };
    let default_level = if matches!(cli.command, Command::Serve(_)) { "info" } else { "warn" };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default_level)),
        )
        .init();

    let result = match &cli.command {
        Command::Validate(a) => validate(a),
        Command::Run(a) => run(&cli, a),
        Command::Eval(a) => evaluate(&cli, a),
        Command::Datagen(a) => generate(a),
        Command::Serve(a) => serve(&cli, a),
    };
    match result {
        Ok(c) => ExitCode::from(c),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn read_input(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::new(code::USAGE, format!("cannot read {}: {e}", path.display())))
}

fn pipeline_config(cli: &Cli) -> Result<PipelineConfig, Failure> {
    let cfg = match &cli.config {
        Some(p) if !p.exists() => {
            return Err(Failure::new(code::USAGE, format!("config file {} not found", p.display())))
        }
        Some(p) => PipelineConfig::from_path(p).map_err(|e| Failure::new(code::CONFIG, e.to_string()))?,
        None => PipelineConfig::default(),
    };
    Ok(cfg.with_env_overrides())
}

fn pipeline(cli: &Cli) -> Result<Pipeline, Failure> {
    Pipeline::from_config(pipeline_config(cli)?).map_err(|e| Failure::new(code::CONFIG, e.to_string()))
}

fn validate(args: &ValidateArgs) -> CmdResult {
    let text = read_input(&args.file)?;
    let whitelist = match &args.whitelist {
        Some(p) => NodeWhitelist::from_path(p).map_err(|e| Failure::new(code::USAGE, e.to_string()))?,
        None => default_whitelist(),
    };
    let report = parse_document(&text, &whitelist);
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report).map_err(internal)?);
    } else {
        match report.category {
            None => println!("accepted"),
            Some(c) => {
                println!("rejected: {}", c.label());
                for d in &report.diagnostics {
                    println!("  {d}");
                }
            }
        }
    }
    Ok(report.category.map_or(code::OK, |c| c.code()))
}

fn internal(e: impl std::fmt::Display) -> Failure {
    Failure::new(code::INTERNAL, e.to_string())
}

fn run(cli: &Cli, args: &RunArgs) -> CmdResult {
    let scenario = load_scenario(args.scenario).map_err(|e| Failure::new(code::USAGE, e.to_string()))?;
    if args.ticks == 0 {
        return Err(Failure::new(code::USAGE, "--ticks must be at least 1"));
    }
    let tree: Option<BehaviorTree> = if let Some(path) = &args.tree {
        let report = parse_document(&read_input(path)?, &default_whitelist());
        match report.category {
            Some(c) => {
                eprintln!("tree rejected: {}", c.label());
                for d in &report.diagnostics {
                    eprintln!("  {d}");
                }
                return Ok(c.code());
            }
            None => report.tree,
        }
    } else if let Some(command) = &args.from_llm {
        let pipeline = pipeline(cli)?;
        let trace = pipeline.prepare(CommandInput::text("cli", command.as_str()));
        if trace.endpoint_unavailable() {
            let why: Vec<_> = trace.errors.iter().map(|e| e.message.as_str()).collect();
            return Err(Failure::new(code::UNAVAILABLE, why.join("; ")));
        }
        if let Some(v) = trace.safety_verdict.as_ref().filter(|v| !v.is_allowed()) {
            eprintln!("command rejected by safety gate: {}", v.reason);
            return Ok(code::SAFETY_REJECTED);
        }
        if let Some(e) = trace.errors.first() {
            return Err(Failure::new(code::DATA, format!("{} stage: {}", e.stage.as_str(), e.message)));
        }
        let report = trace.validation_report.clone().ok_or_else(|| internal("pipeline produced no report"))?;
        if let Some(c) = report.category {
            eprintln!("generated tree rejected: {}", c.label());
            for d in &report.diagnostics {
                eprintln!("  {d}");
            }
            return Ok(c.code());
        }
        report.tree
    } else {
        None
    };
    let (outcome, _) = run_scenario(&scenario, tree, args.seed, args.ticks).map_err(internal)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&outcome).map_err(internal)?);
    } else {
        let result = match outcome.outcome {
            RunOutcome::Timeout => "timeout".to_string(),
            RunOutcome::Resolved(s) => format!("{s:?}").to_lowercase(),
        };
        println!("scenario:   {}", outcome.scenario_id);
        println!("seed:       {}", outcome.seed);
        println!("root:       {result}");
        println!("ticks:      {}", outcome.ticks);
        println!("success:    {}", outcome.success);
        println!("state hash: {}", outcome.state_hash);
    }
    Ok(match outcome.outcome {
        RunOutcome::Timeout => code::TIMEOUT,
        _ if outcome.success => code::OK,
        _ => code::SCENARIO_FAILED,
    })
}

fn evaluate(cli: &Cli, args: &EvalArgs) -> CmdResult {
    let mut keys: Vec<&str> = args.group_by.split(',').map(str::trim).collect();
    keys.sort_unstable();
    if keys != ["model", "shots"] {
        return Err(Failure::new(code::USAGE, "only --group-by model,shots is supported"));
    }
    let reports = if args.fixture.is_some() {
        parse_reports_json(TABLE3_SUMMARY_JSON).map_err(internal)?
    } else {
        let path = args.corpus.as_deref().expect("clap requires corpus");
        if !path.exists() {
            return Err(Failure::new(code::USAGE, format!("corpus {} not found", path.display())));
        }
        let wl = default_whitelist();
        let mut records = eval::load_corpus(path, &wl).map_err(|e| Failure::new(code::DATA, e.to_string()))?;
        if records.is_empty() {
            return Err(Failure::new(code::DATA, "corpus is empty"));
        }
        if args.generate {
            records = fill_candidates(cli, args, records)?;
        }
        eval::evaluate(&records, &wl).map_err(|e| Failure::new(code::DATA, e.to_string()))?
    };
    print!("{}", render_report(&reports, args.format));
    Ok(code::OK)
}

/// Records with a candidate are kept; each record without one is expanded
/// into one generated record per requested shot setting.
fn fill_candidates(cli: &Cli, args: &EvalArgs, records: Vec<eval::EvalRecord>) -> Result<Vec<eval::EvalRecord>, Failure> {
    let pipeline = pipeline(cli)?;
    let label = args
        .model_label
        .clone()
        .unwrap_or_else(|| pipeline.config().llm.model.clone());
    let mut out = Vec::with_capacity(records.len() * args.shots.len());
    for rec in records {
        if rec.candidate_xml.is_some() {
            out.push(rec);
            continue;
        }
        for &shots in &args.shots {
            let candidate = pipeline
                .generate_candidate(&rec.instruction, shots)
                .map_err(|e| Failure::new(code::UNAVAILABLE, format!("{}: {e}", rec.example_id)))?;
            out.push(eval::EvalRecord {
                candidate_xml: Some(candidate),
                shots,
                model_label: label.clone(),
                ..rec.clone()
            });
        }
    }
    Ok(out)
}

fn generate(args: &DatagenArgs) -> CmdResult {
    let wl = default_whitelist();
    let bank = match &args.bank {
        Some(p) => TemplateBank::from_path(p).map_err(|e| Failure::new(code::USAGE, e.to_string()))?,
        None => TemplateBank::default_bank(),
    };
    let weights = match &args.weights {
        Some(p) => {
            let text = read_input(p)?;
            BehaviorWeights(serde_json::from_str(&text).map_err(|e| Failure::new(code::DATA, format!("weights: {e}")))?)
        }
        None => BehaviorWeights::uniform(&bank),
    };
    let to_stdout = args.out.as_os_str() == "-";
    if !to_stdout && args.out.exists() && !args.force {
        return Err(Failure::new(
            code::CANT_CREATE,
            format!("{} exists; pass --force to overwrite", args.out.display()),
        ));
    }
    let records = datagen::generate_corpus(args.n, args.seed, &bank, &weights, &wl).map_err(|e| match e {
        datagen::DatagenError::Io(_) => internal(e),
        datagen::DatagenError::Read { .. } => Failure::new(code::USAGE, e.to_string()),
        _ => Failure::new(code::DATA, e.to_string()),
    })?;
    let mut buf = Vec::new();
    datagen::write_jsonl(&records, &mut buf).map_err(internal)?;
    if to_stdout {
        std::io::stdout().write_all(&buf).map_err(internal)?;
    } else {
        fs::write(&args.out, &buf)
            .map_err(|e| Failure::new(code::CANT_CREATE, format!("{}: {e}", args.out.display())))?;
        eprintln!("wrote {} records to {}", records.len(), args.out.display());
    }
    Ok(code::OK)
}

fn serve(cli: &Cli, args: &ServeArgs) -> CmdResult {
    let pipeline = pipeline(cli)?;
    let options = swarmcommand_service::ServiceOptions {
        steps_per_second: args.steps_per_second,
        audit_dir: args.audit_dir.clone(),
        ..Default::default()
    };
    let runtime = tokio::runtime::Runtime::new().map_err(internal)?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind((args.host.as_str(), args.port))
            .await
            .map_err(|e| Failure::new(code::UNAVAILABLE, format!("bind {}:{}: {e}", args.host, args.port)))?;
        let addr = listener.local_addr().map_err(internal)?;
        println!("listening on http://{addr}");
        let _ = std::io::stdout().flush();
        swarmcommand_service::serve(listener, swarmcommand_service::AppState::new(pipeline, options))
            .await
            .map_err(internal)?;
        Ok(code::OK)
    })
}
