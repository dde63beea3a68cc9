mod config;
mod repl;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use biasaudit::bench::{self, BenchOptions, TaskSpec};
use biasaudit::methodlib::Library;
use biasaudit::metrics::{MetricOptions, Scenario, StatedBias};
use biasaudit::net::UreqTransport;
use biasaudit::orchestrator::{
    run_session, Advisor, ChatClient, ChatPlanner, Clock, Planner, RulePlanner, ScriptedInput, SessionConfig,
    SessionOutcome, SessionStatus, TaskContext, ToolRegistry, WallClock, ZeroClock, DEFAULT_BUDGET,
};
use biasaudit::severity::{self, BiasLevel, ThresholdTable};
use biasaudit::synthgen::{self, SynthSpec};
use clap::{Args, Parser, Subcommand, ValueEnum};

use config::{Config, Mode};

/// Exit code for a run that finished with an incomplete result.
const EXIT_INCOMPLETE: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "biasaudit", version, about = "Detect and grade bias in tabular datasets")]
struct Cli {
    /// TOML config file (default: $BIASAUDIT_CONFIG if set).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Audit one or two features of a dataset and write a report.
    Detect(DetectArgs),
    /// Interactive audit: each follow-up revises the report until `quit`.
    Repl(ReplArgs),
    /// Run a task set and score the predicted levels against ground truth.
    Bench(BenchArgs),
    /// Fit severity cut-points on graded synthetic suites.
    Calibrate(CalibrateArgs),
    /// Browse or extend the detection-method library.
    Methods(MethodsArgs),
    /// Generate a synthetic dataset with a given bias strength.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Args)]
struct RunFlags {
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for randomized metric internals.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Maximum number of planner actions per session.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: usize,
    /// Record elapsed milliseconds in session logs instead of zeros.
    #[arg(long)]
    wall_clock: bool,
    /// Planner backend; overrides the config file.
    #[arg(long, value_enum)]
    mode: Option<Mode>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BiasArg {
    Distribution,
    Correlation,
    Unstated,
}

impl From<BiasArg> for StatedBias {
    fn from(b: BiasArg) -> Self {
        match b {
            BiasArg::Distribution => StatedBias::Distribution,
            BiasArg::Correlation => StatedBias::Correlation,
            BiasArg::Unstated => StatedBias::Unstated,
        }
    }
}

#[derive(Debug, Clone, Args)]
struct TaskArgs {
    /// Delimiter-separated file with a header row.
    dataset: PathBuf,
    /// Bias type the question asks about.
    #[arg(long, value_enum, default_value = "unstated")]
    bias: BiasArg,
    #[arg(long)]
    question: Option<String>,
    /// Mediator column for the path-specific effect.
    #[arg(long)]
    mediator: Option<String>,
    /// Covariate column for the stratified treatment effect.
    #[arg(long)]
    covariate: Option<String>,
}

#[derive(Debug, Args)]
struct DetectArgs {
    #[command(flatten)]
    task: TaskArgs,
    /// One or two feature names, comma-separated.
    #[arg(long, value_delimiter = ',', required = true)]
    features: Vec<String>,
    #[command(flatten)]
    run: RunFlags,
}

#[derive(Debug, Args)]
struct ReplArgs {
    #[command(flatten)]
    task: TaskArgs,
    /// Features for the first report; asked for when omitted.
    #[arg(long, value_delimiter = ',')]
    features: Vec<String>,
    #[command(flatten)]
    run: RunFlags,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// JSON task set; dataset paths are relative to its directory.
    taskset: PathBuf,
    /// Tasks run concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    run: RunFlags,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    /// Scenarios to calibrate (default: all five).
    #[arg(long, value_parser = parse_scenario, value_delimiter = ',')]
    scenario: Vec<Scenario>,
    /// Directory for thresholds.json and calibration.md.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct MethodsArgs {
    /// Library file (default: config `library`, else the built-in library).
    #[arg(long)]
    library: Option<PathBuf>,
    #[command(subcommand)]
    command: MethodsCommand,
}

#[derive(Debug, Subcommand)]
enum MethodsCommand {
    /// Print every method id with its intention.
    List,
    /// Print one method entry as JSON.
    Show { id: String },
    /// Append the JSON entry in FILE to the library file.
    Add { file: PathBuf },
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, value_parser = parse_scenario)]
    scenario: Scenario,
    /// Bias strength in [0, 1].
    #[arg(long)]
    strength: f64,
    #[arg(long, default_value_t = 500)]
    n: usize,
    /// Categories per categorical column.
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV file to write; a `.meta.json` summary goes next to it.
    #[arg(long, default_value = "synthetic.csv")]
    out: PathBuf,
}

fn parse_scenario(s: &str) -> Result<Scenario, String> {
    s.parse::<Scenario>().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::from(1)
        }
    }
}

/// A closed stdout (for example piping into `head`) is not a failure.
fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.downcast_ref::<std::io::Error>()
        .is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
}

fn run(cli: Cli) -> Result<u8> {
    let config = Config::load(cli.config.as_deref())?;
    match cli.command {
        Command::Detect(args) => cmd_detect(&config, args),
        Command::Repl(args) => repl::cmd_repl(&config, args),
        Command::Bench(args) => cmd_bench(&config, args),
        Command::Calibrate(args) => cmd_calibrate(&config, args),
        Command::Methods(args) => cmd_methods(&config, args),
        Command::Synth(args) => cmd_synth(args),
    }
}

fn load_thresholds(config: &Config) -> Result<ThresholdTable> {
    match &config.thresholds {
        Some(p) => ThresholdTable::load(p).with_context(|| format!("thresholds {}", p.display())),
        None => Ok(ThresholdTable::default_v1()),
    }
}

fn load_library(config: &Config, path: Option<&Path>) -> Result<Library> {
    match path.or(config.library.as_deref()) {
        Some(p) => Library::load(p).with_context(|| format!("library {}", p.display())),
        None => Ok(Library::builtin()),
    }
}

fn mode(config: &Config, run: &RunFlags) -> Mode {
    run.mode.unwrap_or(config.mode)
}

fn chat_client(config: &Config) -> Result<ChatClient> {
    Ok(ChatClient::new(config.chat()?.clone(), Arc::new(UreqTransport)))
}

fn make_planner(config: &Config, run: &RunFlags) -> Result<Box<dyn Planner>> {
    Ok(match mode(config, run) {
        Mode::Offline => Box::new(RulePlanner::new()),
        Mode::Chat => Box::new(ChatPlanner::new(chat_client(config)?)),
    })
}

fn out_dir(config: &Config, run: &RunFlags, fallback: &str) -> PathBuf {
    run.out
        .clone()
        .or_else(|| config.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from(fallback))
}

fn clock(run: &RunFlags) -> Box<dyn Clock> {
    if run.wall_clock {
        Box::new(WallClock::default())
    } else {
        Box::new(ZeroClock)
    }
}

fn session_config(config: &Config, run: &RunFlags, out: &Path) -> Result<SessionConfig> {
    Ok(SessionConfig {
        budget: run.budget,
        thresholds: load_thresholds(config)?,
        library: load_library(config, None)?,
        metric_options: MetricOptions {
            seed: run.seed,
            ..MetricOptions::default()
        },
        clock: clock(run),
        advisor: match mode(config, run) {
            Mode::Offline => Advisor::Rule,
            Mode::Chat => Advisor::Chat(Box::new(chat_client(config)?)),
        },
        ..SessionConfig::offline(out)
    })
}

fn task_context(args: &TaskArgs, features: Vec<String>) -> TaskContext {
    let mut task = TaskContext::new(&args.dataset, features, args.bias.into());
    if let Some(q) = &args.question {
        task = task.with_question(q.clone());
    }
    task.mediator = args.mediator.clone();
    task.covariate = args.covariate.clone();
    task
}

/// Writes report.md, findings.json and logs/session.jsonl under `out`.
fn write_outcome(outcome: &SessionOutcome, out: &Path) -> Result<()> {
    outcome.report.write(out)?;
    outcome.log.write(&out.join("logs").join("session.jsonl"))?;
    Ok(())
}

fn headline(level: Option<BiasLevel>) -> String {
    match level {
        Some(l) => format!("level {} ({})", l.value(), l.label()),
        None => "no level".into(),
    }
}

fn cmd_detect(config: &Config, args: DetectArgs) -> Result<u8> {
    let out = out_dir(config, &args.run, "biasaudit-out");
    let session = session_config(config, &args.run, &out)?;
    let mut planner = make_planner(config, &args.run)?;
    let task = task_context(&args.task, args.features);
    let result = run_session(
        task,
        planner.as_mut(),
        &ToolRegistry::builtin(),
        &session,
        &mut ScriptedInput::empty(),
    );
    let outcome = match result {
        Ok(o) => o,
        Err(e) => {
            e.log().write(&out.join("logs").join("session.jsonl"))?;
            return Err(e.into());
        }
    };
    write_outcome(&outcome, &out)?;
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "headline: {}", headline(outcome.report.headline))?;
    for f in &outcome.report.findings {
        writeln!(stdout, "  {}: level {} ({})", f.metric_id, f.level.value(), f.label)?;
    }
    writeln!(stdout, "report written to {}", out.display())?;
    if outcome.status == SessionStatus::Incomplete {
        eprintln!(
            "incomplete: the session ended before every stage ran; see {}",
            out.join("report.md").display()
        );
        return Ok(EXIT_INCOMPLETE);
    }
    Ok(0)
}

fn cmd_bench(config: &Config, args: BenchArgs) -> Result<u8> {
    let tasks = bench::load_taskset(&args.taskset)?;
    let base = args.taskset.parent().unwrap_or(Path::new("")).to_path_buf();
    let out = out_dir(config, &args.run, "results");
    let opts = BenchOptions {
        thresholds: load_thresholds(config)?,
        library: load_library(config, None)?,
        metric_options: MetricOptions {
            seed: args.run.seed,
            ..MetricOptions::default()
        },
        budget: args.run.budget,
        jobs: args.jobs.max(1),
        wall_clock: args.run.wall_clock,
        ..BenchOptions::default()
    };
    let chat = match mode(config, &args.run) {
        Mode::Offline => None,
        Mode::Chat => Some(config.chat()?.clone()),
    };
    let factory = move |_: &TaskSpec| -> Box<dyn Planner> {
        match &chat {
            None => Box::new(RulePlanner::new()),
            Some(c) => Box::new(ChatPlanner::new(ChatClient::new(c.clone(), Arc::new(UreqTransport)))),
        }
    };
    let report = bench::run_benchmark(&tasks, &base, &factory, &ToolRegistry::builtin(), &opts, &out)?;
    print!("{}", report.to_markdown());
    println!("\nresults written to {}", out.display());
    if !report.failures.is_empty() {
        eprintln!("incomplete: {} of {} tasks failed", report.failures.len(), tasks.len());
        return Ok(EXIT_INCOMPLETE);
    }
    Ok(0)
}

fn cmd_calibrate(config: &Config, args: CalibrateArgs) -> Result<u8> {
    let scenarios = if args.scenario.is_empty() {
        Scenario::ALL.to_vec()
    } else {
        args.scenario
    };
    let levels: Vec<BiasLevel> = BiasLevel::all().collect();
    let suite: Vec<_> = scenarios
        .iter()
        .flat_map(|&s| synthgen::grade_suite(s, &levels))
        .collect();
    let opts = MetricOptions {
        seed: args.seed,
        ..MetricOptions::default()
    };
    let (table, report) = severity::calibrate(&suite, &load_thresholds(config)?, &opts)?;
    let out = args
        .out
        .or_else(|| config.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("calibration"));
    std::fs::create_dir_all(&out)?;
    table.save(&out.join("thresholds.json"))?;
    std::fs::write(out.join("calibration.md"), report.to_markdown())?;
    println!(
        "accuracy {:.1}% -> {:.1}% over {} scenario(s); thresholds written to {}",
        100.0 * report.accuracy_before(),
        100.0 * report.accuracy_after(),
        scenarios.len(),
        out.join("thresholds.json").display()
    );
    Ok(0)
}

fn cmd_methods(config: &Config, args: MethodsArgs) -> Result<u8> {
    let mut stdout = std::io::stdout().lock();
    match args.command {
        MethodsCommand::List => {
            let lib = load_library(config, args.library.as_deref())?;
            writeln!(stdout, "| id | intention |")?;
            writeln!(stdout, "|---|---|")?;
            for (id, intention) in lib.list_intentions() {
                writeln!(stdout, "| {id} | {intention} |")?;
            }
        }
        MethodsCommand::Show { id } => {
            let lib = load_library(config, args.library.as_deref())?;
            let entry = lib.get_method_by_id(&id)?;
            writeln!(stdout, "{}", serde_json::to_string_pretty(entry)?)?;
        }
        MethodsCommand::Add { file } => {
            let Some(path) = args.library.or_else(|| config.library.clone()) else {
                bail!("`methods add` needs a library file (--library or config `library`)");
            };
            if !path.exists() {
                std::fs::write(&path, Library::builtin().to_json())
                    .with_context(|| format!("creating {}", path.display()))?;
            }
            let mut lib = Library::load(&path)?;
            let text = std::fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
            let entry: serde_json::Value =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", file.display()))?;
            let added = lib.add_entry(entry)?;
            writeln!(stdout, "added {} to {}", added.id, path.display())?;
        }
    }
    Ok(0)
}

fn cmd_synth(args: SynthArgs) -> Result<u8> {
    let spec = SynthSpec::new(args.scenario, args.n, args.k, args.strength, args.seed);
    let table = synthgen::generate(&spec)?;
    if let Some(dir) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    table.write_delimited(&args.out, b',')?;
    let meta = args.out.with_extension("meta.json");
    let summary = synthgen::describe(&spec, &table);
    std::fs::write(&meta, serde_json::to_string_pretty(&summary)? + "\n")?;
    println!(
        "{} rows of {} data written to {}",
        table.row_count(),
        args.scenario,
        args.out.display()
    );
    Ok(0)
}
