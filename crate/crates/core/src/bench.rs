//! Benchmark harness: task sets, ground-truth levels, end-result scoring and
//! process scoring of session logs.
//!
//! End-result scoring compares a predicted level `x` with the ground truth
//! `y` per task: `S = 1 - |x - y| / 4`, averaged as a percentage, plus the
//! mean absolute error. Ground truth is the maximum level over the five
//! metrics of the task's scenario.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::methodlib::Library;
use crate::metrics::{self, MetricId, MetricOptions, Scenario, StatedBias};
use crate::orchestrator::log::event;
use crate::orchestrator::{
    run_session, ChatClient, LogRecord, Planner, ScriptedInput, SessionConfig, SessionLog, SessionStatus, TaskContext,
    ToolRegistry, WallClock, ZeroClock, DEFAULT_BUDGET,
};
use crate::severity::{map_to_level, BiasLevel, ThresholdTable};
use crate::synthgen::{self, SynthSpec, LEVEL_STRENGTHS};
use crate::tabular::{self, CleaningMode, CleaningPolicy, LoadOptions, Table};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("task set {path}: {message}")]
    Schema { path: PathBuf, message: String },
    #[error("no scored records")]
    EmptyRecords,
    #[error("all metrics failed for task {task}: {errors}")]
    AllMetricsFailed { task: String, errors: String },
    #[error("malformed session log: {0}")]
    MalformedLog(String),
    #[error("judge failed: {0}")]
    Judge(String),
    #[error(transparent)]
    Tabular(#[from] tabular::TabularError),
    #[error(transparent)]
    Metric(#[from] metrics::MetricError),
    #[error(transparent)]
    Synth(#[from] synthgen::SynthError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = BenchError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasType {
    Distribution,
    Correlation,
    Implication,
}

impl BiasType {
    pub const ALL: [BiasType; 3] = [BiasType::Distribution, BiasType::Correlation, BiasType::Implication];

    pub fn title(self) -> &'static str {
        match self {
            BiasType::Distribution => "Distribution",
            BiasType::Correlation => "Correlation",
            BiasType::Implication => "Implication",
        }
    }

    /// Implication tasks leave the bias type for the planner to infer.
    pub fn stated(self) -> StatedBias {
        match self {
            BiasType::Distribution => StatedBias::Distribution,
            BiasType::Correlation => StatedBias::Correlation,
            BiasType::Implication => StatedBias::Unstated,
        }
    }

    fn arity_ok(self, n: usize) -> bool {
        match self {
            BiasType::Distribution => n == 1,
            BiasType::Correlation => n == 2,
            BiasType::Implication => n == 1 || n == 2,
        }
    }
}

/// One benchmark task. `dataset` is relative to the task-set file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: String,
    pub dataset: PathBuf,
    #[serde(default)]
    pub question: String,
    pub bias_type: BiasType,
    pub features: Vec<String>,
    #[serde(default)]
    pub significance: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mediator: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariate: Option<String>,
}

impl TaskSpec {
    pub fn context(&self) -> TaskContext {
        let mut ctx = TaskContext::new(&self.dataset, self.features.clone(), self.bias_type.stated())
            .with_question(self.question.clone());
        ctx.mediator = self.mediator.clone();
        ctx.covariate = self.covariate.clone();
        ctx
    }
}

/// Parses a JSON array of tasks. Blank input is an empty task set.
pub fn parse_taskset(text: &str, path: &Path) -> Result<Vec<TaskSpec>> {
    let schema = |message: String| BenchError::Schema {
        path: path.to_path_buf(),
        message,
    };
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let tasks: Vec<TaskSpec> = serde_json::from_str(text).map_err(|e| schema(e.to_string()))?;
    let mut seen = std::collections::BTreeSet::new();
    for t in &tasks {
        if t.id.is_empty() {
            return Err(schema("task with empty id".into()));
        }
        if !seen.insert(t.id.as_str()) {
            return Err(schema(format!("duplicate task id {:?}", t.id)));
        }
        if !t.bias_type.arity_ok(t.features.len()) {
            return Err(schema(format!(
                "task {}: {} bias takes {} feature(s), got {}",
                t.id,
                t.bias_type.title().to_lowercase(),
                if t.bias_type == BiasType::Correlation {
                    "2"
                } else if t.bias_type == BiasType::Distribution {
                    "1"
                } else {
                    "1 or 2"
                },
                t.features.len()
            )));
        }
        if t.features.iter().any(String::is_empty) {
            return Err(schema(format!("task {}: empty feature name", t.id)));
        }
    }
    Ok(tasks)
}

pub fn load_taskset(path: &Path) -> Result<Vec<TaskSpec>> {
    let text = std::fs::read_to_string(path)?;
    parse_taskset(&text, path)
}

/// Level of one metric in the ground-truth computation, or why it has none.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleLevel {
    pub metric: MetricId,
    pub level: Option<BiasLevel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub scenario: Scenario,
    pub levels: Vec<OracleLevel>,
    pub level: BiasLevel,
}

/// Ground truth for `task` on its loaded dataset: the task's features plus
/// any mediator or covariate, rows with a missing value dropped, then the
/// maximum level over the scenario's metrics that succeed.
pub fn ground_truth(
    task: &TaskSpec,
    table: &Table,
    thresholds: &ThresholdTable,
    opts: &MetricOptions,
) -> Result<GroundTruth> {
    let mut names: Vec<&str> = task.features.iter().map(String::as_str).collect();
    for aux in [&task.mediator, &task.covariate].into_iter().flatten() {
        if !names.contains(&aux.as_str()) {
            names.push(aux);
        }
    }
    let columns = names
        .iter()
        .map(|n| table.column(n).cloned())
        .collect::<tabular::Result<Vec<_>>>()?;
    let selected = Table::new(table.name.clone(), columns)?;
    let cleaned = tabular::clean_missing(&selected, &names, &CleaningPolicy::new(CleaningMode::DropRow))?;
    let opts = MetricOptions {
        mediator: task.mediator.clone(),
        covariate: task.covariate.clone(),
        ..opts.clone()
    };
    let features: Vec<&str> = task.features.iter().map(String::as_str).collect();
    let (scenario, results) = metrics::run_scenario(&cleaned.table, &features, task.bias_type.stated(), &opts)?;
    let levels: Vec<OracleLevel> = results
        .into_iter()
        .map(|(metric, r)| {
            let graded = r
                .map_err(|e| e.to_string())
                .and_then(|r| map_to_level(metric, &r, thresholds).map_err(|e| e.to_string()));
            match graded {
                Ok(level) => OracleLevel {
                    metric,
                    level: Some(level),
                    error: None,
                },
                Err(e) => OracleLevel {
                    metric,
                    level: None,
                    error: Some(e),
                },
            }
        })
        .collect();
    match max_level(&levels) {
        Some(level) => Ok(GroundTruth {
            scenario,
            levels,
            level,
        }),
        None => Err(BenchError::AllMetricsFailed {
            task: task.id.clone(),
            errors: levels
                .iter()
                .map(|l| format!("{}: {}", l.metric, l.error.as_deref().unwrap_or("")))
                .collect::<Vec<_>>()
                .join("; "),
        }),
    }
}

/// The oracle rule: the highest level among the metrics that produced one.
pub fn max_level(levels: &[OracleLevel]) -> Option<BiasLevel> {
    levels.iter().filter_map(|l| l.level).max()
}

/// Predicted and ground-truth level of one task, with the per-metric levels
/// the ground truth was taken from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndResultRecord {
    pub task_id: String,
    pub bias_type: BiasType,
    pub predicted: BiasLevel,
    pub truth: BiasLevel,
    #[serde(default)]
    pub oracle_levels: Vec<OracleLevel>,
}

impl EndResultRecord {
    pub fn new(task_id: impl Into<String>, bias_type: BiasType, predicted: BiasLevel, truth: BiasLevel) -> Self {
        EndResultRecord {
            task_id: task_id.into(),
            bias_type,
            predicted,
            truth,
            oracle_levels: Vec::new(),
        }
    }

    /// `1 - |x - y| / 4`.
    pub fn score(&self) -> f64 {
        1.0 - self.abs_error() / 4.0
    }

    pub fn abs_error(&self) -> f64 {
        (f64::from(self.predicted.value()) - f64::from(self.truth.value())).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndResultScores {
    pub n: usize,
    /// Mean score as a percentage.
    pub s_avg: f64,
    pub mae: f64,
}

pub fn score_end_results(records: &[EndResultRecord]) -> Result<EndResultScores> {
    if records.is_empty() {
        return Err(BenchError::EmptyRecords);
    }
    let n = records.len() as f64;
    Ok(EndResultScores {
        n: records.len(),
        s_avg: 100.0 * records.iter().map(EndResultRecord::score).sum::<f64>() / n,
        mae: records.iter().map(EndResultRecord::abs_error).sum::<f64>() / n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Communication,
    Planning,
    Tooling,
    Adaptivity,
    Summarization,
    Integration,
}

impl Dimension {
    pub const ALL: [Dimension; 6] = [
        Dimension::Communication,
        Dimension::Planning,
        Dimension::Tooling,
        Dimension::Adaptivity,
        Dimension::Summarization,
        Dimension::Integration,
    ];

    pub fn title(self) -> &'static str {
        match self {
            Dimension::Communication => "Communication",
            Dimension::Planning => "Planning",
            Dimension::Tooling => "Tooling",
            Dimension::Adaptivity => "Adaptivity",
            Dimension::Summarization => "Summarization",
            Dimension::Integration => "Integration",
        }
    }

    fn key(self) -> &'static str {
        match self {
            Dimension::Communication => "communication",
            Dimension::Planning => "planning",
            Dimension::Tooling => "tooling",
            Dimension::Adaptivity => "adaptivity",
            Dimension::Summarization => "summarization",
            Dimension::Integration => "integration",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rating {
    Excellent,
    Proficient,
    Adequate,
    Mediocre,
    Unsatisfactory,
}

impl Rating {
    pub fn from_score(score: f64) -> Rating {
        match score {
            s if s >= 90.0 => Rating::Excellent,
            s if s >= 75.0 => Rating::Proficient,
            s if s >= 60.0 => Rating::Adequate,
            s if s >= 40.0 => Rating::Mediocre,
            _ => Rating::Unsatisfactory,
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Rating::Excellent => "Excellent",
            Rating::Proficient => "Proficient",
            Rating::Adequate => "Adequate",
            Rating::Mediocre => "Mediocre",
            Rating::Unsatisfactory => "Unsatisfactory",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionScore {
    pub score: f64,
    pub rating: Rating,
    pub evidence: String,
}

impl DimensionScore {
    fn new(score: f64, evidence: String) -> Self {
        let score = score.clamp(0.0, 100.0);
        DimensionScore {
            score,
            rating: Rating::from_score(score),
            evidence,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessScores {
    pub judge: String,
    pub dimensions: BTreeMap<Dimension, DimensionScore>,
}

impl ProcessScores {
    pub fn get(&self, d: Dimension) -> Option<&DimensionScore> {
        self.dimensions.get(&d)
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "| Dimension | Score | Rating | Evidence |");
        let _ = writeln!(s, "|---|---:|---|---|");
        for d in Dimension::ALL {
            if let Some(v) = self.dimensions.get(&d) {
                let _ = writeln!(
                    s,
                    "| {} | {:.1} | {} | {} |",
                    d.title(),
                    v.score,
                    v.rating.title(),
                    v.evidence
                );
            }
        }
        s
    }
}

/// Scores a session log on the six process dimensions.
pub trait Judge {
    fn name(&self) -> &str;
    fn score(&self, log: &SessionLog) -> Result<ProcessScores>;
}

/// Rejects logs that do not open with `session_start`, close with
/// `session_end`, or have gaps in `seq`.
pub fn validate_log(log: &SessionLog) -> Result<()> {
    let first = log
        .records
        .first()
        .ok_or_else(|| BenchError::MalformedLog("empty log".into()))?;
    if first.seq != 0 || first.action != event::SESSION_START {
        return Err(BenchError::MalformedLog(
            "first record is not session_start with seq 0".into(),
        ));
    }
    let last = log.records.last().expect("non-empty");
    if last.action != event::SESSION_END {
        return Err(BenchError::MalformedLog("last record is not session_end".into()));
    }
    for (i, r) in log.records.iter().enumerate() {
        if r.seq != i as u64 {
            return Err(BenchError::MalformedLog(format!("expected seq {i}, found {}", r.seq)));
        }
    }
    Ok(())
}

pub fn score_process(log: &SessionLog, judge: &dyn Judge) -> Result<ProcessScores> {
    validate_log(log)?;
    judge.score(log)
}

/// Deterministic scoring from the events of the log alone.
#[derive(Debug, Default, Clone, Copy)]
pub struct HeuristicJudge;

struct ToolEvent<'a> {
    tool: &'a str,
    ok: bool,
    inapplicable: bool,
}

struct LogFacts<'a> {
    task_stated: bool,
    interactive: bool,
    asked_user: bool,
    reached_feedback: bool,
    tools: Vec<ToolEvent<'a>>,
    rejections: usize,
    report: Option<&'a Value>,
    status: &'a str,
}

fn facts(log: &SessionLog) -> LogFacts<'_> {
    let start = &log.records[0].payload;
    let task = &start["task"];
    let task_stated = task["features"].as_array().is_some_and(|f| !f.is_empty());
    let interactive = task["interactive"].as_bool().unwrap_or(false);
    let is = |r: &&LogRecord, name: &str| r.action == name;
    let tools = log
        .records
        .iter()
        .filter(|r| is(r, event::TOOL_RESULT))
        .map(|r| ToolEvent {
            tool: r.payload["tool"].as_str().unwrap_or(""),
            ok: r.payload["ok"].as_bool().unwrap_or(false),
            inapplicable: r.payload["inapplicable"].as_bool().unwrap_or(false),
        })
        .collect();
    let reached_feedback = log
        .records
        .iter()
        .any(|r| is(&r, event::TRANSITION) && r.payload["to"].as_str() == Some("feedback"));
    LogFacts {
        task_stated,
        interactive,
        asked_user: log.records.iter().any(|r| is(&r, event::ASK_USER)),
        reached_feedback,
        tools,
        rejections: log.records.iter().filter(|r| is(r, event::REJECTED)).count(),
        report: log
            .records
            .iter()
            .rev()
            .find(|r| is(r, event::REPORT))
            .map(|r| &r.payload),
        status: log
            .records
            .last()
            .and_then(|r| r.payload["status"].as_str())
            .unwrap_or("failed"),
    }
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Number of distinct tools a complete single-scenario audit uses: load,
/// extract, clean, five metrics and one chart.
const FULL_TOOLSET: f64 = 9.0;

impl HeuristicJudge {
    fn communication(f: &LogFacts) -> DimensionScore {
        let delivered = f.report.is_some_and(|r| !r["headline"].is_null());
        let dialogue = f.asked_user || !f.interactive;
        let score = 100.0
            * (0.4 * flag(f.task_stated)
                + 0.2 * flag(f.reached_feedback)
                + 0.25 * flag(delivered)
                + 0.15 * flag(dialogue));
        DimensionScore::new(
            score,
            format!(
                "task stated: {}, feedback stage reached: {}, report delivered: {delivered}, user consulted when interactive: {dialogue}",
                f.task_stated, f.reached_feedback
            ),
        )
    }

    fn planning(f: &LogFacts) -> DimensionScore {
        let metric_tools: Vec<MetricId> = f
            .tools
            .iter()
            .filter_map(|t| MetricId::from_tool_name(t.tool))
            .collect();
        let scenario = f
            .report
            .and_then(|r| serde_json::from_value::<Scenario>(r["scenario"].clone()).ok())
            .or_else(|| metric_tools.first().map(|m| m.scenario()));
        let coverage = scenario.map_or(0.0, |sc| {
            let covered = sc.metrics().iter().filter(|m| metric_tools.contains(m)).count();
            covered as f64 / 5.0
        });
        let first_metric = f.tools.iter().position(|t| MetricId::from_tool_name(t.tool).is_some());
        let clean_at = f.tools.iter().position(|t| t.tool == "clean_missing_values");
        let cleaned_first = match (clean_at, first_metric) {
            (Some(c), Some(m)) => c < m,
            (Some(_), None) => true,
            _ => false,
        };
        let plotted = f.tools.iter().any(|t| t.tool.starts_with("plot_"));
        let score = 100.0
            * (0.6 * coverage + 0.15 * flag(cleaned_first) + 0.15 * flag(plotted) + 0.1 * flag(f.report.is_some()));
        DimensionScore::new(
            score,
            format!(
                "scenario metric coverage {:.0}%, cleaned before detection: {cleaned_first}, chart drawn: {plotted}",
                coverage * 100.0
            ),
        )
    }

    fn tooling(f: &LogFacts) -> DimensionScore {
        if f.tools.is_empty() {
            return DimensionScore::new(20.0, "no tool invocations".into());
        }
        let distinct: std::collections::BTreeSet<&str> = f.tools.iter().map(|t| t.tool).collect();
        let failed = f.tools.iter().filter(|t| !t.ok).count();
        let error_rate = failed as f64 / f.tools.len() as f64;
        let score = 100.0 * (0.5 * (distinct.len() as f64 / FULL_TOOLSET).min(1.0) + 0.5 * (1.0 - error_rate));
        DimensionScore::new(
            score,
            format!(
                "{} invocations of {} distinct tools, {failed} failed",
                f.tools.len(),
                distinct.len()
            ),
        )
    }

    fn adaptivity(f: &LogFacts) -> DimensionScore {
        let errors: Vec<usize> = (0..f.tools.len()).filter(|&i| !f.tools[i].ok).collect();
        if errors.is_empty() {
            return DimensionScore::new(85.0, "no tool errors to recover from".into());
        }
        let recovered = errors
            .iter()
            .filter(|&&i| f.tools[i].inapplicable || f.tools[i + 1..].iter().any(|t| t.tool == f.tools[i].tool))
            .count();
        let score = 40.0 + 60.0 * recovered as f64 / errors.len() as f64;
        DimensionScore::new(
            score,
            format!(
                "{recovered} of {} tool errors retried or recognized as inapplicable",
                errors.len()
            ),
        )
    }

    fn summarization(f: &LogFacts) -> DimensionScore {
        let Some(r) = f.report else {
            return DimensionScore::new(0.0, "no report".into());
        };
        let findings = r["findings"].as_array().map_or(&[][..], Vec::as_slice);
        let headline = !r["headline"].is_null();
        let labelled = !findings.is_empty()
            && findings
                .iter()
                .all(|x| x["label"].as_str().is_some_and(|l| !l.is_empty()));
        let recs = r["recommendations"].as_u64().unwrap_or(0) > 0;
        let charts = r["charts"].as_u64().unwrap_or(0) > 0;
        let score = 100.0 * (0.3 * flag(headline) + 0.3 * flag(labelled) + 0.2 * flag(recs) + 0.2 * flag(charts));
        DimensionScore::new(
            score,
            format!(
                "headline: {headline}, {} labelled findings, recommendations: {recs}, charts: {charts}",
                findings.len()
            ),
        )
    }

    fn integration(f: &LogFacts) -> DimensionScore {
        let legal = (50.0 - 10.0 * f.rejections as f64).max(0.0);
        let finish = match f.status {
            "complete" => 50.0,
            "incomplete" => 25.0,
            _ => 0.0,
        };
        DimensionScore::new(
            legal + finish,
            format!("{} rejected actions, session {}", f.rejections, f.status),
        )
    }
}

impl Judge for HeuristicJudge {
    fn name(&self) -> &str {
        "heuristic"
    }

    fn score(&self, log: &SessionLog) -> Result<ProcessScores> {
        validate_log(log)?;
        let f = facts(log);
        let dimensions = BTreeMap::from([
            (Dimension::Communication, Self::communication(&f)),
            (Dimension::Planning, Self::planning(&f)),
            (Dimension::Tooling, Self::tooling(&f)),
            (Dimension::Adaptivity, Self::adaptivity(&f)),
            (Dimension::Summarization, Self::summarization(&f)),
            (Dimension::Integration, Self::integration(&f)),
        ]);
        Ok(ProcessScores {
            judge: self.name().into(),
            dimensions,
        })
    }
}

const JUDGE_FRAME: &str = "You grade the session log of a bias detection agent.\n\
Score each of communication, planning, tooling, adaptivity, summarization and integration from 0 to 100.\n\
Reply with one JSON object mapping each dimension name to {\"score\": number, \"evidence\": string}.";

/// Process scoring by a chat-completions model.
pub struct ChatJudge {
    client: ChatClient,
}

impl ChatJudge {
    pub fn new(client: ChatClient) -> Self {
        ChatJudge { client }
    }
}

impl Judge for ChatJudge {
    fn name(&self) -> &str {
        "chat"
    }

    fn score(&self, log: &SessionLog) -> Result<ProcessScores> {
        validate_log(log)?;
        let messages = vec![
            json!({ "role": "system", "content": JUDGE_FRAME }),
            json!({ "role": "user", "content": log.normalized().to_jsonl() }),
        ];
        let reply = self
            .client
            .complete(messages, None)
            .map_err(|e| BenchError::Judge(e.to_string()))?;
        let text = reply["content"].as_str().unwrap_or("");
        let body = crate::orchestrator::chat::json_object(text)
            .ok_or_else(|| BenchError::Judge("reply holds no JSON object".into()))?;
        let parsed: Value = serde_json::from_str(body).map_err(|e| BenchError::Judge(e.to_string()))?;
        let mut dimensions = BTreeMap::new();
        for d in Dimension::ALL {
            let entry = &parsed[d.key()];
            let score = entry["score"]
                .as_f64()
                .ok_or_else(|| BenchError::Judge(format!("missing score for {}", d.key())))?;
            let evidence = entry["evidence"].as_str().unwrap_or("").to_string();
            dimensions.insert(d, DimensionScore::new(score, evidence));
        }
        Ok(ProcessScores {
            judge: self.name().into(),
            dimensions,
        })
    }
}

/// Settings shared by every session of a benchmark run.
#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub thresholds: ThresholdTable,
    pub library: Library,
    pub metric_options: MetricOptions,
    pub load_options: LoadOptions,
    pub budget: usize,
    pub jobs: usize,
    pub wall_clock: bool,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            thresholds: ThresholdTable::default_v1(),
            library: Library::builtin(),
            metric_options: MetricOptions::default(),
            load_options: LoadOptions::default(),
            budget: DEFAULT_BUDGET,
            jobs: 1,
            wall_clock: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskFailure {
    pub task_id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskResult {
    pub record: EndResultRecord,
    pub scenario: Scenario,
    pub process: ProcessScores,
    pub status: SessionStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub label: String,
    pub scores: Option<EndResultScores>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub planner: String,
    pub rows: Vec<BenchRow>,
    pub results: Vec<TaskResult>,
    pub failures: Vec<TaskFailure>,
    /// Mean process score per dimension over the scored tasks.
    pub process: BTreeMap<Dimension, f64>,
}

impl BenchmarkReport {
    pub fn row(&self, label: &str) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn overall(&self) -> Option<EndResultScores> {
        self.row("Overall").and_then(|r| r.scores)
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# Benchmark results ({} planner)\n", self.planner);
        let _ = writeln!(s, "| Bias type | Tasks | S_avg (%) | MAE |");
        let _ = writeln!(s, "|---|---:|---:|---:|");
        for row in &self.rows {
            match row.scores {
                Some(sc) => {
                    let _ = writeln!(s, "| {} | {} | {:.2} | {:.3} |", row.label, sc.n, sc.s_avg, sc.mae);
                }
                None => {
                    let _ = writeln!(s, "| {} | 0 | - | - |", row.label);
                }
            }
        }
        if !self.process.is_empty() {
            let _ = writeln!(s, "\n## Process scores\n");
            let _ = writeln!(s, "| Dimension | Mean score | Rating |");
            let _ = writeln!(s, "|---|---:|---|");
            for (d, v) in &self.process {
                let _ = writeln!(s, "| {} | {:.1} | {} |", d.title(), v, Rating::from_score(*v).title());
            }
        }
        if !self.failures.is_empty() {
            let _ = writeln!(s, "\n## Failed tasks\n");
            for f in &self.failures {
                let _ = writeln!(s, "- {}: {}", f.task_id, f.error);
            }
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("benchmark.md"), self.to_markdown())?;
        let json = serde_json::to_string_pretty(self).expect("report serializes");
        std::fs::write(dir.join("benchmark.json"), json + "\n")?;
        Ok(())
    }
}

/// Builds a fresh planner per task.
pub type PlannerFactory<'a> = dyn Fn(&TaskSpec) -> Box<dyn Planner> + Sync + 'a;

fn run_task(
    task: &TaskSpec,
    base_dir: &Path,
    planner: &PlannerFactory<'_>,
    registry: &ToolRegistry,
    opts: &BenchOptions,
    results_dir: &Path,
) -> Result<TaskResult, String> {
    let out_dir = results_dir.join(&task.id);
    let config = SessionConfig {
        budget: opts.budget,
        thresholds: opts.thresholds.clone(),
        library: opts.library.clone(),
        metric_options: opts.metric_options.clone(),
        load_options: opts.load_options.clone(),
        data_root: base_dir.to_path_buf(),
        out_dir: out_dir.clone(),
        clock: if opts.wall_clock {
            Box::new(WallClock::default())
        } else {
            Box::new(ZeroClock)
        },
        ..SessionConfig::offline(&out_dir)
    };
    let mut p = planner(task);
    let mut input = ScriptedInput::empty();
    let outcome = run_session(task.context(), p.as_mut(), registry, &config, &mut input);
    let log_path = out_dir.join("session.jsonl");
    let outcome = match outcome {
        Ok(o) => o,
        Err(e) => {
            let _ = e.log().write(&log_path);
            return Err(e.to_string());
        }
    };
    outcome.log.write(&log_path).map_err(|e| e.to_string())?;
    outcome.report.write(&out_dir).map_err(|e| e.to_string())?;
    let predicted = outcome
        .report
        .headline
        .ok_or_else(|| "session produced no headline level".to_string())?;
    let table = tabular::load_table(&base_dir.join(&task.dataset), &opts.load_options).map_err(|e| e.to_string())?;
    let oracle = ground_truth(task, &table, &opts.thresholds, &opts.metric_options).map_err(|e| e.to_string())?;
    let process = HeuristicJudge.score(&outcome.log).map_err(|e| e.to_string())?;
    std::fs::write(out_dir.join("process.md"), process.to_markdown()).map_err(|e| e.to_string())?;
    Ok(TaskResult {
        record: EndResultRecord {
            task_id: task.id.clone(),
            bias_type: task.bias_type,
            predicted,
            truth: oracle.level,
            oracle_levels: oracle.levels,
        },
        scenario: oracle.scenario,
        process,
        status: outcome.status,
    })
}

/// Runs every task in its own session and scores the results. Dataset paths
/// resolve against `base_dir`; per-task artifacts go to
/// `results_dir/<task id>/`. Results keep task order whatever `jobs` is.
pub fn run_benchmark(
    tasks: &[TaskSpec],
    base_dir: &Path,
    planner: &PlannerFactory<'_>,
    registry: &ToolRegistry,
    opts: &BenchOptions,
    results_dir: &Path,
) -> Result<BenchmarkReport> {
    if tasks.is_empty() {
        return Err(BenchError::EmptyRecords);
    }
    let slots: Mutex<Vec<Option<Result<TaskResult, String>>>> = Mutex::new(vec![None; tasks.len()]);
    let next = AtomicUsize::new(0);
    let jobs = opts.jobs.clamp(1, tasks.len());
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(task) = tasks.get(i) else { break };
                let r = run_task(task, base_dir, planner, registry, opts, results_dir);
                slots.lock().expect("slot lock")[i] = Some(r);
            });
        }
    });
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for (task, slot) in tasks.iter().zip(slots.into_inner().expect("slot lock")) {
        match slot.expect("every task ran") {
            Ok(r) => results.push(r),
            Err(error) => failures.push(TaskFailure {
                task_id: task.id.clone(),
                error,
            }),
        }
    }
    let records: Vec<EndResultRecord> = results.iter().map(|r| r.record.clone()).collect();
    let mut rows: Vec<BenchRow> = BiasType::ALL
        .into_iter()
        .map(|t| {
            let subset: Vec<EndResultRecord> = records.iter().filter(|r| r.bias_type == t).cloned().collect();
            BenchRow {
                label: t.title().into(),
                scores: score_end_results(&subset).ok(),
            }
        })
        .collect();
    rows.push(BenchRow {
        label: "Overall".into(),
        scores: score_end_results(&records).ok(),
    });
    let mut process = BTreeMap::new();
    if !results.is_empty() {
        for d in Dimension::ALL {
            let sum: f64 = results.iter().filter_map(|r| r.process.get(d)).map(|s| s.score).sum();
            process.insert(d, sum / results.len() as f64);
        }
    }
    let report = BenchmarkReport {
        planner: tasks.first().map(|t| planner(t).name().to_string()).unwrap_or_default(),
        rows,
        results,
        failures,
        process,
    };
    report.write(results_dir)?;
    Ok(report)
}

/// Writes `count` synthetic datasets into `dir` and returns a task set over
/// them. Tasks cycle through the five scenarios and the five intended
/// levels; every third task leaves the bias type unstated.
pub fn synthetic_taskset(dir: &Path, count: usize, n: usize, seed: u64) -> Result<Vec<TaskSpec>> {
    std::fs::create_dir_all(dir)?;
    let mut tasks = Vec::with_capacity(count);
    for i in 0..count {
        let scenario = Scenario::ALL[i % Scenario::ALL.len()];
        let level = (i / Scenario::ALL.len()) % 5;
        let k = if scenario == Scenario::CatDist { 4 } else { 2 };
        let spec = SynthSpec::new(scenario, n, k, LEVEL_STRENGTHS[level], seed + i as u64);
        let table = synthgen::generate(&spec)?;
        let id = format!("S{:02}", i + 1);
        let file = format!("{id}.csv");
        table.write_delimited(&dir.join(&file), b',')?;
        let features: Vec<String> = synthgen::feature_names(scenario)
            .into_iter()
            .map(String::from)
            .collect();
        let bias_type = if i % 3 == 2 {
            BiasType::Implication
        } else if features.len() == 1 {
            BiasType::Distribution
        } else {
            BiasType::Correlation
        };
        tasks.push(TaskSpec {
            id,
            dataset: PathBuf::from(file),
            question: format!("How biased is the {} data?", scenario.as_str().replace('_', "-")),
            bias_type,
            features,
            significance: String::new(),
            mediator: None,
            covariate: None,
        });
    }
    Ok(tasks)
}
