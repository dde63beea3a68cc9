//! The five-stage detection workflow as an explicit state machine. A
//! [`Planner`] plays the Primary role and proposes one [`Action`] at a time;
//! the [`advisor`] reviews plans, results and the report draft at fixed
//! checkpoints. Every action and its effect go to the [`SessionLog`].

pub mod advisor;
pub mod chat;
pub mod input;
pub mod log;
pub mod planner;
pub mod tools;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

pub use advisor::{Advisor, AdvisorPayload, Checkpoint, Critique, MetricAttempt, PlannedStep, Verdict};
pub use chat::{chat_complete, ChatClient, ChatConfig, ChatPlanner};
pub use input::{InputError, LineInput, ScriptedInput, UserInput};
pub use log::{Actor, Clock, LogRecord, SessionLog, WallClock, ZeroClock};
pub use planner::{RulePlanner, ScriptedPlanner};
pub use tools::{ToolContext, ToolError, ToolOutput, ToolRegistry};

use crate::methodlib::{Library, RetrievalQuery};
use crate::metrics::{resolve_features, MetricError, MetricId, MetricOptions, MetricResult, Scenario, StatedBias};
use crate::reporting::{
    assemble_report, partial_report, ChartKind, ChartRecord, Finding, MetricFailure, ReportContext, ReportDocument,
    TaskSummary,
};
use crate::severity::{BiasLevel, ThresholdTable};
use crate::tabular::{LoadOptions, Table};
use log::event;

pub const DEFAULT_BUDGET: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    UserInput,
    Preprocessing,
    Detection,
    VisualizationSummary,
    Feedback,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::UserInput,
        Stage::Preprocessing,
        Stage::Detection,
        Stage::VisualizationSummary,
        Stage::Feedback,
    ];

    pub fn next(self) -> Option<Stage> {
        Stage::ALL.get(self as usize + 1).copied()
    }

    /// Forward by one stage, or back to any earlier stage.
    pub fn can_transition(self, to: Stage) -> bool {
        Some(to) == self.next() || to < self
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::UserInput => "user_input",
            Stage::Preprocessing => "preprocessing",
            Stage::Detection => "detection",
            Stage::VisualizationSummary => "visualization_summary",
            Stage::Feedback => "feedback",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What the user asked for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskContext {
    pub dataset: PathBuf,
    #[serde(default)]
    pub question: String,
    pub features: Vec<String>,
    #[serde(default = "unstated")]
    pub bias_type: StatedBias,
    /// Mediator column for path-specific effects.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mediator: Option<String>,
    /// Covariate column for stratified causal effects.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariate: Option<String>,
    /// Interactive sessions ask the user once in the feedback stage.
    #[serde(default)]
    pub interactive: bool,
}

fn unstated() -> StatedBias {
    StatedBias::Unstated
}

impl TaskContext {
    pub fn new(dataset: impl Into<PathBuf>, features: Vec<String>, bias_type: StatedBias) -> Self {
        TaskContext {
            dataset: dataset.into(),
            question: String::new(),
            features,
            bias_type,
            mediator: None,
            covariate: None,
            interactive: false,
        }
    }

    pub fn with_question(mut self, question: impl Into<String>) -> Self {
        self.question = question.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActionKind {
    InvokeTool {
        tool: String,
        #[serde(default)]
        args: Value,
    },
    AskUser {
        prompt: String,
    },
    ConsultAdvisor {
        payload: AdvisorPayload,
    },
    Transition {
        stage: Stage,
    },
    /// Ends the session. The report is assembled from the session's
    /// artifacts; `abort` ends it as a failure instead.
    Finish {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        abort: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    #[serde(flatten)]
    pub kind: ActionKind,
    #[serde(default)]
    pub rationale: String,
}

impl Action {
    pub fn invoke(tool: &str, args: Value, rationale: impl Into<String>) -> Self {
        Action {
            kind: ActionKind::InvokeTool {
                tool: tool.to_string(),
                args,
            },
            rationale: rationale.into(),
        }
    }

    pub fn transition(stage: Stage) -> Self {
        Action {
            kind: ActionKind::Transition { stage },
            rationale: format!("move to {stage}"),
        }
    }

    pub fn consult(payload: AdvisorPayload) -> Self {
        Action {
            rationale: format!("consult the advisor on the {}", payload.checkpoint()),
            kind: ActionKind::ConsultAdvisor { payload },
        }
    }

    pub fn ask(prompt: impl Into<String>) -> Self {
        Action {
            kind: ActionKind::AskUser { prompt: prompt.into() },
            rationale: "collect follow-up feedback".into(),
        }
    }

    pub fn finish() -> Self {
        Action {
            kind: ActionKind::Finish { abort: None },
            rationale: "deliver the report".into(),
        }
    }

    pub fn abort(reason: impl Into<String>) -> Self {
        let reason = reason.into();
        Action {
            rationale: format!("cannot continue: {reason}"),
            kind: ActionKind::Finish { abort: Some(reason) },
        }
    }

    pub fn tool(&self) -> Option<&str> {
        match &self.kind {
            ActionKind::InvokeTool { tool, .. } => Some(tool),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone)]
pub enum Artifact {
    Table(Table),
    Metric { result: MetricResult, level: BiasLevel },
    Chart(ChartRecord),
    Report(Box<ReportDocument>),
}

/// One executed tool call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Invocation {
    pub tool: String,
    pub args: Value,
    pub ok: bool,
    pub error: Option<String>,
    pub inapplicable: bool,
}

#[derive(Debug, Clone)]
pub struct WorkflowState {
    pub stage: Stage,
    pub task: TaskContext,
    pub artifacts: BTreeMap<String, Artifact>,
    pub transcript: Vec<Message>,
    pub budget: usize,
    pub invocations: Vec<Invocation>,
    pub critiques: Vec<(Checkpoint, Critique)>,
    /// Actions suggested by the advisor and not yet carried out.
    pub pending: VecDeque<Action>,
    pub asked_user: bool,
}

/// Table names in order of processing; the last present one is the
/// working table.
const TABLE_ORDER: [&str; 3] = ["data", "selected", "clean"];

impl WorkflowState {
    pub fn new(task: TaskContext, budget: usize) -> Self {
        WorkflowState {
            stage: Stage::UserInput,
            task,
            artifacts: BTreeMap::new(),
            transcript: Vec::new(),
            budget,
            invocations: Vec::new(),
            critiques: Vec::new(),
            pending: VecDeque::new(),
            asked_user: false,
        }
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        match self.artifacts.get(name) {
            Some(Artifact::Table(t)) => Some(t),
            _ => None,
        }
    }

    pub fn working_table_name(&self) -> Option<&str> {
        TABLE_ORDER
            .iter()
            .rev()
            .find(|n| self.table(n).is_some())
            .copied()
            .or_else(|| {
                self.artifacts
                    .iter()
                    .find(|(_, a)| matches!(a, Artifact::Table(_)))
                    .map(|(n, _)| n.as_str())
            })
    }

    pub fn working_table(&self) -> Option<&Table> {
        self.working_table_name().and_then(|n| self.table(n))
    }

    /// Scenario of the task's features on the working table.
    pub fn scenario_result(&self) -> Option<Result<Scenario, MetricError>> {
        let table = self.working_table()?;
        let features: Vec<&str> = self.task.features.iter().map(String::as_str).collect();
        Some(resolve_features(table, &features, self.task.bias_type).map(|(s, _)| s))
    }

    pub fn scenario(&self) -> Option<Scenario> {
        self.scenario_result().and_then(Result::ok)
    }

    /// Task features in the order the metrics expect (categorical first
    /// for the categorical-numerical case).
    pub fn ordered_features(&self) -> Vec<String> {
        let Some(table) = self.working_table() else {
            return self.task.features.clone();
        };
        let features: Vec<&str> = self.task.features.iter().map(String::as_str).collect();
        match resolve_features(table, &features, self.task.bias_type) {
            Ok((_, cols)) => cols.iter().map(|c| c.name.clone()).collect(),
            Err(_) => self.task.features.clone(),
        }
    }

    pub fn attempts(&self, tool: &str) -> usize {
        self.invocations.iter().filter(|i| i.tool == tool).count()
    }

    pub fn succeeded(&self, tool: &str) -> bool {
        self.invocations.iter().any(|i| i.tool == tool && i.ok)
    }

    pub fn last_error(&self, tool: &str) -> Option<&Invocation> {
        self.invocations.iter().rev().find(|i| i.tool == tool && !i.ok)
    }

    pub fn consulted(&self, checkpoint: Checkpoint) -> bool {
        self.critiques.iter().any(|(c, _)| *c == checkpoint)
    }

    pub fn metric(&self, metric: MetricId) -> Option<(&MetricResult, BiasLevel)> {
        match self.artifacts.get(&tools::metric_key(metric)) {
            Some(Artifact::Metric { result, level }) => Some((result, *level)),
            _ => None,
        }
    }

    pub fn charts(&self) -> Vec<&ChartRecord> {
        ChartKind::ALL
            .into_iter()
            .filter_map(|k| match self.artifacts.get(&tools::chart_key(k)) {
                Some(Artifact::Chart(c)) => Some(c),
                _ => None,
            })
            .collect()
    }

    /// Status of each metric of `scenario` for the results checkpoint.
    pub fn metric_attempts(&self, scenario: Scenario) -> Vec<MetricAttempt> {
        scenario
            .metrics()
            .into_iter()
            .map(|m| {
                let tool = m.tool_name();
                let last = self.invocations.iter().rev().find(|i| i.tool == tool);
                MetricAttempt {
                    metric: m,
                    attempts: self.attempts(tool),
                    ok: self.metric(m).is_some(),
                    error: last.and_then(|i| i.error.clone()),
                    inapplicable: last.is_some_and(|i| i.inapplicable),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PlannerError {
    #[error("illegal action: {0}")]
    Illegal(String),
    #[error("unparseable planner reply: {0}")]
    Unparseable(String),
    #[error("chat endpoint failed: {0}")]
    Network(#[from] crate::net::TransportError),
    #[error("chat planner is not configured: {0}")]
    Config(String),
}

/// The Primary role. `next` must return an action for every state.
pub trait Planner {
    fn name(&self) -> &str;

    fn next(&mut self, state: &WorkflowState, registry: &ToolRegistry) -> Result<Action, PlannerError>;

    /// Called when the engine refuses the last action.
    fn rejected(&mut self, _action: &Action, _reason: &str) {}

    /// Request/response transcript of a chat-backed planner.
    fn transcript(&self) -> Vec<Value> {
        Vec::new()
    }
}

/// Everything a session needs besides the task and the planner.
pub struct SessionConfig {
    pub budget: usize,
    pub thresholds: ThresholdTable,
    pub library: Library,
    pub metric_options: MetricOptions,
    pub load_options: LoadOptions,
    /// Relative dataset paths resolve against this directory.
    pub data_root: PathBuf,
    /// Charts and report files are written here.
    pub out_dir: PathBuf,
    pub clock: Box<dyn Clock>,
    pub advisor: Advisor,
}

impl SessionConfig {
    pub fn offline(out_dir: impl Into<PathBuf>) -> Self {
        SessionConfig {
            budget: DEFAULT_BUDGET,
            thresholds: ThresholdTable::default_v1(),
            library: Library::builtin(),
            metric_options: MetricOptions::default(),
            load_options: LoadOptions::default(),
            data_root: PathBuf::new(),
            out_dir: out_dir.into(),
            clock: Box::new(ZeroClock),
            advisor: Advisor::Rule,
        }
    }
}

impl fmt::Debug for SessionConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SessionConfig")
            .field("budget", &self.budget)
            .field("thresholds", &self.thresholds.version)
            .field("out_dir", &self.out_dir)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Complete,
    Incomplete,
}

#[derive(Debug, Clone)]
pub struct SessionOutcome {
    pub report: ReportDocument,
    pub log: SessionLog,
    pub status: SessionStatus,
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("planner failed: {message}")]
    Planner { message: String, log: SessionLog },
    #[error("session aborted: {reason}")]
    Aborted { reason: String, log: SessionLog },
}

impl SessionError {
    pub fn log(&self) -> &SessionLog {
        match self {
            SessionError::Planner { log, .. } | SessionError::Aborted { log, .. } => log,
        }
    }
}

/// Builds the report from the session's artifacts. `incomplete` marks a
/// session that stopped early.
pub fn build_report(state: &WorkflowState, config: &SessionConfig, incomplete: Option<&str>) -> ReportDocument {
    let scenario = state.scenario();
    let findings: Vec<Finding> = MetricId::ALL
        .into_iter()
        .filter_map(|m| state.metric(m).map(|(r, level)| Finding::new(r, level)))
        .collect();
    let failures: Vec<MetricFailure> = MetricId::ALL
        .into_iter()
        .filter(|m| state.metric(*m).is_none())
        .filter_map(|m| {
            state.last_error(m.tool_name()).map(|i| MetricFailure {
                metric_id: m,
                error: i.error.clone().unwrap_or_default(),
            })
        })
        .collect();
    let executed: BTreeSet<MetricId> = findings.iter().map(|f| f.metric_id).collect();
    let (citations, advisory_methods) = match scenario {
        Some(sc) => {
            let text = format!("{} {}", state.task.question, state.task.features.join(" "));
            let query = RetrievalQuery {
                scenario: sc,
                free_text: text,
                top_k: config.library.len(),
            };
            let ranked = config.library.retrieve(&query);
            let mut citations: Vec<String> = ranked
                .iter()
                .filter(|r| r.entry.tags.metric.is_some_and(|m| executed.contains(&m)))
                .map(|r| r.entry.id.clone())
                .collect();
            citations.sort();
            let advisory = ranked
                .iter()
                .filter(|r| r.entry.is_advisory() && r.score > 0.0)
                .take(3)
                .map(|r| format!("{}: {}", r.entry.id, r.entry.intention))
                .collect();
            (citations, advisory)
        }
        None => (Vec::new(), Vec::new()),
    };
    let mut notes = Vec::new();
    for (checkpoint, critique) in &state.critiques {
        if critique.verdict == Verdict::Revise {
            for issue in &critique.issues {
                notes.push(format!("Advisor ({checkpoint}): {issue}"));
            }
        }
    }
    let working = state.working_table();
    let task = TaskSummary {
        dataset: state.task.dataset.display().to_string(),
        question: state.task.question.clone(),
        features: state.task.features.clone(),
        stated_bias: state.task.bias_type,
        scenario,
        rows_used: working.map(Table::row_count),
        rows_dropped: working
            .and_then(|t| t.metadata.get("rows_dropped"))
            .and_then(|d| d.parse().ok()),
    };
    let ctx = ReportContext {
        charts: state.charts().into_iter().cloned().collect(),
        failures,
        citations,
        advisory_methods,
        threshold_version: config.thresholds.version.clone(),
        notes,
    };
    match incomplete {
        Some(reason) => partial_report(task, findings, ctx, reason),
        None if findings.is_empty() => partial_report(task, findings, ctx, "no metric produced a result"),
        None => assemble_report(task, findings, ctx).expect("findings are non-empty"),
    }
}

/// Drives `planner` until it finishes or the budget runs out.
pub fn run_session(
    task: TaskContext,
    planner: &mut dyn Planner,
    registry: &ToolRegistry,
    config: &SessionConfig,
    input: &mut dyn UserInput,
) -> Result<SessionOutcome, SessionError> {
    let clock = config.clock.as_ref();
    let mut log = SessionLog::default();
    let mut state = WorkflowState::new(task, config.budget);
    log.push(
        clock,
        state.stage,
        Actor::System,
        event::SESSION_START,
        json!({
            "task": state.task,
            "planner": planner.name(),
            "budget": config.budget,
            "thresholds": config.thresholds.version,
        }),
    );
    let mut rejected_once = false;
    while state.budget > 0 {
        let action = match planner.next(&state, registry) {
            Ok(a) => a,
            Err(e) => {
                state.budget -= 1;
                log.push(
                    clock,
                    state.stage,
                    Actor::System,
                    event::REJECTED,
                    json!({ "reason": e.to_string() }),
                );
                if rejected_once {
                    return Err(fail_planner(&mut log, clock, &state, e.to_string()));
                }
                rejected_once = true;
                continue;
            }
        };
        state.budget -= 1;
        log.push(
            clock,
            state.stage,
            Actor::Primary,
            event::ACTION,
            serde_json::to_value(&action).expect("action serializes"),
        );
        if let Err(reason) = check_action(&state, &action, registry) {
            log.push(
                clock,
                state.stage,
                Actor::System,
                event::REJECTED,
                json!({ "reason": reason }),
            );
            planner.rejected(&action, &reason);
            if rejected_once {
                return Err(fail_planner(&mut log, clock, &state, reason));
            }
            rejected_once = true;
            continue;
        }
        rejected_once = false;
        if state.pending.front() == Some(&action) {
            state.pending.pop_front();
        }
        match action.kind {
            ActionKind::InvokeTool { tool, args } => {
                let result = {
                    let mut ctx = ToolContext {
                        state: &state,
                        config,
                        input: &mut *input,
                    };
                    registry.invoke(&tool, &mut ctx, &args)
                };
                let invocation = match result {
                    Ok(out) => {
                        log.push(
                            clock,
                            state.stage,
                            Actor::Tool,
                            event::TOOL_RESULT,
                            json!({ "tool": tool, "ok": true, "output": out.summary }),
                        );
                        state.transcript.push(Message {
                            role: "tool".into(),
                            content: format!("{tool}: {}", out.summary),
                        });
                        if let Some((name, artifact)) = out.artifact {
                            state.artifacts.insert(name, artifact);
                        }
                        Invocation {
                            tool,
                            args,
                            ok: true,
                            error: None,
                            inapplicable: false,
                        }
                    }
                    Err(e) => {
                        let message = e.to_string();
                        log.push(
                            clock,
                            state.stage,
                            Actor::Tool,
                            event::TOOL_RESULT,
                            json!({
                                "tool": tool,
                                "ok": false,
                                "error": message,
                                "inapplicable": e.is_inapplicable(),
                            }),
                        );
                        state.transcript.push(Message {
                            role: "tool".into(),
                            content: format!("{tool} failed: {message}"),
                        });
                        Invocation {
                            tool,
                            args,
                            ok: false,
                            error: Some(message),
                            inapplicable: e.is_inapplicable(),
                        }
                    }
                };
                state.invocations.push(invocation);
            }
            ActionKind::AskUser { prompt } => {
                log.push(
                    clock,
                    state.stage,
                    Actor::Primary,
                    event::ASK_USER,
                    json!({ "prompt": prompt }),
                );
                state.asked_user = true;
                state.transcript.push(Message {
                    role: "assistant".into(),
                    content: prompt.clone(),
                });
                match input.read(&prompt) {
                    Ok(reply) => {
                        log.push(
                            clock,
                            state.stage,
                            Actor::User,
                            event::USER_INPUT,
                            json!({ "content": reply }),
                        );
                        state.transcript.push(Message {
                            role: "user".into(),
                            content: reply,
                        });
                    }
                    Err(e) => {
                        log.push(
                            clock,
                            state.stage,
                            Actor::User,
                            event::USER_INPUT,
                            json!({ "end_of_input": true, "detail": e.to_string() }),
                        );
                    }
                }
            }
            ActionKind::ConsultAdvisor { payload } => {
                let critique = config.advisor.review(&payload, &state);
                log.push(
                    clock,
                    state.stage,
                    Actor::Advisor,
                    event::CRITIQUE,
                    json!({ "checkpoint": payload.checkpoint(), "critique": critique }),
                );
                if critique.verdict == Verdict::Revise {
                    state.pending.extend(critique.suggested_actions.iter().cloned());
                }
                state.critiques.push((payload.checkpoint(), critique));
            }
            ActionKind::Transition { stage } => {
                log.push(
                    clock,
                    state.stage,
                    Actor::System,
                    event::TRANSITION,
                    json!({ "from": state.stage, "to": stage }),
                );
                state.stage = stage;
            }
            ActionKind::Finish { abort: Some(reason) } => {
                log.push(
                    clock,
                    state.stage,
                    Actor::System,
                    event::SESSION_END,
                    json!({ "status": "failed", "reason": reason }),
                );
                return Err(SessionError::Aborted { reason, log });
            }
            ActionKind::Finish { abort: None } => {
                let report = build_report(&state, config, None);
                return Ok(finish(log, clock, &state, report));
            }
        }
    }
    let report = build_report(&state, config, Some("action budget exhausted"));
    Ok(finish(log, clock, &state, report))
}

fn finish(mut log: SessionLog, clock: &dyn Clock, state: &WorkflowState, report: ReportDocument) -> SessionOutcome {
    let status = if report.complete {
        SessionStatus::Complete
    } else {
        SessionStatus::Incomplete
    };
    log.push(
        clock,
        state.stage,
        Actor::System,
        event::REPORT,
        report_summary(&report),
    );
    log.push(
        clock,
        state.stage,
        Actor::System,
        event::SESSION_END,
        json!({ "status": status }),
    );
    SessionOutcome { report, log, status }
}

/// The report fields the process judge looks at.
pub fn report_summary(report: &ReportDocument) -> Value {
    json!({
        "scenario": report.task.scenario,
        "findings": report.findings.iter().map(|f| json!({
            "metric_id": f.metric_id,
            "level": f.level,
            "label": f.label,
        })).collect::<Vec<_>>(),
        "failures": report.failures.len(),
        "headline": report.headline,
        "headline_label": report.headline_label,
        "charts": report.charts.len(),
        "recommendations": report.recommendations.len(),
        "complete": report.complete,
    })
}

fn fail_planner(log: &mut SessionLog, clock: &dyn Clock, state: &WorkflowState, message: String) -> SessionError {
    log.push(
        clock,
        state.stage,
        Actor::System,
        event::SESSION_END,
        json!({ "status": "failed", "reason": message }),
    );
    SessionError::Planner {
        message,
        log: std::mem::take(log),
    }
}

fn check_action(state: &WorkflowState, action: &Action, registry: &ToolRegistry) -> Result<(), String> {
    match &action.kind {
        ActionKind::InvokeTool { tool, .. } if !registry.contains(tool) => {
            Err(format!("tool {tool:?} is not in the registry"))
        }
        ActionKind::Transition { stage } if !state.stage.can_transition(*stage) => {
            Err(format!("no transition from {} to {stage}", state.stage))
        }
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_graph() {
        assert!(Stage::UserInput.can_transition(Stage::Preprocessing));
        assert!(!Stage::UserInput.can_transition(Stage::Detection));
        assert!(Stage::Feedback.can_transition(Stage::UserInput));
        assert!(!Stage::Detection.can_transition(Stage::Detection));
        assert_eq!(Stage::Feedback.next(), None);
    }

    #[test]
    fn action_json_shape() {
        let a = Action::invoke("load_csv_file", json!({"path": "x.csv"}), "load");
        let v = serde_json::to_value(&a).unwrap();
        assert_eq!(v["kind"], "invoke_tool");
        assert_eq!(v["tool"], "load_csv_file");
        let back: Action = serde_json::from_value(v).unwrap();
        assert_eq!(back, a);
        let t = serde_json::to_value(Action::transition(Stage::Detection)).unwrap();
        assert_eq!(t["stage"], "detection");
    }
}
