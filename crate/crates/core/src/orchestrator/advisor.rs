//! The Advisor role: reviews the plan, the detection results and the report
//! draft, and suggests tool calls for anything missing.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::chat::ChatClient;
use super::{Action, WorkflowState};
use crate::metrics::{MetricId, Scenario};
use crate::reporting::recommendations;
use crate::severity::BiasLevel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Checkpoint {
    Plan,
    Results,
    Report,
}

impl fmt::Display for Checkpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Checkpoint::Plan => "plan",
            Checkpoint::Results => "results",
            Checkpoint::Report => "report",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedStep {
    pub tool: String,
    #[serde(default)]
    pub args: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricAttempt {
    pub metric: MetricId,
    pub attempts: usize,
    pub ok: bool,
    pub error: Option<String>,
    pub inapplicable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "checkpoint", rename_all = "snake_case")]
pub enum AdvisorPayload {
    Plan {
        scenario: Scenario,
        features: Vec<String>,
        steps: Vec<PlannedStep>,
    },
    Results {
        scenario: Scenario,
        attempts: Vec<MetricAttempt>,
    },
    Report {
        findings: usize,
        labelled: usize,
        recommendations: usize,
        headline: Option<BiasLevel>,
    },
}

impl AdvisorPayload {
    pub fn checkpoint(&self) -> Checkpoint {
        match self {
            AdvisorPayload::Plan { .. } => Checkpoint::Plan,
            AdvisorPayload::Results { .. } => Checkpoint::Results,
            AdvisorPayload::Report { .. } => Checkpoint::Report,
        }
    }

    pub fn results(state: &WorkflowState, scenario: Scenario) -> Self {
        AdvisorPayload::Results {
            scenario,
            attempts: state.metric_attempts(scenario),
        }
    }

    /// Summary of the report the session would produce now.
    pub fn report_draft(state: &WorkflowState) -> Self {
        let levels: Vec<BiasLevel> = MetricId::ALL
            .into_iter()
            .filter_map(|m| state.metric(m).map(|(_, l)| l))
            .collect();
        let headline = levels.iter().copied().max();
        AdvisorPayload::Report {
            findings: levels.len(),
            labelled: levels.iter().filter(|l| !l.label().is_empty()).count(),
            recommendations: headline.map_or(0, |h| recommendations(state.scenario(), h).len()),
            headline,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Approve,
    Revise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Critique {
    pub verdict: Verdict,
    pub issues: Vec<String>,
    pub suggested_actions: Vec<Action>,
}

impl Critique {
    pub fn approve() -> Self {
        Critique {
            verdict: Verdict::Approve,
            issues: Vec::new(),
            suggested_actions: Vec::new(),
        }
    }

    fn from_issues(issues: Vec<String>, suggested_actions: Vec<Action>) -> Self {
        if issues.is_empty() {
            return Critique::approve();
        }
        Critique {
            verdict: Verdict::Revise,
            issues,
            suggested_actions,
        }
    }
}

pub enum Advisor {
    /// Fixed checklist.
    Rule,
    /// Chat endpoint; falls back to the checklist when the reply is
    /// unusable.
    Chat(Box<ChatClient>),
}

impl fmt::Debug for Advisor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Advisor::Rule => f.write_str("Rule"),
            Advisor::Chat(_) => f.write_str("Chat"),
        }
    }
}

impl Advisor {
    pub fn review(&self, payload: &AdvisorPayload, state: &WorkflowState) -> Critique {
        match self {
            Advisor::Rule => rule_review(payload, state),
            Advisor::Chat(client) => match chat_review(client, payload, state) {
                Some(c) => c,
                None => rule_review(payload, state),
            },
        }
    }
}

fn metric_args(table: &str, features: &[String]) -> Value {
    json!({ "table": table, "columns": features })
}

/// Checklist review: every scenario metric scheduled and attempted, failed
/// metrics retried once, cleaning before detection, and a report with level
/// labels and recommendations.
pub fn rule_review(payload: &AdvisorPayload, state: &WorkflowState) -> Critique {
    let mut issues = Vec::new();
    let mut suggested = Vec::new();
    match payload {
        AdvisorPayload::Plan {
            scenario,
            features,
            steps,
        } => {
            let first_metric = steps.iter().position(|s| MetricId::from_tool_name(&s.tool).is_some());
            let table = first_metric
                .and_then(|i| steps[i].args.get("table"))
                .and_then(Value::as_str)
                .unwrap_or("clean")
                .to_string();
            for m in scenario.metrics() {
                if !steps.iter().any(|s| s.tool == m.tool_name()) {
                    issues.push(format!("plan does not schedule {}", m.tool_name()));
                    suggested.push(Action::invoke(
                        m.tool_name(),
                        metric_args(&table, features),
                        format!("advisor: add the {m} metric"),
                    ));
                }
            }
            let clean = steps.iter().position(|s| s.tool == "clean_missing_values");
            match (clean, first_metric) {
                (None, _) => {
                    issues.push("plan has no missing-value cleaning step before detection".into());
                    suggested.insert(
                        0,
                        Action::invoke(
                            "clean_missing_values",
                            json!({ "columns": features, "mode": "drop_row", "as": "clean" }),
                            "advisor: clean missing values first",
                        ),
                    );
                }
                (Some(c), Some(m)) if c > m => {
                    issues.push("cleaning is scheduled after detection".into());
                }
                _ => {}
            }
        }
        AdvisorPayload::Results { attempts, .. } => {
            for a in attempts {
                let tool = a.metric.tool_name();
                // Keep the caller's options but point the call at the working
                // table and the task's features.
                let mut args = state
                    .invocations
                    .iter()
                    .rev()
                    .find(|i| i.tool == tool)
                    .map(|i| i.args.clone())
                    .filter(Value::is_object)
                    .unwrap_or_else(|| json!({}));
                args["table"] = json!(state.working_table_name().unwrap_or("clean"));
                args["columns"] = json!(state.ordered_features());
                if a.attempts == 0 {
                    issues.push(format!("{tool} was never run"));
                    suggested.push(Action::invoke(tool, args, format!("advisor: run {}", a.metric)));
                } else if !a.ok && !a.inapplicable && a.attempts == 1 {
                    issues.push(format!(
                        "{tool} failed ({}) and was not retried",
                        a.error.as_deref().unwrap_or("unknown error")
                    ));
                    suggested.push(Action::invoke(tool, args, format!("advisor: retry {}", a.metric)));
                }
            }
        }
        AdvisorPayload::Report {
            findings,
            labelled,
            recommendations,
            ..
        } => {
            if *findings == 0 {
                issues.push("the report has no findings".into());
            }
            if labelled < findings {
                issues.push("some findings lack a level label".into());
            }
            if *findings > 0 && *recommendations == 0 {
                issues.push("the report has no recommendations".into());
            }
        }
    }
    Critique::from_issues(issues, suggested)
}

fn chat_review(client: &ChatClient, payload: &AdvisorPayload, state: &WorkflowState) -> Option<Critique> {
    let messages = vec![
        json!({ "role": "system", "content": super::chat::ADVISOR_FRAME }),
        json!({
            "role": "user",
            "content": format!(
                "Task: {}\nFeatures: {}\nCheckpoint payload:\n{}",
                state.task.question,
                state.task.features.join(", "),
                serde_json::to_string_pretty(payload).ok()?
            ),
        }),
    ];
    let reply = client.complete(messages, None).ok()?;
    let content = reply.get("content")?.as_str()?;
    let v: Value = serde_json::from_str(super::chat::json_object(content)?).ok()?;
    let verdict: Verdict = serde_json::from_value(v.get("verdict")?.clone()).ok()?;
    let issues: Vec<String> = v
        .get("issues")
        .and_then(Value::as_array)
        .map(|a| a.iter().filter_map(|s| s.as_str().map(str::to_string)).collect())
        .unwrap_or_default();
    let suggested = match verdict {
        Verdict::Revise => rule_review(payload, state).suggested_actions,
        Verdict::Approve => Vec::new(),
    };
    Some(match verdict {
        Verdict::Revise if !issues.is_empty() => Critique {
            verdict,
            issues,
            suggested_actions: suggested,
        },
        _ => Critique::approve(),
    })
}
