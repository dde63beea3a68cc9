//! Deterministic planners: the fixed-policy [`RulePlanner`] and the
//! [`ScriptedPlanner`] that replays a recorded action list.

use serde_json::{json, Value};

use super::{
    Action, AdvisorPayload, Checkpoint, PlannedStep, Planner, PlannerError, Stage, ToolRegistry, WorkflowState,
};
use crate::metrics::Scenario;
use crate::reporting::ChartKind;

/// Chart drawn for each scenario.
pub fn chart_for(scenario: Scenario) -> ChartKind {
    match scenario {
        Scenario::CatDist => ChartKind::Bar,
        Scenario::NumDist => ChartKind::Box,
        Scenario::CatCat => ChartKind::StackedBar,
        Scenario::CatNum => ChartKind::Box,
        Scenario::NumNum => ChartKind::CorrelationHeatmap,
    }
}

/// Fixed policy: load, extract, clean (drop rows), the five scenario
/// metrics, one chart. The advisor is consulted after the plan, after the
/// results and on the report draft.
#[derive(Debug, Default, Clone)]
pub struct RulePlanner;

impl RulePlanner {
    pub fn new() -> Self {
        RulePlanner
    }
}

fn auxiliary(state: &WorkflowState) -> Vec<String> {
    [&state.task.mediator, &state.task.covariate]
        .into_iter()
        .flatten()
        .filter(|c| !state.task.features.contains(c))
        .cloned()
        .collect()
}

fn extract_step(state: &WorkflowState) -> Option<PlannedStep> {
    let keep = auxiliary(state);
    let (tool, mut args) = match state.task.features.as_slice() {
        [f] => ("extract_single_column", json!({ "table": "data", "column": f })),
        [a, b] => ("extract_two_columns", json!({ "table": "data", "columns": [a, b] })),
        _ => return None,
    };
    if !keep.is_empty() {
        args["keep"] = json!(keep);
    }
    args["as"] = json!("selected");
    Some(PlannedStep {
        tool: tool.into(),
        args,
    })
}

fn metric_args(state: &WorkflowState, features: &[String]) -> Value {
    let mut args = json!({ "table": "clean", "columns": features });
    if let Some(m) = &state.task.mediator {
        args["mediator"] = json!(m);
    }
    if let Some(c) = &state.task.covariate {
        args["covariate"] = json!(c);
    }
    args
}

/// The full step list of the policy for `scenario`.
pub fn policy_steps(state: &WorkflowState, scenario: Scenario) -> Vec<PlannedStep> {
    let features = state.ordered_features();
    let mut columns = state.task.features.clone();
    columns.extend(auxiliary(state));
    let mut steps = vec![PlannedStep {
        tool: "load_csv_file".into(),
        args: json!({ "path": state.task.dataset.display().to_string(), "as": "data" }),
    }];
    steps.extend(extract_step(state));
    steps.push(PlannedStep {
        tool: "clean_missing_values".into(),
        args: json!({ "table": "selected", "columns": columns, "mode": "drop_row", "as": "clean" }),
    });
    for m in scenario.metrics() {
        steps.push(PlannedStep {
            tool: m.tool_name().into(),
            args: metric_args(state, &features),
        });
    }
    let chart = chart_for(scenario);
    steps.push(PlannedStep {
        tool: chart.tool_name().into(),
        args: json!({ "table": "clean", "columns": features, "file": format!("{}.svg", chart.file_stem()) }),
    });
    steps
}

fn invoke(step: &PlannedStep, why: &str) -> Action {
    Action::invoke(&step.tool, step.args.clone(), why)
}

impl RulePlanner {
    fn preprocessing(&self, state: &WorkflowState) -> Action {
        if state.task.features.is_empty() || state.task.features.len() > 2 {
            return Action::abort(format!(
                "expected one or two features, got {}",
                state.task.features.len()
            ));
        }
        if !state.succeeded("load_csv_file") {
            if let Some(err) = state.last_error("load_csv_file") {
                return Action::abort(err.error.clone().unwrap_or_default());
            }
            return Action::invoke(
                "load_csv_file",
                json!({ "path": state.task.dataset.display().to_string(), "as": "data" }),
                "load the dataset",
            );
        }
        let extract = extract_step(state).expect("feature count checked");
        if !state.succeeded(&extract.tool) {
            if let Some(err) = state.last_error(&extract.tool) {
                return Action::abort(err.error.clone().unwrap_or_default());
            }
            return invoke(&extract, "keep only the features under study");
        }
        if !state.succeeded("clean_missing_values") {
            if let Some(err) = state.last_error("clean_missing_values") {
                return Action::abort(err.error.clone().unwrap_or_default());
            }
            let mut columns = state.task.features.clone();
            columns.extend(auxiliary(state));
            return Action::invoke(
                "clean_missing_values",
                json!({ "table": "selected", "columns": columns, "mode": "drop_row", "as": "clean" }),
                "drop rows with missing values",
            );
        }
        let scenario = match state.scenario_result() {
            Some(Ok(s)) => s,
            Some(Err(e)) => return Action::abort(e.to_string()),
            None => return Action::abort("no table loaded"),
        };
        if !state.consulted(Checkpoint::Plan) {
            return Action::consult(AdvisorPayload::Plan {
                scenario,
                features: state.ordered_features(),
                steps: policy_steps(state, scenario),
            });
        }
        Action::transition(Stage::Detection)
    }

    fn detection(&self, state: &WorkflowState) -> Action {
        let Some(scenario) = state.scenario() else {
            return Action::transition(Stage::Preprocessing);
        };
        let steps = policy_steps(state, scenario);
        for m in scenario.metrics() {
            if state.attempts(m.tool_name()) == 0 {
                let step = steps
                    .iter()
                    .find(|s| s.tool == m.tool_name())
                    .expect("policy has every metric");
                return invoke(step, &format!("compute {m}"));
            }
        }
        if !state.consulted(Checkpoint::Results) {
            return Action::consult(AdvisorPayload::results(state, scenario));
        }
        Action::transition(Stage::VisualizationSummary)
    }

    fn visualization(&self, state: &WorkflowState) -> Action {
        let Some(scenario) = state.scenario() else {
            return Action::transition(Stage::Preprocessing);
        };
        let chart = chart_for(scenario);
        if state.attempts(chart.tool_name()) == 0 {
            let steps = policy_steps(state, scenario);
            let step = steps.last().expect("policy ends with a chart");
            return invoke(step, "draw the scenario chart");
        }
        if !state.consulted(Checkpoint::Report) {
            return Action::consult(AdvisorPayload::report_draft(state));
        }
        Action::transition(Stage::Feedback)
    }
}

impl Planner for RulePlanner {
    fn name(&self) -> &str {
        "rule"
    }

    fn next(&mut self, state: &WorkflowState, _: &ToolRegistry) -> Result<Action, PlannerError> {
        if let Some(a) = state.pending.front() {
            return Ok(a.clone());
        }
        Ok(match state.stage {
            Stage::UserInput => Action::transition(Stage::Preprocessing),
            Stage::Preprocessing => self.preprocessing(state),
            Stage::Detection => self.detection(state),
            Stage::VisualizationSummary => self.visualization(state),
            Stage::Feedback if state.task.interactive && !state.asked_user => {
                Action::ask("Any follow-up questions or changes to the analysis?")
            }
            Stage::Feedback => Action::finish(),
        })
    }
}

/// Replays a fixed list, then finishes. A rejected action is offered once
/// more before the session gives up.
#[derive(Debug, Clone)]
pub struct ScriptedPlanner {
    actions: Vec<Action>,
    pos: usize,
}

impl ScriptedPlanner {
    pub fn new(actions: Vec<Action>) -> Self {
        ScriptedPlanner { actions, pos: 0 }
    }

    /// A JSON array of actions.
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        Ok(Self::new(serde_json::from_str(text)?))
    }
}

impl Planner for ScriptedPlanner {
    fn name(&self) -> &str {
        "scripted"
    }

    fn next(&mut self, _: &WorkflowState, _: &ToolRegistry) -> Result<Action, PlannerError> {
        let action = self.actions.get(self.pos).cloned().unwrap_or_else(Action::finish);
        self.pos += 1;
        Ok(action)
    }

    fn rejected(&mut self, _: &Action, _: &str) {
        self.pos = self.pos.saturating_sub(1);
    }
}
