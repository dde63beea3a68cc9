//! Chat-completion backed planner and advisor. Replies are parsed into
//! [`Action`]s; nothing in a reply is ever executed except registry tools.

use std::fmt::Write as _;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{
    Action, ActionKind, AdvisorPayload, Checkpoint, PlannedStep, Planner, PlannerError, Stage, ToolRegistry,
    WorkflowState,
};
use crate::net::{post_with_retry, HttpTransport, Request};

pub const PRIMARY_FRAME: &str = "You are the primary agent of a bias detection system for tabular data.\n\
Your responsibilities:\n\
- Communicate with the user: restate the task, the features involved and the kind of bias in question.\n\
- Develop a detection plan that covers loading and preprocessing the data, the detection metrics to run, \
the chart to draw and how the results will be summarized.\n\
- Select tools from the toolset (and the method library when useful); run every metric of the task's scenario.\n\
- Consult the advisor after planning, after detection and before finishing.\n\
- Give the user a clear summary with bias levels and recommendations.\n\
Reply with exactly one tool call, or with one JSON object such as \
{\"action\": \"transition\", \"stage\": \"detection\"}, {\"action\": \"consult_advisor\", \"checkpoint\": \"plan\", \"steps\": [...]}, \
{\"action\": \"ask_user\", \"prompt\": \"...\"} or {\"action\": \"finish\"}.";

pub const ADVISOR_FRAME: &str = "You are the advisor agent of a bias detection system for tabular data.\n\
Your responsibilities:\n\
- Check that the primary agent's actions match what the user asked for.\n\
- Improve the execution plan: all five metrics of the scenario, cleaning before detection.\n\
- Review tool selection and the execution results, and propose fixes for errors.\n\
- Check that the summary carries bias levels, labels and recommendations.\n\
Reply with one JSON object: {\"verdict\": \"approve\" | \"revise\", \"issues\": [\"...\"]}.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatConfig {
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable that holds the API key.
    pub key_env: String,
    #[serde(default = "default_timeout")]
    pub timeout_s: u64,
    #[serde(default = "default_attempts")]
    pub max_attempts: u32,
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
}

fn default_timeout() -> u64 {
    60
}

fn default_attempts() -> u32 {
    3
}

fn default_backoff() -> u64 {
    500
}

pub struct ChatClient {
    config: ChatConfig,
    transport: Arc<dyn HttpTransport>,
    key: Option<String>,
    transcript: Mutex<Vec<Value>>,
}

impl ChatClient {
    /// Reads the key from the configured environment variable.
    pub fn new(config: ChatConfig, transport: Arc<dyn HttpTransport>) -> Self {
        let key = std::env::var(&config.key_env).ok();
        ChatClient {
            config,
            transport,
            key,
            transcript: Mutex::new(Vec::new()),
        }
    }

    pub fn config(&self) -> &ChatConfig {
        &self.config
    }

    /// Sends one chat-completion request and returns the reply message.
    pub fn complete(&self, messages: Vec<Value>, tools: Option<Vec<Value>>) -> Result<Value, PlannerError> {
        let mut body = json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": 0,
        });
        if let Some(t) = tools {
            body["tools"] = Value::Array(t);
        }
        let request = Request {
            url: format!("{}/chat/completions", self.config.base_url.trim_end_matches('/')),
            bearer: self.key.clone(),
            body,
            timeout: Duration::from_secs(self.config.timeout_s),
        };
        let result = post_with_retry(
            self.transport.as_ref(),
            &request,
            self.config.max_attempts,
            Duration::from_millis(self.config.backoff_ms),
        );
        self.transcript.lock().expect("transcript lock").push(json!({
            "request": request.body,
            "response": match &result {
                Ok(v) => v.clone(),
                Err(e) => json!({ "error": e.to_string() }),
            },
        }));
        let response = result?;
        response
            .pointer("/choices/0/message")
            .cloned()
            .ok_or_else(|| PlannerError::Unparseable("response has no choices[0].message".into()))
    }

    pub fn transcript(&self) -> Vec<Value> {
        self.transcript.lock().expect("transcript lock").clone()
    }
}

/// The outermost `{...}` span of `text`.
pub fn json_object(text: &str) -> Option<&str> {
    let start = text.find('{')?;
    let end = text.rfind('}')?;
    (end > start).then(|| &text[start..=end])
}

/// Turns a reply message into an action. Tool calls must name a registry
/// tool; free text must contain one JSON action object.
pub fn parse_reply(message: &Value, registry: &ToolRegistry, state: &WorkflowState) -> Result<Action, String> {
    if let Some(call) = message.pointer("/tool_calls/0/function") {
        let name = call
            .get("name")
            .and_then(Value::as_str)
            .ok_or("tool call without a name")?;
        if !registry.contains(name) {
            return Err(format!("unknown tool {name:?}"));
        }
        let args = match call.get("arguments") {
            Some(Value::String(s)) if s.trim().is_empty() => json!({}),
            Some(Value::String(s)) => serde_json::from_str(s).map_err(|e| format!("arguments are not JSON: {e}"))?,
            Some(v @ Value::Object(_)) => v.clone(),
            _ => json!({}),
        };
        let rationale = message.get("content").and_then(Value::as_str).unwrap_or("").to_string();
        return Ok(Action::invoke(name, args, rationale));
    }
    let content = message.get("content").and_then(Value::as_str).unwrap_or("");
    let obj: Value = json_object(content)
        .and_then(|s| serde_json::from_str(s).ok())
        .ok_or("reply holds neither a tool call nor a JSON action")?;
    let rationale = obj.get("rationale").and_then(Value::as_str).unwrap_or("").to_string();
    let field = |k: &str| obj.get(k).and_then(Value::as_str);
    let kind = match field("action").ok_or("JSON action has no `action` field")? {
        "invoke_tool" => {
            let tool = field("tool").ok_or("invoke_tool without `tool`")?;
            if !registry.contains(tool) {
                return Err(format!("unknown tool {tool:?}"));
            }
            ActionKind::InvokeTool {
                tool: tool.to_string(),
                args: obj.get("args").cloned().unwrap_or_else(|| json!({})),
            }
        }
        "transition" => {
            let stage: Stage = serde_json::from_value(obj.get("stage").cloned().unwrap_or(Value::Null))
                .map_err(|_| "transition needs a valid `stage`")?;
            ActionKind::Transition { stage }
        }
        "ask_user" => ActionKind::AskUser {
            prompt: field("prompt").unwrap_or("Any follow-up questions?").to_string(),
        },
        "finish" => ActionKind::Finish { abort: None },
        "consult_advisor" => {
            let checkpoint: Checkpoint = serde_json::from_value(obj.get("checkpoint").cloned().unwrap_or(Value::Null))
                .map_err(|_| "consult_advisor needs `checkpoint` plan, results or report")?;
            let scenario = state.scenario();
            let payload = match (checkpoint, scenario) {
                (Checkpoint::Plan, Some(scenario)) => AdvisorPayload::Plan {
                    scenario,
                    features: state.ordered_features(),
                    steps: serde_json::from_value::<Vec<PlannedStep>>(obj.get("steps").cloned().unwrap_or(json!([])))
                        .map_err(|e| format!("invalid plan steps: {e}"))?,
                },
                (Checkpoint::Results, Some(scenario)) => AdvisorPayload::results(state, scenario),
                (Checkpoint::Report, _) => AdvisorPayload::report_draft(state),
                (_, None) => return Err("the scenario is not known yet; load and clean the data first".into()),
            };
            ActionKind::ConsultAdvisor { payload }
        }
        other => return Err(format!("unknown action {other:?}")),
    };
    Ok(Action { kind, rationale })
}

/// One planning step: request, parse, and on an unusable reply one
/// reformat request before giving up.
pub fn chat_complete(
    client: &ChatClient,
    mut messages: Vec<Value>,
    registry: &ToolRegistry,
    state: &WorkflowState,
) -> Result<Action, PlannerError> {
    let reply = client.complete(messages.clone(), Some(registry.schemas()))?;
    match parse_reply(&reply, registry, state) {
        Ok(a) => Ok(a),
        Err(why) => {
            messages.push(reply);
            messages.push(json!({
                "role": "user",
                "content": format!(
                    "Your reply could not be used: {why}. Reply again with exactly one tool call from the toolset \
                     or one JSON action object."
                ),
            }));
            let retry = client.complete(messages, Some(registry.schemas()))?;
            parse_reply(&retry, registry, state).map_err(PlannerError::Unparseable)
        }
    }
}

/// Text view of the session for the prompt.
pub fn render_state(state: &WorkflowState) -> String {
    let mut s = String::new();
    let t = &state.task;
    let _ = writeln!(s, "Dataset: {}", t.dataset.display());
    let _ = writeln!(s, "Question: {}", t.question);
    let _ = writeln!(s, "Features: {}", t.features.join(", "));
    let _ = writeln!(s, "Stated bias type: {}", t.bias_type);
    let _ = writeln!(
        s,
        "Current stage: {} (stages in order: user_input, preprocessing, detection, visualization_summary, feedback)",
        state.stage
    );
    if let Some(sc) = state.scenario() {
        let metrics: Vec<&str> = sc.metrics().iter().map(|m| m.tool_name()).collect();
        let _ = writeln!(s, "Scenario: {sc}; its metric tools: {}", metrics.join(", "));
    }
    let tables: Vec<&str> = state
        .artifacts
        .iter()
        .filter(|(_, a)| matches!(a, super::Artifact::Table(_)))
        .map(|(n, _)| n.as_str())
        .collect();
    let _ = writeln!(
        s,
        "Tables: {}",
        if tables.is_empty() {
            "none".into()
        } else {
            tables.join(", ")
        }
    );
    let _ = writeln!(s, "Remaining action budget: {}", state.budget);
    let _ = writeln!(s, "Tool calls so far:");
    for inv in &state.invocations {
        match &inv.error {
            None => {
                let _ = writeln!(s, "- {} ok", inv.tool);
            }
            Some(e) => {
                let _ = writeln!(s, "- {} failed: {e}", inv.tool);
            }
        }
    }
    for (cp, c) in &state.critiques {
        let _ = writeln!(s, "Advisor on {cp}: {:?} {}", c.verdict, c.issues.join("; "));
    }
    if !state.pending.is_empty() {
        let _ = writeln!(s, "Advisor suggestions pending:");
        for a in &state.pending {
            let _ = writeln!(s, "- {}", serde_json::to_string(a).unwrap_or_default());
        }
    }
    s
}

pub struct ChatPlanner {
    client: ChatClient,
}

impl ChatPlanner {
    pub fn new(client: ChatClient) -> Self {
        ChatPlanner { client }
    }
}

impl Planner for ChatPlanner {
    fn name(&self) -> &str {
        "chat"
    }

    fn next(&mut self, state: &WorkflowState, registry: &ToolRegistry) -> Result<Action, PlannerError> {
        let messages = vec![
            json!({ "role": "system", "content": PRIMARY_FRAME }),
            json!({ "role": "user", "content": render_state(state) }),
        ];
        chat_complete(&self.client, messages, registry, state)
    }

    fn transcript(&self) -> Vec<Value> {
        self.client.transcript()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::StatedBias;
    use crate::net::{RecordedTransport, TransportError};
    use crate::orchestrator::TaskContext;

    fn config() -> ChatConfig {
        ChatConfig {
            base_url: "http://chat.invalid/v1".into(),
            model: "m".into(),
            key_env: "BIASAUDIT_TEST_UNSET_KEY".into(),
            timeout_s: 1,
            max_attempts: 3,
            backoff_ms: 0,
        }
    }

    fn state() -> WorkflowState {
        WorkflowState::new(
            TaskContext::new("d.csv", vec!["sex".into()], StatedBias::Distribution),
            5,
        )
    }

    fn tool_call(name: &str, args: &str) -> Result<Value, TransportError> {
        Ok(
            json!({"choices": [{"message": {"role": "assistant", "content": null, "tool_calls": [
                {"id": "c1", "type": "function", "function": {"name": name, "arguments": args}}
            ]}}]}),
        )
    }

    #[test]
    fn recorded_tool_call_becomes_invoke() {
        let transport = Arc::new(RecordedTransport::new([tool_call(
            "load_csv_file",
            r#"{"path":"d.csv"}"#,
        )]));
        let client = ChatClient::new(config(), transport.clone());
        let registry = ToolRegistry::builtin();
        let msgs = vec![json!({"role": "user", "content": "go"})];
        let action = chat_complete(&client, msgs, &registry, &state()).unwrap();
        assert_eq!(action, Action::invoke("load_csv_file", json!({"path": "d.csv"}), ""));
        let reqs = transport.requests();
        assert_eq!(reqs.len(), 1);
        assert_eq!(reqs[0].url, "http://chat.invalid/v1/chat/completions");
        assert_eq!(reqs[0].body["tools"].as_array().unwrap().len(), 46);
        assert_eq!(client.transcript().len(), 1);
    }

    #[test]
    fn three_timeouts_are_a_network_error() {
        let transport = Arc::new(RecordedTransport::new(
            (0..3).map(|_| Err(TransportError::Timeout("u".into()))),
        ));
        let client = ChatClient::new(config(), transport.clone());
        let r = chat_complete(&client, vec![], &ToolRegistry::builtin(), &state());
        assert!(matches!(r, Err(PlannerError::Network(TransportError::Timeout(_)))));
        assert_eq!(transport.requests().len(), 3);
    }

    #[test]
    fn unknown_tool_fails_after_one_retry() {
        let transport = Arc::new(RecordedTransport::new([
            tool_call("rm_rf", "{}"),
            tool_call("rm_rf", "{}"),
        ]));
        let client = ChatClient::new(config(), transport.clone());
        let r = chat_complete(&client, vec![], &ToolRegistry::builtin(), &state());
        assert!(matches!(r, Err(PlannerError::Unparseable(ref m)) if m.contains("rm_rf")));
        assert_eq!(transport.requests().len(), 2);
    }

    #[test]
    fn free_text_json_actions_parse() {
        let registry = ToolRegistry::builtin();
        let msg = json!({"content": "Moving on. {\"action\": \"transition\", \"stage\": \"preprocessing\"}"});
        assert_eq!(
            parse_reply(&msg, &registry, &state()).unwrap().kind,
            ActionKind::Transition {
                stage: Stage::Preprocessing
            }
        );
        let msg = json!({"content": "{\"action\": \"finish\"}"});
        assert_eq!(
            parse_reply(&msg, &registry, &state()).unwrap().kind,
            ActionKind::Finish { abort: None }
        );
        assert!(parse_reply(&json!({"content": "I think the data is fine."}), &registry, &state()).is_err());
    }
}
