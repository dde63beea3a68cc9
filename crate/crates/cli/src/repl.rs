//! Interactive loop: every follow-up the user types at the feedback prompt
//! produces a revised report under `<out>/revision-<n>/`.

use std::io::Write;
use std::path::Path;

use anyhow::Result;
use biasaudit::metrics::StatedBias;
use biasaudit::orchestrator::log::event;
use biasaudit::orchestrator::{run_session, InputError, LineInput, SessionOutcome, ToolRegistry, UserInput};
use biasaudit::tabular::{self, LoadOptions};

use crate::config::Config;
use crate::{headline, make_planner, out_dir, session_config, task_context, write_outcome, ReplArgs};

const QUIT_WORDS: [&str; 3] = ["quit", "exit", "q"];

fn is_quit(text: &str) -> bool {
    QUIT_WORDS.contains(&text.trim().to_lowercase().as_str())
}

/// Column names mentioned in `text`, in order of first mention.
pub fn mentioned_columns(text: &str, columns: &[String]) -> Vec<String> {
    let lower = text.to_lowercase();
    let boundary = |c: Option<char>| c.is_none_or(|c| !(c.is_alphanumeric() || c == '-' || c == '_'));
    let mut hits: Vec<(usize, &String)> = columns
        .iter()
        .filter_map(|col| {
            let needle = col.to_lowercase();
            lower.match_indices(&needle).find_map(|(i, _)| {
                let before = lower[..i].chars().next_back();
                let after = lower[i + needle.len()..].chars().next();
                (boundary(before) && boundary(after)).then_some((i, col))
            })
        })
        .collect();
    hits.sort();
    hits.into_iter().map(|(_, c)| c.clone()).collect()
}

/// Bias type a follow-up asks about, given how many features it names.
fn stated_bias(text: &str, features: usize) -> StatedBias {
    let lower = text.to_lowercase();
    let any = |words: &[&str]| words.iter().any(|w| lower.contains(w));
    if features == 2 && any(&["correlat", "relationship", "associat", "depend"]) {
        StatedBias::Correlation
    } else if features == 1 && any(&["distribut", "balance", "represent", "skew"]) {
        StatedBias::Distribution
    } else {
        StatedBias::Unstated
    }
}

/// The reply to the session's feedback prompt, if the user gave one.
fn follow_up(outcome: &SessionOutcome) -> Option<String> {
    outcome
        .log
        .events(event::USER_INPUT)
        .last()
        .and_then(|r| r.payload["content"].as_str())
        .map(str::to_string)
}

pub fn cmd_repl(config: &Config, args: ReplArgs) -> Result<u8> {
    let stdin = std::io::stdin();
    let mut input = LineInput::new(stdin.lock(), std::io::stdout());
    run_repl(config, args, &mut input, &mut std::io::stdout())
}

pub fn run_repl(config: &Config, args: ReplArgs, input: &mut dyn UserInput, out: &mut dyn Write) -> Result<u8> {
    let root = out_dir(config, &args.run, "biasaudit-out");
    let columns = tabular::list_features(&args.task.dataset, &LoadOptions::default())?;
    let mut features = args.features.clone();
    while features.is_empty() {
        let reply = match input.read("Which feature(s) should be audited? Name one or two columns") {
            Ok(r) => r,
            Err(InputError::EndOfInput) => return Ok(0),
            Err(e) => return Err(e.into()),
        };
        if is_quit(&reply) {
            return Ok(0);
        }
        features = mentioned_columns(&reply, &columns).into_iter().take(2).collect();
        if features.is_empty() {
            writeln!(out, "No column named; columns are: {}", columns.join(", "))?;
        }
    }
    let mut task = task_context(&args.task, features);
    task.interactive = true;
    let registry = ToolRegistry::builtin();
    let mut notes: Vec<String> = Vec::new();
    for revision in 1.. {
        let dir = root.join(format!("revision-{revision}"));
        let session = session_config(config, &args.run, &dir)?;
        let mut planner = make_planner(config, &args.run)?;
        let mut outcome = run_session(task.clone(), planner.as_mut(), &registry, &session, input)?;
        outcome.report.notes.extend(notes.iter().cloned());
        write_outcome(&outcome, &dir)?;
        write_summary(out, revision, &outcome, &dir)?;
        let Some(reply) = follow_up(&outcome) else {
            return Ok(0);
        };
        if is_quit(&reply) {
            return Ok(0);
        }
        let named: Vec<String> = mentioned_columns(&reply, &columns).into_iter().take(2).collect();
        if !named.is_empty() {
            task.bias_type = stated_bias(&reply, named.len());
            task.features = named;
        }
        task.question = reply.clone();
        notes.push(format!("Follow-up after revision {revision}: {reply}"));
    }
    unreachable!("the revision loop only exits by returning")
}

fn write_summary(out: &mut dyn Write, revision: usize, outcome: &SessionOutcome, dir: &Path) -> Result<()> {
    let r = &outcome.report;
    writeln!(
        out,
        "Revision {revision}: {} on {}: {}",
        r.task.scenario.map_or("unclassified".to_string(), |s| s.to_string()),
        r.task.features.join(", "),
        headline(r.headline)
    )?;
    for f in &r.findings {
        writeln!(out, "  {}: level {} ({})", f.metric_id, f.level.value(), f.label)?;
    }
    writeln!(out, "  report: {}", dir.join("report.md").display())?;
    Ok(())
}
