//! The 46-tool registry: preprocessing, detection, visualization and
//! miscellaneous tools. Every tool runs in-process without network access.

use std::path::Path;

use indexmap::IndexMap;
use serde::Serialize;
use serde_json::{json, Map, Value};
use thiserror::Error;

use super::input::InputError;
use super::{build_report, Artifact, SessionConfig, WorkflowState};
use crate::methodlib::{LibraryError, RetrievalQuery};
use crate::metrics::{self, MetricError, MetricId, MetricOptions, Scenario};
use crate::reporting::{render_chart, spec_from_table, ChartError, ChartKind, ChartRecord, ReportError};
use crate::severity::{map_to_level, SeverityError};
use crate::tabular::{self, Aggregate, CleaningMode, CleaningPolicy, ScaleMode, Table, TabularError};

#[derive(Debug, Error)]
pub enum ToolError {
    #[error("unknown tool {0:?}")]
    UnknownTool(String),
    #[error("{tool}: {message}")]
    BadArgs { tool: String, message: String },
    #[error("no table artifact named {0:?}")]
    MissingTable(String),
    #[error(transparent)]
    Tabular(#[from] TabularError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Severity(#[from] SeverityError),
    #[error(transparent)]
    Chart(#[from] ChartError),
    #[error(transparent)]
    Library(#[from] LibraryError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error(transparent)]
    Input(#[from] InputError),
}

impl ToolError {
    /// The tool does not apply to this input; retrying cannot help.
    pub fn is_inapplicable(&self) -> bool {
        match self {
            ToolError::Metric(e) => e.is_inapplicable(),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolCategory {
    Preprocessing,
    Detection,
    Visualization,
    Miscellaneous,
}

/// What a tool hands back to the session: a JSON summary logged verbatim and
/// optionally a named artifact.
#[derive(Debug, Clone)]
pub struct ToolOutput {
    pub summary: Value,
    pub artifact: Option<(String, Artifact)>,
}

/// Read access to the session plus the user-input channel.
pub struct ToolContext<'a> {
    pub state: &'a WorkflowState,
    pub config: &'a SessionConfig,
    pub input: &'a mut dyn super::input::UserInput,
}

pub type Executor = fn(&str, &mut ToolContext<'_>, &Value) -> Result<ToolOutput, ToolError>;

pub struct ToolEntry {
    pub name: &'static str,
    pub category: ToolCategory,
    /// (argument name, JSON type, required)
    pub params: &'static [(&'static str, &'static str, bool)],
    pub description: String,
    pub executor: Executor,
}

impl ToolEntry {
    pub fn signature(&self) -> String {
        let params: Vec<String> = self
            .params
            .iter()
            .map(|(n, t, req)| format!("{n}{}: {t}", if *req { "" } else { "?" }))
            .collect();
        format!("{}({})", self.name, params.join(", "))
    }

    /// Function-calling schema in the chat-completion `tools` format.
    pub fn schema(&self) -> Value {
        let mut props = Map::new();
        let mut required = Vec::new();
        for (n, t, req) in self.params {
            let prop = if *t == "array" {
                json!({"type": "array", "items": {"type": "string"}})
            } else {
                json!({ "type": t })
            };
            props.insert(n.to_string(), prop);
            if *req {
                required.push(n.to_string());
            }
        }
        json!({
            "type": "function",
            "function": {
                "name": self.name,
                "description": self.description,
                "parameters": {"type": "object", "properties": props, "required": required},
            }
        })
    }
}

impl std::fmt::Debug for ToolEntry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ToolEntry")
            .field("name", &self.name)
            .finish_non_exhaustive()
    }
}

#[derive(Debug)]
pub struct ToolRegistry {
    entries: IndexMap<&'static str, ToolEntry>,
}

const METRIC_ARGS: &[(&str, &str, bool)] = &[
    ("table", "string", false),
    ("columns", "array", true),
    ("mediator", "string", false),
    ("covariate", "string", false),
];
const PLOT_ARGS: &[(&str, &str, bool)] = &[
    ("table", "string", false),
    ("columns", "array", true),
    ("file", "string", false),
];

fn metric_description(m: MetricId) -> String {
    let subject = match m.scenario() {
        Scenario::CatDist => "the distribution of a categorical column",
        Scenario::NumDist => "the distribution of a numerical column",
        Scenario::CatCat => "the association between two categorical columns",
        Scenario::CatNum => "the association between a categorical and a numerical column",
        Scenario::NumNum => "the association between two numerical columns",
    };
    let how = match m {
        MetricId::ShannonBalance => "Shannon entropy balance (1 means perfectly even)",
        MetricId::MaxMinRatio => "the ratio of the largest to the smallest category count",
        MetricId::Entropy => "normalized Shannon entropy",
        MetricId::Gini => "a Laplace-smoothed, sample-size-corrected Gini index",
        MetricId::RelativeRisk => "relative risk of observed against expected category frequencies",
        MetricId::Skewness => "sample skewness",
        MetricId::Kurtosis => "excess kurtosis",
        MetricId::Outlier => "the share of values with |z| above the cutoff",
        MetricId::CohensDMad => "a mean-median gap scaled by the median absolute deviation",
        MetricId::QuantileDeviation => "the position of the median inside the interquartile range",
        MetricId::CramersV => "Cramér's V from the chi-square statistic",
        MetricId::Elift => "elift, the confidence of a rule over the base rate of its outcome",
        MetricId::StatisticalParity => "differences in outcome proportions between groups with a z test",
        MetricId::Lipschitz => "a Lipschitz bound on distances between group outcome distributions",
        MetricId::TotalVariation => "total variation distance of group distributions from the overall one",
        MetricId::MaxAbsMean => "the largest absolute standardized group mean",
        MetricId::CohensD => "Cohen's d between the two most different groups",
        MetricId::StandardizedDifference => "a mean difference scaled by the median absolute deviation",
        MetricId::CausalEffect => "a standardized average causal effect, stratified when a covariate is given",
        MetricId::Pse => "path-specific direct and indirect effects through a mediator",
        MetricId::Pearson => "the Pearson correlation coefficient",
        MetricId::Nmi => "normalized mutual information after equal-frequency binning",
        MetricId::HgrApproximation => "an HGR maximal correlation approximation from kernel density estimates",
        MetricId::Wasserstein => "the Wasserstein-2 distance between the standardized marginals",
        MetricId::Hsic => "a normalized Hilbert-Schmidt independence criterion with RBF kernels",
    };
    format!("Measures bias in {subject} using {how}.")
}

fn chart_description(k: ChartKind) -> String {
    let what = match k {
        ChartKind::Bar => "a bar chart of category counts (or a histogram for a numerical column)",
        ChartKind::Pie => "a pie chart of category shares",
        ChartKind::HorizontalBar => "a horizontal bar chart of category counts",
        ChartKind::Treemap => "a squarified treemap of category counts",
        ChartKind::Heatmap => "a frequency heatmap of one column or the cross-tabulation of two",
        ChartKind::CorrelationHeatmap => "a Pearson correlation heatmap of two or more numerical columns",
        ChartKind::StackedBar => "a stacked bar chart of two categorical columns",
        ChartKind::GroupedBar => "a grouped bar chart of two categorical columns",
        ChartKind::Box => "box plots of a numerical column, grouped by a categorical column when given",
    };
    format!("Draws {what} and saves it as an SVG file.")
}

impl ToolRegistry {
    pub fn builtin() -> Self {
        let mut entries = IndexMap::new();
        let mut add = |name: &'static str,
                       category: ToolCategory,
                       params: &'static [(&'static str, &'static str, bool)],
                       description: String,
                       executor: Executor| {
            entries.insert(
                name,
                ToolEntry {
                    name,
                    category,
                    params,
                    description,
                    executor,
                },
            );
        };
        use ToolCategory::*;
        add(
            "get_csv_features",
            Preprocessing,
            &[("path", "string", true)],
            "Lists the column names of a delimited file.".into(),
            get_csv_features,
        );
        add(
            "load_csv_file",
            Preprocessing,
            &[("path", "string", true), ("as", "string", false)],
            "Loads a delimited file into a named table, inferring each column's kind.".into(),
            load_csv_file,
        );
        add(
            "extract_single_column",
            Preprocessing,
            &[
                ("table", "string", false),
                ("column", "string", true),
                ("keep", "array", false),
                ("as", "string", false),
            ],
            "Copies one column (plus any `keep` columns) into a new named table.".into(),
            extract,
        );
        add(
            "extract_two_columns",
            Preprocessing,
            &[
                ("table", "string", false),
                ("columns", "array", true),
                ("keep", "array", false),
                ("as", "string", false),
            ],
            "Copies two columns (plus any `keep` columns) into a new named table.".into(),
            extract,
        );
        add(
            "clean_missing_values",
            Preprocessing,
            &[
                ("table", "string", false),
                ("columns", "array", false),
                ("mode", "string", false),
                ("as", "string", false),
            ],
            "Drops or fills missing and invalid cells in the given columns (mode drop_row, fill_mode or fill_median)."
                .into(),
            clean_missing_values,
        );
        add(
            "normalize_or_standardize_data",
            Preprocessing,
            &[
                ("table", "string", false),
                ("column", "string", true),
                ("mode", "string", true),
                ("as", "string", false),
            ],
            "Rescales a numerical column to [0, 1] (normalize) or to zero mean and unit variance (standardize).".into(),
            normalize_or_standardize,
        );
        add(
            "group_and_aggregate",
            Preprocessing,
            &[
                ("table", "string", false),
                ("by", "string", true),
                ("target", "string", true),
                ("agg", "string", false),
                ("as", "string", false),
            ],
            "Groups rows by one column and aggregates another (mean, count, sum or median).".into(),
            group_and_aggregate,
        );
        for m in MetricId::ALL {
            add(m.tool_name(), Detection, METRIC_ARGS, metric_description(m), run_metric);
        }
        for k in ChartKind::ALL {
            add(k.tool_name(), Visualization, PLOT_ARGS, chart_description(k), plot);
        }
        add(
            "get_user_input_tool",
            Miscellaneous,
            &[("prompt", "string", true)],
            "Asks the user a question and returns the reply.".into(),
            get_user_input_tool,
        );
        add(
            "get_all_reference_intentions",
            Miscellaneous,
            &[],
            "Lists the id and intention of every entry in the method library.".into(),
            get_all_reference_intentions,
        );
        add(
            "get_reference_method_by_id",
            Miscellaneous,
            &[("id", "string", true)],
            "Returns the full record of one method library entry.".into(),
            get_reference_method_by_id,
        );
        add(
            "retrieve_reference_methods",
            Miscellaneous,
            &[
                ("scenario", "string", true),
                ("text", "string", false),
                ("top_k", "integer", false),
            ],
            "Ranks method library entries for a scenario by lexical relevance to free text.".into(),
            retrieve_reference_methods,
        );
        add(
            "generate_bias_report_pdf",
            Miscellaneous,
            &[],
            "Assembles the detection report (markdown with SVG charts and a JSON findings record) from the session so far.".into(),
            generate_report,
        );
        ToolRegistry { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn get(&self, name: &str) -> Option<&ToolEntry> {
        self.entries.get(name)
    }

    pub fn entries(&self) -> impl Iterator<Item = &ToolEntry> {
        self.entries.values()
    }

    pub fn schemas(&self) -> Vec<Value> {
        self.entries().map(ToolEntry::schema).collect()
    }

    pub fn invoke(&self, name: &str, ctx: &mut ToolContext<'_>, args: &Value) -> Result<ToolOutput, ToolError> {
        let entry = self.get(name).ok_or_else(|| ToolError::UnknownTool(name.to_string()))?;
        (entry.executor)(name, ctx, args)
    }
}

impl Default for ToolRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

fn bad(tool: &str, message: impl Into<String>) -> ToolError {
    ToolError::BadArgs {
        tool: tool.to_string(),
        message: message.into(),
    }
}

fn opt_str<'v>(args: &'v Value, key: &str) -> Option<&'v str> {
    args.get(key).and_then(Value::as_str)
}

fn req_str<'v>(tool: &str, args: &'v Value, key: &str) -> Result<&'v str, ToolError> {
    opt_str(args, key).ok_or_else(|| bad(tool, format!("missing string argument `{key}`")))
}

fn str_list(tool: &str, args: &Value, key: &str) -> Result<Option<Vec<String>>, ToolError> {
    match args.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(vec![s.clone()])),
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| {
                v.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| bad(tool, format!("`{key}` must hold strings")))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some),
        Some(_) => Err(bad(tool, format!("`{key}` must be a list of strings"))),
    }
}

fn parse_enum<T: serde::de::DeserializeOwned>(tool: &str, key: &str, value: &str) -> Result<T, ToolError> {
    serde_json::from_value(Value::String(value.to_string()))
        .map_err(|_| bad(tool, format!("invalid `{key}` value {value:?}")))
}

/// The table named by `table`, else the most processed table available.
fn input_table<'s>(ctx: &'s ToolContext<'_>, args: &Value) -> Result<(String, &'s Table), ToolError> {
    let name = match opt_str(args, "table") {
        Some(n) => n.to_string(),
        None => ctx
            .state
            .working_table_name()
            .ok_or_else(|| ToolError::MissingTable("(none loaded)".into()))?
            .to_string(),
    };
    let table = ctx
        .state
        .table(&name)
        .ok_or_else(|| ToolError::MissingTable(name.clone()))?;
    Ok((name, table))
}

fn table_output(name: String, table: Table, mut summary: Value) -> ToolOutput {
    summary["table"] = json!(name);
    summary["rows"] = json!(table.row_count());
    summary["columns"] = json!(table
        .columns()
        .iter()
        .map(|c| json!({"name": c.name, "kind": c.kind}))
        .collect::<Vec<_>>());
    ToolOutput {
        summary,
        artifact: Some((name, Artifact::Table(table))),
    }
}

fn resolve_path(ctx: &ToolContext<'_>, path: &str) -> std::path::PathBuf {
    let p = Path::new(path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        ctx.config.data_root.join(p)
    }
}

fn get_csv_features(tool: &str, ctx: &mut ToolContext<'_>, args: &Value) -> Result<ToolOutput, ToolError> {
    let path = req_str(tool, args, "path")?;
    let features = tabular::list_features(&resolve_path(ctx, path), &ctx.config.load_options)?;
    Ok(ToolOutput {
        summary: json!({ "features": features }),
        artifact: None,
    })
}

fn load_csv_file(tool: &str, ctx: &mut ToolContext<'_>, args: &Value) -> Result<ToolOutput, ToolError> {
    let path = req_str(tool, args, "path")?;
    let name = opt_str(args, "as").unwrap_or("data").to_string();
    let table = tabular::load_table(&resolve_path(ctx, path), &ctx.config.load_options)?;
    Ok(table_output(name, table, json!({ "path": path })))
}

fn extract(tool: &str, ctx: &mut ToolContext<'_>, args: &Value) -> Result<ToolOutput, ToolError> {
    let wanted: Vec<String> = if tool == "extract_single_column" {
        vec![req_str(tool, args, "column")?.to_string()]
    } else {
        let cols = str_list(tool, args, "columns")?.unwrap_or_default();
        if cols.len() != 2 {
            return Err(bad(tool, "`columns` must name exactly two columns"));
        }
        cols
    };
    let keep = str_list(tool, args, "keep")?.unwrap_or_default();
    let (_, source) = input_table(ctx, args)?;
    let refs: Vec<&str> = wanted.iter().map(String::as_str).collect();
    let base = tabular::extract_columns(source, &refs)?;
    let mut columns = base.columns().to_vec();
    for k in &keep {
        if !wanted.contains(k) {
            columns.push(source.column(k)?.clone());
        }
    }
    let mut table = Table::new(base.name.clone(), columns)?;
    table.metadata = base.metadata;
    let name = opt_str(args, "as").unwrap_or("selected").to_string();
    Ok(table_output(name, table, json!({ "extracted": wanted, "kept": keep })))
}

fn clean_missing_values(tool: &str, ctx: &mut ToolContext<'_>, args: &Value) -> Result<ToolOutput, ToolError> {
    let mode: CleaningMode = parse_enum(tool, "mode", opt_str(args, "mode").unwrap_or("drop_row"))?;
    let (_, source) = input_table(ctx, args)?;
    let columns = match str_list(tool, args, "columns")? {
        Some(c) => c,
        None => source.column_names().iter().map(|s| s.to_string()).collect(),
    };
    let refs: Vec<&str> = columns.iter().map(String::as_str).collect();
    let cleaned = tabular::clean_missing(source, &refs, &CleaningPolicy::new(mode))?;
    let table = cleaned
        .table
        .with_metadata("rows_dropped", cleaned.rows_dropped.to_string());
    let name = opt_str(args, "as").unwrap_or("clean").to_string();
    Ok(table_output(
        name,
        table,
        json!({
            "mode": mode,
            "rows_dropped": cleaned.rows_dropped,
            "cells_filled": cleaned.cells_filled,
        }),
    ))
}

fn normalize_or_standardize(tool: &str, ctx: &mut ToolContext<'_>, args: &Value) -> Result<ToolOutput, ToolError> {
    let column = req_str(tool, args, "column")?;
    let mode: ScaleMode = parse_enum(tool, "mode", req_str(tool, args, "mode")?)?;
    let (source_name, source) = input_table(ctx, args)?;
    let table = tabular::normalize_or_standardize(source, column, mode)?;
    let name = opt_str(args, "as").map_or(source_name, str::to_string);
    Ok(table_output(name, table, json!({ "column": column, "mode": mode })))
}

fn group_and_aggregate(tool: &str, ctx: &mut ToolContext<'_>, args: &Value) -> Result<ToolOutput, ToolError> {
    let by = req_str(tool, args, "by")?;
    let target = req_str(tool, args, "target")?;
    let agg: Aggregate = parse_enum(tool, "agg", opt_str(args, "agg").unwrap_or("mean"))?;
    let (_, source) = input_table(ctx, args)?;
    let table = tabular::group_and_aggregate(source, by, target, agg)?;
    let name = opt_str(args, "as").unwrap_or("aggregated").to_string();
    let rows: Vec<Value> = {
        let labels = table.columns()[0].labels();
        let values = table.columns()[1].reals();
        labels
            .into_iter()
            .zip(values)
            .map(|(l, v)| json!({ "group": l, "value": v }))
            .collect()
    };
    Ok(table_output(
        name,
        table,
        json!({ "by": by, "target": target, "agg": agg.to_string(), "groups": rows }),
    ))
}

fn run_metric(tool: &str, ctx: &mut ToolContext<'_>, args: &Value) -> Result<ToolOutput, ToolError> {
    let metric = MetricId::from_tool_name(tool).ok_or_else(|| ToolError::UnknownTool(tool.to_string()))?;
    let columns = str_list(tool, args, "columns")?
        .filter(|c| !c.is_empty())
        .ok_or_else(|| bad(tool, "missing `columns`"))?;
    let (_, table) = input_table(ctx, args)?;
    let opts = MetricOptions {
        mediator: opt_str(args, "mediator")
            .map(str::to_string)
            .or_else(|| ctx.config.metric_options.mediator.clone()),
        covariate: opt_str(args, "covariate")
            .map(str::to_string)
            .or_else(|| ctx.config.metric_options.covariate.clone()),
        ..ctx.config.metric_options.clone()
    };
    let refs: Vec<&str> = columns.iter().map(String::as_str).collect();
    let result = metrics::detect(table, &refs, metric, &opts)?;
    let level = map_to_level(metric, &result, &ctx.config.thresholds)?;
    let summary = json!({
        "metric_id": metric,
        "raw": serde_json::to_value(&result).expect("metric result serializes")["raw"],
        "n": result.n,
        "level": level,
        "label": level.label(),
        "details": result.details,
    });
    Ok(ToolOutput {
        summary,
        artifact: Some((metric_key(metric), Artifact::Metric { result, level })),
    })
}

/// Artifact name under which a metric result is stored.
pub fn metric_key(metric: MetricId) -> String {
    format!("metric:{metric}")
}

/// Artifact name under which a chart record is stored.
pub fn chart_key(kind: ChartKind) -> String {
    format!("chart:{}", kind.file_stem())
}

fn plot(tool: &str, ctx: &mut ToolContext<'_>, args: &Value) -> Result<ToolOutput, ToolError> {
    let kind = ChartKind::from_tool_name(tool).ok_or_else(|| ToolError::UnknownTool(tool.to_string()))?;
    let columns = str_list(tool, args, "columns")?
        .filter(|c| !c.is_empty())
        .ok_or_else(|| bad(tool, "missing `columns`"))?;
    let file = opt_str(args, "file")
        .map(str::to_string)
        .unwrap_or_else(|| format!("{}.svg", kind.file_stem()));
    if file.contains('/') || file.contains('\\') || file.starts_with('.') {
        return Err(bad(tool, "`file` must be a plain file name"));
    }
    let (_, table) = input_table(ctx, args)?;
    let refs: Vec<&str> = columns.iter().map(String::as_str).collect();
    let spec = spec_from_table(kind, table, &refs, &ctx.config.out_dir.join(&file))?;
    render_chart(&spec)?;
    let record = ChartRecord {
        kind,
        title: spec.title.clone(),
        file: file.clone(),
    };
    Ok(ToolOutput {
        summary: json!({ "kind": kind, "title": spec.title, "file": file }),
        artifact: Some((chart_key(kind), Artifact::Chart(record))),
    })
}

fn get_user_input_tool(tool: &str, ctx: &mut ToolContext<'_>, args: &Value) -> Result<ToolOutput, ToolError> {
    let prompt = req_str(tool, args, "prompt")?;
    let reply = ctx.input.read(prompt)?;
    Ok(ToolOutput {
        summary: json!({ "role": "user", "content": reply }),
        artifact: None,
    })
}

fn get_all_reference_intentions(_: &str, ctx: &mut ToolContext<'_>, _: &Value) -> Result<ToolOutput, ToolError> {
    let list: Vec<Value> = ctx
        .config
        .library
        .list_intentions()
        .into_iter()
        .map(|(id, intention)| json!({ "id": id, "intention": intention }))
        .collect();
    Ok(ToolOutput {
        summary: Value::Array(list),
        artifact: None,
    })
}

fn get_reference_method_by_id(tool: &str, ctx: &mut ToolContext<'_>, args: &Value) -> Result<ToolOutput, ToolError> {
    let id = req_str(tool, args, "id")?;
    let entry = ctx.config.library.get_method_by_id(id)?;
    Ok(ToolOutput {
        summary: serde_json::to_value(entry).expect("method entry serializes"),
        artifact: None,
    })
}

fn retrieve_reference_methods(tool: &str, ctx: &mut ToolContext<'_>, args: &Value) -> Result<ToolOutput, ToolError> {
    let scenario: Scenario = req_str(tool, args, "scenario")?
        .parse()
        .map_err(|e: String| bad(tool, e))?;
    let mut query = RetrievalQuery::new(scenario, opt_str(args, "text").unwrap_or(""));
    if let Some(k) = args.get("top_k").and_then(Value::as_u64) {
        query.top_k = k as usize;
    }
    let ranked: Vec<Value> = ctx
        .config
        .library
        .retrieve(&query)
        .into_iter()
        .map(|r| {
            json!({
                "id": r.entry.id,
                "intention": r.entry.intention,
                "score": r.score,
                "metric": r.entry.tags.metric,
            })
        })
        .collect();
    Ok(ToolOutput {
        summary: Value::Array(ranked),
        artifact: None,
    })
}

fn generate_report(_: &str, ctx: &mut ToolContext<'_>, _: &Value) -> Result<ToolOutput, ToolError> {
    let report = build_report(ctx.state, ctx.config, None);
    report.write(&ctx.config.out_dir)?;
    Ok(ToolOutput {
        summary: json!({
            "files": ["report.md", "findings.json"],
            "findings": report.findings.len(),
            "headline": report.headline,
            "complete": report.complete,
        }),
        artifact: Some(("report".into(), Artifact::Report(Box::new(report)))),
    })
}
