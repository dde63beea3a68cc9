//! The detection-method library: JSON records of published detection methods
//! and built-in metrics, with tag filtering and lexical retrieval.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::metrics::{MetricId, Scenario};
use crate::net::{HttpTransport, Request, TransportError};

/// The library shipped with the crate.
pub const BUILTIN_LIBRARY: &str = include_str!("../library/methods.json");

#[derive(Debug, Error)]
pub enum LibraryError {
    #[error("schema error in entry {position} ({id}): {message}")]
    Schema {
        position: usize,
        id: String,
        message: String,
    },
    #[error("duplicate method id {0:?}")]
    DuplicateId(String),
    #[error("unknown method id {0:?}")]
    UnknownId(String),
    #[error("library file error: {0}")]
    Io(#[from] std::io::Error),
    #[error("library file is not a JSON array: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = LibraryError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BiasType {
    Distribution,
    Correlation,
}

impl BiasType {
    pub fn of(scenario: Scenario) -> Self {
        if scenario.is_distribution() {
            BiasType::Distribution
        } else {
            BiasType::Correlation
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tags {
    pub bias_type: BiasType,
    pub data_type: Scenario,
    pub domain: String,
    /// Built-in metric that executes this method, if any. Entries without
    /// one are advisory: their steps are shown, never run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<MetricId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodEntry {
    pub id: String,
    pub intention: String,
    pub method: IndexMap<String, String>,
    #[serde(default)]
    pub title: String,
    #[serde(default, alias = "article link")]
    pub article_link: String,
    #[serde(default)]
    pub field: String,
    #[serde(default)]
    pub year: Option<i32>,
    pub tags: Tags,
}

impl MethodEntry {
    pub fn is_advisory(&self) -> bool {
        self.tags.metric.is_none()
    }
}

/// On-disk shape: `tags` may be omitted and is then derived from the
/// intention text.
#[derive(Debug, Deserialize)]
struct RawEntry {
    id: String,
    intention: String,
    method: IndexMap<String, String>,
    #[serde(default)]
    title: String,
    #[serde(default, alias = "article link")]
    article_link: String,
    #[serde(default)]
    field: String,
    #[serde(default)]
    year: Option<i32>,
    #[serde(default)]
    tags: Option<Tags>,
}

/// Derives tags from phrases like "distribution bias in a categorical
/// feature" or "correlation ... categorical and numerical".
pub fn derive_tags(intention: &str, field: &str) -> Option<Tags> {
    let text = intention.to_lowercase();
    let cat = text.contains("categorical");
    let num = text.contains("numerical") || text.contains("numeric ");
    let scenario = if text.contains("correlation") || text.contains("association") {
        match (cat, num) {
            (true, true) => Scenario::CatNum,
            (true, false) => Scenario::CatCat,
            (false, true) => Scenario::NumNum,
            (false, false) => return None,
        }
    } else if text.contains("distribution") {
        match (cat, num) {
            (true, false) => Scenario::CatDist,
            (false, true) => Scenario::NumDist,
            _ => return None,
        }
    } else {
        return None;
    };
    Some(Tags {
        bias_type: BiasType::of(scenario),
        data_type: scenario,
        domain: if field.is_empty() {
            "General".into()
        } else {
            field.into()
        },
        metric: None,
    })
}

fn validate_entry(value: Value, position: usize) -> Result<MethodEntry> {
    let id = value
        .get("id")
        .and_then(Value::as_str)
        .unwrap_or("<missing id>")
        .to_string();
    let schema = |message: String| LibraryError::Schema {
        position,
        id: id.clone(),
        message,
    };
    let raw: RawEntry = serde_json::from_value(value).map_err(|e| schema(e.to_string()))?;
    if raw.id.trim().is_empty() {
        return Err(schema("id is empty".into()));
    }
    if raw.intention.trim().is_empty() {
        return Err(schema("intention is empty".into()));
    }
    if raw.method.is_empty() {
        return Err(schema("method has no steps".into()));
    }
    let tags = match raw.tags {
        Some(t) => {
            if t.bias_type != BiasType::of(t.data_type) {
                return Err(schema(format!(
                    "bias_type {:?} conflicts with data_type {}",
                    t.bias_type, t.data_type
                )));
            }
            if let Some(m) = t.metric {
                if m.scenario() != t.data_type {
                    return Err(schema(format!("metric {m} does not belong to {}", t.data_type)));
                }
            }
            t
        }
        None => derive_tags(&raw.intention, &raw.field)
            .ok_or_else(|| schema("tags missing and not derivable from the intention".into()))?,
    };
    Ok(MethodEntry {
        id: raw.id,
        intention: raw.intention,
        method: raw.method,
        title: raw.title,
        article_link: raw.article_link,
        field: raw.field,
        year: raw.year,
        tags,
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Library {
    entries: Vec<MethodEntry>,
    path: Option<PathBuf>,
}

impl Library {
    pub fn from_json(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Ok(Library::default());
        }
        let values: Vec<Value> = serde_json::from_str(text)?;
        let mut seen = BTreeSet::new();
        let mut entries = Vec::with_capacity(values.len());
        for (position, v) in values.into_iter().enumerate() {
            let entry = validate_entry(v, position)?;
            if !seen.insert(entry.id.clone()) {
                return Err(LibraryError::Schema {
                    position,
                    id: entry.id,
                    message: "duplicate id".into(),
                });
            }
            entries.push(entry);
        }
        Ok(Library { entries, path: None })
    }

    pub fn builtin() -> Self {
        Library::from_json(BUILTIN_LIBRARY).expect("shipped library is valid")
    }

    /// Loads a library file; later [`Library::add_entry`] calls rewrite it.
    pub fn load(path: &Path) -> Result<Self> {
        let mut lib = Library::from_json(&std::fs::read_to_string(path)?)?;
        lib.path = Some(path.to_path_buf());
        Ok(lib)
    }

    pub fn entries(&self) -> &[MethodEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.entries).expect("entries serialize") + "\n"
    }

    /// (id, intention) pairs in library order.
    pub fn list_intentions(&self) -> Vec<(&str, &str)> {
        self.entries
            .iter()
            .map(|e| (e.id.as_str(), e.intention.as_str()))
            .collect()
    }

    /// Case-sensitive id lookup.
    pub fn get_method_by_id(&self, id: &str) -> Result<&MethodEntry> {
        self.entries
            .iter()
            .find(|e| e.id == id)
            .ok_or_else(|| LibraryError::UnknownId(id.to_string()))
    }

    /// Validates and appends an entry, then rewrites the backing file (if
    /// any) through a temporary file and rename.
    pub fn add_entry(&mut self, entry: Value) -> Result<&MethodEntry> {
        let position = self.entries.len();
        let entry = validate_entry(entry, position)?;
        if self.entries.iter().any(|e| e.id == entry.id) {
            return Err(LibraryError::DuplicateId(entry.id));
        }
        self.entries.push(entry);
        if let Some(path) = &self.path {
            if let Err(e) = persist(path, &self.to_json()) {
                self.entries.pop();
                return Err(e);
            }
        }
        Ok(self.entries.last().expect("just pushed"))
    }

    pub fn retrieve(&self, query: &RetrievalQuery) -> Vec<Ranked<'_>> {
        let docs: Vec<BTreeSet<String>> = self.entries.iter().map(|e| tokens(&e.intention)).collect();
        let n = docs.len() as f64;
        let mut df: BTreeMap<&str, usize> = BTreeMap::new();
        for d in &docs {
            for t in d {
                *df.entry(t.as_str()).or_default() += 1;
            }
        }
        let idf = |t: &str| ((n + 1.0) / (df.get(t).copied().unwrap_or(0) as f64 + 1.0)).ln() + 1.0;
        let q = tokens(&query.free_text);
        let q_weight: f64 = q.iter().map(|t| idf(t)).sum();
        let mut ranked: Vec<Ranked<'_>> = self
            .entries
            .iter()
            .zip(&docs)
            .filter(|(e, _)| e.tags.data_type == query.scenario)
            .map(|(e, d)| {
                let hit: f64 = q.iter().filter(|t| d.contains(*t)).map(|t| idf(t)).sum();
                let score = if q_weight > 0.0 { hit / q_weight } else { 0.0 };
                Ranked { entry: e, score }
            })
            .collect();
        sort_ranked(&mut ranked);
        ranked.truncate(query.top_k.max(1));
        ranked
    }
}

fn sort_ranked(ranked: &mut [Ranked<'_>]) {
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.entry.id.cmp(&b.entry.id)));
}

fn persist(path: &Path, text: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(text.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| LibraryError::Io(e.error))?;
    Ok(())
}

const STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "between", "by", "can", "do", "for", "from", "how", "in", "into", "is", "it",
    "its", "of", "on", "or", "the", "their", "this", "to", "two", "using", "what", "with", "within",
];

/// Lowercased alphanumeric tokens minus stopwords.
pub fn tokens(text: &str) -> BTreeSet<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .filter(|t| !STOPWORDS.contains(&t.as_str()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalQuery {
    pub scenario: Scenario,
    pub free_text: String,
    pub top_k: usize,
}

impl RetrievalQuery {
    pub fn new(scenario: Scenario, free_text: impl Into<String>) -> Self {
        RetrievalQuery {
            scenario,
            free_text: free_text.into(),
            top_k: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ranked<'a> {
    pub entry: &'a MethodEntry,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingConfig {
    pub url: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub key_env: String,
    #[serde(default = "default_timeout")]
    pub timeout_s: u64,
}

fn default_timeout() -> u64 {
    30
}

/// Re-orders lexical results by cosine similarity of embeddings returned
/// from an OpenAI-style `/embeddings` endpoint.
pub fn rerank<'a>(
    ranked: Vec<Ranked<'a>>,
    query_text: &str,
    transport: &dyn HttpTransport,
    config: &EmbeddingConfig,
    key: Option<&str>,
) -> std::result::Result<Vec<Ranked<'a>>, TransportError> {
    if ranked.is_empty() {
        return Ok(ranked);
    }
    let mut input = vec![query_text.to_string()];
    input.extend(ranked.iter().map(|r| r.entry.intention.clone()));
    let request = Request {
        url: config.url.clone(),
        bearer: key.map(str::to_string),
        body: json!({ "model": config.model, "input": input }),
        timeout: Duration::from_secs(config.timeout_s),
    };
    let response = transport.post_json(&request)?;
    let vectors: Vec<Vec<f64>> = response
        .get("data")
        .and_then(Value::as_array)
        .map(|items| {
            items
                .iter()
                .filter_map(|d| serde_json::from_value(d.get("embedding")?.clone()).ok())
                .collect()
        })
        .unwrap_or_default();
    if vectors.len() != ranked.len() + 1 {
        return Err(TransportError::Decode(format!(
            "expected {} embeddings, got {}",
            ranked.len() + 1,
            vectors.len()
        )));
    }
    let mut out: Vec<Ranked<'a>> = ranked
        .into_iter()
        .zip(&vectors[1..])
        .map(|(r, v)| Ranked {
            entry: r.entry,
            score: cosine(&vectors[0], v),
        })
        .collect();
    sort_ranked(&mut out);
    Ok(out)
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}
