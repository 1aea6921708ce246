//! Candidate labels from a remote annotator service.
//!
//! Items are sent in batches, one POST per batch, as `{"system": ..., "user": ...}`.
//! The response body is read as a newline- or comma-separated label list in
//! item order. Requests are sequential.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::thread;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use annoteq::CandidateAnnotations;
use serde::Serialize;

use crate::UsageError;

pub const TOKEN_ENV: &str = "ANNOTEQ_API_TOKEN";
pub const ITEMS_PLACEHOLDER: &str = "{items}";
const SYSTEM_MARKER: &str = "--SYSTEM--";
const USER_MARKER: &str = "--USER--";
const MAX_ATTEMPTS: u32 = 3;

/// A prompt split into its system and user parts.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplate {
    pub system: String,
    pub user: String,
}

impl PromptTemplate {
    /// Parses a template. Text after `--SYSTEM--` up to `--USER--` is the
    /// system prompt and the rest is the user prompt; without markers the
    /// whole text is the user prompt. The user part must contain `{items}`.
    pub fn parse(text: &str) -> Result<Self> {
        let (system, user) = match (text.find(SYSTEM_MARKER), text.find(USER_MARKER)) {
            (Some(s), Some(u)) if s < u => (&text[s + SYSTEM_MARKER.len()..u], &text[u + USER_MARKER.len()..]),
            (None, Some(u)) => ("", &text[u + USER_MARKER.len()..]),
            (None, None) => ("", text),
            _ => return Err(UsageError("template must put --SYSTEM-- before --USER--".into()).into()),
        };
        if !user.contains(ITEMS_PLACEHOLDER) {
            return Err(UsageError(format!("template user section lacks the {ITEMS_PLACEHOLDER} placeholder")).into());
        }
        Ok(Self {
            system: system.trim().to_string(),
            user: user.trim().to_string(),
        })
    }

    /// The user prompt with items listed one per line, numbered from 1.
    pub fn render(&self, descriptions: &[&str]) -> String {
        let list = descriptions
            .iter()
            .enumerate()
            .map(|(i, d)| format!("{}. {d}", i + 1))
            .collect::<Vec<_>>()
            .join("\n");
        self.user.replace(ITEMS_PLACEHOLDER, &list)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ItemDescriptor {
    pub id: String,
    pub description: String,
}

/// Reads a CSV with columns `item_id` and `description`.
pub fn read_items(path: &Path) -> Result<Vec<ItemDescriptor>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(ci), Some(cd)) = (col("item_id"), col("description")) else {
        bail!("{}: header must contain item_id and description", path.display());
    };
    let mut items = Vec::new();
    for record in reader.records() {
        let r = record?;
        items.push(ItemDescriptor {
            id: r[ci].to_string(),
            description: r[cd].to_string(),
        });
    }
    if items.is_empty() {
        bail!("{}: no items", path.display());
    }
    Ok(items)
}

/// Splits a response body into labels.
pub fn parse_labels(body: &str) -> Vec<String> {
    body.split(['\n', ','])
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

pub struct FetchSettings {
    pub endpoint: String,
    pub batch_size: usize,
    pub annotator: String,
    /// Accepted labels; any non-empty token when absent.
    pub alphabet: Option<Vec<String>>,
    pub backoff: Duration,
    /// Raw responses are written under `out/raw`.
    pub out: PathBuf,
    pub token: Option<String>,
}

#[derive(Serialize)]
struct Request<'a> {
    system: &'a str,
    user: &'a str,
}

#[derive(Debug, Serialize)]
pub struct FetchLog {
    pub endpoint: String,
    pub annotator: String,
    pub batches: Vec<BatchLog>,
}

#[derive(Debug, Serialize)]
pub struct BatchLog {
    pub batch: usize,
    pub first_item: String,
    pub items: usize,
    pub attempts: u32,
    pub raw_response: String,
}

/// Fetches one label per item and writes the raw responses.
pub fn fetch_candidate(
    settings: &FetchSettings,
    template: &PromptTemplate,
    items: &[ItemDescriptor],
) -> Result<(CandidateAnnotations, FetchLog)> {
    if settings.batch_size == 0 {
        return Err(UsageError("batch size must be positive".into()).into());
    }
    let raw_dir = settings.out.join("raw");
    fs::create_dir_all(&raw_dir).with_context(|| format!("creating {}", raw_dir.display()))?;
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs(300)))
        .build()
        .into();

    let mut labels = BTreeMap::new();
    let mut log = FetchLog {
        endpoint: settings.endpoint.clone(),
        annotator: settings.annotator.clone(),
        batches: Vec::new(),
    };
    for (b, batch) in items.chunks(settings.batch_size).enumerate() {
        let descriptions: Vec<&str> = batch.iter().map(|i| i.description.as_str()).collect();
        let body = serde_json::to_string(&Request {
            system: &template.system,
            user: &template.render(&descriptions),
        })?;
        let (response, attempts) = post_with_retry(&agent, settings, &body)
            .with_context(|| format!("batch {} ({} items)", b + 1, batch.len()))?;
        let raw_name = format!("batch_{:04}.txt", b + 1);
        fs::write(raw_dir.join(&raw_name), &response)?;
        log.batches.push(BatchLog {
            batch: b + 1,
            first_item: batch[0].id.clone(),
            items: batch.len(),
            attempts,
            raw_response: format!("raw/{raw_name}"),
        });

        let parsed = parse_labels(&response);
        if parsed.len() != batch.len() {
            bail!(
                "batch {}: response has {} labels for {} items (raw response in raw/{raw_name})",
                b + 1,
                parsed.len(),
                batch.len()
            );
        }
        for (item, label) in batch.iter().zip(parsed) {
            if let Some(alphabet) = &settings.alphabet {
                if !alphabet.contains(&label) {
                    bail!("batch {}: unparseable label {label:?} for item {:?}", b + 1, item.id);
                }
            }
            if labels.insert(item.id.clone(), label).is_some() {
                bail!("duplicate item id {:?}", item.id);
            }
        }
    }
    Ok((CandidateAnnotations::new(settings.annotator.clone(), labels), log))
}

fn post_with_retry(agent: &ureq::Agent, settings: &FetchSettings, body: &str) -> Result<(String, u32)> {
    let mut wait = settings.backoff;
    let mut last = None;
    for attempt in 1..=MAX_ATTEMPTS {
        let mut req = agent.post(&settings.endpoint).header("Content-Type", "application/json");
        if let Some(t) = &settings.token {
            req = req.header("Authorization", &format!("Bearer {t}"));
        }
        match req.send(body) {
            Ok(mut resp) => return Ok((resp.body_mut().read_to_string()?, attempt)),
            Err(ureq::Error::StatusCode(code)) if (400..500).contains(&code) && code != 429 => {
                bail!("endpoint rejected the request with status {code}");
            }
            Err(e) => last = Some(e),
        }
        if attempt < MAX_ATTEMPTS {
            thread::sleep(wait);
            wait *= 2;
        }
    }
    Err(anyhow!(last.expect("at least one attempt")).context(format!("giving up after {MAX_ATTEMPTS} attempts")))
}
