//! Chat-completion client that asks a language model for pairs of highly
//! similar concept names.
//!
//! The default request is the common `{"model", "temperature", "messages"}`
//! JSON body and the reply text is read from `/choices/0/message/content`.
//! Both can be overridden: `payload_template` is any JSON value in which the
//! strings `"{{model}}"`, `"{{system}}"`, `"{{prompt}}"` and
//! `"{{temperature}}"` are substituted, and `response_pointer` is a JSON
//! pointer to the reply text.

use std::collections::HashSet;
use std::time::Duration;

use log::warn;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::grouping::PairList;

pub const PROMPT_VERSION: &str = "pairs-v1";

const SYSTEM_PROMPT: &str = "You compare everyday object concepts by meaning.";

const USER_PROMPT: &str = "Below is a list of object concept names, one per line. \
Find pairs of highly similar concepts, such as near-synonyms or objects of nearly the same kind \
(for example cup and mug). Use the names exactly as written. \
Return only lines of the form name_a,name_b for highly similar pairs and nothing else. \
Return an empty reply if there are none.\n\nConcepts:\n";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmEndpointConfig {
    pub base_url: String,
    pub path: String,
    /// Environment variable holding the API key.
    pub api_key_env: String,
    pub model_name: String,
    pub temperature: f64,
    pub request_timeout_secs: f64,
    pub max_concepts_per_request: usize,
    pub max_attempts: usize,
    pub backoff_initial_ms: u64,
    pub concurrency: usize,
    pub payload_template: Option<Value>,
    pub response_pointer: String,
}

impl Default for LlmEndpointConfig {
    fn default() -> Self {
        Self {
            base_url: String::new(),
            path: "/v1/chat/completions".into(),
            api_key_env: "SPLIT_FORGE_API_KEY".into(),
            model_name: "gpt-4o".into(),
            temperature: 0.0,
            request_timeout_secs: 120.0,
            max_concepts_per_request: 200,
            max_attempts: 3,
            backoff_initial_ms: 500,
            concurrency: 1,
            payload_template: None,
            response_pointer: "/choices/0/message/content".into(),
        }
    }
}

impl LlmEndpointConfig {
    pub fn validate(&self) -> Result<()> {
        if self.base_url.is_empty() {
            return Err(Error::Config("llm.base_url is empty".into()));
        }
        if self.request_timeout_secs.is_nan() || self.request_timeout_secs <= 0.0 {
            return Err(Error::Config("llm.request_timeout_secs must be positive".into()));
        }
        if self.max_concepts_per_request < 2 {
            return Err(Error::Config("llm.max_concepts_per_request must be at least 2".into()));
        }
        if self.max_attempts == 0 || self.concurrency == 0 {
            return Err(Error::Config(
                "llm.max_attempts and llm.concurrency must be positive".into(),
            ));
        }
        Ok(())
    }

    fn url(&self) -> String {
        format!("{}{}", self.base_url.trim_end_matches('/'), self.path)
    }
}

/// Pairs returned by the model plus how many were thrown away.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairSuggestions {
    pub pairs: PairList,
    /// pairs naming an unknown concept, or a concept with itself
    pub dropped_unknown: usize,
    /// non-empty reply lines that were not `name_a,name_b`
    pub malformed_lines: usize,
}

pub fn build_prompt(names: &[String]) -> String {
    let mut prompt = String::from(USER_PROMPT);
    for name in names {
        prompt.push_str(name);
        prompt.push('\n');
    }
    prompt
}

fn substitute(template: &Value, cfg: &LlmEndpointConfig, prompt: &str) -> Value {
    match template {
        Value::String(s) => match s.as_str() {
            "{{model}}" => Value::String(cfg.model_name.clone()),
            "{{system}}" => Value::String(SYSTEM_PROMPT.into()),
            "{{prompt}}" => Value::String(prompt.into()),
            "{{temperature}}" => json!(cfg.temperature),
            _ => template.clone(),
        },
        Value::Array(items) => Value::Array(items.iter().map(|v| substitute(v, cfg, prompt)).collect()),
        Value::Object(map) => Value::Object(
            map.iter()
                .map(|(k, v)| (k.clone(), substitute(v, cfg, prompt)))
                .collect(),
        ),
        other => other.clone(),
    }
}

/// Serialized request body for one batch of names.
pub fn request_body(names: &[String], cfg: &LlmEndpointConfig) -> Vec<u8> {
    let prompt = build_prompt(names);
    let body = match &cfg.payload_template {
        Some(t) => substitute(t, cfg, &prompt),
        None => json!({
            "model": cfg.model_name,
            "temperature": cfg.temperature,
            "messages": [
                {"role": "system", "content": SYSTEM_PROMPT},
                {"role": "user", "content": prompt},
            ],
        }),
    };
    serde_json::to_vec(&body).expect("JSON values always serialize")
}

/// Parses reply text into pairs over `known` names.
pub fn parse_reply(text: &str, known: &HashSet<&str>) -> PairSuggestions {
    let mut out = PairSuggestions::default();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    for line in text.lines() {
        let line = line.trim().trim_start_matches(['-', '*']).trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != 2 || parts[0].is_empty() || parts[1].is_empty() {
            out.malformed_lines += 1;
            continue;
        }
        let (a, b) = (parts[0], parts[1]);
        if a == b || !known.contains(a) || !known.contains(b) {
            out.dropped_unknown += 1;
            continue;
        }
        let key = if a < b {
            (a.to_string(), b.to_string())
        } else {
            (b.to_string(), a.to_string())
        };
        if seen.insert(key) {
            out.pairs.pairs.push((a.to_string(), b.to_string()));
        }
    }
    out
}

enum Attempt {
    Retry(String),
    Fatal(Error),
}

fn post_once(
    agent: &ureq::Agent,
    cfg: &LlmEndpointConfig,
    key: Option<&str>,
    body: &[u8],
) -> std::result::Result<String, Attempt> {
    let mut req = agent.post(cfg.url()).header("Content-Type", "application/json");
    if let Some(key) = key {
        req = req.header("Authorization", format!("Bearer {key}"));
    }
    let resp = req.send(body).map_err(|e| Attempt::Retry(e.to_string()))?;
    let status = resp.status().as_u16();
    let text = resp
        .into_body()
        .read_to_string()
        .map_err(|e| Attempt::Retry(e.to_string()))?;
    match status {
        200..=299 => Ok(text),
        401 | 403 => Err(Attempt::Fatal(Error::Llm(format!(
            "authentication failed (HTTP {status})"
        )))),
        429 | 500..=599 => Err(Attempt::Retry(format!("HTTP {status}"))),
        _ => Err(Attempt::Fatal(Error::Llm(format!("HTTP {status}: {text}")))),
    }
}

fn request_batch(agent: &ureq::Agent, cfg: &LlmEndpointConfig, key: Option<&str>, names: &[String]) -> Result<String> {
    let body = request_body(names, cfg);
    let mut delay = Duration::from_millis(cfg.backoff_initial_ms);
    let mut last = String::new();
    for attempt in 1..=cfg.max_attempts {
        match post_once(agent, cfg, key, &body) {
            Ok(text) => {
                let payload: Value = serde_json::from_str(&text).map_err(|_| {
                    warn!("unparseable LLM response: {text}");
                    Error::Llm(format!("unparseable response: {text}"))
                })?;
                return match payload.pointer(&cfg.response_pointer) {
                    Some(Value::String(s)) => Ok(s.clone()),
                    Some(Value::Null) => Ok(String::new()),
                    _ => {
                        warn!("LLM response lacks {}: {text}", cfg.response_pointer);
                        Err(Error::Llm(format!(
                            "unparseable response, nothing at {}: {text}",
                            cfg.response_pointer
                        )))
                    }
                };
            }
            Err(Attempt::Fatal(e)) => return Err(e),
            Err(Attempt::Retry(msg)) => {
                warn!("LLM request attempt {attempt}/{} failed: {msg}", cfg.max_attempts);
                last = msg;
                if attempt < cfg.max_attempts {
                    std::thread::sleep(delay);
                    delay *= 2;
                }
            }
        }
    }
    Err(Error::Llm(format!(
        "request failed after {} attempts: {last}",
        cfg.max_attempts
    )))
}

/// Asks the endpoint for similar pairs, `max_concepts_per_request` names at a
/// time, and merges the replies in batch order.
pub fn suggest_pairs(names: &[String], cfg: &LlmEndpointConfig) -> Result<PairSuggestions> {
    cfg.validate()?;
    let known: HashSet<&str> = names.iter().map(String::as_str).collect();
    if known.len() != names.len() {
        return Err(Error::InvalidArgument("concept names must be unique".into()));
    }
    let key = std::env::var(&cfg.api_key_env).ok();
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs_f64(cfg.request_timeout_secs)))
        .http_status_as_error(false)
        .build()
        .into();

    let batches: Vec<&[String]> = names.chunks(cfg.max_concepts_per_request).collect();
    let mut replies: Vec<String> = Vec::with_capacity(batches.len());
    for wave in batches.chunks(cfg.concurrency) {
        let results: Vec<Result<String>> = std::thread::scope(|scope| {
            let handles: Vec<_> = wave
                .iter()
                .map(|batch| {
                    let (agent, key) = (&agent, key.as_deref());
                    scope.spawn(move || request_batch(agent, cfg, key, batch))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("request thread panicked"))
                .collect()
        });
        for r in results {
            replies.push(r?);
        }
    }

    let mut merged = PairSuggestions::default();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    for reply in &replies {
        let part = parse_reply(reply, &known);
        merged.dropped_unknown += part.dropped_unknown;
        merged.malformed_lines += part.malformed_lines;
        for (a, b) in part.pairs.pairs {
            let key = if a < b {
                (a.clone(), b.clone())
            } else {
                (b.clone(), a.clone())
            };
            if seen.insert(key) {
                merged.pairs.pairs.push((a, b));
            }
        }
    }
    if merged.dropped_unknown > 0 {
        warn!(
            "dropped {} suggested pairs naming unknown concepts",
            merged.dropped_unknown
        );
    }
    Ok(merged)
}
