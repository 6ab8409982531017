//! Provider backends and the on-disk response cache.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{ProviderConfig, ProviderKind};
use crate::data::{ItemId, UserId};
use crate::error::{Error, Result};
use crate::rerank::parse::render_ranking;
use crate::rerank::prompt::PersonaPrompt;

pub trait LlmProvider: Send + Sync {
    fn complete(&self, prompt: &PersonaPrompt) -> Result<String>;
}

/// Test mock: the known positive first, the rest in reward order. Users
/// without a label, or whose positive missed the shortlist, get reward order.
pub struct OracleProvider {
    pub positives: HashMap<UserId, ItemId>,
}

impl LlmProvider for OracleProvider {
    fn complete(&self, prompt: &PersonaPrompt) -> Result<String> {
        let mut order = prompt.items.clone();
        if let Some(k) = self.positives.get(&prompt.user).and_then(|p| order.iter().position(|i| i == p)) {
            let hit = order.remove(k);
            order.insert(0, hit);
        }
        Ok(render_ranking(&order, &prompt.items))
    }
}

/// Test mock: reward order reversed.
pub struct AdversaryProvider;

impl LlmProvider for AdversaryProvider {
    fn complete(&self, prompt: &PersonaPrompt) -> Result<String> {
        let order: Vec<ItemId> = prompt.items.iter().rev().copied().collect();
        Ok(render_ranking(&order, &prompt.items))
    }
}

/// Serves nothing itself; every request must be a cache hit.
pub struct ReplayProvider;

impl LlmProvider for ReplayProvider {
    fn complete(&self, prompt: &PersonaPrompt) -> Result<String> {
        Err(Error::Provider(format!("replay cache has no response for prompt {}", prompt.hash())))
    }
}

/// OpenAI-style `chat/completions` endpoint.
pub struct ChatCompletionProvider {
    endpoint: String,
    model: String,
    temperature: f64,
    token: Option<String>,
    retries: u32,
    client: reqwest::blocking::Client,
}

impl ChatCompletionProvider {
    pub fn new(cfg: &ProviderConfig) -> Result<Self> {
        let endpoint = cfg
            .endpoint
            .clone()
            .ok_or_else(|| Error::Config(format!("provider {}: endpoint required", cfg.name)))?;
        let token = match &cfg.auth_env {
            Some(var) => Some(
                std::env::var(var)
                    .map_err(|_| Error::Provider(format!("provider {}: environment variable {var} not set", cfg.name)))?,
            ),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build()
            .map_err(|e| Error::Provider(e.to_string()))?;
        Ok(ChatCompletionProvider {
            endpoint,
            model: cfg.model.clone(),
            temperature: cfg.temperature,
            token,
            retries: cfg.retries,
            client,
        })
    }

    fn attempt(&self, prompt: &PersonaPrompt) -> Result<String> {
        let body = json!({
            "model": self.model,
            "temperature": self.temperature,
            "messages": [{"role": "user", "content": prompt.text}],
        });
        let mut req = self.client.post(&self.endpoint).json(&body);
        if let Some(t) = &self.token {
            req = req.bearer_auth(t);
        }
        let resp = req.send().map_err(|e| Error::Provider(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            return Err(Error::Provider(format!("HTTP {status}: {}", text.chars().take(200).collect::<String>())));
        }
        let value: serde_json::Value = resp.json().map_err(|e| Error::Provider(e.to_string()))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_owned)
            .ok_or_else(|| Error::Provider("response has no choices[0].message.content".into()))
    }
}

impl LlmProvider for ChatCompletionProvider {
    fn complete(&self, prompt: &PersonaPrompt) -> Result<String> {
        let mut last = None;
        for attempt in 0..=self.retries {
            if attempt > 0 {
                thread::sleep(Duration::from_millis(500 << (attempt - 1).min(6)));
            }
            match self.attempt(prompt) {
                Ok(text) => return Ok(text),
                Err(e) => {
                    log::warn!("provider attempt {} failed: {e}", attempt + 1);
                    last = Some(e);
                }
            }
        }
        Err(last.unwrap_or_else(|| Error::Provider("no attempts made".into())))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub prompt_hash: String,
    pub raw_response: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

/// Append-only JSON-lines file of responses for one (provider, model).
/// The first record for a prompt hash wins.
pub struct ResponseCache {
    path: PathBuf,
    inner: Mutex<(HashMap<String, String>, File)>,
}

fn file_safe(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' }).collect()
}

impl ResponseCache {
    pub fn path_for(dir: &Path, provider: &str, model: &str) -> PathBuf {
        dir.join(format!("{}__{}.jsonl", file_safe(provider), file_safe(model)))
    }

    pub fn open(dir: &Path, provider: &str, model: &str) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = Self::path_for(dir, provider, model);
        let mut entries = HashMap::new();
        if path.exists() {
            let f = File::open(&path).map_err(|e| Error::io(&path, e))?;
            for (n, line) in BufReader::new(f).lines().enumerate() {
                let line = line.map_err(|e| Error::io(&path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: CacheRecord = serde_json::from_str(&line)
                    .map_err(|e| Error::Format(format!("{}:{}: {e}", path.display(), n + 1)))?;
                entries.entry(rec.prompt_hash).or_insert(rec.raw_response);
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        Ok(ResponseCache {
            path,
            inner: Mutex::new((entries, file)),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("cache lock").0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, prompt_hash: &str) -> Option<String> {
        self.inner.lock().expect("cache lock").0.get(prompt_hash).cloned()
    }

    pub fn insert(&self, prompt_hash: &str, raw_response: &str) -> Result<()> {
        let mut guard = self.inner.lock().expect("cache lock");
        if guard.0.contains_key(prompt_hash) {
            return Ok(());
        }
        let rec = CacheRecord {
            prompt_hash: prompt_hash.to_owned(),
            raw_response: raw_response.to_owned(),
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        };
        let line = serde_json::to_string(&rec).map_err(|e| Error::Format(e.to_string()))?;
        writeln!(guard.1, "{line}").map_err(|e| Error::io(&self.path, e))?;
        guard.1.flush().map_err(|e| Error::io(&self.path, e))?;
        guard.0.insert(rec.prompt_hash, rec.raw_response);
        Ok(())
    }
}

/// A backend behind an optional cache, queried with bounded parallelism.
pub struct ProviderClient {
    pub name: String,
    pub model: String,
    pub concurrency: usize,
    backend: Box<dyn LlmProvider>,
    cache: Option<ResponseCache>,
}

impl ProviderClient {
    pub fn new(name: &str, model: &str, backend: Box<dyn LlmProvider>, cache: Option<ResponseCache>, concurrency: usize) -> Self {
        ProviderClient {
            name: name.into(),
            model: model.into(),
            concurrency: concurrency.max(1),
            backend,
            cache,
        }
    }

    /// `labels` feed the oracle mock and are ignored by every other kind.
    pub fn from_config(cfg: &ProviderConfig, labels: &HashMap<UserId, ItemId>) -> Result<Self> {
        if cfg.temperature != 0.0 {
            return Err(Error::Config(format!("provider {}: temperature must be 0", cfg.name)));
        }
        let backend: Box<dyn LlmProvider> = match cfg.kind {
            ProviderKind::ChatCompletion => Box::new(ChatCompletionProvider::new(cfg)?),
            ProviderKind::Oracle => Box::new(OracleProvider { positives: labels.clone() }),
            ProviderKind::Adversary => Box::new(AdversaryProvider),
            ProviderKind::Replay => {
                if cfg.cache_dir.is_none() {
                    return Err(Error::Config(format!("provider {}: replay needs cache_dir", cfg.name)));
                }
                Box::new(ReplayProvider)
            }
        };
        let cache = match &cfg.cache_dir {
            Some(dir) => Some(ResponseCache::open(dir, &cfg.name, &cfg.model)?),
            None => None,
        };
        Ok(Self::new(&cfg.name, &cfg.model, backend, cache, cfg.concurrency))
    }

    pub fn cache(&self) -> Option<&ResponseCache> {
        self.cache.as_ref()
    }

    pub fn query(&self, prompt: &PersonaPrompt) -> Result<String> {
        let hash = prompt.hash();
        if let Some(hit) = self.cache.as_ref().and_then(|c| c.get(&hash)) {
            return Ok(hit);
        }
        let text = self.backend.complete(prompt)?;
        if let Some(c) = &self.cache {
            c.insert(&hash, &text)?;
        }
        Ok(text)
    }

    /// One result per prompt, in input order.
    pub fn query_all(&self, prompts: &[PersonaPrompt]) -> Vec<Result<String>> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(self.concurrency).build();
        match pool {
            Ok(pool) => pool.install(|| {
                use rayon::prelude::*;
                prompts.par_iter().map(|p| self.query(p)).collect()
            }),
            Err(_) => prompts.iter().map(|p| self.query(p)).collect(),
        }
    }
}
