//! Sentence embedding providers.
//!
//! Every provider returns unit-length vectors so window similarity is a
//! bounded cosine.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub trait EmbeddingProvider: Send + Sync {
    fn provider_id(&self) -> &str;

    fn dim(&self) -> usize;

    /// Embed a batch; output order matches input order.
    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>>;

    /// Providers that cannot serve concurrent batches return true; callers
    /// must then serialize their calls.
    fn single_flight(&self) -> bool {
        false
    }
}

pub fn unit_normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

/// Plain sequential dot product. Both the scorer and its test oracle go
/// through this so results are bit-identical.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.len().min(b.len()) {
        acc += a[i] * b[i];
    }
    acc
}

/// Hex SHA-256 of the UTF-8 text; the key used by vector files.
pub fn text_key(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Deterministic bag of hashed character trigrams and words.
///
/// Stands in for a neural sentence encoder in tests and offline runs: texts
/// sharing most of their characters land close together.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    seed: u64,
    dim: usize,
    id: String,
}

impl HashEmbedder {
    pub fn new(seed: u64, dim: usize) -> Result<Self> {
        if dim < 8 {
            return Err(Error::invalid(format!("hash embedder dim must be >= 8, got {dim}")));
        }
        Ok(HashEmbedder {
            seed,
            dim,
            id: format!("hash-{seed}-{dim}"),
        })
    }

    fn fnv1a(&self, parts: &[&[u8]]) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ self.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        for part in parts {
            for &b in *part {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
            h ^= 0xff;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        // final avalanche
        h ^= h >> 33;
        h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
        h ^= h >> 33;
        h
    }

    fn add(&self, v: &mut [f64], parts: &[&[u8]], weight: f64) {
        let h = self.fnv1a(parts);
        let idx = (h % self.dim as u64) as usize;
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        v[idx] += sign * weight;
    }

    pub fn embed_one(&self, text: &str) -> Vec<f64> {
        let lower = text.to_lowercase();
        let mut v = vec![0.0; self.dim];
        for word in lower.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()) {
            self.add(&mut v, &[b"w", word.as_bytes()], 1.0);
        }
        let chars: Vec<char> = std::iter::once(' ')
            .chain(lower.chars())
            .chain(std::iter::once(' '))
            .collect();
        let mut buf = [0u8; 16];
        for tri in chars.windows(3) {
            let mut len = 0;
            for c in tri {
                len += c.encode_utf8(&mut buf[len..]).len();
            }
            self.add(&mut v, &[b"t", &buf[..len]], 1.0);
        }
        unit_normalize(&mut v);
        v
    }
}

impl EmbeddingProvider for HashEmbedder {
    fn provider_id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}

/// One line of a vectors file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorEntry {
    pub text_sha256: String,
    pub vector: Vec<f64>,
}

/// Provider backed by a precomputed vectors file (JSON lines of
/// [`VectorEntry`], keyed by the SHA-256 of the text).
#[derive(Debug, Clone)]
pub struct FileEmbedder {
    id: String,
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl FileEmbedder {
    pub fn load(path: &Path) -> Result<Self> {
        let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut vectors = HashMap::new();
        let mut dim = None;
        for (i, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut entry: VectorEntry = serde_json::from_str(&line)
                .map_err(|e| Error::invalid(format!("{}:{}: {e}", path.display(), i + 1)))?;
            match dim {
                None => dim = Some(entry.vector.len()),
                Some(d) if d != entry.vector.len() => {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        got: entry.vector.len(),
                    })
                }
                _ => {}
            }
            unit_normalize(&mut entry.vector);
            vectors.insert(entry.text_sha256, entry.vector);
        }
        let dim = dim.ok_or_else(|| Error::invalid(format!("{} has no vectors", path.display())))?;
        Ok(FileEmbedder {
            id: format!("file:{}", path.display()),
            dim,
            vectors,
        })
    }

    pub fn from_entries(id: impl Into<String>, entries: Vec<VectorEntry>) -> Result<Self> {
        let dim = entries.first().map(|e| e.vector.len()).unwrap_or(0);
        if dim == 0 {
            return Err(Error::invalid("no vectors"));
        }
        let mut vectors = HashMap::new();
        for mut e in entries {
            if e.vector.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: e.vector.len(),
                });
            }
            unit_normalize(&mut e.vector);
            vectors.insert(e.text_sha256, e.vector);
        }
        Ok(FileEmbedder {
            id: id.into(),
            dim,
            vectors,
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

impl EmbeddingProvider for FileEmbedder {
    fn provider_id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
        texts
            .iter()
            .map(|t| {
                self.vectors.get(&text_key(t)).cloned().ok_or_else(|| Error::Provider {
                    provider: self.id.clone(),
                    batch_len: texts.len(),
                    reason: format!("no vector for text {:?}", truncate(t, 40)),
                })
            })
            .collect()
    }
}

fn truncate(s: &str, n: usize) -> String {
    s.chars().take(n).collect()
}

#[derive(Debug, Serialize)]
pub struct EmbedRequest<'a> {
    pub texts: Vec<&'a str>,
}

#[derive(Debug, Deserialize)]
pub struct EmbedResponse {
    pub vectors: Vec<Vec<f64>>,
    pub model_id: String,
    pub dim: usize,
}

/// Maximum texts per request accepted by the embedding service.
pub const REMOTE_BATCH_LIMIT: usize = 256;

/// Client for the embedding HTTP service (`POST {base}/embed`).
#[derive(Debug)]
pub struct RemoteEmbedder {
    base_url: String,
    id: String,
    dim: usize,
    agent: ureq::Agent,
}

#[derive(Debug, Deserialize)]
struct Health {
    #[allow(dead_code)]
    status: String,
    model_id: String,
    dim: usize,
}

impl RemoteEmbedder {
    /// Connect and read the model id and dimension from `/healthz`.
    pub fn connect(base_url: &str) -> Result<Self> {
        let base_url = base_url.trim_end_matches('/').to_string();
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(std::time::Duration::from_secs(120)))
            .build()
            .into();
        let fail = |reason: String| Error::Provider {
            provider: base_url.clone(),
            batch_len: 0,
            reason,
        };
        let health: Health = agent
            .get(format!("{base_url}/healthz"))
            .call()
            .map_err(|e| fail(e.to_string()))?
            .body_mut()
            .read_json()
            .map_err(|e| fail(e.to_string()))?;
        Ok(RemoteEmbedder {
            id: format!("remote:{}", health.model_id),
            dim: health.dim,
            base_url,
            agent,
        })
    }

    fn embed_chunk(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
        let fail = |reason: String| Error::Provider {
            provider: self.id.clone(),
            batch_len: texts.len(),
            reason,
        };
        let resp: EmbedResponse = self
            .agent
            .post(format!("{}/embed", self.base_url))
            .send_json(EmbedRequest {
                texts: texts.to_vec(),
            })
            .map_err(|e| fail(e.to_string()))?
            .body_mut()
            .read_json()
            .map_err(|e| fail(e.to_string()))?;
        if resp.vectors.len() != texts.len() {
            return Err(fail(format!(
                "service returned {} vectors for {} texts",
                resp.vectors.len(),
                texts.len()
            )));
        }
        if resp.dim != self.dim || resp.vectors.iter().any(|v| v.len() != self.dim) {
            return Err(fail(format!("expected dimension {}", self.dim)));
        }
        Ok(resp
            .vectors
            .into_iter()
            .map(|mut v| {
                unit_normalize(&mut v);
                v
            })
            .collect())
    }
}

impl EmbeddingProvider for RemoteEmbedder {
    fn provider_id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(REMOTE_BATCH_LIMIT) {
            out.extend(self.embed_chunk(chunk)?);
        }
        Ok(out)
    }
}

/// Memoizes another provider by exact text; only uncached texts are sent
/// on, in first-appearance order.
pub struct CachingEmbedder<P: EmbeddingProvider> {
    inner: P,
    cache: std::sync::Mutex<HashMap<String, Vec<f64>>>,
}

impl<P: EmbeddingProvider> CachingEmbedder<P> {
    pub fn new(inner: P) -> Self {
        CachingEmbedder {
            inner,
            cache: std::sync::Mutex::new(HashMap::new()),
        }
    }

    pub fn cached(&self) -> usize {
        self.cache.lock().map(|c| c.len()).unwrap_or(0)
    }
}

impl<P: EmbeddingProvider> EmbeddingProvider for CachingEmbedder<P> {
    fn provider_id(&self) -> &str {
        self.inner.provider_id()
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
        let mut cache = self
            .cache
            .lock()
            .map_err(|_| Error::Numerical("embedding cache poisoned".into()))?;
        let mut missing: Vec<&str> = Vec::new();
        for &t in texts {
            if !cache.contains_key(t) && !missing.contains(&t) {
                missing.push(t);
            }
        }
        if !missing.is_empty() {
            let vectors = self.inner.embed(&missing)?;
            if vectors.len() != missing.len() {
                return Err(Error::Provider {
                    provider: self.inner.provider_id().to_string(),
                    batch_len: missing.len(),
                    reason: format!("returned {} vectors", vectors.len()),
                });
            }
            for (t, v) in missing.into_iter().zip(vectors) {
                cache.insert(t.to_string(), v);
            }
        }
        Ok(texts.iter().map(|t| cache[*t].clone()).collect())
    }

    fn single_flight(&self) -> bool {
        self.inner.single_flight()
    }
}

impl EmbeddingProvider for Box<dyn EmbeddingProvider> {
    fn provider_id(&self) -> &str {
        (**self).provider_id()
    }

    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
        (**self).embed(texts)
    }

    fn single_flight(&self) -> bool {
        (**self).single_flight()
    }
}

/// Parse an `--embedder` spec: `hash`, `hash:DIM`, `file:PATH` or `remote:URL`.
pub fn provider_from_spec(spec: &str, seed: u64) -> Result<Box<dyn EmbeddingProvider>> {
    if spec == "hash" {
        return Ok(Box::new(HashEmbedder::new(seed, DEFAULT_HASH_DIM)?));
    }
    if let Some(dim) = spec.strip_prefix("hash:") {
        let dim = dim
            .parse()
            .map_err(|_| Error::Config(format!("bad hash embedder dimension `{dim}`")))?;
        return Ok(Box::new(HashEmbedder::new(seed, dim)?));
    }
    if let Some(path) = spec.strip_prefix("file:") {
        return Ok(Box::new(FileEmbedder::load(Path::new(path))?));
    }
    if let Some(url) = spec.strip_prefix("remote:") {
        return Ok(Box::new(RemoteEmbedder::connect(url)?));
    }
    Err(Error::Config(format!(
        "unknown embedder `{spec}` (expected hash, hash:DIM, file:PATH or remote:URL)"
    )))
}

pub const DEFAULT_HASH_DIM: usize = 256;
