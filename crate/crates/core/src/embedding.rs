//! Sentence-embedding backends behind a name-addressed registry.
//!
//! Production embeddings come from external encoders whose vectors are cached
//! to disk and served by [`CacheBackend`]; tests and synthetic experiments use
//! the deterministic [`ToyBackend`]. A backend is never substituted silently:
//! a missing backend or a cache miss is an explicit error.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;
use std::sync::Arc;

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::corpus::{Comment, LabeledDataset, Platform};
use crate::util::{derive_seed, sha256_hex, stable_hash64, stream};

pub const DEFAULT_MAX_SEQUENCE_LENGTH: usize = 256;

/// Separator between a statement and its response when the two are embedded
/// as a single text.
pub const FUSION_SEPARATOR: &str = " [SEP] ";

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("unknown embedding backend `{0}`")]
    UnknownBackend(String),
    #[error("backend `{backend}` unavailable: {detail}")]
    Unavailable { backend: String, detail: String },
    #[error("backend `{backend}` has no cached vector for text hash {key}")]
    CacheMiss { backend: String, key: String },
    #[error("cache file `{path}`: {msg}")]
    BadCacheFile { path: String, msg: String },
    #[error("toy backend needs dim >= 2, got {0}")]
    BadDim(usize),
    #[error("embedding for id `{0}` not found in store")]
    MissingId(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// A fixed-dimension sentence encoder. Implementations must be safe for
/// concurrent `embed` calls and deterministic for a fixed backend version.
pub trait EmbeddingBackend: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn max_sequence_length(&self) -> usize {
        DEFAULT_MAX_SEQUENCE_LENGTH
    }
    /// Pooling the backend applies ("mean", "cls", "as-provided", ...);
    /// metadata only.
    fn pooling(&self) -> &str;

    /// Embeds a batch; row i is the embedding of `texts[i]`. Inputs longer
    /// than `max_sequence_length` whitespace tokens are truncated silently.
    fn embed(&self, texts: &[&str]) -> Result<Array2<f64>, EmbedError>;
}

/// Truncates to the first `max_tokens` whitespace tokens; texts within the
/// limit pass through untouched.
pub fn truncate_tokens(text: &str, max_tokens: usize) -> String {
    if text.split_whitespace().count() <= max_tokens {
        return text.to_string();
    }
    text.split_whitespace()
        .take(max_tokens)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Deterministic hash-seeded pseudo-random unit vector for a text.
pub fn toy_embed(text: &str, dim: usize, seed: u64) -> Result<Array1<f64>, EmbedError> {
    if dim < 2 {
        return Err(EmbedError::BadDim(dim));
    }
    let text_seed = derive_seed(seed, &[stream::TOY_TEXT, stable_hash64(text)]);
    let mut rng = ChaCha12Rng::seed_from_u64(text_seed);
    let mut v = Array1::<f64>::zeros(dim);
    loop {
        for x in v.iter_mut() {
            *x = StandardNormal.sample(&mut rng);
        }
        let norm = v.dot(&v).sqrt();
        if norm > 1e-12 {
            v /= norm;
            return Ok(v);
        }
    }
}

/// Deterministic test backend producing unit vectors keyed by text content.
pub struct ToyBackend {
    name: String,
    dim: usize,
    seed: u64,
    max_sequence_length: usize,
}

impl ToyBackend {
    pub fn new(dim: usize, seed: u64) -> Self {
        Self {
            name: "toy".to_string(),
            dim,
            seed,
            max_sequence_length: DEFAULT_MAX_SEQUENCE_LENGTH,
        }
    }

    pub fn with_name(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }
}

impl EmbeddingBackend for ToyBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn max_sequence_length(&self) -> usize {
        self.max_sequence_length
    }

    fn pooling(&self) -> &str {
        "mean"
    }

    fn embed(&self, texts: &[&str]) -> Result<Array2<f64>, EmbedError> {
        let mut out = Array2::<f64>::zeros((texts.len(), self.dim));
        for (i, text) in texts.iter().enumerate() {
            let truncated = truncate_tokens(text, self.max_sequence_length);
            let v = toy_embed(&truncated, self.dim, self.seed)?;
            out.row_mut(i).assign(&v);
        }
        Ok(out)
    }
}

/// Cache key for a (backend, text) pair.
pub fn cache_key(backend_name: &str, text: &str) -> String {
    sha256_hex(&format!("{backend_name}\u{1f}{text}"))
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheRecord {
    key: String,
    vector: Vec<f64>,
}

/// Serves embeddings precomputed by an external encoder from a JSONL cache of
/// `{key, vector}` records keyed by [`cache_key`]. A miss is an error; there
/// is no fallback.
pub struct CacheBackend {
    name: String,
    dim: usize,
    max_sequence_length: usize,
    pooling: String,
    vectors: HashMap<String, Array1<f64>>,
}

impl CacheBackend {
    pub fn load(
        path: &Path,
        name: &str,
        dim: usize,
        max_sequence_length: usize,
        pooling: &str,
    ) -> Result<Self, EmbedError> {
        let raw = fs::read_to_string(path).map_err(|e| EmbedError::Unavailable {
            backend: name.to_string(),
            detail: format!("cache file `{}`: {e}", path.display()),
        })?;
        let mut vectors = HashMap::new();
        for (lineno, line) in raw.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: CacheRecord =
                serde_json::from_str(line).map_err(|e| EmbedError::BadCacheFile {
                    path: path.display().to_string(),
                    msg: format!("line {}: {e}", lineno + 1),
                })?;
            if record.vector.len() != dim {
                return Err(EmbedError::BadCacheFile {
                    path: path.display().to_string(),
                    msg: format!(
                        "line {}: vector has {} entries, expected {dim}",
                        lineno + 1,
                        record.vector.len()
                    ),
                });
            }
            vectors.insert(record.key, Array1::from_vec(record.vector));
        }
        Ok(Self {
            name: name.to_string(),
            dim,
            max_sequence_length,
            pooling: pooling.to_string(),
            vectors,
        })
    }
}

impl EmbeddingBackend for CacheBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn max_sequence_length(&self) -> usize {
        self.max_sequence_length
    }

    fn pooling(&self) -> &str {
        &self.pooling
    }

    fn embed(&self, texts: &[&str]) -> Result<Array2<f64>, EmbedError> {
        let mut out = Array2::<f64>::zeros((texts.len(), self.dim));
        for (i, text) in texts.iter().enumerate() {
            let truncated = truncate_tokens(text, self.max_sequence_length);
            let key = cache_key(&self.name, &truncated);
            let v = self.vectors.get(&key).ok_or_else(|| EmbedError::CacheMiss {
                backend: self.name.clone(),
                key,
            })?;
            out.row_mut(i).assign(v);
        }
        Ok(out)
    }
}

/// Writes a cache file serving `texts` from `backend`, for handing embeddings
/// computed in one environment to another.
pub fn write_cache_file(
    path: &Path,
    backend: &dyn EmbeddingBackend,
    texts: &[&str],
) -> Result<(), EmbedError> {
    let matrix = backend.embed(texts)?;
    let mut out = String::new();
    for (i, text) in texts.iter().enumerate() {
        let truncated = truncate_tokens(text, backend.max_sequence_length());
        let record = CacheRecord {
            key: cache_key(backend.name(), &truncated),
            vector: matrix.row(i).to_vec(),
        };
        out.push_str(&serde_json::to_string(&record).expect("cache record serializes"));
        out.push('\n');
    }
    crate::util::atomic_write(path, out.as_bytes())?;
    Ok(())
}

/// Name-addressed backend registry; built from the experiment config.
#[derive(Default)]
pub struct BackendRegistry {
    backends: BTreeMap<String, Arc<dyn EmbeddingBackend>>,
}

impl BackendRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, backend: Arc<dyn EmbeddingBackend>) {
        self.backends.insert(backend.name().to_string(), backend);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn EmbeddingBackend>, EmbedError> {
        self.backends
            .get(name)
            .cloned()
            .ok_or_else(|| EmbedError::UnknownBackend(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.backends.keys().map(|s| s.as_str())
    }
}

/// Text a comment is embedded as. Statement–response comments fuse the
/// antecedent statement with the reply in one vector.
pub fn embedding_text(comment: &Comment) -> String {
    match comment.platform {
        Platform::Standalone => comment.text.clone(),
        Platform::StatementResponse => {
            format!("{}{}{}", comment.context_text, FUSION_SEPARATOR, comment.text)
        }
    }
}

/// Immutable id → vector store for one dataset and backend. Safe for
/// concurrent reads.
#[derive(Debug, Clone)]
pub struct EmbeddingStore {
    dim: usize,
    vectors: HashMap<String, Array1<f64>>,
}

impl EmbeddingStore {
    pub fn build(
        backend: &dyn EmbeddingBackend,
        dataset: &LabeledDataset,
    ) -> Result<Self, EmbedError> {
        let texts: Vec<String> = dataset.comments().iter().map(embedding_text).collect();
        let refs: Vec<&str> = texts.iter().map(|s| s.as_str()).collect();
        let matrix = backend.embed(&refs)?;
        let mut vectors = HashMap::with_capacity(dataset.len());
        for (i, comment) in dataset.comments().iter().enumerate() {
            vectors.insert(comment.id.clone(), matrix.row(i).to_owned());
        }
        Ok(Self {
            dim: backend.dim(),
            vectors,
        })
    }

    pub fn from_parts(dim: usize, vectors: HashMap<String, Array1<f64>>) -> Self {
        Self { dim, vectors }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, id: &str) -> Result<&Array1<f64>, EmbedError> {
        self.vectors
            .get(id)
            .ok_or_else(|| EmbedError::MissingId(id.to_string()))
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}
