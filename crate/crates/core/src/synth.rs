//! Synthetic benchmark fixtures.
//!
//! The pragmatic-contrast generator builds topics where class is a function
//! of direction relative to a per-topic "question under discussion" axis with
//! within-class noise: each topic draws its own axis (partially aligned with
//! a weak global component), every item sits on a large shared offset, and
//! per-item noise dominates raw cosine geometry. This is a test fixture for
//! exercising the pipeline, not a claim about real discourse.

use std::collections::HashMap;

use ndarray::Array1;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::corpus::{Comment, LabeledDataset, Platform};
use crate::embedding::EmbeddingStore;
use crate::util::{derive_seed, stream};

fn default_topics() -> usize {
    5
}
fn default_per_topic() -> usize {
    30
}
fn default_w_fraction() -> f64 {
    0.4
}
fn default_dim() -> usize {
    32
}
fn default_axis_strength() -> f64 {
    0.25
}
fn default_shared_axis_weight() -> f64 {
    0.5
}
fn default_shared_offset() -> f64 {
    1.0
}
fn default_noise() -> f64 {
    0.9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    #[serde(default = "default_topics")]
    pub topics: usize,
    #[serde(default = "default_per_topic")]
    pub per_topic: usize,
    /// Fraction of each topic labeled W.
    #[serde(default = "default_w_fraction")]
    pub w_fraction: f64,
    #[serde(default = "default_dim")]
    pub dim: usize,
    /// Magnitude of the class displacement along the topic axis.
    #[serde(default = "default_axis_strength")]
    pub axis_strength: f64,
    /// Blend between the global class component and the per-topic axis.
    #[serde(default = "default_shared_axis_weight")]
    pub shared_axis_weight: f64,
    /// Magnitude of the offset every item shares.
    #[serde(default = "default_shared_offset")]
    pub shared_offset: f64,
    /// Per-item isotropic noise scale (unit-norm expectation).
    #[serde(default = "default_noise")]
    pub noise: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            topics: default_topics(),
            per_topic: default_per_topic(),
            w_fraction: default_w_fraction(),
            dim: default_dim(),
            axis_strength: default_axis_strength(),
            shared_axis_weight: default_shared_axis_weight(),
            shared_offset: default_shared_offset(),
            noise: default_noise(),
            seed: 0,
        }
    }
}

fn gaussian_vector(dim: usize, rng: &mut ChaCha12Rng) -> Array1<f64> {
    let mut v = Array1::<f64>::zeros(dim);
    for x in v.iter_mut() {
        *x = StandardNormal.sample(rng);
    }
    v
}

fn normalize(mut v: Array1<f64>) -> Array1<f64> {
    let norm = v.dot(&v).sqrt();
    if norm > 1e-12 {
        v /= norm;
    }
    v
}

/// Unit vector orthogonal to every vector in `basis`.
fn orthonormal_to(basis: &[&Array1<f64>], dim: usize, rng: &mut ChaCha12Rng) -> Array1<f64> {
    loop {
        let mut v = gaussian_vector(dim, rng);
        for b in basis {
            let proj = v.dot(*b);
            v = v - b.mapv(|x| x * proj);
        }
        let norm = v.dot(&v).sqrt();
        if norm > 1e-6 {
            return v / norm;
        }
    }
}

/// Builds the synthetic pragmatic-contrast corpus and its embeddings.
/// Deterministic given the params.
pub fn pragmatic_contrast_corpus(params: &SynthParams) -> (LabeledDataset, EmbeddingStore) {
    assert!(params.dim >= 4, "need dim >= 4");
    assert!((0.0..=1.0).contains(&params.w_fraction));
    let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(params.seed, &[stream::SYNTH]));

    let global_axis = normalize(gaussian_vector(params.dim, &mut rng));
    let shared_offset_dir = orthonormal_to(&[&global_axis], params.dim, &mut rng);

    let mut comments = Vec::new();
    let mut vectors = HashMap::new();
    let n_w = (params.per_topic as f64 * params.w_fraction).round() as usize;
    for t in 0..params.topics {
        let topic = format!("topic{t:02}");
        let topic_axis = orthonormal_to(&[&global_axis, &shared_offset_dir], params.dim, &mut rng);
        let qud_axis = normalize(
            global_axis.mapv(|x| x * params.shared_axis_weight)
                + topic_axis.mapv(|x| x * (1.0 - params.shared_axis_weight)),
        );
        for i in 0..params.per_topic {
            let class: u8 = if i < n_w { 1 } else { 0 };
            let sign = if class == 1 { 1.0 } else { -1.0 };
            let noise = gaussian_vector(params.dim, &mut rng)
                .mapv(|x| x * params.noise / (params.dim as f64).sqrt());
            let v = shared_offset_dir.mapv(|x| x * params.shared_offset)
                + qud_axis.mapv(|x| x * sign * params.axis_strength)
                + noise;
            let id = format!("s{t:02}-{i:03}");
            comments.push(Comment {
                id: id.clone(),
                topic: topic.clone(),
                context_id: topic.clone(),
                context_text: String::new(),
                text: format!("synthetic comment {t} {i}"),
                annotator_labels: vec![class; 3],
                gold_label: Some(class),
                upvotes: None,
                platform: Platform::Standalone,
            });
            vectors.insert(id, normalize(v));
        }
    }
    let dataset = LabeledDataset::new(comments).expect("generator produces valid comments");
    (dataset, EmbeddingStore::from_parts(params.dim, vectors))
}

/// Pure-noise corpus: the same shape with no class signal at all. Used to
/// check that cosine and random mining are indistinguishable on random
/// high-dimensional embeddings.
pub fn random_embedding_corpus(params: &SynthParams) -> (LabeledDataset, EmbeddingStore) {
    let mut zeroed = params.clone();
    zeroed.axis_strength = 0.0;
    zeroed.shared_offset = 0.0;
    pragmatic_contrast_corpus(&zeroed)
}

/// Two well-separated Gaussian classes in one topic, as a dataset + store.
pub fn two_gaussian_corpus(
    n_per_class: usize,
    dim: usize,
    separation: f64,
    seed: u64,
) -> (LabeledDataset, EmbeddingStore) {
    let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, &[stream::SYNTH, 2]));
    let mut comments = Vec::new();
    let mut vectors = HashMap::new();
    for class in [1u8, 0u8] {
        for i in 0..n_per_class {
            let id = format!("g{class}-{i:03}");
            let mut v = gaussian_vector(dim, &mut rng).mapv(|x| x * 0.5);
            v[0] += if class == 1 { separation } else { -separation };
            comments.push(Comment {
                id: id.clone(),
                topic: "gaussians".to_string(),
                context_id: "gaussians".to_string(),
                context_text: String::new(),
                text: format!("gaussian {class} {i}"),
                annotator_labels: vec![class; 3],
                gold_label: Some(class),
                upvotes: None,
                platform: Platform::Standalone,
            });
            vectors.insert(id, v);
        }
    }
    let dataset = LabeledDataset::new(comments).expect("generator produces valid comments");
    (dataset, EmbeddingStore::from_parts(dim, vectors))
}
