//! Per-topic class pools and (1 + 2c)-element context tuples.
//!
//! Context always comes from the train split of the target's own topic, at
//! train and at inference time alike; anything else would leak evaluation
//! labels into prediction.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Comment, CorpusError, LabeledDataset, Split, LABEL_W};
use crate::util::{derive_seed, stable_hash64, stream};

#[derive(Debug, thiserror::Error)]
pub enum SamplerError {
    #[error("topic `{topic}`: both context pools are empty, tuple impossible")]
    EmptyPools { topic: String },
    #[error("no context pool for topic `{0}`")]
    MissingTopic(String),
    #[error("context size c must be >= 1")]
    BadContextSize,
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// Train-split comments of one topic, partitioned by gold class.
#[derive(Debug, Clone)]
pub struct ContextPool {
    pub topic: String,
    pub w_pool: Vec<Comment>,
    pub nw_pool: Vec<Comment>,
}

impl ContextPool {
    pub fn is_empty(&self) -> bool {
        self.w_pool.is_empty() && self.nw_pool.is_empty()
    }
}

/// The target comment plus c positive-class and c negative-class context
/// comments from the same topic.
#[derive(Debug, Clone)]
pub struct ContextTuple {
    pub target: Comment,
    pub positives: Vec<Comment>,
    pub negatives: Vec<Comment>,
    pub seed: u64,
}

impl ContextTuple {
    pub fn arity(&self) -> usize {
        1 + self.positives.len() + self.negatives.len()
    }

    /// Context comments in tuple order: positives then negatives.
    pub fn context(&self) -> impl Iterator<Item = &Comment> {
        self.positives.iter().chain(self.negatives.iter())
    }

    /// Context element by index into [`Self::context`] order.
    pub fn context_comment(&self, index: usize) -> &Comment {
        if index < self.positives.len() {
            &self.positives[index]
        } else {
            &self.negatives[index - self.positives.len()]
        }
    }
}

/// Serialized form of a tuple for reproducibility artifacts.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct TupleRecord {
    pub target_id: String,
    pub positive_ids: Vec<String>,
    pub negative_ids: Vec<String>,
    pub seed: u64,
}

impl From<&ContextTuple> for TupleRecord {
    fn from(t: &ContextTuple) -> Self {
        Self {
            target_id: t.target.id.clone(),
            positive_ids: t.positives.iter().map(|c| c.id.clone()).collect(),
            negative_ids: t.negatives.iter().map(|c| c.id.clone()).collect(),
            seed: t.seed,
        }
    }
}

pub fn save_tuple_records(records: &[TupleRecord], path: &Path) -> Result<(), SamplerError> {
    let mut out = String::new();
    for record in records {
        out.push_str(&serde_json::to_string(record).expect("tuple record serializes"));
        out.push('\n');
    }
    crate::util::atomic_write(path, out.as_bytes()).map_err(CorpusError::Io)?;
    Ok(())
}

/// Builds per-topic W/NW pools from the train split. Empty pools are
/// permitted but flagged with a warning.
pub fn build_pools(train: &LabeledDataset) -> Result<BTreeMap<String, ContextPool>, SamplerError> {
    if train.split_assignment().is_none() {
        return Err(SamplerError::Corpus(CorpusError::NoSplitAssignment));
    }
    let mut pools: BTreeMap<String, ContextPool> = train
        .topics()
        .iter()
        .map(|topic| {
            (
                topic.clone(),
                ContextPool {
                    topic: topic.clone(),
                    w_pool: Vec::new(),
                    nw_pool: Vec::new(),
                },
            )
        })
        .collect();
    for comment in train.iter_split(Split::Train) {
        let pool = pools
            .get_mut(&comment.topic)
            .expect("topic registered at dataset construction");
        if comment.gold() == LABEL_W {
            pool.w_pool.push(comment.clone());
        } else {
            pool.nw_pool.push(comment.clone());
        }
    }
    for pool in pools.values_mut() {
        pool.w_pool.sort_by(|a, b| a.id.cmp(&b.id));
        pool.nw_pool.sort_by(|a, b| a.id.cmp(&b.id));
        if pool.w_pool.is_empty() {
            log::warn!("topic `{}`: empty W context pool", pool.topic);
        }
        if pool.nw_pool.is_empty() {
            log::warn!("topic `{}`: empty NW context pool", pool.topic);
        }
    }
    Ok(pools)
}

/// Draws `c` indices from `0..len`: without replacement when the pool is
/// large enough, with replacement otherwise.
fn draw_indices(len: usize, c: usize, rng: &mut ChaCha12Rng) -> (Vec<usize>, bool) {
    if len >= c {
        // Partial Fisher-Yates over an index vector.
        let mut indices: Vec<usize> = (0..len).collect();
        for i in 0..c {
            let j = rng.random_range(i..len);
            indices.swap(i, j);
        }
        indices.truncate(c);
        (indices, false)
    } else {
        let indices = (0..c).map(|_| rng.random_range(0..len)).collect();
        (indices, true)
    }
}

/// Samples a context tuple for `target` from its topic pool.
///
/// Uniform without replacement when a pool holds at least `c` candidates,
/// with replacement (and a warning) otherwise; a single empty pool falls back
/// to the other class so the tuple keeps its 1 + 2c arity. The target never
/// appears among the candidates. Deterministic given `(target, seed)`.
pub fn sample_tuple(
    target: &Comment,
    pool: &ContextPool,
    c: usize,
    seed: u64,
) -> Result<ContextTuple, SamplerError> {
    if c == 0 {
        return Err(SamplerError::BadContextSize);
    }
    let w_candidates: Vec<&Comment> = pool.w_pool.iter().filter(|m| m.id != target.id).collect();
    let nw_candidates: Vec<&Comment> = pool.nw_pool.iter().filter(|m| m.id != target.id).collect();
    if w_candidates.is_empty() && nw_candidates.is_empty() {
        return Err(SamplerError::EmptyPools {
            topic: pool.topic.clone(),
        });
    }

    let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, &[
        stream::TUPLE,
        stable_hash64(&target.id),
    ]));

    let mut draw_class = |own: &[&Comment], other: &[&Comment], class: &str| -> Vec<Comment> {
        let source = if own.is_empty() {
            log::warn!(
                "topic `{}`: {class} pool empty for target `{}`; sampling from the other class",
                pool.topic,
                target.id
            );
            other
        } else {
            own
        };
        let (indices, with_replacement) = draw_indices(source.len(), c, &mut rng);
        if with_replacement {
            log::warn!(
                "topic `{}`: {class} pool has {} candidate(s) < c = {c}; sampling with replacement",
                pool.topic,
                source.len()
            );
        }
        indices.into_iter().map(|i| source[i].clone()).collect()
    };

    let positives = draw_class(&w_candidates, &nw_candidates, "W");
    let negatives = draw_class(&nw_candidates, &w_candidates, "NW");

    Ok(ContextTuple {
        target: target.clone(),
        positives,
        negatives,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{stratified_split, Platform};
    use std::collections::BTreeMap as Map;

    fn comment(id: &str, topic: &str, label: u8) -> Comment {
        Comment {
            id: id.to_string(),
            topic: topic.to_string(),
            context_id: format!("ctx-{topic}"),
            context_text: String::new(),
            text: format!("text {id}"),
            annotator_labels: vec![label; 3],
            gold_label: None,
            upvotes: None,
            platform: Platform::Standalone,
        }
    }

    fn train_all(comments: Vec<Comment>) -> LabeledDataset {
        let ds = LabeledDataset::new(comments).unwrap();
        let assignment: Map<String, Split> = ds
            .comments()
            .iter()
            .map(|c| (c.id.clone(), Split::Train))
            .collect();
        ds.with_split_assignment(assignment).unwrap()
    }

    fn pool_4w_16nw() -> ContextPool {
        let mut comments = Vec::new();
        for i in 0..4 {
            comments.push(comment(&format!("w{i}"), "t", 1));
        }
        for i in 0..16 {
            comments.push(comment(&format!("n{i:02}"), "t", 0));
        }
        let ds = train_all(comments);
        build_pools(&ds).unwrap().remove("t").unwrap()
    }

    #[test]
    fn build_pools_partitions_by_label() {
        let pool = pool_4w_16nw();
        assert_eq!(pool.w_pool.len(), 4);
        assert_eq!(pool.nw_pool.len(), 16);
    }

    #[test]
    fn build_pools_flags_empty_and_keys_by_topic() {
        let mut comments = vec![comment("a", "t1", 0), comment("b", "t1", 0)];
        comments.push(comment("c", "t2", 0));
        comments.push(comment("d", "t2", 1));
        let ds = train_all(comments);
        let pools = build_pools(&ds).unwrap();
        assert_eq!(pools.len(), 2);
        assert!(pools["t1"].w_pool.is_empty());
        assert_eq!(pools["t2"].w_pool.len(), 1);
        assert!(pools["t1"]
            .nw_pool
            .iter()
            .all(|c| c.topic == "t1"));
    }

    #[test]
    fn tuple_arity_is_one_plus_two_c() {
        let pool = pool_4w_16nw();
        let target = comment("other", "t", 0);
        for c in [1, 2, 3] {
            let t = sample_tuple(&target, &pool, c, 9).unwrap();
            assert_eq!(t.arity(), 1 + 2 * c);
            assert_eq!(t.positives.len(), c);
            assert_eq!(t.negatives.len(), c);
        }
    }

    #[test]
    fn tuple_is_deterministic() {
        let pool = pool_4w_16nw();
        let target = comment("other", "t", 0);
        let a = TupleRecord::from(&sample_tuple(&target, &pool, 2, 42).unwrap());
        let b = TupleRecord::from(&sample_tuple(&target, &pool, 2, 42).unwrap());
        assert_eq!(a, b);
        let c = TupleRecord::from(&sample_tuple(&target, &pool, 2, 43).unwrap());
        assert_ne!(a, c);
    }

    #[test]
    fn target_is_excluded_from_candidates() {
        let pool = pool_4w_16nw();
        let target = pool.w_pool[0].clone();
        for seed in 0..200 {
            let t = sample_tuple(&target, &pool, 3, seed).unwrap();
            assert!(t.context().all(|c| c.id != target.id));
        }
    }

    #[test]
    fn small_pool_samples_with_replacement() {
        // c=3 against a W pool of 2 candidates forces a repeat.
        let mut comments = vec![
            comment("w0", "t", 1),
            comment("w1", "t", 1),
        ];
        for i in 0..8 {
            comments.push(comment(&format!("n{i}"), "t", 0));
        }
        let ds = train_all(comments);
        let pool = build_pools(&ds).unwrap().remove("t").unwrap();
        let target = comment("other", "t", 0);
        let t = sample_tuple(&target, &pool, 3, 7).unwrap();
        assert_eq!(t.positives.len(), 3);
        let mut ids: Vec<&str> = t.positives.iter().map(|c| c.id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        assert!(ids.len() < 3, "positives must contain a repeat");
        // Negatives had enough candidates: all distinct.
        let mut nids: Vec<&str> = t.negatives.iter().map(|c| c.id.as_str()).collect();
        nids.sort_unstable();
        nids.dedup();
        assert_eq!(nids.len(), 3);
    }

    #[test]
    fn one_empty_pool_falls_back_to_the_other() {
        let comments = vec![
            comment("n0", "t", 0),
            comment("n1", "t", 0),
            comment("n2", "t", 0),
        ];
        let ds = train_all(comments);
        let pool = build_pools(&ds).unwrap().remove("t").unwrap();
        let target = comment("other", "t", 0);
        let t = sample_tuple(&target, &pool, 1, 3).unwrap();
        assert_eq!(t.arity(), 3);
        assert!(t.positives[0].id.starts_with('n'));
    }

    #[test]
    fn both_pools_empty_is_an_error() {
        let pool = ContextPool {
            topic: "t".into(),
            w_pool: vec![],
            nw_pool: vec![],
        };
        let target = comment("x", "t", 0);
        assert!(matches!(
            sample_tuple(&target, &pool, 1, 0),
            Err(SamplerError::EmptyPools { .. })
        ));
    }

    #[test]
    fn selection_frequency_is_uniform_over_seeds() {
        // Pool of 10 NW candidates, c=1: each member's selection frequency over
        // 10,000 seeds within 3σ of 1/10.
        let mut comments = vec![comment("w0", "t", 1)];
        for i in 0..10 {
            comments.push(comment(&format!("n{i}"), "t", 0));
        }
        let ds = train_all(comments);
        let pool = build_pools(&ds).unwrap().remove("t").unwrap();
        let target = comment("other", "t", 0);

        let n_draws = 10_000usize;
        let mut counts: Map<String, usize> = Map::new();
        for seed in 0..n_draws as u64 {
            let t = sample_tuple(&target, &pool, 1, seed).unwrap();
            *counts.entry(t.negatives[0].id.clone()).or_insert(0) += 1;
        }
        let p = 0.1f64;
        let sigma = (p * (1.0 - p) / n_draws as f64).sqrt();
        for i in 0..10 {
            let freq = *counts.get(&format!("n{i}")).unwrap_or(&0) as f64 / n_draws as f64;
            assert!(
                (freq - p).abs() <= 3.0 * sigma,
                "candidate n{i} frequency {freq} vs expected {p} ± {}",
                3.0 * sigma
            );
        }
    }

    #[test]
    fn inference_context_comes_only_from_train() {
        // Build a split dataset, pool from train, and check id-disjointness of
        // sampled context with the test split.
        let mut comments = Vec::new();
        for i in 0..12 {
            comments.push(comment(&format!("w{i:02}"), "t", 1));
        }
        for i in 0..28 {
            comments.push(comment(&format!("n{i:02}"), "t", 0));
        }
        let ds = LabeledDataset::new(comments).unwrap();
        let assignment = stratified_split(&ds, (0.80, 0.05, 0.15), 11).unwrap();
        let ds = ds.with_split_assignment(assignment).unwrap();
        let pools = build_pools(&ds).unwrap();
        let pool = &pools["t"];

        let train_ids: std::collections::HashSet<&str> = ds
            .iter_split(Split::Train)
            .map(|c| c.id.as_str())
            .collect();
        for target in ds.iter_split(Split::Test) {
            let t = sample_tuple(target, pool, 2, 5).unwrap();
            for ctx in t.context() {
                assert!(train_ids.contains(ctx.id.as_str()));
            }
        }
    }
}
