//! Attention-based negative-sample mining (MINA) for whataboutism detection
//! in short social-media texts, plus the surrounding experiment machinery:
//! corpus handling with majority-vote aggregation and Fleiss' kappa,
//! stratified splitting, pluggable sentence-embedding backends, context-tuple
//! sampling, baselines (fine-tuned head, Correct & Smooth, cosine/random
//! mining), macro metrics with a repeated-run ablation protocol, and an
//! empirical verifier of high-dimensional near-orthogonality.

pub mod baselines;
pub mod corpus;
pub mod embedding;
pub mod experiment;
pub mod metrics;
pub mod mina;
pub mod nn;
pub mod ortho;
pub mod sampler;
pub mod synth;
pub mod tsne;
pub mod util;

pub use corpus::{
    aggregate_labels, fleiss_kappa, load_corpus, stratified_split, Comment, LabeledDataset,
    Platform, Split,
};
pub use embedding::{toy_embed, BackendRegistry, EmbeddingBackend, EmbeddingStore};
pub use metrics::{ablation_run, score, MetricsReport};
pub use mina::{
    mine_negative, predict, train, AttentionMap, Miner, MinaConfig, MinaModel,
};
pub use ortho::{bernstein_bound, empirical_orthogonality, rademacher_unit_vector};
pub use sampler::{build_pools, sample_tuple, ContextPool, ContextTuple};
