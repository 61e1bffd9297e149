//! Experiment configuration, end-to-end runs, miner comparison, ablation
//! grids, and projection plots. Every run writes its resolved config snapshot
//! next to its artifacts; re-running from the snapshot reproduces the metrics
//! byte-for-byte.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use crate::baselines::{
    correct_and_smooth, finetune_head, BaselineError, GraphSpec, HeadConfig,
};
use crate::corpus::{
    load_corpus, load_split_assignment, stratified_split, Comment, CorpusError, LabeledDataset,
    Platform, Split,
};
use crate::embedding::{
    BackendRegistry, CacheBackend, EmbedError, EmbeddingBackend, EmbeddingStore, ToyBackend,
    DEFAULT_MAX_SEQUENCE_LENGTH,
};
use crate::metrics::{
    ablation_run, AblationCell, AblationSummary, MetricsError, MetricsReport, RunRecord,
};
use crate::mina::{
    evaluate_split, load_checkpoint, predict_with_miner, save_checkpoint, train_with_miner,
    Miner, MinaConfig, ModelError,
};
use crate::sampler::{build_pools, save_tuple_records, SamplerError, TupleRecord};
use crate::synth::{pragmatic_contrast_corpus, random_embedding_corpus, SynthParams};
use crate::tsne::{tsne_embed, write_scatter_svg, TsneConfig};
use crate::util::atomic_write;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    /// Invalid or incomplete configuration; maps to exit code 2.
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl ExperimentError {
    pub fn is_config_error(&self) -> bool {
        matches!(self, ExperimentError::Config(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Mina,
    Finetune,
    Cands,
    CosineMine,
    RandomMine,
}

impl Method {
    pub fn miner(&self) -> Option<Miner> {
        match self {
            Method::Mina => Some(Miner::Attention),
            Method::CosineMine => Some(Miner::Cosine),
            Method::RandomMine => Some(Miner::Random),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    Toy,
    Cache,
}

fn default_max_seq() -> usize {
    DEFAULT_MAX_SEQUENCE_LENGTH
}
fn default_pooling() -> String {
    "as-provided".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub name: String,
    pub kind: BackendKind,
    pub dim: usize,
    /// Toy backend seed.
    #[serde(default)]
    pub seed: u64,
    /// Cache backend file.
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default = "default_max_seq")]
    pub max_sequence_length: usize,
    #[serde(default = "default_pooling")]
    pub pooling: String,
}

fn default_cs_k() -> usize {
    10
}
fn default_cs_alpha() -> f64 {
    0.8
}
fn default_cs_iterations() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandsConfig {
    #[serde(default = "default_cs_k")]
    pub k: usize,
    #[serde(default = "default_cs_alpha")]
    pub alpha: f64,
    #[serde(default = "default_cs_iterations")]
    pub iterations: usize,
}

impl Default for CandsConfig {
    fn default() -> Self {
        Self {
            k: default_cs_k(),
            alpha: default_cs_alpha(),
            iterations: default_cs_iterations(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthMode {
    /// Per-topic QUD axes with learnable contrast.
    PragmaticContrast,
    /// No class signal at all; pure high-dimensional noise.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub mode: SynthMode,
    #[serde(default)]
    pub params: SynthParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareConfig {
    pub miners: Vec<Miner>,
    pub n_seeds: usize,
    /// When set, the comparison runs on generated data instead of `dataset`.
    #[serde(default)]
    pub synthetic: Option<SyntheticSpec>,
}

fn default_runs() -> usize {
    50
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    #[serde(default)]
    pub id: Option<String>,
    #[serde(default)]
    pub d: Option<usize>,
    #[serde(default)]
    pub h: Option<usize>,
    #[serde(default)]
    pub c: Option<usize>,
    #[serde(default)]
    pub m: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblateConfig {
    #[serde(default = "default_runs")]
    pub runs: usize,
    pub grid: Vec<GridEntry>,
}

fn default_ratios() -> (f64, f64, f64) {
    (0.80, 0.05, 0.15)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Corpus JSONL; optional when a command runs on synthetic data.
    #[serde(default)]
    pub dataset: Option<PathBuf>,
    pub platform: Platform,
    /// Precomputed split assignment JSONL; computed from ratios when absent.
    #[serde(default)]
    pub split: Option<PathBuf>,
    #[serde(default = "default_ratios")]
    pub ratios: (f64, f64, f64),
    #[serde(default)]
    pub split_seed: u64,
    pub method: Method,
    pub backend: BackendConfig,
    #[serde(default)]
    pub mina: Option<MinaConfig>,
    #[serde(default)]
    pub head: Option<HeadConfig>,
    #[serde(default)]
    pub cands: Option<CandsConfig>,
    #[serde(default)]
    pub compare: Option<CompareConfig>,
    #[serde(default)]
    pub ablate: Option<AblateConfig>,
    pub eval_seed: u64,
    pub output_dir: PathBuf,
    /// How comment text reaches the encoder; resolved from the platform.
    #[serde(default)]
    pub fusion: Option<String>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        match self.method {
            Method::Mina | Method::CosineMine | Method::RandomMine => {
                let mina = self.mina.as_ref().ok_or_else(|| {
                    ExperimentError::Config(format!(
                        "method {:?} requires a [mina] section",
                        self.method
                    ))
                })?;
                if mina.m != self.backend.name {
                    return Err(ExperimentError::Config(format!(
                        "mina.m = `{}` does not name the configured backend `{}`",
                        mina.m, self.backend.name
                    )));
                }
                mina.validate(self.backend.dim)
                    .map_err(|e| ExperimentError::Config(e.to_string()))?;
            }
            Method::Finetune => {
                if self.head.is_none() {
                    return Err(ExperimentError::Config(
                        "method finetune requires a [head] section".to_string(),
                    ));
                }
            }
            Method::Cands => {
                if self.head.is_none() {
                    return Err(ExperimentError::Config(
                        "method cands requires a [head] section for the base predictor"
                            .to_string(),
                    ));
                }
                let cands = self.cands.clone().unwrap_or_default();
                if !(0.0..1.0).contains(&cands.alpha) {
                    return Err(ExperimentError::Config(format!(
                        "cands.alpha must lie in (0, 1), got {}",
                        cands.alpha
                    )));
                }
            }
        }
        if self.backend.kind == BackendKind::Cache && self.backend.path.is_none() {
            return Err(ExperimentError::Config(
                "cache backend requires backend.path".to_string(),
            ));
        }
        let synthetic = self
            .compare
            .as_ref()
            .map(|c| c.synthetic.is_some())
            .unwrap_or(false);
        match &self.dataset {
            Some(path) => {
                if !path.exists() {
                    return Err(ExperimentError::Config(format!(
                        "dataset path `{}` does not exist",
                        path.display()
                    )));
                }
            }
            None => {
                if !synthetic {
                    return Err(ExperimentError::Config(
                        "dataset path missing (and no synthetic data requested)".to_string(),
                    ));
                }
            }
        }
        if let Some(split) = &self.split {
            if !split.exists() {
                return Err(ExperimentError::Config(format!(
                    "split path `{}` does not exist",
                    split.display()
                )));
            }
        }
        let (a, b, c) = self.ratios;
        if (a + b + c - 1.0).abs() > 1e-9 {
            return Err(ExperimentError::Config(format!(
                "split ratios ({a}, {b}, {c}) must sum to 1"
            )));
        }
        if let Some(compare) = &self.compare {
            if compare.miners.len() < 2 {
                return Err(ExperimentError::Config(
                    "compare needs at least 2 miners".to_string(),
                ));
            }
            if compare.n_seeds < 5 {
                return Err(ExperimentError::Config(
                    "compare needs at least 5 seeds".to_string(),
                ));
            }
        }
        Ok(())
    }

    /// Fills derived fields (fusion mode) after parsing.
    pub fn resolve(&mut self) {
        if self.fusion.is_none() {
            self.fusion = Some(match self.platform {
                Platform::Standalone => "text-only".to_string(),
                Platform::StatementResponse => "context-concat".to_string(),
            });
        }
    }
}

/// Parses and validates a TOML experiment config.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, ExperimentError> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| ExperimentError::Config(format!("cannot read `{}`: {e}", path.display())))?;
    let mut config: ExperimentConfig = toml::from_str(&raw)
        .map_err(|e| ExperimentError::Config(format!("cannot parse `{}`: {e}", path.display())))?;
    config.resolve();
    config.validate()?;
    Ok(config)
}

pub fn build_backend(cfg: &BackendConfig) -> Result<Arc<dyn EmbeddingBackend>, ExperimentError> {
    match cfg.kind {
        BackendKind::Toy => Ok(Arc::new(
            ToyBackend::new(cfg.dim, cfg.seed).with_name(&cfg.name),
        )),
        BackendKind::Cache => {
            let path = cfg.path.as_ref().ok_or_else(|| {
                ExperimentError::Config("cache backend requires backend.path".to_string())
            })?;
            Ok(Arc::new(CacheBackend::load(
                path,
                &cfg.name,
                cfg.dim,
                cfg.max_sequence_length,
                &cfg.pooling,
            )?))
        }
    }
}

/// Builds the registry named by the config. One backend per config today;
/// the registry shape keeps backends addressable by name.
pub fn build_registry(config: &ExperimentConfig) -> Result<BackendRegistry, ExperimentError> {
    let mut registry = BackendRegistry::new();
    registry.register(build_backend(&config.backend)?);
    Ok(registry)
}

/// Loaded corpus with splits attached plus its embedding store.
pub struct PreparedData {
    pub dataset: LabeledDataset,
    pub store: EmbeddingStore,
}

fn attach_splits(
    dataset: LabeledDataset,
    config: &ExperimentConfig,
) -> Result<LabeledDataset, ExperimentError> {
    let assignment = match &config.split {
        Some(path) => load_split_assignment(path)?,
        None => stratified_split(&dataset, config.ratios, config.split_seed)?,
    };
    Ok(dataset.with_split_assignment(assignment)?)
}

/// Loads the corpus, attaches splits, and embeds every comment.
pub fn prepare(config: &ExperimentConfig) -> Result<PreparedData, ExperimentError> {
    let path = config.dataset.as_ref().ok_or_else(|| {
        ExperimentError::Config("dataset path missing".to_string())
    })?;
    let dataset = load_corpus(path, config.platform)?;
    let dataset = attach_splits(dataset, config)?;
    let registry = build_registry(config)?;
    let backend = registry.get(&config.backend.name)?;
    let store = EmbeddingStore::build(backend.as_ref(), &dataset)?;
    Ok(PreparedData { dataset, store })
}

fn prepare_synthetic(
    spec: &SyntheticSpec,
    config: &ExperimentConfig,
) -> Result<PreparedData, ExperimentError> {
    let (dataset, store) = match spec.mode {
        SynthMode::PragmaticContrast => pragmatic_contrast_corpus(&spec.params),
        SynthMode::Random => random_embedding_corpus(&spec.params),
    };
    let dataset = attach_splits(dataset, config)?;
    Ok(PreparedData { dataset, store })
}

fn write_snapshot(config: &ExperimentConfig, dir: &Path) -> Result<PathBuf, ExperimentError> {
    let path = dir.join("config_snapshot.toml");
    let text = toml::to_string(config)
        .map_err(|e| ExperimentError::Config(format!("cannot serialize config: {e}")))?;
    atomic_write(&path, text.as_bytes())?;
    Ok(path)
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), ExperimentError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| ExperimentError::Config(format!("cannot serialize artifact: {e}")))?;
    text.push('\n');
    atomic_write(path, text.as_bytes())?;
    Ok(())
}

/// Artifacts of one end-to-end run.
pub struct RunArtifacts {
    pub metrics: MetricsReport,
    pub metrics_path: PathBuf,
    pub files: Vec<PathBuf>,
}

/// Executes the configured method end-to-end and writes metrics JSON, a
/// checkpoint, a loss CSV, prediction and tuple records, and the config
/// snapshot; all writes are atomic.
pub fn cmd_run(config: &ExperimentConfig) -> Result<RunArtifacts, ExperimentError> {
    config.validate()?;
    let dir = config.output_dir.clone();
    std::fs::create_dir_all(&dir)?;
    let mut files = vec![write_snapshot(config, &dir)?];
    let data = prepare(config)?;

    let (metrics, loss_csv) = match config.method {
        Method::Mina | Method::CosineMine | Method::RandomMine => {
            let miner = config.method.miner().expect("mina-like method");
            let mina_config = config.mina.as_ref().expect("validated");
            let pools = build_pools(&data.dataset)?;
            let (model, history) = train_with_miner(
                mina_config,
                &data.dataset,
                &pools,
                &data.store,
                miner,
                mina_config.seed,
            )?;
            let (report, predictions) = evaluate_split(
                &model,
                &data.dataset,
                Split::Test,
                &pools,
                &data.store,
                config.eval_seed,
                miner,
            )?;
            let checkpoint_path = dir.join("checkpoint.json");
            save_checkpoint(&model, &checkpoint_path)?;
            files.push(checkpoint_path);

            let tuples: Vec<TupleRecord> = predictions.iter().map(|p| p.tuple.clone()).collect();
            let tuples_path = dir.join("tuples.jsonl");
            save_tuple_records(&tuples, &tuples_path)?;
            files.push(tuples_path);

            let predictions_path = dir.join("predictions.jsonl");
            let mut lines = String::new();
            for p in &predictions {
                lines.push_str(&serde_json::to_string(p).expect("prediction serializes"));
                lines.push('\n');
            }
            atomic_write(&predictions_path, lines.as_bytes())?;
            files.push(predictions_path);

            (report, history.to_csv())
        }
        Method::Finetune => {
            let head_config = config.head.as_ref().expect("validated");
            let (_, report, losses) = finetune_head(&data.store, &data.dataset, head_config)?;
            let mut csv = String::from("epoch,train_loss,val_loss\n");
            for (i, loss) in losses.iter().enumerate() {
                csv.push_str(&format!("{},{},NaN\n", i + 1, loss));
            }
            (report, csv)
        }
        Method::Cands => {
            let head_config = config.head.as_ref().expect("validated");
            let cands = config.cands.clone().unwrap_or_default();
            let (head, _, losses) = finetune_head(&data.store, &data.dataset, head_config)?;

            // Graph over every comment; labels from the train split only.
            let mut ordered: Vec<&Comment> = data.dataset.comments().iter().collect();
            ordered.sort_by(|a, b| a.id.cmp(&b.id));
            let dim = data.store.dim();
            let mut nodes = Array2::<f64>::zeros((ordered.len(), dim));
            let mut labels = BTreeMap::new();
            for (i, comment) in ordered.iter().enumerate() {
                nodes.row_mut(i).assign(data.store.get(&comment.id)?);
                if data.dataset.split_of(&comment.id) == Some(Split::Train) {
                    labels.insert(i, comment.gold());
                }
            }
            let graph = GraphSpec::build(nodes.view(), cands.k, labels)?;
            let base = head.base_predictions(nodes.view());
            let smoothed = correct_and_smooth(&graph, &base, cands.iterations, cands.alpha)?;

            let mut predictions = Vec::new();
            let mut golds = Vec::new();
            for (i, comment) in ordered.iter().enumerate() {
                if data.dataset.split_of(&comment.id) == Some(Split::Test) {
                    let p_w = smoothed[[i, 1]];
                    predictions.push(if p_w > 0.5 { 1 } else { 0 });
                    golds.push(comment.gold());
                }
            }
            let report = crate::metrics::score(&predictions, &golds)?;
            let mut csv = String::from("epoch,train_loss,val_loss\n");
            for (i, loss) in losses.iter().enumerate() {
                csv.push_str(&format!("{},{},NaN\n", i + 1, loss));
            }
            (report, csv)
        }
    };

    let loss_path = dir.join("loss.csv");
    atomic_write(&loss_path, loss_csv.as_bytes())?;
    files.push(loss_path);

    let metrics_path = dir.join("metrics.json");
    write_json(&metrics, &metrics_path)?;
    files.push(metrics_path.clone());

    Ok(RunArtifacts {
        metrics,
        metrics_path,
        files,
    })
}

/// One row of the miner-comparison table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinerRow {
    pub miner: Miner,
    pub mean_f1: f64,
    pub per_seed_f1: Vec<f64>,
}

/// Runs the identical pipeline once per (miner, seed) with only the mining
/// strategy swapped; reports mean target-class F1 per miner.
pub fn compare_miners(config: &ExperimentConfig) -> Result<Vec<MinerRow>, ExperimentError> {
    config.validate()?;
    let compare = config
        .compare
        .as_ref()
        .ok_or_else(|| ExperimentError::Config("missing [compare] section".to_string()))?;
    let mina_config = config
        .mina
        .as_ref()
        .ok_or_else(|| ExperimentError::Config("compare requires a [mina] section".to_string()))?;

    let data = match &compare.synthetic {
        Some(spec) => prepare_synthetic(spec, config)?,
        None => prepare(config)?,
    };
    let pools = build_pools(&data.dataset)?;

    use rayon::prelude::*;
    let jobs: Vec<(usize, u64)> = (0..compare.miners.len())
        .flat_map(|m| (0..compare.n_seeds as u64).map(move |s| (m, s)))
        .collect();
    let scores: Vec<Result<(usize, f64), String>> = jobs
        .par_iter()
        .map(|&(miner_idx, offset)| {
            let miner = compare.miners[miner_idx];
            let sampling_seed = config.eval_seed + offset;
            let (model, _) = train_with_miner(
                mina_config,
                &data.dataset,
                &pools,
                &data.store,
                miner,
                sampling_seed,
            )
            .map_err(|e| e.to_string())?;
            let (report, _) = evaluate_split(
                &model,
                &data.dataset,
                Split::Test,
                &pools,
                &data.store,
                sampling_seed,
                miner,
            )
            .map_err(|e| e.to_string())?;
            Ok((miner_idx, report.w.f1))
        })
        .collect();

    let mut rows: Vec<MinerRow> = compare
        .miners
        .iter()
        .map(|&miner| MinerRow {
            miner,
            mean_f1: 0.0,
            per_seed_f1: Vec::new(),
        })
        .collect();
    for result in scores {
        let (miner_idx, f1) = result.map_err(ExperimentError::Config)?;
        rows[miner_idx].per_seed_f1.push(f1);
    }
    for row in &mut rows {
        row.mean_f1 = row.per_seed_f1.iter().sum::<f64>() / row.per_seed_f1.len() as f64;
    }
    Ok(rows)
}

/// [`compare_miners`] plus the CSV artifact mirroring the comparison table.
pub fn cmd_compare_miners(config: &ExperimentConfig) -> Result<(Vec<MinerRow>, PathBuf), ExperimentError> {
    let rows = compare_miners(config)?;
    let dir = config.output_dir.clone();
    std::fs::create_dir_all(&dir)?;
    write_snapshot(config, &dir)?;
    let mut csv = String::from("method,mean_f1,n_seeds\n");
    for row in &rows {
        csv.push_str(&format!(
            "{},{},{}\n",
            row.miner,
            row.mean_f1,
            row.per_seed_f1.len()
        ));
    }
    let path = dir.join("miner_comparison.csv");
    atomic_write(&path, csv.as_bytes())?;
    Ok((rows, path))
}

/// Expands the ablation grid against the base config and runs every cell
/// `runs` times, varying only the tuple-sampling seed (model init stays at
/// the config seed). Emits the summary CSV and all per-run reports.
pub fn cmd_ablate(
    config: &ExperimentConfig,
) -> Result<(Vec<AblationSummary>, Vec<RunRecord>, PathBuf), ExperimentError> {
    config.validate()?;
    let ablate = config
        .ablate
        .as_ref()
        .ok_or_else(|| ExperimentError::Config("missing [ablate] section".to_string()))?;
    let base = config
        .mina
        .as_ref()
        .ok_or_else(|| ExperimentError::Config("ablate requires a [mina] section".to_string()))?;
    if ablate.grid.is_empty() {
        return Err(ExperimentError::Config("ablate.grid is empty".to_string()));
    }

    let data = prepare(config)?;
    let pools = build_pools(&data.dataset)?;

    let cells: Vec<AblationCell<MinaConfig>> = ablate
        .grid
        .iter()
        .map(|entry| {
            let mut cell = base.clone();
            if let Some(d) = entry.d {
                cell.d = d;
            }
            if let Some(h) = entry.h {
                cell.h = h;
            }
            if let Some(c) = entry.c {
                cell.c = c;
            }
            if let Some(m) = &entry.m {
                cell.m = m.clone();
            }
            let id = entry.id.clone().unwrap_or_else(|| {
                format!("d{}-h{}-c{}-{}", cell.d, cell.h, cell.c, cell.m)
            });
            AblationCell {
                id,
                config: cell,
                base_seed: config.eval_seed,
            }
        })
        .collect();

    let (summaries, records) = ablation_run(&cells, ablate.runs, |cell, sampling_seed| {
        let (model, _) = train_with_miner(
            cell,
            &data.dataset,
            &pools,
            &data.store,
            Miner::Attention,
            sampling_seed,
        )
        .map_err(|e| e.to_string())?;
        let (report, _) = evaluate_split(
            &model,
            &data.dataset,
            Split::Test,
            &pools,
            &data.store,
            sampling_seed,
            Miner::Attention,
        )
        .map_err(|e| e.to_string())?;
        Ok(report)
    })?;

    let dir = config.output_dir.clone();
    std::fs::create_dir_all(&dir)?;
    write_snapshot(config, &dir)?;
    let mut csv = String::from("config_id,mean_f1,variance,n_runs,n_excluded\n");
    for s in &summaries {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            s.config_id, s.mean_f1, s.variance, s.n_runs, s.n_excluded
        ));
    }
    let summary_path = dir.join("ablation_summary.csv");
    atomic_write(&summary_path, csv.as_bytes())?;

    let mut lines = String::new();
    for record in &records {
        lines.push_str(&serde_json::to_string(record).expect("run record serializes"));
        lines.push('\n');
    }
    atomic_write(&dir.join("ablation_runs.jsonl"), lines.as_bytes())?;

    Ok((summaries, records, summary_path))
}

/// Representation matrix for the projection plot: concatenated
/// (target, mined) encoder states when a checkpoint is given, raw embeddings
/// otherwise. Items come from the chosen split in id order.
pub fn projection_representations(
    config: &ExperimentConfig,
    checkpoint: Option<&Path>,
    split: Split,
) -> Result<(Array2<f64>, Vec<u8>), ExperimentError> {
    let data = prepare(config)?;
    let mut items: Vec<&Comment> = data.dataset.iter_split(split).collect();
    items.sort_by(|a, b| a.id.cmp(&b.id));
    if items.is_empty() {
        return Err(ExperimentError::Config(format!(
            "{split:?} split is empty"
        )));
    }
    let labels: Vec<u8> = items.iter().map(|c| c.gold()).collect();

    let matrix = match checkpoint {
        Some(path) => {
            let model = load_checkpoint(path)?;
            if model.dim != data.store.dim() {
                return Err(ExperimentError::Config(format!(
                    "checkpoint dim {} does not match backend dim {}",
                    model.dim,
                    data.store.dim()
                )));
            }
            let pools = build_pools(&data.dataset)?;
            let mut out = Array2::<f64>::zeros((items.len(), 2 * model.dim));
            for (i, target) in items.iter().enumerate() {
                let pool = pools
                    .get(&target.topic)
                    .ok_or_else(|| SamplerError::MissingTopic(target.topic.clone()))?;
                let tuple = crate::sampler::sample_tuple(
                    target,
                    pool,
                    model.config.c,
                    config.eval_seed,
                )?;
                let mut x = Array2::<f64>::zeros((tuple.arity(), model.dim));
                x.row_mut(0).assign(data.store.get(&tuple.target.id)?);
                for (r, ctx) in tuple.context().enumerate() {
                    x.row_mut(r + 1).assign(data.store.get(&ctx.id)?);
                }
                let (encoded, attention) = model.encode_tuple(&x)?;
                let mined = crate::mina::mine_negative(&attention, &tuple)?;
                out.slice_mut(s![i, ..model.dim]).assign(&encoded.row(0));
                out.slice_mut(s![i, model.dim..]).assign(&encoded.row(1 + mined));
            }
            out
        }
        None => {
            let dim = data.store.dim();
            let mut out = Array2::<f64>::zeros((items.len(), dim));
            for (i, target) in items.iter().enumerate() {
                out.row_mut(i).assign(data.store.get(&target.id)?);
            }
            out
        }
    };
    Ok((matrix, labels))
}

/// Projects representations to 2-D and writes the scatter SVG. Returns the
/// projected coordinates for inspection.
pub fn cmd_tsne(
    config: &ExperimentConfig,
    checkpoint: Option<&Path>,
    split: Split,
    output: &Path,
    tsne: &TsneConfig,
) -> Result<(Array2<f64>, Vec<u8>), ExperimentError> {
    let (matrix, labels) = projection_representations(config, checkpoint, split)?;
    let projected = tsne_embed(&matrix, tsne);
    write_scatter_svg(output, &projected, &labels)?;
    Ok((projected, labels))
}

/// Agreement report for a loaded corpus.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KappaReport {
    pub n_items: usize,
    pub n_positive: usize,
    pub kappa: f64,
}

pub fn cmd_kappa(dataset: &LabeledDataset) -> Result<KappaReport, ExperimentError> {
    let counts = crate::corpus::annotation_counts(dataset);
    let kappa = crate::corpus::fleiss_kappa(&counts)?;
    Ok(KappaReport {
        n_items: dataset.len(),
        n_positive: dataset.n_positive(),
        kappa,
    })
}

/// Single-item prediction through a checkpoint, for spot checks.
pub fn predict_one(
    config: &ExperimentConfig,
    checkpoint: &Path,
    id: &str,
) -> Result<crate::mina::Prediction, ExperimentError> {
    let data = prepare(config)?;
    let model = load_checkpoint(checkpoint)?;
    let pools = build_pools(&data.dataset)?;
    let target = data
        .dataset
        .get(id)
        .ok_or_else(|| ExperimentError::Config(format!("unknown id `{id}`")))?;
    let pool = pools
        .get(&target.topic)
        .ok_or_else(|| SamplerError::MissingTopic(target.topic.clone()))?;
    Ok(predict_with_miner(
        &model,
        target,
        pool,
        &data.store,
        config.eval_seed,
        Miner::Attention,
    )?)
}
