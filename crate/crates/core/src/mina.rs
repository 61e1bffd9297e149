//! The MINA model: a small Transformer encoder whose final-layer
//! cross-attention map over the context tuple is read as a pragmatic
//! similarity matrix. The most-attended context element is mined, its encoded
//! representation is concatenated with the target's, and a two-layer
//! perceptron classifies the pair. Everything is f64 with hand-written
//! backprop so gradients can be checked against finite differences.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{s, Array1, Array2, Array3, ArrayView1};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{cosine_mine, random_mine};
use crate::corpus::{Comment, LabeledDataset, Split};
use crate::embedding::{EmbedError, EmbeddingStore};
use crate::metrics::{score, MetricsError, MetricsReport};
use crate::nn::{gelu, gelu_prime, softmax, softmax_rows, Adam, LayerNorm, LayerNormTrace, Linear};
use crate::sampler::{build_pools, sample_tuple, ContextPool, ContextTuple, SamplerError, TupleRecord};
use crate::util::{derive_seed, stable_hash64, stream};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("attention heads ({h}) must divide the model dimension ({dim})")]
    HeadsDontDivide { h: usize, dim: usize },
    #[error("embedding dim mismatch: model expects {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("invalid config: {0}")]
    BadConfig(String),
    #[error("train split is empty")]
    EmptyTrainSplit,
    #[error("attention map has {positions} positions but tuple has arity {arity}")]
    AttentionArity { positions: usize, arity: usize },
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

fn default_layers() -> usize {
    2
}
fn default_heads() -> usize {
    32
}
fn default_context() -> usize {
    1
}
fn default_learning_rate() -> f64 {
    1e-4
}
fn default_epochs() -> usize {
    10
}

/// Hyperparameters of the MINA model. `batch_size`, `mlp_hidden`, `m` and
/// `seed` carry no defaults on purpose; presets must state them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinaConfig {
    /// Encoder layers.
    #[serde(default = "default_layers")]
    pub d: usize,
    /// Attention heads; must divide the embedding dimension.
    #[serde(default = "default_heads")]
    pub h: usize,
    /// Context size: c comments from each class per tuple.
    #[serde(default = "default_context")]
    pub c: usize,
    /// Embedding backend name.
    pub m: String,
    /// Classifier hidden width.
    pub mlp_hidden: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    pub batch_size: usize,
    /// Master seed for initialization and batch shuffling.
    pub seed: u64,
}

impl MinaConfig {
    pub fn validate(&self, dim: usize) -> Result<(), ModelError> {
        if self.d == 0 || self.h == 0 || self.c == 0 {
            return Err(ModelError::BadConfig(
                "d, h and c must all be >= 1".to_string(),
            ));
        }
        if self.mlp_hidden == 0 || self.batch_size == 0 || self.epochs == 0 {
            return Err(ModelError::BadConfig(
                "mlp_hidden, batch_size and epochs must all be >= 1".to_string(),
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(ModelError::BadConfig(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if dim % self.h != 0 {
            return Err(ModelError::HeadsDontDivide { h: self.h, dim });
        }
        Ok(())
    }
}

/// Final-layer attention weights, `[heads × positions × positions]`,
/// row-stochastic along the last axis. Position 0 is the target.
#[derive(Debug, Clone)]
pub struct AttentionMap {
    pub weights: Array3<f64>,
}

impl AttentionMap {
    pub fn heads(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn positions(&self) -> usize {
        self.weights.shape()[1]
    }

    /// Checks nonnegativity and row sums within `tol`.
    pub fn validate(&self, tol: f64) -> Result<(), ModelError> {
        for head in self.weights.outer_iter() {
            for row in head.rows() {
                if row.iter().any(|&v| v < 0.0) {
                    return Err(ModelError::BadConfig(
                        "attention weights must be nonnegative".to_string(),
                    ));
                }
                let sum = row.sum();
                if (sum - 1.0).abs() > tol {
                    return Err(ModelError::BadConfig(format!(
                        "attention row sums to {sum}, expected 1"
                    )));
                }
            }
        }
        Ok(())
    }

    /// The target's attention row averaged over heads.
    pub fn target_row_head_mean(&self) -> Array1<f64> {
        let n = self.positions();
        let mut out = Array1::<f64>::zeros(n);
        for head in self.weights.outer_iter() {
            out += &head.row(0);
        }
        out / self.heads() as f64
    }
}

/// One encoder layer: multi-head self-attention and a position-wise
/// feed-forward block, each with a residual connection and post layer norm.
/// No positional encoding anywhere: the tuple is an unordered set.
#[derive(Debug, Clone)]
pub struct EncoderLayer {
    pub wq: Linear,
    pub wk: Linear,
    pub wv: Linear,
    pub wo: Linear,
    pub ln1: LayerNorm,
    pub ff1: Linear,
    pub ff2: Linear,
    pub ln2: LayerNorm,
}

impl EncoderLayer {
    fn new(dim: usize, rng: &mut ChaCha12Rng) -> Self {
        let ff = 4 * dim;
        Self {
            wq: Linear::xavier(dim, dim, rng),
            wk: Linear::xavier(dim, dim, rng),
            wv: Linear::xavier(dim, dim, rng),
            wo: Linear::xavier(dim, dim, rng),
            ln1: LayerNorm::new(dim),
            ff1: Linear::xavier(dim, ff, rng),
            ff2: Linear::xavier(ff, dim, rng),
            ln2: LayerNorm::new(dim),
        }
    }

    fn zeros_like(other: &Self) -> Self {
        Self {
            wq: Linear::zeros_like(&other.wq),
            wk: Linear::zeros_like(&other.wk),
            wv: Linear::zeros_like(&other.wv),
            wo: Linear::zeros_like(&other.wo),
            ln1: LayerNorm::zeros_like(&other.ln1),
            ff1: Linear::zeros_like(&other.ff1),
            ff2: Linear::zeros_like(&other.ff2),
            ln2: LayerNorm::zeros_like(&other.ln2),
        }
    }

    fn param_count(&self) -> usize {
        self.wq.param_count()
            + self.wk.param_count()
            + self.wv.param_count()
            + self.wo.param_count()
            + self.ln1.param_count()
            + self.ff1.param_count()
            + self.ff2.param_count()
            + self.ln2.param_count()
    }

    fn append_flat(&self, out: &mut Vec<f64>) {
        self.wq.append_flat(out);
        self.wk.append_flat(out);
        self.wv.append_flat(out);
        self.wo.append_flat(out);
        self.ln1.append_flat(out);
        self.ff1.append_flat(out);
        self.ff2.append_flat(out);
        self.ln2.append_flat(out);
    }

    fn read_flat<'a>(&mut self, src: &mut impl Iterator<Item = &'a f64>) {
        self.wq.read_flat(src);
        self.wk.read_flat(src);
        self.wv.read_flat(src);
        self.wo.read_flat(src);
        self.ln1.read_flat(src);
        self.ff1.read_flat(src);
        self.ff2.read_flat(src);
        self.ln2.read_flat(src);
    }
}

struct LayerTrace {
    x_in: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    attn: Vec<Array2<f64>>,
    u: Array2<f64>,
    ln1: LayerNormTrace,
    x1: Array2<f64>,
    z1: Array2<f64>,
    g: Array2<f64>,
    ln2: LayerNormTrace,
}

/// Gradients mirror the parameter layout.
pub struct MinaGrads {
    layers: Vec<EncoderLayer>,
    cls1: Linear,
    cls2: Linear,
}

impl MinaGrads {
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in &self.layers {
            layer.append_flat(&mut out);
        }
        self.cls1.append_flat(&mut out);
        self.cls2.append_flat(&mut out);
        out
    }

    fn scale(&mut self, factor: f64) {
        for layer in &mut self.layers {
            for lin in [&mut layer.wq, &mut layer.wk, &mut layer.wv, &mut layer.wo, &mut layer.ff1, &mut layer.ff2] {
                lin.w *= factor;
                lin.b *= factor;
            }
            for ln in [&mut layer.ln1, &mut layer.ln2] {
                ln.gamma *= factor;
                ln.beta *= factor;
            }
        }
        for lin in [&mut self.cls1, &mut self.cls2] {
            lin.w *= factor;
            lin.b *= factor;
        }
    }
}

/// MINA model parameters: d encoder layers with h heads over the backend
/// dimension (no input projection, no positional encoding), plus the
/// two-layer classifier over the concatenated (target, mined) representation.
#[derive(Debug, Clone)]
pub struct MinaModel {
    pub config: MinaConfig,
    pub dim: usize,
    layers: Vec<EncoderLayer>,
    cls1: Linear,
    cls2: Linear,
}

impl MinaModel {
    pub fn new(config: MinaConfig, dim: usize) -> Result<Self, ModelError> {
        config.validate(dim)?;
        let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(config.seed, &[stream::INIT]));
        let layers = (0..config.d).map(|_| EncoderLayer::new(dim, &mut rng)).collect();
        let cls1 = Linear::xavier(2 * dim, config.mlp_hidden, &mut rng);
        let cls2 = Linear::xavier(config.mlp_hidden, 2, &mut rng);
        Ok(Self {
            config,
            dim,
            layers,
            cls1,
            cls2,
        })
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.param_count()).sum::<usize>()
            + self.cls1.param_count()
            + self.cls2.param_count()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            layer.append_flat(&mut out);
        }
        self.cls1.append_flat(&mut out);
        self.cls2.append_flat(&mut out);
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<(), ModelError> {
        if flat.len() != self.param_count() {
            return Err(ModelError::Checkpoint(format!(
                "parameter vector has {} entries, model needs {}",
                flat.len(),
                self.param_count()
            )));
        }
        let mut it = flat.iter();
        for layer in &mut self.layers {
            layer.read_flat(&mut it);
        }
        self.cls1.read_flat(&mut it);
        self.cls2.read_flat(&mut it);
        Ok(())
    }

    fn zero_grads(&self) -> MinaGrads {
        MinaGrads {
            layers: self.layers.iter().map(EncoderLayer::zeros_like).collect(),
            cls1: Linear::zeros_like(&self.cls1),
            cls2: Linear::zeros_like(&self.cls2),
        }
    }

    fn forward_layers(&self, x0: &Array2<f64>) -> (Vec<LayerTrace>, Array2<f64>) {
        let n = x0.nrows();
        let h = self.config.h;
        let dh = self.dim / h;
        let scale = 1.0 / (dh as f64).sqrt();

        let mut traces = Vec::with_capacity(self.layers.len());
        let mut x = x0.clone();
        for layer in &self.layers {
            let q = layer.wq.forward(&x);
            let k = layer.wk.forward(&x);
            let v = layer.wv.forward(&x);
            let mut attn = Vec::with_capacity(h);
            let mut u = Array2::<f64>::zeros((n, self.dim));
            for head in 0..h {
                let cols = s![.., head * dh..(head + 1) * dh];
                let qh = q.slice(cols);
                let kh = k.slice(cols);
                let vh = v.slice(cols);
                let mut scores = qh.dot(&kh.t());
                scores *= scale;
                softmax_rows(&mut scores);
                let uh = scores.dot(&vh);
                u.slice_mut(cols).assign(&uh);
                attn.push(scores);
            }
            let o = layer.wo.forward(&u);
            let r1 = &x + &o;
            let (x1, ln1) = layer.ln1.forward(&r1);
            let z1 = layer.ff1.forward(&x1);
            let g = z1.mapv(gelu);
            let z2 = layer.ff2.forward(&g);
            let r2 = &x1 + &z2;
            let (x2, ln2) = layer.ln2.forward(&r2);
            traces.push(LayerTrace {
                x_in: x,
                q,
                k,
                v,
                attn,
                u,
                ln1,
                x1,
                z1,
                g,
                ln2,
            });
            x = x2;
        }
        (traces, x)
    }

    fn backward_layers(&self, traces: &[LayerTrace], d_out: Array2<f64>, grads: &mut MinaGrads) {
        let h = self.config.h;
        let dh = self.dim / h;
        let scale = 1.0 / (dh as f64).sqrt();

        let mut dx = d_out;
        for (layer, (trace, grad)) in self
            .layers
            .iter()
            .zip(traces.iter().zip(grads.layers.iter_mut()))
            .rev()
        {
            let dr2 = layer.ln2.backward(&trace.ln2, &dx, &mut grad.ln2);
            // Residual: dX1 gets both the skip path and the FFN path.
            let mut dx1 = dr2.clone();
            let dg = layer.ff2.backward(&trace.g, &dr2, &mut grad.ff2);
            let dz1 = &dg * &trace.z1.mapv(gelu_prime);
            dx1 += &layer.ff1.backward(&trace.x1, &dz1, &mut grad.ff1);
            let dr1 = layer.ln1.backward(&trace.ln1, &dx1, &mut grad.ln1);
            let mut dxin = dr1.clone();
            let du = layer.wo.backward(&trace.u, &dr1, &mut grad.wo);

            let n = trace.x_in.nrows();
            let mut dq = Array2::<f64>::zeros((n, self.dim));
            let mut dk = Array2::<f64>::zeros((n, self.dim));
            let mut dv = Array2::<f64>::zeros((n, self.dim));
            for head in 0..h {
                let cols = s![.., head * dh..(head + 1) * dh];
                let a = &trace.attn[head];
                let duh = du.slice(cols);
                let vh = trace.v.slice(cols);
                let qh = trace.q.slice(cols);
                let kh = trace.k.slice(cols);

                let da = duh.dot(&vh.t());
                dv.slice_mut(cols).assign(&a.t().dot(&duh));
                // Row-wise softmax backward.
                let mut ds = Array2::<f64>::zeros((n, n));
                for r in 0..n {
                    let arow = a.row(r);
                    let darow = da.row(r);
                    let inner = arow.dot(&darow);
                    for c in 0..n {
                        ds[[r, c]] = arow[c] * (darow[c] - inner);
                    }
                }
                ds *= scale;
                dq.slice_mut(cols).assign(&ds.dot(&kh));
                dk.slice_mut(cols).assign(&ds.t().dot(&qh));
            }
            dxin += &layer.wq.backward(&trace.x_in, &dq, &mut grad.wq);
            dxin += &layer.wk.backward(&trace.x_in, &dk, &mut grad.wk);
            dxin += &layer.wv.backward(&trace.x_in, &dv, &mut grad.wv);
            dx = dxin;
        }
    }

    /// Encodes a context tuple (row 0 = target) and returns the final hidden
    /// states together with the final layer's attention map.
    pub fn encode_tuple(&self, x: &Array2<f64>) -> Result<(Array2<f64>, AttentionMap), ModelError> {
        if x.ncols() != self.dim {
            return Err(ModelError::DimMismatch {
                expected: self.dim,
                got: x.ncols(),
            });
        }
        let (traces, encoded) = self.forward_layers(x);
        let last = traces.last().expect("model has at least one layer");
        let n = x.nrows();
        let mut weights = Array3::<f64>::zeros((self.config.h, n, n));
        for (head, a) in last.attn.iter().enumerate() {
            weights.slice_mut(s![head, .., ..]).assign(a);
        }
        Ok((encoded, AttentionMap { weights }))
    }

    fn classifier_forward(&self, z: &Array2<f64>) -> (Array2<f64>, Array2<f64>, Array1<f64>) {
        let h1pre = self.cls1.forward(z);
        let h1 = h1pre.mapv(gelu);
        let logits = self.cls2.forward(&h1);
        let probs = softmax(logits.row(0));
        (h1pre, h1, probs)
    }

    /// Probability pair `(p_NW, p_W)` for a (target, mined) representation
    /// pair; concatenation order is (target, mined).
    pub fn classify(
        &self,
        target: ArrayView1<f64>,
        mined: ArrayView1<f64>,
    ) -> Result<(f64, f64), ModelError> {
        if target.len() != self.dim || mined.len() != self.dim {
            return Err(ModelError::DimMismatch {
                expected: self.dim,
                got: target.len().max(mined.len()),
            });
        }
        let mut z = Array2::<f64>::zeros((1, 2 * self.dim));
        z.slice_mut(s![0, ..self.dim]).assign(&target);
        z.slice_mut(s![0, self.dim..]).assign(&mined);
        let (_, _, probs) = self.classifier_forward(&z);
        Ok((probs[0], probs[1]))
    }

    /// Full forward pass for one tuple matrix: encode, mine, classify.
    /// Returns (loss, p_w, mined context index).
    pub fn tuple_loss(
        &self,
        x: &Array2<f64>,
        label: u8,
        miner: Miner,
        mine_seed: u64,
    ) -> Result<(f64, f64, usize), ModelError> {
        let (encoded, attention) = self.encode_tuple(x)?;
        let ctx_idx = select_context(miner, &attention, x, mine_seed)?;
        let j = 1 + ctx_idx;
        let mut z = Array2::<f64>::zeros((1, 2 * self.dim));
        z.slice_mut(s![0, ..self.dim]).assign(&encoded.row(0));
        z.slice_mut(s![0, self.dim..]).assign(&encoded.row(j));
        let (_, _, probs) = self.classifier_forward(&z);
        let p = probs[label as usize].max(1e-300);
        Ok((-p.ln(), probs[1], ctx_idx))
    }

    /// Forward + backward for one tuple, accumulating into `grads`.
    fn tuple_loss_and_grads(
        &self,
        x: &Array2<f64>,
        label: u8,
        miner: Miner,
        mine_seed: u64,
        grads: &mut MinaGrads,
    ) -> Result<f64, ModelError> {
        let (traces, encoded) = self.forward_layers(x);
        let last = traces.last().expect("model has at least one layer");
        let n = x.nrows();
        let mut weights = Array3::<f64>::zeros((self.config.h, n, n));
        for (head, a) in last.attn.iter().enumerate() {
            weights.slice_mut(s![head, .., ..]).assign(a);
        }
        let attention = AttentionMap { weights };
        let ctx_idx = select_context(miner, &attention, x, mine_seed)?;
        let j = 1 + ctx_idx;

        let mut z = Array2::<f64>::zeros((1, 2 * self.dim));
        z.slice_mut(s![0, ..self.dim]).assign(&encoded.row(0));
        z.slice_mut(s![0, self.dim..]).assign(&encoded.row(j));
        let (h1pre, h1, probs) = self.classifier_forward(&z);
        let p = probs[label as usize].max(1e-300);
        let loss = -p.ln();

        // d loss / d logits = probs - onehot(label).
        let mut dlogits = Array2::<f64>::zeros((1, 2));
        dlogits[[0, 0]] = probs[0];
        dlogits[[0, 1]] = probs[1];
        dlogits[[0, label as usize]] -= 1.0;

        let dh1 = self.cls2.backward(&h1, &dlogits, &mut grads.cls2);
        let dh1pre = &dh1 * &h1pre.mapv(gelu_prime);
        let dz = self.cls1.backward(&z, &dh1pre, &mut grads.cls1);

        let mut d_enc = Array2::<f64>::zeros(encoded.raw_dim());
        {
            let dz_row = dz.row(0);
            let mut row0 = d_enc.row_mut(0);
            row0 += &dz_row.slice(s![..self.dim]);
            let mut rowj = d_enc.row_mut(j);
            rowj += &dz_row.slice(s![self.dim..]);
        }
        self.backward_layers(&traces, d_enc, grads);
        Ok(loss)
    }

    /// Mean loss and mean gradients over a batch of (tuple matrix, label,
    /// mine seed) items. Exposed for the finite-difference gradient check.
    pub fn batch_loss_and_grads(
        &self,
        items: &[(Array2<f64>, u8, u64)],
        miner: Miner,
    ) -> Result<(f64, MinaGrads), ModelError> {
        let mut grads = self.zero_grads();
        let mut total = 0.0;
        for (x, label, mine_seed) in items {
            total += self.tuple_loss_and_grads(x, *label, miner, *mine_seed, &mut grads)?;
        }
        let inv = 1.0 / items.len().max(1) as f64;
        grads.scale(inv);
        Ok((total * inv, grads))
    }

    /// Mean loss over a batch, forward only.
    pub fn batch_loss(
        &self,
        items: &[(Array2<f64>, u8, u64)],
        miner: Miner,
    ) -> Result<f64, ModelError> {
        let mut total = 0.0;
        for (x, label, mine_seed) in items {
            total += self.tuple_loss(x, *label, miner, *mine_seed)?.0;
        }
        Ok(total / items.len().max(1) as f64)
    }
}

/// Mining strategies pluggable into the otherwise identical pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Miner {
    /// Head-averaged final-layer attention, the MINA rule.
    Attention,
    /// Most dissimilar raw embedding by cosine.
    Cosine,
    /// Uniform choice.
    Random,
}

impl std::fmt::Display for Miner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Miner::Attention => write!(f, "mina"),
            Miner::Cosine => write!(f, "cosine"),
            Miner::Random => write!(f, "random"),
        }
    }
}

fn select_context(
    miner: Miner,
    attention: &AttentionMap,
    x: &Array2<f64>,
    mine_seed: u64,
) -> Result<usize, ModelError> {
    let n_ctx = attention.positions() - 1;
    match miner {
        Miner::Attention => Ok(mined_context_index(attention)),
        Miner::Cosine => {
            let contexts = x.slice(s![1.., ..]);
            cosine_mine(x.row(0), contexts).map_err(|e| ModelError::BadConfig(e.to_string()))
        }
        Miner::Random => Ok(random_mine(n_ctx, mine_seed)),
    }
}

/// Argmax over the target's head-averaged attention row, self-position
/// excluded, ties to the lowest index. Returns an index into the context
/// elements (0-based, tuple position minus one).
pub fn mined_context_index(attention: &AttentionMap) -> usize {
    let row = attention.target_row_head_mean();
    let mut best = 1;
    for pos in 2..row.len() {
        if row[pos] > row[best] {
            best = pos;
        }
    }
    best - 1
}

/// [`mined_context_index`] with tuple-consistency checks; this is the mining
/// rule applied to a sampled tuple.
pub fn mine_negative(attention: &AttentionMap, tuple: &ContextTuple) -> Result<usize, ModelError> {
    if attention.positions() != tuple.arity() {
        return Err(ModelError::AttentionArity {
            positions: attention.positions(),
            arity: tuple.arity(),
        });
    }
    Ok(mined_context_index(attention))
}

/// Per-epoch train/validation loss curves.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LossHistory {
    pub train: Vec<f64>,
    pub val: Vec<f64>,
}

impl LossHistory {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss\n");
        for (i, (t, v)) in self.train.iter().zip(self.val.iter()).enumerate() {
            out.push_str(&format!("{},{},{}\n", i + 1, t, v));
        }
        out
    }
}

fn tuple_matrix(
    tuple: &ContextTuple,
    store: &EmbeddingStore,
    dim: usize,
) -> Result<Array2<f64>, ModelError> {
    let mut x = Array2::<f64>::zeros((tuple.arity(), dim));
    x.row_mut(0).assign(store.get(&tuple.target.id)?);
    for (i, ctx) in tuple.context().enumerate() {
        x.row_mut(i + 1).assign(store.get(&ctx.id)?);
    }
    Ok(x)
}

/// End-to-end training of encoder + classifier by cross-entropy with the
/// attention miner; tuple sampling is reseeded per epoch from
/// `(config.seed, epoch)`.
pub fn train(
    config: &MinaConfig,
    dataset: &LabeledDataset,
    pools: &BTreeMap<String, ContextPool>,
    store: &EmbeddingStore,
) -> Result<(MinaModel, LossHistory), ModelError> {
    train_with_miner(config, dataset, pools, store, Miner::Attention, config.seed)
}

/// [`train`] with the miner swapped and the tuple-sampling seed decoupled
/// from the init/shuffle seed (the ablation protocol varies only the former).
pub fn train_with_miner(
    config: &MinaConfig,
    dataset: &LabeledDataset,
    pools: &BTreeMap<String, ContextPool>,
    store: &EmbeddingStore,
    miner: Miner,
    sampling_seed: u64,
) -> Result<(MinaModel, LossHistory), ModelError> {
    config.validate(store.dim())?;
    let mut train_items: Vec<&Comment> = dataset.iter_split(Split::Train).collect();
    if train_items.is_empty() {
        return Err(ModelError::EmptyTrainSplit);
    }
    train_items.sort_by(|a, b| a.id.cmp(&b.id));
    let mut val_items: Vec<&Comment> = dataset.iter_split(Split::Val).collect();
    val_items.sort_by(|a, b| a.id.cmp(&b.id));

    let mut model = MinaModel::new(config.clone(), store.dim())?;
    let mut adam = Adam::new(config.learning_rate, model.param_count());

    let mut history = LossHistory {
        train: Vec::with_capacity(config.epochs),
        val: Vec::with_capacity(config.epochs),
    };

    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..train_items.len()).collect();
        let mut shuffle_rng = ChaCha12Rng::seed_from_u64(derive_seed(
            config.seed,
            &[stream::SHUFFLE, epoch as u64],
        ));
        use rand::seq::SliceRandom;
        order.shuffle(&mut shuffle_rng);

        let tuple_seed = derive_seed(sampling_seed, &[stream::TUPLE, epoch as u64]);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut items = Vec::with_capacity(batch.len());
            for &idx in batch {
                let target = train_items[idx];
                let pool = pools
                    .get(&target.topic)
                    .ok_or_else(|| SamplerError::MissingTopic(target.topic.clone()))?;
                let tuple = sample_tuple(target, pool, config.c, tuple_seed)?;
                let x = tuple_matrix(&tuple, store, store.dim())?;
                let mine_seed = derive_seed(
                    sampling_seed,
                    &[stream::MINE_RANDOM, epoch as u64, stable_hash64(&target.id)],
                );
                items.push((x, target.gold(), mine_seed));
            }
            let (batch_mean_loss, grads) = model.batch_loss_and_grads(&items, miner)?;
            epoch_loss += batch_mean_loss * items.len() as f64;
            let mut flat = model.flatten();
            adam.step(&mut flat, &grads.flatten());
            model.set_flat(&flat)?;
        }
        history.train.push(epoch_loss / train_items.len() as f64);

        let val_loss = if val_items.is_empty() {
            f64::NAN
        } else {
            let val_seed = derive_seed(sampling_seed, &[stream::VAL_TUPLE, epoch as u64]);
            let mut total = 0.0;
            for target in &val_items {
                let pool = pools
                    .get(&target.topic)
                    .ok_or_else(|| SamplerError::MissingTopic(target.topic.clone()))?;
                let tuple = sample_tuple(target, pool, config.c, val_seed)?;
                let x = tuple_matrix(&tuple, store, store.dim())?;
                let mine_seed = derive_seed(
                    sampling_seed,
                    &[stream::MINE_RANDOM, epoch as u64, stable_hash64(&target.id)],
                );
                total += model.tuple_loss(&x, target.gold(), miner, mine_seed)?.0;
            }
            total / val_items.len() as f64
        };
        history.val.push(val_loss);
    }

    Ok((model, history))
}

/// One prediction with its provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub label: u8,
    pub p_w: f64,
    pub mined_id: String,
    /// Gold class of the mined element; the selection rule is class-agnostic
    /// and this is recorded for analysis.
    pub mined_class: u8,
    pub tuple: TupleRecord,
}

/// Samples a tuple for `target`, encodes it, mines, and classifies.
/// Exact-0.5 ties resolve to NW (the majority class).
pub fn predict(
    model: &MinaModel,
    target: &Comment,
    pool: &ContextPool,
    store: &EmbeddingStore,
    seed: u64,
) -> Result<Prediction, ModelError> {
    predict_with_miner(model, target, pool, store, seed, Miner::Attention)
}

pub fn predict_with_miner(
    model: &MinaModel,
    target: &Comment,
    pool: &ContextPool,
    store: &EmbeddingStore,
    seed: u64,
    miner: Miner,
) -> Result<Prediction, ModelError> {
    let tuple = sample_tuple(target, pool, model.config.c, seed)?;
    let x = tuple_matrix(&tuple, store, model.dim)?;
    let mine_seed = derive_seed(seed, &[stream::MINE_RANDOM, stable_hash64(&target.id)]);
    let (_, p_w, ctx_idx) = model.tuple_loss(&x, target.gold(), miner, mine_seed)?;
    let mined = tuple.context_comment(ctx_idx);
    Ok(Prediction {
        id: target.id.clone(),
        label: if p_w > 0.5 { 1 } else { 0 },
        p_w,
        mined_id: mined.id.clone(),
        mined_class: mined.gold(),
        tuple: TupleRecord::from(&tuple),
    })
}

/// Runs prediction over a split (items in id order) and scores it.
pub fn evaluate_split(
    model: &MinaModel,
    dataset: &LabeledDataset,
    split: Split,
    pools: &BTreeMap<String, ContextPool>,
    store: &EmbeddingStore,
    eval_seed: u64,
    miner: Miner,
) -> Result<(MetricsReport, Vec<Prediction>), ModelError> {
    let mut items: Vec<&Comment> = dataset.iter_split(split).collect();
    items.sort_by(|a, b| a.id.cmp(&b.id));
    let mut predictions = Vec::with_capacity(items.len());
    let mut predicted = Vec::with_capacity(items.len());
    let mut golds = Vec::with_capacity(items.len());
    for target in items {
        let pool = pools
            .get(&target.topic)
            .ok_or_else(|| SamplerError::MissingTopic(target.topic.clone()))?;
        let prediction = predict_with_miner(model, target, pool, store, eval_seed, miner)?;
        predicted.push(prediction.label);
        golds.push(target.gold());
        predictions.push(prediction);
    }
    let report = score(&predicted, &golds)?;
    Ok((report, predictions))
}

/// Convenience: pools from the train split of `dataset`.
pub fn pools_for(dataset: &LabeledDataset) -> Result<BTreeMap<String, ContextPool>, ModelError> {
    Ok(build_pools(dataset)?)
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    config: MinaConfig,
    dim: usize,
    params: Vec<f64>,
}

const CHECKPOINT_FORMAT: &str = "mina-checkpoint-v1";

/// Writes a self-describing checkpoint (config + parameters + training seed).
pub fn save_checkpoint(model: &MinaModel, path: &Path) -> Result<(), ModelError> {
    let file = CheckpointFile {
        format: CHECKPOINT_FORMAT.to_string(),
        config: model.config.clone(),
        dim: model.dim,
        params: model.flatten(),
    };
    let json = serde_json::to_string(&file)
        .map_err(|e| ModelError::Checkpoint(e.to_string()))?;
    crate::util::atomic_write(path, json.as_bytes())?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<MinaModel, ModelError> {
    let raw = std::fs::read_to_string(path)?;
    let file: CheckpointFile =
        serde_json::from_str(&raw).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
    if file.format != CHECKPOINT_FORMAT {
        return Err(ModelError::Checkpoint(format!(
            "unsupported checkpoint format `{}`",
            file.format
        )));
    }
    let mut model = MinaModel::new(file.config, file.dim)?;
    model.set_flat(&file.params)?;
    Ok(model)
}
