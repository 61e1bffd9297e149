//! Small dense-network building blocks in f64: linear layers, layer norm,
//! GELU, softmax, Adam, and flat parameter access for checkpointing and
//! finite-difference checks.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::Rng;
use rand_chacha::ChaCha12Rng;

/// Fully connected layer, `y = x · w + b`, with `w: [fan_in × fan_out]`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Linear {
    pub fn xavier(fan_in: usize, fan_out: usize, rng: &mut ChaCha12Rng) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let mut w = Array2::<f64>::zeros((fan_in, fan_out));
        for x in w.iter_mut() {
            *x = rng.random_range(-limit..limit);
        }
        Self {
            w,
            b: Array1::zeros(fan_out),
        }
    }

    pub fn zeros_like(other: &Self) -> Self {
        Self {
            w: Array2::zeros(other.w.raw_dim()),
            b: Array1::zeros(other.b.raw_dim()),
        }
    }

    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.w) + &self.b
    }

    /// Backward pass: accumulates dW/db into `grad` and returns dX.
    pub fn backward(&self, x: &Array2<f64>, dy: &Array2<f64>, grad: &mut Linear) -> Array2<f64> {
        grad.w += &x.t().dot(dy);
        grad.b += &dy.sum_axis(Axis(0));
        dy.dot(&self.w.t())
    }

    pub fn param_count(&self) -> usize {
        self.w.len() + self.b.len()
    }

    pub fn append_flat(&self, out: &mut Vec<f64>) {
        out.extend(self.w.iter());
        out.extend(self.b.iter());
    }

    pub fn read_flat<'a>(&mut self, src: &mut impl Iterator<Item = &'a f64>) {
        for x in self.w.iter_mut() {
            *x = *src.next().expect("flat parameter stream too short");
        }
        for x in self.b.iter_mut() {
            *x = *src.next().expect("flat parameter stream too short");
        }
    }
}

/// Per-row layer normalization with learned gain and bias.
#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub eps: f64,
}

/// Forward cache for the layer-norm backward pass.
#[derive(Debug, Clone)]
pub struct LayerNormTrace {
    pub xhat: Array2<f64>,
    pub inv_std: Array1<f64>,
}

impl LayerNorm {
    pub fn new(dim: usize) -> Self {
        Self {
            gamma: Array1::ones(dim),
            beta: Array1::zeros(dim),
            eps: 1e-5,
        }
    }

    pub fn zeros_like(other: &Self) -> Self {
        Self {
            gamma: Array1::zeros(other.gamma.raw_dim()),
            beta: Array1::zeros(other.beta.raw_dim()),
            eps: other.eps,
        }
    }

    pub fn forward(&self, x: &Array2<f64>) -> (Array2<f64>, LayerNormTrace) {
        let n = x.nrows();
        let dim = x.ncols() as f64;
        let mut xhat = Array2::<f64>::zeros(x.raw_dim());
        let mut inv_std = Array1::<f64>::zeros(n);
        let mut out = Array2::<f64>::zeros(x.raw_dim());
        for i in 0..n {
            let row = x.row(i);
            let mean = row.sum() / dim;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / dim;
            let istd = 1.0 / (var + self.eps).sqrt();
            inv_std[i] = istd;
            for (j, &v) in row.iter().enumerate() {
                let h = (v - mean) * istd;
                xhat[[i, j]] = h;
                out[[i, j]] = self.gamma[j] * h + self.beta[j];
            }
        }
        (out, LayerNormTrace { xhat, inv_std })
    }

    pub fn backward(
        &self,
        trace: &LayerNormTrace,
        dy: &Array2<f64>,
        grad: &mut LayerNorm,
    ) -> Array2<f64> {
        let n = dy.nrows();
        let dim = dy.ncols() as f64;
        let mut dx = Array2::<f64>::zeros(dy.raw_dim());
        for i in 0..n {
            let mut mean_dxhat = 0.0;
            let mut mean_dxhat_xhat = 0.0;
            for j in 0..dy.ncols() {
                let d = dy[[i, j]];
                let h = trace.xhat[[i, j]];
                grad.gamma[j] += d * h;
                grad.beta[j] += d;
                let dxhat = d * self.gamma[j];
                mean_dxhat += dxhat;
                mean_dxhat_xhat += dxhat * h;
            }
            mean_dxhat /= dim;
            mean_dxhat_xhat /= dim;
            let istd = trace.inv_std[i];
            for j in 0..dy.ncols() {
                let dxhat = dy[[i, j]] * self.gamma[j];
                dx[[i, j]] = istd * (dxhat - mean_dxhat - trace.xhat[[i, j]] * mean_dxhat_xhat);
            }
        }
        dx
    }

    pub fn param_count(&self) -> usize {
        self.gamma.len() + self.beta.len()
    }

    pub fn append_flat(&self, out: &mut Vec<f64>) {
        out.extend(self.gamma.iter());
        out.extend(self.beta.iter());
    }

    pub fn read_flat<'a>(&mut self, src: &mut impl Iterator<Item = &'a f64>) {
        for x in self.gamma.iter_mut() {
            *x = *src.next().expect("flat parameter stream too short");
        }
        for x in self.beta.iter_mut() {
            *x = *src.next().expect("flat parameter stream too short");
        }
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

/// Smooth GELU (tanh form).
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

pub fn gelu_prime(x: f64) -> f64 {
    let u = GELU_C * (x + GELU_A * x * x * x);
    let t = u.tanh();
    let sech2 = 1.0 - t * t;
    0.5 * (1.0 + t) + 0.5 * x * sech2 * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

/// Numerically stable softmax over a 1-D view.
pub fn softmax(x: ArrayView1<f64>) -> Array1<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = Array1::<f64>::zeros(x.len());
    let mut total = 0.0;
    for (o, &v) in out.iter_mut().zip(x.iter()) {
        let e = (v - max).exp();
        *o = e;
        total += e;
    }
    out / total
}

/// Row-wise in-place softmax.
pub fn softmax_rows(x: &mut Array2<f64>) {
    for mut row in x.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
}

/// Adam optimizer over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(learning_rate: f64, param_count: usize) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / b1t;
            let v_hat = self.v[i] / b2t;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;

    #[test]
    fn softmax_rows_are_distributions() {
        let mut x = array![[1.0, 2.0, 3.0], [-4.0, 0.0, 4.0]];
        softmax_rows(&mut x);
        for row in x.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn layer_norm_gradient_matches_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let mut x = Array2::<f64>::zeros((3, 4));
        for v in x.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        let ln = LayerNorm::new(4);
        // Scalar objective: sum of squares of the output.
        let loss = |ln: &LayerNorm, x: &Array2<f64>| {
            let (y, _) = ln.forward(x);
            y.iter().map(|v| v * v).sum::<f64>()
        };
        let (y, trace) = ln.forward(&x);
        let dy = y.mapv(|v| 2.0 * v);
        let mut grad = LayerNorm::zeros_like(&ln);
        let dx = ln.backward(&trace, &dy, &mut grad);

        let h = 1e-6;
        for (i, j) in [(0, 0), (1, 2), (2, 3)] {
            let mut xp = x.clone();
            xp[[i, j]] += h;
            let mut xm = x.clone();
            xm[[i, j]] -= h;
            let fd = (loss(&ln, &xp) - loss(&ln, &xm)) / (2.0 * h);
            assert!(
                (fd - dx[[i, j]]).abs() / fd.abs().max(1e-8) < 1e-5,
                "dx[{i},{j}] analytic {} fd {}",
                dx[[i, j]],
                fd
            );
        }
        // gamma gradient at one coordinate.
        let h = 1e-6;
        let mut lp = ln.clone();
        lp.gamma[1] += h;
        let mut lm = ln.clone();
        lm.gamma[1] -= h;
        let fd = (loss(&lp, &x) - loss(&lm, &x)) / (2.0 * h);
        assert!((fd - grad.gamma[1]).abs() / fd.abs().max(1e-8) < 1e-5);
    }

    #[test]
    fn gelu_prime_matches_finite_differences() {
        for &x in &[-2.0, -0.5, 0.0, 0.3, 1.7] {
            let h = 1e-6;
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((fd - gelu_prime(x)).abs() < 1e-9, "x = {x}");
        }
    }

    #[test]
    fn adam_reduces_a_quadratic() {
        // Minimize (p - 3)^2.
        let mut params = vec![0.0f64];
        let mut adam = Adam::new(0.1, 1);
        for _ in 0..500 {
            let g = 2.0 * (params[0] - 3.0);
            adam.step(&mut params, &[g]);
        }
        assert!((params[0] - 3.0).abs() < 1e-3);
    }

    #[test]
    fn linear_flat_roundtrip() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let lin = Linear::xavier(4, 3, &mut rng);
        let mut flat = Vec::new();
        lin.append_flat(&mut flat);
        assert_eq!(flat.len(), lin.param_count());
        let mut other = Linear::zeros_like(&lin);
        other.read_flat(&mut flat.iter());
        assert_eq!(lin.w, other.w);
        assert_eq!(lin.b, other.b);
    }
}
