//! Exact t-SNE for 2-D projection of model representations, plus the
//! silhouette diagnostic and a dependency-free SVG scatter writer. Sized for
//! the few hundred points a separability plot holds; coordinates are a pure
//! function of (data, config).

use std::path::Path;

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::util::{derive_seed, stream};

#[derive(Debug, Clone)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    /// Gradient step size; 0 selects `max(n / early_exaggeration / 4, 50)`.
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    pub exaggeration_iters: usize,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 400,
            learning_rate: 0.0,
            early_exaggeration: 4.0,
            exaggeration_iters: 100,
            seed: 0,
        }
    }
}

fn squared_distances(data: &Array2<f64>) -> Array2<f64> {
    let n = data.nrows();
    let mut d2 = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let diff = &data.row(i) - &data.row(j);
            let dist = diff.dot(&diff);
            d2[[i, j]] = dist;
            d2[[j, i]] = dist;
        }
    }
    d2
}

/// Binary search for the precision beta_i matching the target perplexity,
/// then the symmetrized joint distribution P.
fn joint_probabilities(d2: &Array2<f64>, perplexity: f64) -> Array2<f64> {
    let n = d2.nrows();
    let target_entropy = perplexity.ln();
    let mut p = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        let mut beta = 1.0;
        let mut beta_min = f64::NEG_INFINITY;
        let mut beta_max = f64::INFINITY;
        let mut row = Array1::<f64>::zeros(n);
        for _ in 0..64 {
            let mut sum = 0.0;
            for j in 0..n {
                row[j] = if j == i { 0.0 } else { (-d2[[i, j]] * beta).exp() };
                sum += row[j];
            }
            if sum <= 0.0 {
                // All neighbors infinitely far at this beta; relax it.
                beta_max = beta;
                beta = if beta_min.is_finite() {
                    (beta + beta_min) / 2.0
                } else {
                    beta / 2.0
                };
                continue;
            }
            // Shannon entropy of the conditional distribution.
            let mut entropy = 0.0;
            for j in 0..n {
                if row[j] > 0.0 {
                    let pj = row[j] / sum;
                    entropy -= pj * pj.ln();
                }
            }
            let diff = entropy - target_entropy;
            if diff.abs() < 1e-6 {
                break;
            }
            if diff > 0.0 {
                beta_min = beta;
                beta = if beta_max.is_finite() {
                    (beta + beta_max) / 2.0
                } else {
                    beta * 2.0
                };
            } else {
                beta_max = beta;
                beta = if beta_min.is_finite() {
                    (beta + beta_min) / 2.0
                } else {
                    beta / 2.0
                };
            }
        }
        let sum: f64 = (0..n).map(|j| row[j]).sum();
        if sum > 0.0 {
            for j in 0..n {
                p[[i, j]] = row[j] / sum;
            }
        }
    }
    // Symmetrize and floor.
    let n_f = n as f64;
    let mut joint = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            joint[[i, j]] = ((p[[i, j]] + p[[j, i]]) / (2.0 * n_f)).max(1e-12);
        }
    }
    for i in 0..n {
        joint[[i, i]] = 1e-12;
    }
    joint
}

/// Projects rows of `data` to 2-D. Deterministic given the config seed.
pub fn tsne_embed(data: &Array2<f64>, config: &TsneConfig) -> Array2<f64> {
    let n = data.nrows();
    if n == 0 {
        return Array2::zeros((0, 2));
    }
    if n == 1 {
        return Array2::zeros((1, 2));
    }
    // Perplexity must stay meaningful for tiny inputs.
    let perplexity = config.perplexity.min(((n - 1) as f64 / 3.0).max(2.0));
    let d2 = squared_distances(data);
    let mut p = joint_probabilities(&d2, perplexity);
    p *= config.early_exaggeration;

    let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(config.seed, &[stream::TSNE]));
    let mut y = Array2::<f64>::zeros((n, 2));
    for v in y.iter_mut() {
        let g: f64 = StandardNormal.sample(&mut rng);
        *v = g * 1e-4;
    }
    let mut velocity = Array2::<f64>::zeros((n, 2));
    let mut gains = Array2::<f64>::ones((n, 2));
    let learning_rate = if config.learning_rate > 0.0 {
        config.learning_rate
    } else {
        (n as f64 / config.early_exaggeration / 4.0).max(50.0)
    };

    for iter in 0..config.iterations {
        if iter == config.exaggeration_iters {
            p /= config.early_exaggeration;
        }
        // Student-t affinities in the embedding.
        let mut num = Array2::<f64>::zeros((n, n));
        let mut q_sum = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = y[[i, 0]] - y[[j, 0]];
                let dy = y[[i, 1]] - y[[j, 1]];
                let v = 1.0 / (1.0 + dx * dx + dy * dy);
                num[[i, j]] = v;
                num[[j, i]] = v;
                q_sum += 2.0 * v;
            }
        }
        let q_sum = q_sum.max(1e-12);

        let momentum = if iter < 250 { 0.5 } else { 0.8 };
        // All gradients from the same snapshot of y, then one joint update.
        let mut grad = Array2::<f64>::zeros((n, 2));
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let q = (num[[i, j]] / q_sum).max(1e-12);
                let mult = (p[[i, j]] - q) * num[[i, j]];
                grad[[i, 0]] += 4.0 * mult * (y[[i, 0]] - y[[j, 0]]);
                grad[[i, 1]] += 4.0 * mult * (y[[i, 1]] - y[[j, 1]]);
            }
        }
        for i in 0..n {
            for c in 0..2 {
                let same_sign = grad[[i, c]].signum() == velocity[[i, c]].signum();
                gains[[i, c]] = if same_sign {
                    (gains[[i, c]] * 0.8).max(0.01)
                } else {
                    gains[[i, c]] + 0.2
                };
                velocity[[i, c]] = momentum * velocity[[i, c]]
                    - learning_rate * gains[[i, c]] * grad[[i, c]];
                y[[i, c]] += velocity[[i, c]];
            }
        }
        // Center the embedding.
        for c in 0..2 {
            let mean = y.column(c).sum() / n as f64;
            for i in 0..n {
                y[[i, c]] -= mean;
            }
        }
    }
    y
}

/// Mean silhouette coefficient of 2-D points under binary labels.
pub fn silhouette_2class(points: &Array2<f64>, labels: &[u8]) -> f64 {
    assert_eq!(points.nrows(), labels.len());
    let n = points.nrows();
    let dist = |i: usize, j: usize| {
        let dx = points[[i, 0]] - points[[j, 0]];
        let dy = points[[i, 1]] - points[[j, 1]];
        (dx * dx + dy * dy).sqrt()
    };
    let mut total = 0.0;
    let mut counted = 0usize;
    for i in 0..n {
        let mut same_sum = 0.0;
        let mut same_n = 0usize;
        let mut other_sum = 0.0;
        let mut other_n = 0usize;
        for j in 0..n {
            if i == j {
                continue;
            }
            if labels[j] == labels[i] {
                same_sum += dist(i, j);
                same_n += 1;
            } else {
                other_sum += dist(i, j);
                other_n += 1;
            }
        }
        if same_n == 0 || other_n == 0 {
            continue;
        }
        let a = same_sum / same_n as f64;
        let b = other_sum / other_n as f64;
        total += (b - a) / a.max(b);
        counted += 1;
    }
    if counted == 0 {
        0.0
    } else {
        total / counted as f64
    }
}

/// Writes a two-series scatter plot (W in blue, NW in red) as standalone SVG.
pub fn write_scatter_svg(
    path: &Path,
    points: &Array2<f64>,
    labels: &[u8],
) -> std::io::Result<()> {
    assert_eq!(points.nrows(), labels.len());
    let (width, height, margin) = (640.0, 480.0, 40.0);
    let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut min_y, mut max_y) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..points.nrows() {
        min_x = min_x.min(points[[i, 0]]);
        max_x = max_x.max(points[[i, 0]]);
        min_y = min_y.min(points[[i, 1]]);
        max_y = max_y.max(points[[i, 1]]);
    }
    if !min_x.is_finite() {
        min_x = 0.0;
        max_x = 1.0;
        min_y = 0.0;
        max_y = 1.0;
    }
    let span_x = (max_x - min_x).max(1e-9);
    let span_y = (max_y - min_y).max(1e-9);
    let sx = |x: f64| margin + (x - min_x) / span_x * (width - 2.0 * margin);
    let sy = |y: f64| height - margin - (y - min_y) / span_y * (height - 2.0 * margin);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    for (i, &label) in labels.iter().enumerate() {
        let color = if label == 1 { "#1f77b4" } else { "#d62728" };
        svg.push_str(&format!(
            "<circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"3\" fill=\"{}\" fill-opacity=\"0.75\"/>\n",
            sx(points[[i, 0]]),
            sy(points[[i, 1]]),
            color
        ));
    }
    svg.push_str("</svg>\n");
    crate::util::atomic_write(path, svg.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn two_gaussians(n_per_class: usize, dim: usize, separation: f64, seed: u64) -> (Array2<f64>, Vec<u8>) {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let n = 2 * n_per_class;
        let mut data = Array2::<f64>::zeros((n, dim));
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let class = (i % 2) as u8;
            labels.push(class);
            for j in 0..dim {
                let g: f64 = StandardNormal.sample(&mut rng);
                data[[i, j]] = g * 0.5;
            }
            data[[i, 0]] += if class == 1 { separation } else { -separation };
        }
        (data, labels)
    }

    #[test]
    fn tsne_is_deterministic() {
        let (data, _) = two_gaussians(20, 8, 2.0, 3);
        let config = TsneConfig {
            iterations: 120,
            ..Default::default()
        };
        let a = tsne_embed(&data, &config);
        let b = tsne_embed(&data, &config);
        assert_eq!(a, b);
    }

    #[test]
    fn tsne_separates_well_separated_gaussians() {
        let (data, labels) = two_gaussians(40, 10, 4.0, 5);
        let config = TsneConfig::default();
        let y = tsne_embed(&data, &config);
        let s = silhouette_2class(&y, &labels);
        assert!(s > 0.5, "silhouette = {s}");
    }

    #[test]
    fn silhouette_of_perfectly_split_points() {
        // Two tight clusters far apart → silhouette close to 1.
        let mut points = Array2::<f64>::zeros((8, 2));
        let mut labels = Vec::new();
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        for i in 0..8 {
            let class = (i % 2) as u8;
            labels.push(class);
            points[[i, 0]] = if class == 1 { 100.0 } else { -100.0 } + rng.random_range(-1.0..1.0);
            points[[i, 1]] = rng.random_range(-1.0..1.0);
        }
        assert!(silhouette_2class(&points, &labels) > 0.9);
    }

    #[test]
    fn svg_is_written_and_nonzero() {
        let (data, labels) = two_gaussians(10, 4, 2.0, 9);
        let config = TsneConfig {
            iterations: 60,
            ..Default::default()
        };
        let y = tsne_embed(&data, &config);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plot.svg");
        write_scatter_svg(&path, &y, &labels).unwrap();
        let contents = std::fs::read_to_string(&path).unwrap();
        assert!(contents.len() > 100);
        assert!(contents.contains("<svg"));
        assert!(contents.contains("circle"));
    }
}
