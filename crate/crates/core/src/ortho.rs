//! Empirical verification that random high-dimensional vectors are nearly
//! orthogonal: Monte Carlo inner-product tails against the closed-form
//! sub-Gaussian bound `2 exp(-d eps^2 / 4)`. This is the quantitative reason
//! cosine similarity degenerates as a mining signal in high dimension.

use ndarray::Array1;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::util::{derive_seed, stream};

/// How the vector pair of each trial is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairScheme {
    /// A normalized Gaussian unit vector against a Rademacher vector: the
    /// theorem's setup with an isotropic unit vector.
    GaussianRademacher,
    /// Both vectors Rademacher; admits exact enumeration in small dimension.
    RademacherRademacher,
}

/// One (d, epsilon) verification cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrthoResult {
    pub d: usize,
    pub epsilon: f64,
    pub n_pairs: usize,
    /// Fraction of pairs with |<x, y>| >= epsilon.
    pub empirical_tail: f64,
    /// Closed-form bound 2 exp(-d eps^2 / 4).
    pub bound: f64,
    /// Mean inner product over the sample.
    pub mean_inner: f64,
    /// Standard deviation of the inner products over the sample.
    pub inner_std: f64,
    /// Three binomial standard errors of the empirical tail.
    pub slack: f64,
    /// empirical_tail <= bound + slack.
    pub bound_satisfied: bool,
}

fn rademacher_from_rng(d: usize, rng: &mut ChaCha12Rng) -> Array1<f64> {
    let scale = 1.0 / (d as f64).sqrt();
    let mut v = Array1::<f64>::zeros(d);
    for x in v.iter_mut() {
        *x = if rng.random::<bool>() { scale } else { -scale };
    }
    v
}

fn gaussian_unit_from_rng(d: usize, rng: &mut ChaCha12Rng) -> Array1<f64> {
    let mut v = Array1::<f64>::zeros(d);
    loop {
        for x in v.iter_mut() {
            *x = StandardNormal.sample(rng);
        }
        let norm = v.dot(&v).sqrt();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}

/// Unit vector with entries ±1/sqrt(d), deterministic given the seed.
pub fn rademacher_unit_vector(d: usize, seed: u64) -> Array1<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, &[stream::ORTHO]));
    rademacher_from_rng(d, &mut rng)
}

/// Isotropic unit vector (normalized Gaussian), deterministic given the seed.
pub fn gaussian_unit_vector(d: usize, seed: u64) -> Array1<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, &[stream::ORTHO]));
    gaussian_unit_from_rng(d, &mut rng)
}

/// The tail bound `2 exp(-d eps^2 / 4)`.
pub fn bernstein_bound(d: usize, epsilon: f64) -> f64 {
    2.0 * (-(d as f64) * epsilon * epsilon / 4.0).exp()
}

/// Monte Carlo tail estimate for `n_pairs` independent vector pairs.
pub fn empirical_orthogonality_with_scheme(
    d: usize,
    epsilon: f64,
    n_pairs: usize,
    seed: u64,
    scheme: PairScheme,
) -> OrthoResult {
    assert!(d >= 1, "dimension must be >= 1");
    assert!(epsilon > 0.0, "epsilon must be positive");
    assert!(n_pairs >= 100, "need at least 100 pairs");

    let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, &[stream::ORTHO, d as u64]));
    let mut exceed = 0usize;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n_pairs {
        let a = match scheme {
            PairScheme::GaussianRademacher => gaussian_unit_from_rng(d, &mut rng),
            PairScheme::RademacherRademacher => rademacher_from_rng(d, &mut rng),
        };
        let b = rademacher_from_rng(d, &mut rng);
        let inner = a.dot(&b);
        if inner.abs() >= epsilon {
            exceed += 1;
        }
        sum += inner;
        sum_sq += inner * inner;
    }
    let n = n_pairs as f64;
    let empirical_tail = exceed as f64 / n;
    let bound = bernstein_bound(d, epsilon);
    let mean_inner = sum / n;
    let inner_var = (sum_sq / n - mean_inner * mean_inner).max(0.0);
    let slack = 3.0 * (empirical_tail * (1.0 - empirical_tail) / n).sqrt();
    OrthoResult {
        d,
        epsilon,
        n_pairs,
        empirical_tail,
        bound,
        mean_inner,
        inner_std: inner_var.sqrt(),
        slack,
        bound_satisfied: empirical_tail <= bound + slack,
    }
}

/// Default verification: a Gaussian unit vector against a Rademacher vector.
pub fn empirical_orthogonality(d: usize, epsilon: f64, n_pairs: usize, seed: u64) -> OrthoResult {
    empirical_orthogonality_with_scheme(d, epsilon, n_pairs, seed, PairScheme::GaussianRademacher)
}

/// Runs the (d, epsilon) grid and renders the CSV diagnostics table.
pub fn ortho_grid_csv(dims: &[usize], epsilons: &[f64], n_pairs: usize, seed: u64) -> String {
    let mut out = String::from("d,epsilon,empirical_tail,bound,bound_satisfied\n");
    for &d in dims {
        for &eps in epsilons {
            let r = empirical_orthogonality(d, eps, n_pairs, seed);
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.d, r.epsilon, r.empirical_tail, r.bound, r.bound_satisfied
            ));
        }
    }
    out
}
