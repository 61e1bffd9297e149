// scratch tuning harness (not committed)
use mina_core::corpus::{stratified_split, Split};
use mina_core::mina::{evaluate_split, train_with_miner, MinaConfig, Miner};
use mina_core::sampler::build_pools;
use mina_core::synth::{pragmatic_contrast_corpus, SynthParams};
use rayon::prelude::*;

fn bench(beta: f64, rep: u64) -> (f64, f64, f64) {
    let params = SynthParams {
        topics: 6, per_topic: 100, w_fraction: 0.4, dim: 48,
        axis_strength: beta, shared_axis_weight: 0.8,
        shared_offset: 1.0, noise: 0.9, seed: 100 + rep,
    };
    let (ds, store) = pragmatic_contrast_corpus(&params);
    let assignment = stratified_split(&ds, (0.80, 0.05, 0.15), 10 + rep).unwrap();
    let ds = ds.with_split_assignment(assignment).unwrap();
    let pools = build_pools(&ds).unwrap();
    let config = MinaConfig {
        d: 2, h: 4, c: 1, m: "synthetic".into(), mlp_hidden: 32,
        learning_rate: 1e-3, epochs: 5, batch_size: 16, seed: 11 + rep,
    };
    let mut means = Vec::new();
    for miner in [Miner::Attention, Miner::Random, Miner::Cosine] {
        let f1s: Vec<f64> = (0..20u64).into_par_iter().map(|s| {
            let base = 1000 * (rep + 1) + s;
            let (model, _) = train_with_miner(&config, &ds, &pools, &store, miner, base).unwrap();
            let (rep_, _) = evaluate_split(&model, &ds, Split::Test, &pools, &store, base, miner).unwrap();
            rep_.w.f1
        }).collect();
        means.push(f1s.iter().sum::<f64>() / f1s.len() as f64);
    }
    (means[0], means[1], means[2])
}

fn main() {
    for beta in [0.12f64, 0.15, 0.18] {
        for rep in 0..3u64 {
            let t0 = std::time::Instant::now();
            let (m, r, c) = bench(beta, rep);
            let ok = m >= r && m >= c && (r - c).abs() < 0.02;
            println!(
                "beta {beta:.2} rep {rep}: mina {m:.4} random {r:.4} cosine {c:.4} |r-c| {:.4} {} [{:?}]",
                (r - c).abs(), if ok { "PASS" } else { "FAIL" }, t0.elapsed()
            );
        }
    }
}
