//! Per-class and macro precision/recall/F1, confusion counts, and the
//! repeated-run ablation protocol with mean/variance reporting.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("predictions ({predictions}) and golds ({golds}) differ in length")]
    LengthMismatch { predictions: usize, golds: usize },
    #[error("cannot score zero items")]
    Empty,
    #[error("labels must be binary, got {0}")]
    BadLabel(u8),
    #[error("ablation needs at least 2 runs, got {0}")]
    TooFewRuns(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn class_metrics(tp: usize, fp: usize, fn_: usize) -> ClassMetrics {
    let precision = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    ClassMetrics {
        precision,
        recall,
        f1,
    }
}

/// Scoring report: per-class precision/recall/F1 for W and NW, macro
/// averages, and confusion counts with respect to the W class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub w: ClassMetrics,
    pub nw: ClassMetrics,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub n_items: usize,
}

/// Standard binary scoring; division-by-zero precision/recall defined as 0.
pub fn score(predictions: &[u8], golds: &[u8]) -> Result<MetricsReport, MetricsError> {
    if predictions.len() != golds.len() {
        return Err(MetricsError::LengthMismatch {
            predictions: predictions.len(),
            golds: golds.len(),
        });
    }
    if predictions.is_empty() {
        return Err(MetricsError::Empty);
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for (&p, &g) in predictions.iter().zip(golds.iter()) {
        if p > 1 {
            return Err(MetricsError::BadLabel(p));
        }
        if g > 1 {
            return Err(MetricsError::BadLabel(g));
        }
        match (p, g) {
            (1, 1) => tp += 1,
            (1, 0) => fp += 1,
            (0, 1) => fn_ += 1,
            (0, 0) => tn += 1,
            _ => unreachable!(),
        }
    }
    let w = class_metrics(tp, fp, fn_);
    // NW treats 0 as the positive class: its TP are the W-confusion TN.
    let nw = class_metrics(tn, fn_, fp);
    Ok(MetricsReport {
        w,
        nw,
        macro_precision: (w.precision + nw.precision) / 2.0,
        macro_recall: (w.recall + nw.recall) / 2.0,
        macro_f1: (w.f1 + nw.f1) / 2.0,
        tp,
        fp,
        fn_,
        tn,
        n_items: predictions.len(),
    })
}

/// One run of an ablation cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_id: String,
    pub run_index: usize,
    pub sampling_seed: u64,
    pub report: Option<MetricsReport>,
    pub error: Option<String>,
}

/// Aggregate over the runs of one config: mean and population variance of
/// the target-class (W) F1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationSummary {
    pub config_id: String,
    pub mean_f1: f64,
    pub variance: f64,
    pub n_runs: usize,
    pub n_excluded: usize,
}

/// An ablation cell: an opaque config plus the base sampling seed its runs
/// count up from.
pub struct AblationCell<C> {
    pub id: String,
    pub config: C,
    pub base_seed: u64,
}

/// Executes every cell `runs` times with sampling seeds base..base+runs-1 and
/// reports mean/variance of target-class F1 per cell. Failed runs are
/// recorded, excluded from the aggregate, and counted. Runs execute in
/// parallel; outputs are ordered deterministically.
pub fn ablation_run<C: Sync>(
    cells: &[AblationCell<C>],
    runs: usize,
    runner: impl Fn(&C, u64) -> Result<MetricsReport, String> + Sync,
) -> Result<(Vec<AblationSummary>, Vec<RunRecord>), MetricsError> {
    if runs < 2 {
        return Err(MetricsError::TooFewRuns(runs));
    }
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..runs).map(move |r| (c, r)))
        .collect();
    let records: Vec<RunRecord> = jobs
        .par_iter()
        .map(|&(cell_idx, run_index)| {
            let cell = &cells[cell_idx];
            let sampling_seed = cell.base_seed + run_index as u64;
            match runner(&cell.config, sampling_seed) {
                Ok(report) => RunRecord {
                    config_id: cell.id.clone(),
                    run_index,
                    sampling_seed,
                    report: Some(report),
                    error: None,
                },
                Err(message) => RunRecord {
                    config_id: cell.id.clone(),
                    run_index,
                    sampling_seed,
                    report: None,
                    error: Some(message),
                },
            }
        })
        .collect();

    let mut summaries = Vec::with_capacity(cells.len());
    for cell in cells {
        let f1s: Vec<f64> = records
            .iter()
            .filter(|r| r.config_id == cell.id)
            .filter_map(|r| r.report.as_ref().map(|rep| rep.w.f1))
            .collect();
        let n_excluded = runs - f1s.len();
        let (mean_f1, variance) = mean_and_population_variance(&f1s);
        summaries.push(AblationSummary {
            config_id: cell.id.clone(),
            mean_f1,
            variance,
            n_runs: f1s.len(),
            n_excluded,
        });
    }
    Ok((summaries, records))
}

/// Population variance (divide by n), the descriptive statistic reported for
/// repeated runs.
pub fn mean_and_population_variance(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, variance)
}
