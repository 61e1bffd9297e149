//! Labeled comment corpora: loading, label aggregation, inter-annotator
//! agreement, and stratified splitting.
//!
//! The corpus format is JSONL (one comment object per line, UTF-8, unknown
//! fields ignored). Two platform shapes exist: standalone comments (video
//! comments keyed by their video) and statement–response pairs (replies keyed
//! by the statement they answer, which must be present as `context_text`).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::util::{derive_seed, stable_hash64, stream};

/// Corpus shape: standalone comments vs. statement–response pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Platform {
    Standalone,
    StatementResponse,
}

impl std::fmt::Display for Platform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Platform::Standalone => write!(f, "standalone"),
            Platform::StatementResponse => write!(f, "statement_response"),
        }
    }
}

/// Dataset partition a comment is assigned to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

pub const ALL_SPLITS: [Split; 3] = [Split::Train, Split::Val, Split::Test];

/// Whataboutism class label: 1 = W (target class), 0 = NW.
pub const LABEL_W: u8 = 1;
pub const LABEL_NW: u8 = 0;

/// One labeled text instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comment {
    pub id: String,
    pub topic: String,
    /// Video or thread identifier.
    pub context_id: String,
    /// Video title or original tweet; may be empty for standalone comments.
    #[serde(default)]
    pub context_text: String,
    pub text: String,
    /// Exactly 3 binary labels, one per annotator.
    pub annotator_labels: Vec<u8>,
    /// Majority label; revalidated against `annotator_labels` on load.
    #[serde(default)]
    pub gold_label: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upvotes: Option<u64>,
    pub platform: Platform,
}

impl Comment {
    /// Majority label, panicking if the comment was never validated.
    pub fn gold(&self) -> u8 {
        self.gold_label.expect("gold_label set during validation")
    }

    pub fn is_w(&self) -> bool {
        self.gold() == LABEL_W
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: malformed record: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("line {line}: duplicate id `{id}`")]
    DuplicateId { line: usize, id: String },
    #[error("record `{id}`: expected exactly 3 annotator labels in {{0,1}}, got {got:?}")]
    BadAnnotatorLabels { id: String, got: Vec<u8> },
    #[error("record `{id}`: gold_label {gold} contradicts annotator majority {majority}")]
    GoldMismatch { id: String, gold: u8, majority: u8 },
    #[error("record `{id}`: statement_response comments need a non-empty context_text")]
    MissingContext { id: String },
    #[error("record `{id}`: platform {got} does not match requested {want}")]
    PlatformMismatch { id: String, got: Platform, want: Platform },
    #[error("aggregate_labels expects exactly 3 binary labels, got {0} entries")]
    BadArity(usize),
    #[error("annotation matrix is empty")]
    EmptyMatrix,
    #[error("annotation matrix row {row} sums to {got}, expected {want}")]
    UnequalRowSums { row: usize, got: usize, want: usize },
    #[error("fleiss_kappa needs at least 2 raters per item, got {0}")]
    TooFewRaters(usize),
    #[error("split ratios ({0}, {1}, {2}) must be nonnegative and sum to 1")]
    BadRatios(f64, f64, f64),
    #[error("split assignment references unknown id `{0}`")]
    UnknownId(String),
    #[error("dataset has no split assignment")]
    NoSplitAssignment,
}

/// A validated, immutable corpus.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    comments: Vec<Comment>,
    topics: BTreeSet<String>,
    split_assignment: Option<BTreeMap<String, Split>>,
    by_id: HashMap<String, usize>,
}

impl LabeledDataset {
    /// Validates and indexes a list of comments: ids unique, annotator labels
    /// well-formed, gold labels recomputed by majority vote (and checked
    /// against any stored value), context present where the platform needs it.
    pub fn new(comments: Vec<Comment>) -> Result<Self, CorpusError> {
        let mut by_id = HashMap::with_capacity(comments.len());
        let mut topics = BTreeSet::new();
        let mut validated = Vec::with_capacity(comments.len());
        for (i, mut comment) in comments.into_iter().enumerate() {
            let majority = aggregate_labels(&comment.annotator_labels).map_err(|_| {
                CorpusError::BadAnnotatorLabels {
                    id: comment.id.clone(),
                    got: comment.annotator_labels.clone(),
                }
            })?;
            if let Some(gold) = comment.gold_label {
                if gold != majority {
                    return Err(CorpusError::GoldMismatch {
                        id: comment.id.clone(),
                        gold,
                        majority,
                    });
                }
            }
            comment.gold_label = Some(majority);
            if comment.platform == Platform::StatementResponse && comment.context_text.is_empty() {
                return Err(CorpusError::MissingContext {
                    id: comment.id.clone(),
                });
            }
            if by_id.insert(comment.id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateId {
                    line: i + 1,
                    id: comment.id.clone(),
                });
            }
            topics.insert(comment.topic.clone());
            validated.push(comment);
        }
        Ok(Self {
            comments: validated,
            topics,
            split_assignment: None,
            by_id,
        })
    }

    pub fn comments(&self) -> &[Comment] {
        &self.comments
    }

    pub fn topics(&self) -> &BTreeSet<String> {
        &self.topics
    }

    pub fn len(&self) -> usize {
        self.comments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.comments.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Comment> {
        self.by_id.get(id).map(|&i| &self.comments[i])
    }

    pub fn split_assignment(&self) -> Option<&BTreeMap<String, Split>> {
        self.split_assignment.as_ref()
    }

    pub fn split_of(&self, id: &str) -> Option<Split> {
        self.split_assignment.as_ref()?.get(id).copied()
    }

    /// Attaches a split assignment; every id must exist in the dataset.
    pub fn with_split_assignment(
        mut self,
        assignment: BTreeMap<String, Split>,
    ) -> Result<Self, CorpusError> {
        for id in assignment.keys() {
            if !self.by_id.contains_key(id) {
                return Err(CorpusError::UnknownId(id.clone()));
            }
        }
        self.split_assignment = Some(assignment);
        Ok(self)
    }

    /// Comments in a split, in corpus order.
    pub fn iter_split(&self, split: Split) -> impl Iterator<Item = &Comment> {
        self.comments
            .iter()
            .filter(move |c| self.split_of(&c.id) == Some(split))
    }

    /// Number of comments with gold label W.
    pub fn n_positive(&self) -> usize {
        self.comments.iter().filter(|c| c.is_w()).count()
    }
}

/// Majority vote over exactly 3 binary labels.
pub fn aggregate_labels(labels: &[u8]) -> Result<u8, CorpusError> {
    if labels.len() != 3 || labels.iter().any(|&l| l > 1) {
        return Err(CorpusError::BadArity(labels.len()));
    }
    let ones: u8 = labels.iter().sum();
    Ok(if ones >= 2 { 1 } else { 0 })
}

/// Fleiss' kappa over an item × category count matrix.
///
/// Every row must sum to the same rater count n >= 2. Returns exactly 1.0
/// when all rows are unanimous.
pub fn fleiss_kappa(counts: &[Vec<usize>]) -> Result<f64, CorpusError> {
    if counts.is_empty() || counts[0].is_empty() {
        return Err(CorpusError::EmptyMatrix);
    }
    let n_categories = counts[0].len();
    let n_raters: usize = counts[0].iter().sum();
    if n_raters < 2 {
        return Err(CorpusError::TooFewRaters(n_raters));
    }
    for (row, item) in counts.iter().enumerate() {
        let total: usize = item.iter().sum();
        if item.len() != n_categories || total != n_raters {
            return Err(CorpusError::UnequalRowSums {
                row,
                got: total,
                want: n_raters,
            });
        }
    }

    let n_items = counts.len() as f64;
    let n = n_raters as f64;

    // Per-item agreement P_i and category proportions p_j.
    let mut p_bar = 0.0;
    let mut category_totals = vec![0.0; n_categories];
    for item in counts {
        let sum_sq: f64 = item.iter().map(|&c| (c * c) as f64).sum();
        p_bar += (sum_sq - n) / (n * (n - 1.0));
        for (j, &c) in item.iter().enumerate() {
            category_totals[j] += c as f64;
        }
    }
    p_bar /= n_items;
    let p_e: f64 = category_totals
        .iter()
        .map(|&t| {
            let p = t / (n_items * n);
            p * p
        })
        .sum();

    // P_e = 1 forces every rating into one category, i.e. unanimity.
    if (1.0 - p_e).abs() < 1e-12 {
        return Ok(1.0);
    }
    Ok((p_bar - p_e) / (1.0 - p_e))
}

/// Builds item × 2 count rows from per-comment annotator labels, suitable for
/// [`fleiss_kappa`]. Column 0 counts NW votes, column 1 W votes.
pub fn annotation_counts(dataset: &LabeledDataset) -> Vec<Vec<usize>> {
    dataset
        .comments()
        .iter()
        .map(|c| {
            let ones = c.annotator_labels.iter().filter(|&&l| l == 1).count();
            vec![c.annotator_labels.len() - ones, ones]
        })
        .collect()
}

/// Stratified train/val/test split, jointly by (topic, class).
///
/// Within each (topic, class) cell, ideal fractional counts get floor
/// assignments and remainders go to the splits with the largest fractional
/// parts (ties broken toward train, then val). A topic's strict-minority
/// class with fewer than 3 members goes entirely to train. Deterministic
/// given the seed and independent of input record order.
pub fn stratified_split(
    dataset: &LabeledDataset,
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<BTreeMap<String, Split>, CorpusError> {
    let (r_train, r_val, r_test) = ratios;
    if r_train < 0.0 || r_val < 0.0 || r_test < 0.0 || (r_train + r_val + r_test - 1.0).abs() > 1e-9
    {
        return Err(CorpusError::BadRatios(r_train, r_val, r_test));
    }

    let mut assignment = BTreeMap::new();
    for topic in dataset.topics() {
        let mut by_class: [Vec<&str>; 2] = [Vec::new(), Vec::new()];
        for comment in dataset.comments().iter().filter(|c| &c.topic == topic) {
            by_class[comment.gold() as usize].push(&comment.id);
        }
        let counts = [by_class[0].len(), by_class[1].len()];
        // Strict minority class with < 3 members cannot be learned from if it
        // is absent at train time; send it to train wholesale.
        let minority_to_train = if counts[0] < counts[1] && counts[0] > 0 && counts[0] < 3 {
            Some(0)
        } else if counts[1] < counts[0] && counts[1] > 0 && counts[1] < 3 {
            Some(1)
        } else {
            None
        };

        for (class, ids) in by_class.iter_mut().enumerate() {
            if ids.is_empty() {
                continue;
            }
            ids.sort_unstable();
            if minority_to_train == Some(class) {
                log::warn!(
                    "topic `{topic}`: minority class {class} has {} member(s); all assigned to train",
                    ids.len()
                );
                for id in ids.iter() {
                    assignment.insert((*id).to_string(), Split::Train);
                }
                continue;
            }
            let cell_seed = derive_seed(seed, &[stream::SPLIT, stable_hash64(topic), class as u64]);
            let mut rng = ChaCha12Rng::seed_from_u64(cell_seed);
            ids.shuffle(&mut rng);
            let cell_counts = largest_remainder(ids.len(), [r_train, r_val, r_test]);
            let mut cursor = 0;
            for (split, &count) in ALL_SPLITS.iter().zip(cell_counts.iter()) {
                for id in &ids[cursor..cursor + count] {
                    assignment.insert((*id).to_string(), *split);
                }
                cursor += count;
            }
        }
    }
    Ok(assignment)
}

/// Floor-plus-largest-remainder apportionment of `total` items across the
/// three ratios; ties go to the earlier bucket (train before val before test).
fn largest_remainder(total: usize, ratios: [f64; 3]) -> [usize; 3] {
    let ideal: Vec<f64> = ratios.iter().map(|r| r * total as f64).collect();
    let mut counts: [usize; 3] = [0; 3];
    let mut fracs: Vec<(usize, f64)> = Vec::with_capacity(3);
    let mut assigned = 0;
    for (i, &x) in ideal.iter().enumerate() {
        let floor = x.floor() as usize;
        counts[i] = floor;
        assigned += floor;
        fracs.push((i, x - floor as f64));
    }
    // Largest fractional part first; ties resolve to the lower index.
    fracs.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut remainder = total - assigned;
    for (i, _) in fracs {
        if remainder == 0 {
            break;
        }
        counts[i] += 1;
        remainder -= 1;
    }
    counts
}

#[derive(Debug, Serialize, Deserialize)]
struct SplitRecord {
    id: String,
    split: Split,
}

/// Loads a JSONL corpus, validating every record and populating gold labels.
pub fn load_corpus(path: &Path, platform: Platform) -> Result<LabeledDataset, CorpusError> {
    let raw = fs::read_to_string(path)?;
    parse_corpus(&raw, platform)
}

/// Parses corpus JSONL from memory; see [`load_corpus`].
pub fn parse_corpus(raw: &str, platform: Platform) -> Result<LabeledDataset, CorpusError> {
    #[derive(Deserialize)]
    struct RawComment {
        id: String,
        topic: String,
        context_id: String,
        #[serde(default)]
        context_text: String,
        text: String,
        annotator_labels: Vec<u8>,
        #[serde(default)]
        gold_label: Option<u8>,
        #[serde(default)]
        upvotes: Option<u64>,
        #[serde(default)]
        platform: Option<Platform>,
    }

    let mut comments = Vec::new();
    let mut seen = HashMap::new();
    for (lineno, line) in raw.lines().enumerate() {
        let line_number = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawComment =
            serde_json::from_str(line).map_err(|e| CorpusError::Malformed {
                line: line_number,
                msg: e.to_string(),
            })?;
        if let Some(got) = raw.platform {
            if got != platform {
                return Err(CorpusError::PlatformMismatch {
                    id: raw.id,
                    got,
                    want: platform,
                });
            }
        }
        if let Some(prev) = seen.insert(raw.id.clone(), line_number) {
            let _ = prev;
            return Err(CorpusError::DuplicateId {
                line: line_number,
                id: raw.id,
            });
        }
        comments.push(Comment {
            id: raw.id,
            topic: raw.topic,
            context_id: raw.context_id,
            context_text: raw.context_text,
            text: raw.text,
            annotator_labels: raw.annotator_labels,
            gold_label: raw.gold_label,
            upvotes: raw.upvotes,
            platform,
        });
    }
    LabeledDataset::new(comments)
}

/// Serializes a dataset back to JSONL; `load_corpus` of the output is
/// identity on the defined fields.
pub fn serialize_corpus(dataset: &LabeledDataset) -> Result<String, CorpusError> {
    let mut out = String::new();
    for comment in dataset.comments() {
        let line = serde_json::to_string(comment).map_err(|e| CorpusError::Malformed {
            line: 0,
            msg: e.to_string(),
        })?;
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out)
}

pub fn save_corpus(dataset: &LabeledDataset, path: &Path) -> Result<(), CorpusError> {
    let text = serialize_corpus(dataset)?;
    crate::util::atomic_write(path, text.as_bytes())?;
    Ok(())
}

/// Writes a split assignment as JSONL of `{id, split}` records.
pub fn save_split_assignment(
    assignment: &BTreeMap<String, Split>,
    path: &Path,
) -> Result<(), CorpusError> {
    let mut out = String::new();
    for (id, split) in assignment {
        let record = SplitRecord {
            id: id.clone(),
            split: *split,
        };
        out.push_str(&serde_json::to_string(&record).map_err(|e| CorpusError::Malformed {
            line: 0,
            msg: e.to_string(),
        })?);
        out.push('\n');
    }
    crate::util::atomic_write(path, out.as_bytes())?;
    Ok(())
}

pub fn load_split_assignment(path: &Path) -> Result<BTreeMap<String, Split>, CorpusError> {
    let raw = fs::read_to_string(path)?;
    let mut out = BTreeMap::new();
    for (lineno, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: SplitRecord =
            serde_json::from_str(line).map_err(|e| CorpusError::Malformed {
                line: lineno + 1,
                msg: e.to_string(),
            })?;
        out.insert(record.id, record.split);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn comment(id: &str, topic: &str, labels: [u8; 3]) -> Comment {
        Comment {
            id: id.to_string(),
            topic: topic.to_string(),
            context_id: format!("ctx-{topic}"),
            context_text: String::new(),
            text: format!("text of {id}"),
            annotator_labels: labels.to_vec(),
            gold_label: None,
            upvotes: None,
            platform: Platform::Standalone,
        }
    }

    #[test]
    fn aggregate_majority_cases() {
        assert_eq!(aggregate_labels(&[1, 1, 0]).unwrap(), 1);
        assert_eq!(aggregate_labels(&[0, 0, 0]).unwrap(), 0);
        assert_eq!(aggregate_labels(&[1, 0, 1]).unwrap(), 1);
    }

    #[test]
    fn aggregate_rejects_bad_arity() {
        assert!(aggregate_labels(&[1, 0]).is_err());
        assert!(aggregate_labels(&[1, 0, 1, 1]).is_err());
        assert!(aggregate_labels(&[1, 0, 2]).is_err());
    }

    proptest! {
        #[test]
        fn aggregate_is_permutation_invariant(a in 0u8..2, b in 0u8..2, c in 0u8..2) {
            let base = aggregate_labels(&[a, b, c]).unwrap();
            prop_assert_eq!(aggregate_labels(&[b, c, a]).unwrap(), base);
            prop_assert_eq!(aggregate_labels(&[c, a, b]).unwrap(), base);
            prop_assert_eq!(aggregate_labels(&[b, a, c]).unwrap(), base);
        }
    }

    #[test]
    fn kappa_unanimous_is_exactly_one() {
        // Unanimity across a mix of categories.
        let counts = vec![vec![3, 0], vec![0, 3], vec![3, 0]];
        assert_eq!(fleiss_kappa(&counts).unwrap(), 1.0);
        // All rows in a single category: P_e = 1 branch.
        let counts = vec![vec![3, 0], vec![3, 0]];
        assert_eq!(fleiss_kappa(&counts).unwrap(), 1.0);
    }

    #[test]
    fn kappa_hand_computed_example() {
        // P̄ = 2/3, P̄_e = 5/9 → κ = 1/4.
        let counts = vec![vec![2, 1], vec![0, 3]];
        let kappa = fleiss_kappa(&counts).unwrap();
        assert!((kappa - 0.25).abs() < 1e-12, "kappa = {kappa}");
    }

    #[test]
    fn kappa_rejects_unequal_rows() {
        let counts = vec![vec![2, 1], vec![2, 2]];
        assert!(matches!(
            fleiss_kappa(&counts),
            Err(CorpusError::UnequalRowSums { .. })
        ));
    }

    /// Textbook-formula oracle with an independent code path: explicit
    /// column-proportion accumulation and per-item pair counting.
    fn kappa_oracle(counts: &[Vec<usize>]) -> f64 {
        let n_items = counts.len();
        let n = counts[0].iter().sum::<usize>();
        let k = counts[0].len();
        let mut p_j = vec![0.0f64; k];
        for item in counts {
            for j in 0..k {
                p_j[j] += item[j] as f64;
            }
        }
        for v in p_j.iter_mut() {
            *v /= (n_items * n) as f64;
        }
        let mut mean_pi = 0.0;
        for item in counts {
            let mut agree_pairs = 0usize;
            for &c in item {
                agree_pairs += c * c.saturating_sub(1);
            }
            mean_pi += agree_pairs as f64 / (n * (n - 1)) as f64;
        }
        mean_pi /= n_items as f64;
        let pe: f64 = p_j.iter().map(|p| p * p).sum();
        if (1.0 - pe).abs() < 1e-12 {
            1.0
        } else {
            (mean_pi - pe) / (1.0 - pe)
        }
    }

    proptest! {
        #[test]
        fn kappa_matches_oracle_on_random_matrices(
            rows in proptest::collection::vec(0usize..=3, 1..50)
        ) {
            // rows holds the count of category-1 votes among 3 raters.
            let counts: Vec<Vec<usize>> = rows.iter().map(|&ones| vec![3 - ones, ones]).collect();
            let got = fleiss_kappa(&counts).unwrap();
            let want = kappa_oracle(&counts);
            prop_assert!((got - want).abs() < 1e-9, "got {} want {}", got, want);
        }
    }

    #[test]
    fn dataset_validation_sets_gold_and_rejects_mismatch() {
        let ds = LabeledDataset::new(vec![comment("a", "t", [1, 1, 0])]).unwrap();
        assert_eq!(ds.get("a").unwrap().gold(), 1);

        let mut bad = comment("b", "t", [1, 1, 0]);
        bad.gold_label = Some(0);
        assert!(matches!(
            LabeledDataset::new(vec![bad]),
            Err(CorpusError::GoldMismatch { .. })
        ));
    }

    #[test]
    fn parse_corpus_well_formed() {
        let raw = r#"{"id":"a","topic":"t1","context_id":"v1","text":"x","annotator_labels":[1,1,0]}
{"id":"b","topic":"t1","context_id":"v1","text":"y","annotator_labels":[0,0,0],"unknown_field":42}
{"id":"c","topic":"t2","context_id":"v2","text":"z","annotator_labels":[1,0,1],"upvotes":7}
"#;
        let ds = parse_corpus(raw, Platform::Standalone).unwrap();
        assert_eq!(ds.len(), 3);
        assert!(ds.comments().iter().all(|c| c.gold_label.is_some()));
        assert_eq!(ds.n_positive(), 2);
        assert_eq!(ds.get("c").unwrap().upvotes, Some(7));
        assert_eq!(ds.topics().len(), 2);
    }

    #[test]
    fn parse_corpus_rejects_bad_annotator_count_naming_id() {
        let raw = r#"{"id":"only","topic":"t","context_id":"v","text":"x","annotator_labels":[1,0]}"#;
        let err = parse_corpus(raw, Platform::Standalone).unwrap_err();
        assert!(err.to_string().contains("only"), "error was: {err}");
    }

    #[test]
    fn parse_corpus_rejects_duplicates_and_reports_line() {
        let raw = r#"{"id":"a","topic":"t","context_id":"v","text":"x","annotator_labels":[1,0,0]}
{"id":"a","topic":"t","context_id":"v","text":"y","annotator_labels":[1,0,0]}"#;
        let err = parse_corpus(raw, Platform::Standalone).unwrap_err();
        assert!(matches!(err, CorpusError::DuplicateId { line: 2, .. }));
    }

    #[test]
    fn parse_corpus_reports_malformed_line_number() {
        let raw = "{\"id\":\"a\",\"topic\":\"t\",\"context_id\":\"v\",\"text\":\"x\",\"annotator_labels\":[1,0,0]}\nnot json";
        let err = parse_corpus(raw, Platform::Standalone).unwrap_err();
        assert!(matches!(err, CorpusError::Malformed { line: 2, .. }));
    }

    #[test]
    fn statement_response_requires_context_text() {
        let raw = r#"{"id":"a","topic":"t","context_id":"v","text":"x","annotator_labels":[1,0,0]}"#;
        assert!(matches!(
            parse_corpus(raw, Platform::StatementResponse),
            Err(CorpusError::MissingContext { .. })
        ));
    }

    #[test]
    fn serialize_then_load_is_identity() {
        let raw = r#"{"id":"a","topic":"t1","context_id":"v1","text":"x","annotator_labels":[1,1,0]}
{"id":"b","topic":"t2","context_id":"v2","text":"y","annotator_labels":[0,0,1],"upvotes":3}
"#;
        let ds = parse_corpus(raw, Platform::Standalone).unwrap();
        let text = serialize_corpus(&ds).unwrap();
        let reloaded = parse_corpus(&text, Platform::Standalone).unwrap();
        assert_eq!(ds.comments(), reloaded.comments());
    }

    fn topic_dataset(n_w: usize, n_nw: usize) -> LabeledDataset {
        let mut comments = Vec::new();
        for i in 0..n_w {
            comments.push(comment(&format!("w{i:03}"), "topic", [1, 1, 1]));
        }
        for i in 0..n_nw {
            comments.push(comment(&format!("n{i:03}"), "topic", [0, 0, 0]));
        }
        LabeledDataset::new(comments).unwrap()
    }

    #[test]
    fn split_twenty_comments_matches_rounding_policy() {
        // 4 W / 16 NW: W → (3,0,1), NW → (13,1,2); totals (16,1,3).
        let ds = topic_dataset(4, 16);
        let assignment = stratified_split(&ds, (0.80, 0.05, 0.15), 9).unwrap();
        let count = |split: Split, prefix: &str| {
            assignment
                .iter()
                .filter(|(id, s)| **s == split && id.starts_with(prefix))
                .count()
        };
        assert_eq!(count(Split::Train, "w"), 3);
        assert_eq!(count(Split::Val, "w"), 0);
        assert_eq!(count(Split::Test, "w"), 1);
        assert_eq!(count(Split::Train, "n"), 13);
        assert_eq!(count(Split::Val, "n"), 1);
        assert_eq!(count(Split::Test, "n"), 2);
    }

    #[test]
    fn split_is_deterministic_and_order_invariant() {
        let ds = topic_dataset(4, 16);
        let a = stratified_split(&ds, (0.80, 0.05, 0.15), 42).unwrap();
        let b = stratified_split(&ds, (0.80, 0.05, 0.15), 42).unwrap();
        assert_eq!(a, b);

        // Reverse the record order; assignment must be identical.
        let mut reversed: Vec<Comment> = ds.comments().to_vec();
        reversed.reverse();
        for c in reversed.iter_mut() {
            c.gold_label = None;
        }
        let ds_rev = LabeledDataset::new(reversed).unwrap();
        let c = stratified_split(&ds_rev, (0.80, 0.05, 0.15), 42).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn split_single_comment_topic_goes_to_train() {
        let ds = LabeledDataset::new(vec![comment("solo", "lonely", [0, 0, 0])]).unwrap();
        let assignment = stratified_split(&ds, (0.80, 0.05, 0.15), 1).unwrap();
        assert_eq!(assignment["solo"], Split::Train);
    }

    #[test]
    fn split_small_minority_goes_to_train() {
        let ds = topic_dataset(2, 20);
        let assignment = stratified_split(&ds, (0.80, 0.05, 0.15), 5).unwrap();
        assert_eq!(assignment["w000"], Split::Train);
        assert_eq!(assignment["w001"], Split::Train);
    }

    #[test]
    fn split_rejects_bad_ratios() {
        let ds = topic_dataset(1, 1);
        assert!(stratified_split(&ds, (0.5, 0.4, 0.2), 0).is_err());
    }

    proptest! {
        /// Per (topic, class): totals preserved and each split within 1 item
        /// of the ideal fractional count (largest-remainder guarantee);
        /// minority-to-train topics exempt by construction.
        #[test]
        fn split_stratification_bound(n_w in 3usize..40, n_nw in 3usize..40, seed in 0u64..500) {
            let ds = topic_dataset(n_w, n_nw);
            let ratios = (0.80, 0.05, 0.15);
            let assignment = stratified_split(&ds, ratios, seed).unwrap();
            prop_assert_eq!(assignment.len(), n_w + n_nw);
            for (class_prefix, class_n) in [("w", n_w), ("n", n_nw)] {
                let mut totals = 0usize;
                for (split, ratio) in ALL_SPLITS.iter().zip([ratios.0, ratios.1, ratios.2]) {
                    let got = assignment
                        .iter()
                        .filter(|(id, s)| *s == split && id.starts_with(class_prefix))
                        .count();
                    totals += got;
                    let ideal = ratio * class_n as f64;
                    prop_assert!(
                        (got as f64 - ideal).abs() < 1.0 + 1e-9,
                        "split {:?}: got {} ideal {}", split, got, ideal
                    );
                }
                prop_assert_eq!(totals, class_n);
            }
        }
    }

    #[test]
    fn split_assignment_roundtrip() {
        let ds = topic_dataset(4, 16);
        let assignment = stratified_split(&ds, (0.80, 0.05, 0.15), 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("splits.jsonl");
        save_split_assignment(&assignment, &path).unwrap();
        let loaded = load_split_assignment(&path).unwrap();
        assert_eq!(assignment, loaded);
    }

    /// Gated on the released data: set MINA_TQ_DATA to a directory holding
    /// tq_yt.jsonl to run.
    #[test]
    fn official_youtube_counts_if_available() {
        let Ok(dir) = std::env::var("MINA_TQ_DATA") else {
            eprintln!("SKIP: MINA_TQ_DATA not set");
            return;
        };
        let path = std::path::Path::new(&dir).join("tq_yt.jsonl");
        let ds = load_corpus(&path, Platform::Standalone).expect("released corpus loads");
        assert_eq!(ds.len(), 1642);
        assert_eq!(ds.n_positive(), 202);
    }
}
