//! Query-level adaptive tuning.
//!
//! Searches start with a large pool. After a fixed number of hops, cheap
//! features of the current pool are fed to a depth-limited decision tree
//! trained offline; when the tree judges the query easy, the pool shrinks
//! to a small capacity for the rest of the search. Easy queries stop paying
//! for headroom they do not need while hard queries keep it.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::eval::compute_recall;
use crate::graph::GraphIndex;
use crate::search::{
    greedy_search, CandidatePool, EnvParams, SearchParams, SearchResult, SearchStats, SearchStore,
};

pub const FEATURE_COUNT: usize = 7;

/// Pool-state features extracted at the decision checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryFeatures {
    /// Points whose distances have been computed so far.
    pub scanned_count: f32,
    /// Distribution of the current five nearest candidate distances.
    pub top5_mean: f32,
    pub top5_std: f32,
    pub top5_min: f32,
    pub top5_max: f32,
    /// Drop of the top-5 mean between the previous snapshot and now
    /// (positive while the search still improves).
    pub top5_progression: f32,
    /// (k-th best − best) / best, 0 when the best distance is ~0.
    pub topk_gap: f32,
}

impl QueryFeatures {
    pub fn as_array(&self) -> [f32; FEATURE_COUNT] {
        [
            self.scanned_count,
            self.top5_mean,
            self.top5_std,
            self.top5_min,
            self.top5_max,
            self.top5_progression,
            self.topk_gap,
        ]
    }
}

/// Extracts features from a pool snapshot. Returns `None` while fewer than
/// five candidates exist (extraction is deferred to a later checkpoint).
pub fn extract_features(
    pool: &CandidatePool,
    stats: &SearchStats,
    previous_top5_mean: Option<f32>,
    k: usize,
) -> Option<QueryFeatures> {
    let dists = pool.nearest_dists(pool.len());
    extract_features_from_dists(&dists, stats.low_prec_evals, previous_top5_mean, k)
}

pub(crate) fn top5_mean(dists: &[f32]) -> Option<f32> {
    if dists.len() < 5 {
        return None;
    }
    Some(dists[..5].iter().sum::<f32>() / 5.0)
}

fn extract_features_from_dists(
    sorted_dists: &[f32],
    scanned: usize,
    previous_top5_mean: Option<f32>,
    k: usize,
) -> Option<QueryFeatures> {
    if sorted_dists.len() < 5 {
        return None;
    }
    let top5 = &sorted_dists[..5];
    let mean = top5.iter().sum::<f32>() / 5.0;
    let var = top5.iter().map(|d| (d - mean) * (d - mean)).sum::<f32>() / 5.0;
    let best = sorted_dists[0];
    let kth = sorted_dists[k.clamp(1, sorted_dists.len()) - 1];
    let gap = if best.abs() > 1e-12 {
        (kth - best) / best
    } else {
        0.0
    };
    Some(QueryFeatures {
        scanned_count: scanned as f32,
        top5_mean: mean,
        top5_std: var.sqrt(),
        top5_min: top5[0],
        top5_max: top5[4],
        top5_progression: previous_top5_mean.map_or(0.0, |prev| prev - mean),
        topk_gap: gap,
    })
}

/// Verdict of the checkpoint model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PoolDecision {
    /// Shrink the pool to the trained low capacity.
    Shrink,
    /// Keep the large pool.
    Keep,
}

/// Anything that can judge a query from checkpoint features. The shipped
/// implementation is [`DecisionModel`]; the interface keeps the classifier
/// pluggable.
pub trait QueryClassifier {
    fn classify(&self, features: &QueryFeatures) -> PoolDecision;
}

#[derive(Debug, Clone, Serialize, Deserialize)]
enum TreeNode {
    Leaf {
        shrink: bool,
    },
    Split {
        feature: usize,
        threshold: f32,
        below: Box<TreeNode>,
        above: Box<TreeNode>,
    },
}

impl TreeNode {
    fn classify(&self, features: &[f32; FEATURE_COUNT]) -> bool {
        match self {
            TreeNode::Leaf { shrink } => *shrink,
            TreeNode::Split {
                feature,
                threshold,
                below,
                above,
            } => {
                if features[*feature] <= *threshold {
                    below.classify(features)
                } else {
                    above.classify(features)
                }
            }
        }
    }

    fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { below, above, .. } => 1 + below.depth().max(above.depth()),
        }
    }
}

/// Training configuration and provenance stored with the model.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ModelMeta {
    pub k: usize,
    pub checkpoint_hop: usize,
    pub ef_low: usize,
    pub ef_high: usize,
    pub target_recall: f64,
    pub holdout_accuracy: f64,
    /// Set when training labels were all one class; the model is a constant.
    pub degenerate: bool,
}

/// Depth-limited binary decision tree over [`QueryFeatures`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecisionModel {
    root: TreeNode,
    pub meta: ModelMeta,
}

impl QueryClassifier for DecisionModel {
    fn classify(&self, features: &QueryFeatures) -> PoolDecision {
        if self.root.classify(&features.as_array()) {
            PoolDecision::Shrink
        } else {
            PoolDecision::Keep
        }
    }
}

impl DecisionModel {
    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        serde_json::from_str(json)
            .map_err(|e| Error::format("decision model", e.to_string()))
    }

    /// Fits a tree by greedy entropy-gain splitting. Exposed for tests that
    /// train on synthetic feature sets.
    pub fn fit(
        samples: &[(QueryFeatures, PoolDecision)],
        max_depth: usize,
        meta: ModelMeta,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidParameter("no training samples".into()));
        }
        let rows: Vec<[f32; FEATURE_COUNT]> =
            samples.iter().map(|(f, _)| f.as_array()).collect();
        let labels: Vec<bool> = samples
            .iter()
            .map(|(_, d)| *d == PoolDecision::Shrink)
            .collect();
        let idx: Vec<usize> = (0..rows.len()).collect();
        let root = grow(&rows, &labels, &idx, max_depth);
        Ok(DecisionModel { root, meta })
    }
}

fn entropy(shrink: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let p = shrink as f64 / total as f64;
    let mut h = 0.0;
    for q in [p, 1.0 - p] {
        if q > 0.0 {
            h -= q * q.log2();
        }
    }
    h
}

fn grow(
    rows: &[[f32; FEATURE_COUNT]],
    labels: &[bool],
    idx: &[usize],
    depth_left: usize,
) -> TreeNode {
    let shrink_count = idx.iter().filter(|&&i| labels[i]).count();
    // a tied leaf keeps the large pool, which can only help recall
    let majority = shrink_count * 2 > idx.len();
    if depth_left == 0 || shrink_count == 0 || shrink_count == idx.len() {
        return TreeNode::Leaf {
            shrink: if shrink_count == idx.len() {
                true
            } else if shrink_count == 0 {
                false
            } else {
                majority
            },
        };
    }

    let parent = entropy(shrink_count, idx.len());
    let mut best: Option<(f64, usize, f32)> = None;
    #[allow(clippy::needless_range_loop)]
    for feature in 0..FEATURE_COUNT {
        let mut values: Vec<f32> = idx.iter().map(|&i| rows[i][feature]).collect();
        values.sort_unstable_by(f32::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let threshold = (w[0] + w[1]) / 2.0;
            let (mut left_n, mut left_s) = (0usize, 0usize);
            for &i in idx {
                if rows[i][feature] <= threshold {
                    left_n += 1;
                    left_s += labels[i] as usize;
                }
            }
            let right_n = idx.len() - left_n;
            let right_s = shrink_count - left_s;
            if left_n == 0 || right_n == 0 {
                continue;
            }
            let weighted = (left_n as f64 * entropy(left_s, left_n)
                + right_n as f64 * entropy(right_s, right_n))
                / idx.len() as f64;
            let gain = parent - weighted;
            // strict improvement keeps the first (feature, threshold) on ties
            if gain > 1e-12 && best.is_none_or(|(g, _, _)| gain > g) {
                best = Some((gain, feature, threshold));
            }
        }
    }

    match best {
        None => TreeNode::Leaf { shrink: majority },
        Some((_, feature, threshold)) => {
            let (left, right): (Vec<usize>, Vec<usize>) =
                idx.iter().partition(|&&i| rows[i][feature] <= threshold);
            TreeNode::Split {
                feature,
                threshold,
                below: Box::new(grow(rows, labels, &left, depth_left - 1)),
                above: Box::new(grow(rows, labels, &right, depth_left - 1)),
            }
        }
    }
}

/// Training configuration for [`train_qlp_model`].
#[derive(Debug, Clone, Copy)]
pub struct QlpTrainConfig {
    pub k: usize,
    pub target_recall: f64,
    pub ef_low: usize,
    pub ef_high: usize,
    pub checkpoint_hop: usize,
    pub max_depth: usize,
}

impl QlpTrainConfig {
    pub fn new(k: usize, target_recall: f64, ef_low: usize, ef_high: usize) -> Self {
        QlpTrainConfig {
            k,
            target_recall,
            ef_low,
            ef_high,
            checkpoint_hop: 10,
            max_depth: 6,
        }
    }
}

/// Runs one search with feature capture at the checkpoint hop (or at the
/// final hop if the search ends sooner).
#[allow(clippy::too_many_arguments)]
fn search_with_features(
    index: &GraphIndex,
    store: &impl SearchStore,
    dataset: &Dataset,
    query: &[f32],
    params: &SearchParams,
    env: &EnvParams,
    checkpoint_hop: usize,
) -> Result<(SearchResult, Option<QueryFeatures>)> {
    let mid_hop = (checkpoint_hop / 2).max(1);
    let mut mid_mean: Option<f32> = None;
    let mut captured: Option<QueryFeatures> = None;
    let k = params.k;
    let mut observer = |hop: usize, pool: &CandidatePool, stats: &SearchStats| -> Option<usize> {
        if hop == mid_hop {
            mid_mean = top5_mean(&pool.nearest_dists(5));
        }
        if hop <= checkpoint_hop {
            // keep the latest snapshot so short searches still yield features
            if let Some(f) = extract_features(pool, stats, mid_mean, k) {
                captured = Some(f);
            }
        }
        None
    };
    let result = crate::search::greedy_search_observed(
        index,
        store,
        dataset,
        index.entry_points(),
        query,
        params,
        env,
        Some(&mut observer),
    )?;
    Ok((result, captured))
}

/// Trains the checkpoint model: a query is labeled easy when searching with
/// `ef_low` already reaches the target recall against the supplied ground
/// truth; features come from an `ef_high` run. Every fifth sample is held
/// out for the accuracy reported in the metadata. When all labels agree the
/// returned model is a constant with the `degenerate` flag set.
pub fn train_qlp_model(
    index: &GraphIndex,
    store: &impl SearchStore,
    dataset: &Dataset,
    queries: &Dataset,
    truth: &[Vec<u32>],
    cfg: &QlpTrainConfig,
) -> Result<DecisionModel> {
    if queries.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if truth.len() != queries.len() {
        return Err(Error::InvalidParameter(format!(
            "{} queries but {} ground-truth lists",
            queries.len(),
            truth.len()
        )));
    }
    if cfg.ef_low > cfg.ef_high {
        return Err(Error::InvalidParameter(
            "ef_low must not exceed ef_high".into(),
        ));
    }
    let env = EnvParams::default();
    let base = SearchParams::new(cfg.k, cfg.ef_high, index.max_degree(), index.max_rate());
    let low = SearchParams {
        ef_search: cfg.ef_low.max(cfg.k),
        ..base
    };

    let mut samples: Vec<(QueryFeatures, PoolDecision)> = Vec::with_capacity(queries.len());
    for (i, q) in queries.iter().enumerate() {
        let low_result = greedy_search(index, store, dataset, index.entry_points(), q, &low, &env)?;
        let easy = compute_recall(&low_result.ids, &truth[i], cfg.k) >= cfg.target_recall;
        let (_, features) = search_with_features(
            index,
            store,
            dataset,
            q,
            &base,
            &env,
            cfg.checkpoint_hop,
        )?;
        if let Some(f) = features {
            samples.push((
                f,
                if easy {
                    PoolDecision::Shrink
                } else {
                    PoolDecision::Keep
                },
            ));
        }
    }
    if samples.is_empty() {
        return Err(Error::InvalidParameter(
            "no query produced checkpoint features; checkpoint_hop too large?".into(),
        ));
    }

    let (train, holdout): (Vec<_>, Vec<_>) = samples
        .iter()
        .enumerate()
        .partition(|(i, _)| i % 5 != 4);
    let train: Vec<(QueryFeatures, PoolDecision)> =
        train.into_iter().map(|(_, s)| *s).collect();
    let holdout: Vec<(QueryFeatures, PoolDecision)> =
        holdout.into_iter().map(|(_, s)| *s).collect();

    let shrink_total = train.iter().filter(|(_, d)| *d == PoolDecision::Shrink).count();
    let degenerate = shrink_total == 0 || shrink_total == train.len();
    let mut meta = ModelMeta {
        k: cfg.k,
        checkpoint_hop: cfg.checkpoint_hop,
        ef_low: cfg.ef_low,
        ef_high: cfg.ef_high,
        target_recall: cfg.target_recall,
        holdout_accuracy: 0.0,
        degenerate,
    };
    let model = DecisionModel::fit(&train, cfg.max_depth.min(6), meta)?;
    let eval_set = if holdout.is_empty() { &train } else { &holdout };
    let correct = eval_set
        .iter()
        .filter(|(f, d)| model.classify(f) == *d)
        .count();
    meta.holdout_accuracy = correct as f64 / eval_set.len() as f64;
    Ok(DecisionModel {
        root: model.root,
        meta,
    })
}

/// Greedy search that consults the model at the checkpoint hop and shrinks
/// the pool to `ef_low` when the query is judged easy.
pub fn adaptive_search(
    index: &GraphIndex,
    store: &impl SearchStore,
    dataset: &Dataset,
    query: &[f32],
    model: &DecisionModel,
    params: &SearchParams,
    env: &EnvParams,
) -> Result<SearchResult> {
    if params.ef_search != model.meta.ef_high {
        return Err(Error::InvalidParameter(format!(
            "search ef {} does not match the model's ef_high {}",
            params.ef_search, model.meta.ef_high
        )));
    }
    let checkpoint = model.meta.checkpoint_hop;
    let mid_hop = (checkpoint / 2).max(1);
    let ef_low = model.meta.ef_low.max(params.k);
    let k = params.k;
    let mut mid_mean: Option<f32> = None;
    let mut decided = false;
    let mut observer = |hop: usize, pool: &CandidatePool, stats: &SearchStats| -> Option<usize> {
        if hop == mid_hop {
            mid_mean = top5_mean(&pool.nearest_dists(5));
        }
        if hop == checkpoint && !decided {
            decided = true;
            if let Some(f) = extract_features(pool, stats, mid_mean, k) {
                if model.classify(&f) == PoolDecision::Shrink {
                    return Some(ef_low);
                }
            }
        }
        None
    };
    crate::search::greedy_search_observed(
        index,
        store,
        dataset,
        index.entry_points(),
        query,
        params,
        env,
        Some(&mut observer),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feat(scanned: f32, mean: f32) -> QueryFeatures {
        QueryFeatures {
            scanned_count: scanned,
            top5_mean: mean,
            top5_std: 0.0,
            top5_min: mean,
            top5_max: mean,
            top5_progression: 0.0,
            topk_gap: 0.0,
        }
    }

    fn meta() -> ModelMeta {
        ModelMeta {
            k: 10,
            checkpoint_hop: 10,
            ef_low: 20,
            ef_high: 100,
            target_recall: 0.95,
            holdout_accuracy: 0.0,
            degenerate: false,
        }
    }

    #[test]
    fn equal_top5_gives_zero_std_and_gap() {
        let dists = [2.0; 8];
        let f = extract_features_from_dists(&dists, 40, None, 5).unwrap();
        assert_eq!(f.top5_std, 0.0);
        assert_eq!(f.topk_gap, 0.0);
        assert_eq!(f.top5_mean, 2.0);
    }

    #[test]
    fn identical_snapshots_give_zero_progression() {
        let dists = [1.0, 2.0, 3.0, 4.0, 5.0];
        let first = extract_features_from_dists(&dists, 10, None, 5).unwrap();
        let second = extract_features_from_dists(&dists, 20, Some(first.top5_mean), 5).unwrap();
        assert_eq!(second.top5_progression, 0.0);
    }

    #[test]
    fn progression_is_mean_drop_between_snapshots() {
        let first = extract_features_from_dists(&[1.0, 2.0, 3.0, 4.0, 5.0], 10, None, 5).unwrap();
        assert_eq!(first.top5_mean, 3.0);
        let second = extract_features_from_dists(
            &[1.0, 1.5, 2.0, 2.5, 3.0],
            20,
            Some(first.top5_mean),
            5,
        )
        .unwrap();
        assert_eq!(second.top5_mean, 2.0);
        assert_eq!(second.top5_progression, 1.0);
    }

    #[test]
    fn fewer_than_five_candidates_defers() {
        assert!(extract_features_from_dists(&[1.0, 2.0], 5, None, 5).is_none());
    }

    #[test]
    fn constant_labels_give_constant_model() {
        let samples: Vec<(QueryFeatures, PoolDecision)> = (0..10)
            .map(|i| (feat(i as f32, 1.0), PoolDecision::Shrink))
            .collect();
        let m = DecisionModel::fit(&samples, 6, meta()).unwrap();
        assert_eq!(m.depth(), 0);
        assert_eq!(m.classify(&feat(99.0, 42.0)), PoolDecision::Shrink);

        let samples: Vec<(QueryFeatures, PoolDecision)> = (0..10)
            .map(|i| (feat(i as f32, 1.0), PoolDecision::Keep))
            .collect();
        let m = DecisionModel::fit(&samples, 6, meta()).unwrap();
        assert_eq!(m.classify(&feat(0.0, 0.0)), PoolDecision::Keep);
    }

    #[test]
    fn separable_by_scanned_count_alone() {
        // two planted clusters: easy queries scan little, hard ones scan a lot
        let mut samples = Vec::new();
        for i in 0..40 {
            samples.push((feat(10.0 + i as f32 * 0.1, 1.0), PoolDecision::Shrink));
            samples.push((feat(200.0 + i as f32 * 0.1, 1.0), PoolDecision::Keep));
        }
        let m = DecisionModel::fit(&samples, 6, meta()).unwrap();
        let correct = samples
            .iter()
            .filter(|(f, d)| m.classify(f) == *d)
            .count();
        assert!(correct as f64 / samples.len() as f64 >= 0.9);
        assert!(m.depth() <= 6);
    }

    #[test]
    fn tree_depth_is_bounded() {
        let mut samples = Vec::new();
        // alternate labels on a fine grid to force many candidate splits
        for i in 0..128 {
            let label = if i % 2 == 0 {
                PoolDecision::Shrink
            } else {
                PoolDecision::Keep
            };
            samples.push((feat(i as f32, (i * 7 % 13) as f32), label));
        }
        let m = DecisionModel::fit(&samples, 6, meta()).unwrap();
        assert!(m.depth() <= 6);
    }

    #[test]
    fn model_json_round_trip() {
        let samples = vec![
            (feat(1.0, 1.0), PoolDecision::Shrink),
            (feat(100.0, 1.0), PoolDecision::Keep),
        ];
        let m = DecisionModel::fit(&samples, 6, meta()).unwrap();
        let back = DecisionModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back.classify(&feat(1.0, 1.0)), PoolDecision::Shrink);
        assert_eq!(back.classify(&feat(100.0, 1.0)), PoolDecision::Keep);
    }
}
