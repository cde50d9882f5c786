//! Brute-force ground truth and recall.

use crate::dataset::{Dataset, Metric};
use crate::distance::{precompute_base_norms, PreparedQuery};
use crate::error::{Error, Result};
use crate::search::PoolEntry;

/// Exact top-k per query by exhaustive scan, ties broken by lower id.
/// Returns ids and their distances, both ascending by `(distance, id)`.
#[allow(clippy::type_complexity)]
pub fn brute_force_groundtruth(
    dataset: &Dataset,
    queries: &Dataset,
    k: usize,
    metric: Metric,
) -> Result<(Vec<Vec<u32>>, Vec<Vec<f32>>)> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    if k > dataset.len() {
        return Err(Error::KTooLarge {
            k,
            n: dataset.len(),
        });
    }
    if !queries.is_empty() && queries.dim() != dataset.dim() {
        return Err(Error::DimensionMismatch {
            left: dataset.dim(),
            right: queries.dim(),
        });
    }
    let norms = precompute_base_norms(dataset)?;
    let mut all_ids = Vec::with_capacity(queries.len());
    let mut all_dists = Vec::with_capacity(queries.len());
    for q in queries.iter() {
        let prepared = PreparedQuery::new(q, metric)?;
        // max-heap of the k best so far
        let mut heap: std::collections::BinaryHeap<PoolEntry> =
            std::collections::BinaryHeap::with_capacity(k + 1);
        for (i, base) in dataset.iter().enumerate() {
            let d = prepared.distance_to(base, norms[i]);
            let entry = PoolEntry {
                dist: d,
                id: i as u32,
            };
            if heap.len() < k {
                heap.push(entry);
            } else if entry < *heap.peek().expect("non-empty") {
                heap.pop();
                heap.push(entry);
            }
        }
        let mut top: Vec<PoolEntry> = heap.into_vec();
        top.sort_unstable();
        all_ids.push(top.iter().map(|e| e.id).collect());
        all_dists.push(top.iter().map(|e| e.dist).collect());
    }
    Ok((all_ids, all_dists))
}

/// `|first-k(result) ∩ first-k(truth)| / k`. The result list may be shorter
/// than `k` (underfilled searches); `k` stays the denominator.
pub fn compute_recall(result: &[u32], truth: &[u32], k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let truth_set: std::collections::HashSet<u32> = truth.iter().take(k).copied().collect();
    let hits = result
        .iter()
        .take(k)
        .filter(|id| truth_set.contains(id))
        .count();
    hits as f64 / k as f64
}

/// Mean recall across queries.
pub fn mean_recall(results: &[Vec<u32>], truth: &[Vec<u32>], k: usize) -> f64 {
    if results.is_empty() {
        return 0.0;
    }
    results
        .iter()
        .zip(truth)
        .map(|(r, t)| compute_recall(r, t, k))
        .sum::<f64>()
        / results.len() as f64
}
