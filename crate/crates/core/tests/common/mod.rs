//! Shared test fixtures and the independent pruning oracle.

#![allow(dead_code)]

use vicinity::bench::{generate_dataset, GenMode};
use vicinity::graph::LabelingRecord;
use vicinity::{Dataset, Metric};

pub fn uniform_dataset(n: usize, dim: usize, seed: u64) -> Dataset {
    generate_dataset(n, dim, seed, GenMode::Uniform)
}

pub fn clustered_dataset(n: usize, dim: usize, seed: u64, clusters: usize) -> Dataset {
    generate_dataset(n, dim, seed, GenMode::Clustered { clusters, sigma: 0.15 })
}

/// Reference pruner: independently recomputes, for one recorded labeling
/// input and a single target rate, the neighbor ids a construction
/// parameterized by that rate keeps.
///
/// Rates up to the target are replayed in ascending order over the recorded
/// candidates. A candidate is kept at a rate when no earlier-kept candidate
/// whose own rate is within the current one sits close enough to shadow it
/// (`rate · τ(candidate, kept) <= τ(node, candidate)` on non-squared
/// distances). Candidates kept at a stricter rate stay kept at every larger
/// rate; with a single rate this is exactly the classic robust-prune rule.
/// The prefix below `keep_from` is kept as recorded with its own rates.
pub fn reference_pruner(
    record: &LabelingRecord,
    all_rates: &[f32],
    target_rate: f32,
    max_degree: usize,
    dataset: &Dataset,
) -> Vec<u32> {
    let entries = &record.entries_in;
    let n = entries.len();
    // rate at which each position was kept; None = not kept
    let mut kept: Vec<Option<f32>> = vec![None; n];
    for pos in 0..record.keep_from {
        kept[pos] = Some(entries[pos].label);
    }
    let mut count = record.keep_from;

    let pairwise = |a: u32, b: u32| -> f32 {
        vicinity::exact_distance(
            dataset.vector(a as usize),
            dataset.vector(b as usize),
            Metric::SquaredEuclidean,
        )
        .unwrap()
        .max(0.0)
        .sqrt()
    };

    for &rate in all_rates.iter().filter(|&&r| r <= target_rate) {
        if count >= max_degree {
            break;
        }
        for pos in record.keep_from..n {
            if count >= max_degree {
                break;
            }
            if kept[pos].is_some() {
                continue;
            }
            let own = entries[pos].dist.max(0.0).sqrt();
            let shadowed = (0..pos).any(|q| match kept[q] {
                Some(kept_rate) if kept_rate <= rate => {
                    rate * pairwise(entries[pos].id, entries[q].id) <= own
                }
                _ => false,
            });
            if !shadowed {
                kept[pos] = Some(rate);
                count += 1;
            }
        }
    }

    (0..n)
        .filter(|&pos| kept[pos].is_some_and(|r| r <= target_rate))
        .map(|pos| entries[pos].id)
        .take(max_degree)
        .collect()
}
