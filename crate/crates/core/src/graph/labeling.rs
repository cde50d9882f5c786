//! Prune-based edge labeling.
//!
//! Instead of discarding candidates that a stricter pruning rate would drop,
//! every kept edge records the minimal rate at which it survives. The rates
//! are processed in ascending order; a candidate pruned at one rate is
//! re-examined at the next, and a candidate labeled once is never revisited.
//! Filtering edges by `label <= rate` afterwards reproduces the graph a
//! single-rate build would have kept, nested across rates by construction.

use crate::dataset::Metric;
use crate::error::{Error, Result};

/// One directed edge: target id, cached construction distance (stored in
/// comparison form, i.e. squared for Euclidean), and the edge label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledNeighbor {
    pub id: u32,
    pub dist: f32,
    pub label: f32,
}

impl LabeledNeighbor {
    pub fn new(id: u32, dist: f32, label: f32) -> Self {
        LabeledNeighbor { id, dist, label }
    }
}

/// Labels the candidate list of one node in place.
///
/// `entries` must be sorted ascending by `(dist, id)`. Positions below
/// `keep_from` are an already-labeled prefix that is preserved verbatim and
/// participates in pruning decisions; positions from `keep_from` on are
/// (re)labeled from scratch. `pairwise` returns the stored-form distance
/// between two candidate ids; the pruning comparison itself happens at
/// metric level (square roots for Euclidean).
///
/// A candidate at position `j` is pruned at `rate` when some already-labeled
/// earlier candidate `k` with `label <= rate` satisfies
/// `rate · τ(j, k) <= τ(node, j)`; otherwise it is labeled with `rate`.
/// Labeling stops once `max_degree` entries carry labels; unlabeled entries
/// are removed at the end.
pub fn prune_based_labeling(
    entries: &mut Vec<LabeledNeighbor>,
    rates: &[f32],
    max_degree: usize,
    keep_from: usize,
    metric: Metric,
    mut pairwise: impl FnMut(u32, u32) -> f32,
) -> Result<()> {
    super::validate_rates(rates)?;
    if keep_from > entries.len() {
        return Err(Error::InvalidParameter(format!(
            "keep_from {keep_from} exceeds candidate count {}",
            entries.len()
        )));
    }
    if entries
        .windows(2)
        .any(|w| (w[1].dist, w[1].id) < (w[0].dist, w[0].id))
    {
        return Err(Error::InvalidParameter(
            "candidates must be sorted ascending by distance".into(),
        ));
    }
    debug_assert!(entries[..keep_from].iter().all(|e| e.label > 0.0));

    for e in entries[keep_from..].iter_mut() {
        e.label = 0.0;
    }
    let mut labeled = keep_from;

    'rates: for &rate in rates {
        if labeled >= max_degree {
            break;
        }
        for j in keep_from..entries.len() {
            if labeled >= max_degree {
                break 'rates;
            }
            if entries[j].label != 0.0 {
                continue;
            }
            let own = metric.level(entries[j].dist);
            let mut pruned = false;
            for k in 0..j {
                let label_k = entries[k].label;
                if label_k > 0.0 && label_k <= rate {
                    let between = metric.level(pairwise(entries[j].id, entries[k].id));
                    if rate * between <= own {
                        pruned = true;
                        break;
                    }
                }
            }
            if !pruned {
                entries[j].label = rate;
                labeled += 1;
            }
        }
    }

    entries.retain(|e| e.label != 0.0);
    entries.truncate(max_degree);
    Ok(())
}
