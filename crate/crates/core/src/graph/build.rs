//! Incremental index construction.
//!
//! Points are inserted in id order. Each insertion greedy-searches the
//! partial graph under the most relaxed limits to collect candidates with
//! their distances, labels them, and then adds reverse edges whose tails are
//! re-labeled from the insertion position. Construction runs entirely on
//! full-precision distances and is a deterministic function of
//! (dataset, params).

use std::cell::Cell;

use super::labeling::{prune_based_labeling, LabeledNeighbor};
use super::{BuildParams, GraphIndex};
use crate::dataset::{Dataset, Metric};
use crate::distance::exact_distance;
use crate::error::{Error, Result};
use crate::search::pool::CandidatePool;

thread_local! {
    static BUILD_COUNT: Cell<u64> = const { Cell::new(0) };
}

/// Number of index builds performed by the calling thread (construction is
/// single-writer, so a build always runs on the thread that asked for it).
/// Lets callers assert that tuning sweeps reuse one physical index instead
/// of rebuilding.
pub fn build_invocations() -> u64 {
    BUILD_COUNT.with(Cell::get)
}

/// Input snapshot of the labeling call that produced a node's final neighbor
/// list: the candidate entries as they looked going in (labels below
/// `keep_from` are the preserved prefix) and the position relabeling started
/// from.
#[derive(Debug, Clone)]
pub struct LabelingRecord {
    pub entries_in: Vec<LabeledNeighbor>,
    pub keep_from: usize,
}

/// Per-node record of the last labeling invocation during a build.
#[derive(Debug, Default)]
pub struct BuildTrace {
    pub final_labeling: Vec<Option<LabelingRecord>>,
}

/// Builds a squared-Euclidean index. See [`build_index_with_metric`] for
/// inner-product graphs.
pub fn build_index(dataset: &Dataset, params: &BuildParams) -> Result<GraphIndex> {
    build_inner(dataset, Metric::SquaredEuclidean, params, None)
}

pub fn build_index_with_metric(
    dataset: &Dataset,
    metric: Metric,
    params: &BuildParams,
) -> Result<GraphIndex> {
    build_inner(dataset, metric, params, None)
}

/// Builds and records, per node, the inputs of the labeling call that
/// produced its final neighbor list. Used by oracle tests to replay pruning
/// decisions on identical inputs.
pub fn build_index_traced(
    dataset: &Dataset,
    params: &BuildParams,
) -> Result<(GraphIndex, BuildTrace)> {
    let mut trace = BuildTrace {
        final_labeling: vec![None; dataset.len()],
    };
    let graph = build_inner(dataset, Metric::SquaredEuclidean, params, Some(&mut trace))?;
    Ok((graph, trace))
}

fn build_inner(
    dataset: &Dataset,
    metric: Metric,
    params: &BuildParams,
    mut trace: Option<&mut BuildTrace>,
) -> Result<GraphIndex> {
    params.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    BUILD_COUNT.with(|c| c.set(c.get() + 1));

    let n = dataset.len();
    let max_degree = params.max_degree;
    let rates = params.pruning_rates.clone();
    let mut neighbors: Vec<Vec<LabeledNeighbor>> = vec![Vec::new(); n];

    let dist = |a: u32, b: u32| -> f32 {
        // dims are equal by Dataset construction
        exact_distance(dataset.vector(a as usize), dataset.vector(b as usize), metric)
            .expect("dataset vectors share dim")
    };

    let mut visited = vec![false; n];
    for i in 1..n {
        // collect candidates from the partial graph, relaxed limits
        let mut candidates = construction_search(
            dataset,
            metric,
            &neighbors,
            &mut visited,
            i as u32,
            params.ef_construction,
            max_degree,
            params.max_rate(),
        );
        candidates.sort_unstable_by(|a, b| a.dist.total_cmp(&b.dist).then(a.id.cmp(&b.id)));

        let mut entries: Vec<LabeledNeighbor> = candidates
            .iter()
            .map(|c| LabeledNeighbor::new(c.id, c.dist, 0.0))
            .collect();
        prune_based_labeling(&mut entries, &rates, max_degree, 0, metric, &mut |a, b| {
            dist(a, b)
        })?;
        if let Some(t) = trace.as_deref_mut() {
            t.final_labeling[i] = Some(LabelingRecord {
                entries_in: candidates
                    .iter()
                    .map(|c| LabeledNeighbor::new(c.id, c.dist, 0.0))
                    .collect(),
                keep_from: 0,
            });
        }
        neighbors[i] = entries;

        // reverse edges
        let targets: Vec<LabeledNeighbor> = neighbors[i].clone();
        for edge in targets {
            let j = edge.id as usize;
            let list = &neighbors[j];
            if list.len() >= max_degree
                && list
                    .last()
                    .is_some_and(|last| edge.dist >= last.dist)
            {
                continue;
            }
            // insertion position keeping (dist, id) ascending
            let pos = list.partition_point(|e| (e.dist, e.id) <= (edge.dist, i as u32));
            let mut updated = list.clone();
            updated.insert(pos, LabeledNeighbor::new(i as u32, edge.dist, 0.0));
            if let Some(t) = trace.as_deref_mut() {
                t.final_labeling[j] = Some(LabelingRecord {
                    entries_in: updated.clone(),
                    keep_from: pos,
                });
            }
            prune_based_labeling(&mut updated, &rates, max_degree, pos, metric, &mut |a, b| {
                dist(a, b)
            })?;
            neighbors[j] = updated;
        }
    }

    Ok(GraphIndex::new(
        metric,
        dataset.dim(),
        max_degree,
        rates,
        vec![0],
        neighbors,
    ))
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    id: u32,
    dist: f32,
}

/// Greedy traversal of the partial graph from node 0, returning every pool
/// member with its full-precision distance to the point being inserted.
#[allow(clippy::too_many_arguments)]
fn construction_search(
    dataset: &Dataset,
    metric: Metric,
    neighbors: &[Vec<LabeledNeighbor>],
    visited: &mut [bool],
    query_id: u32,
    ef: usize,
    degree_limit: usize,
    pruning_rate: f32,
) -> Vec<Candidate> {
    let query = dataset.vector(query_id as usize);
    let mut pool = CandidatePool::new(ef, neighbors.len());
    let mut touched: Vec<u32> = Vec::new();

    let entry = 0u32;
    visited[entry as usize] = true;
    touched.push(entry);
    let d0 = exact_distance(query, dataset.vector(entry as usize), metric).expect("same dim");
    pool.insert(d0, entry);

    let mut gathered: Vec<u32> = Vec::with_capacity(degree_limit);
    while let Some(current) = pool.pop_nearest_unexpanded() {
        gathered.clear();
        for e in &neighbors[current.id as usize] {
            if gathered.len() >= degree_limit {
                break;
            }
            if e.label <= pruning_rate && !visited[e.id as usize] {
                gathered.push(e.id);
            }
        }
        for &id in &gathered {
            visited[id as usize] = true;
            touched.push(id);
            let d = exact_distance(query, dataset.vector(id as usize), metric).expect("same dim");
            pool.insert(d, id);
        }
    }

    for id in touched {
        visited[id as usize] = false;
    }
    pool.entries_by_distance()
        .into_iter()
        .map(|e| Candidate {
            id: e.id,
            dist: e.dist,
        })
        .collect()
}
