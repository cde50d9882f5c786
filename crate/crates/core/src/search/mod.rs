//! Deterministic-access greedy search.
//!
//! Each hop first gathers the ids of unvisited, label-valid neighbors
//! without touching vector data, then walks the gathered batch with stride
//! prefetching: before computing candidate `p`, the payload of candidate
//! `p + stride` is hinted. Every payload is therefore fetched at most once
//! per query, and prefetch parameters can only move work earlier in time,
//! never change results.

pub mod pool;
pub mod prefetch;
pub mod store;

pub use pool::{CandidatePool, PoolEntry};
pub use prefetch::prefetch_hint;
pub use store::{
    build_prs, BlockCtx, CountingStore, FullPrecisionStore, PrsStore, QuantizedStore, SearchStore,
    StoreQuery,
};

use crate::dataset::Dataset;
use crate::distance::exact_distance;
use crate::error::{Error, Result};
use crate::graph::GraphIndex;

/// Per-query search parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchParams {
    /// Number of results to return.
    pub k: usize,
    /// Candidate pool capacity; at least `k`.
    pub ef_search: usize,
    /// Neighbors examined per hop, at most the index max degree.
    pub degree_limit: usize,
    /// Edge-label cutoff; must lie within the index's trained rate range.
    pub pruning_rate: f32,
    /// Re-rank budget factor: up to `ceil(rerank_factor · k)` candidates get
    /// exact distances.
    pub rerank_factor: f32,
}

impl SearchParams {
    pub fn new(k: usize, ef_search: usize, degree_limit: usize, pruning_rate: f32) -> Self {
        SearchParams {
            k,
            ef_search,
            degree_limit,
            pruning_rate,
            rerank_factor: 3.0,
        }
    }

    fn validate(&self, index: &GraphIndex) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be positive".into()));
        }
        if self.k > index.len() {
            return Err(Error::KTooLarge {
                k: self.k,
                n: index.len(),
            });
        }
        if self.ef_search < self.k {
            return Err(Error::InvalidParameter(format!(
                "ef_search {} must be at least k {}",
                self.ef_search, self.k
            )));
        }
        if self.degree_limit == 0 || self.degree_limit > index.max_degree() {
            return Err(Error::InvalidParameter(format!(
                "degree_limit {} out of range 1..={}",
                self.degree_limit,
                index.max_degree()
            )));
        }
        if !(index.min_rate()..=index.max_rate()).contains(&self.pruning_rate) {
            return Err(Error::InvalidParameter(format!(
                "pruning_rate {} outside trained range [{}, {}]",
                self.pruning_rate,
                index.min_rate(),
                index.max_rate()
            )));
        }
        if self.rerank_factor < 1.0 {
            return Err(Error::InvalidParameter(
                "rerank_factor must be at least 1.0".into(),
            ));
        }
        Ok(())
    }
}

/// Environment parameters: prefetch stride (how many candidates ahead a hint
/// is issued; 0 disables prefetching entirely) and prefetch depth in
/// 64-byte cache lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnvParams {
    pub prefetch_stride: usize,
    pub prefetch_depth: usize,
}

impl Default for EnvParams {
    fn default() -> Self {
        EnvParams {
            prefetch_stride: 0,
            prefetch_depth: 1,
        }
    }
}

/// Counters accumulated during one query.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchStats {
    /// Low-precision (traversal) distance evaluations.
    pub low_prec_evals: usize,
    /// High-precision (re-rank) distance evaluations.
    pub high_prec_evals: usize,
    /// Payload fetches; equals `low_prec_evals` for the shipped stores.
    pub vector_fetches: usize,
    /// Nodes marked visited.
    pub visited: usize,
    /// Expansion steps.
    pub hops: usize,
    /// Prefetch hint invocations.
    pub prefetch_hints: usize,
    /// Set when fewer than `k` candidates were reachable.
    pub underfilled: bool,
}

/// Search output: ids ascending by exact distance, their exact distances,
/// and the per-query counters.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub ids: Vec<u32>,
    pub dists: Vec<f32>,
    pub stats: SearchStats,
}

/// Observer invoked after every hop; returning a value shrinks the pool
/// capacity to it for the rest of the query.
pub(crate) type HopObserver<'o> = dyn FnMut(usize, &CandidatePool, &SearchStats) -> Option<usize> + 'o;

/// Greedy search over the labeled graph. `entry` seeds the pool (callers
/// usually pass [`GraphIndex::entry_points`]).
pub fn greedy_search(
    index: &GraphIndex,
    store: &impl SearchStore,
    dataset: &Dataset,
    entry: &[u32],
    query: &[f32],
    params: &SearchParams,
    env: &EnvParams,
) -> Result<SearchResult> {
    greedy_search_observed(index, store, dataset, entry, query, params, env, None)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn greedy_search_observed(
    index: &GraphIndex,
    store: &impl SearchStore,
    dataset: &Dataset,
    entry: &[u32],
    query: &[f32],
    params: &SearchParams,
    env: &EnvParams,
    mut observer: Option<&mut HopObserver<'_>>,
) -> Result<SearchResult> {
    params.validate(index)?;
    if store.node_count() != index.len() || dataset.len() != index.len() {
        return Err(Error::InvalidParameter(
            "index, store, and dataset disagree on size".into(),
        ));
    }
    if entry.is_empty() {
        return Err(Error::InvalidParameter("no entry points".into()));
    }
    for &e in entry {
        if e as usize >= index.len() {
            return Err(Error::NodeOutOfRange {
                id: e,
                count: index.len(),
            });
        }
    }

    let prepared = store.prepare(query, index.metric())?;
    let mut stats = SearchStats::default();
    let mut visited = vec![false; index.len()];
    let mut pool = CandidatePool::new(params.ef_search, index.len());

    for &e in entry {
        if visited[e as usize] {
            continue;
        }
        visited[e as usize] = true;
        stats.visited += 1;
        let d = store.candidate_distance(&prepared, e, None);
        stats.low_prec_evals += 1;
        stats.vector_fetches += 1;
        pool.insert(d, e);
    }

    let stride = env.prefetch_stride;
    let mut gathered: Vec<(u32, u32)> = Vec::with_capacity(params.degree_limit);
    while let Some(current) = pool.pop_nearest_unexpanded() {
        stats.hops += 1;
        index.gather_unvisited(
            current.id,
            params.pruning_rate,
            params.degree_limit,
            &visited,
            &mut gathered,
        );
        for &(id, _) in &gathered {
            visited[id as usize] = true;
        }
        stats.visited += gathered.len();

        let batch = gathered.len();
        let ctx = |pos: u32| {
            Some(BlockCtx {
                node: current.id,
                position: pos,
            })
        };
        if stride > 0 {
            for &(id, pos) in gathered.iter().take(stride.min(batch)) {
                store.prefetch(id, ctx(pos), env.prefetch_depth);
                stats.prefetch_hints += 1;
            }
        }
        for p in 0..batch {
            if stride > 0 && p + stride < batch {
                let (id, pos) = gathered[p + stride];
                store.prefetch(id, ctx(pos), env.prefetch_depth);
                stats.prefetch_hints += 1;
            }
            let (id, pos) = gathered[p];
            let d = store.candidate_distance(&prepared, id, ctx(pos));
            stats.low_prec_evals += 1;
            stats.vector_fetches += 1;
            pool.insert(d, id);
        }

        if let Some(obs) = observer.as_deref_mut() {
            if let Some(new_cap) = obs(stats.hops, &pool, &stats) {
                pool.shrink_capacity(new_cap);
            }
        }
    }

    let (ids, dists, high_prec_evals) = selective_rerank(
        &pool,
        query,
        dataset,
        index.metric(),
        params.k,
        params.rerank_factor,
        store.rerank_error_bound(),
    )?;
    stats.high_prec_evals = high_prec_evals;
    stats.underfilled = ids.len() < params.k;
    Ok(SearchResult { ids, dists, stats })
}

/// Re-ranks the pool: the `min(ceil(rerank_factor · k), |pool|)` candidates
/// nearest by traversal distance get exact distances, and the `k` nearest by
/// exact distance are returned. Once `k` exact distances are known,
/// evaluation stops early when the next candidate's traversal distance
/// exceeds the current k-th best exact distance plus `error_bound`.
#[allow(clippy::type_complexity)]
pub fn selective_rerank(
    pool: &CandidatePool,
    query: &[f32],
    dataset: &Dataset,
    metric: crate::dataset::Metric,
    k: usize,
    rerank_factor: f32,
    error_bound: f32,
) -> Result<(Vec<u32>, Vec<f32>, usize)> {
    if rerank_factor < 1.0 {
        return Err(Error::InvalidParameter(
            "rerank_factor must be at least 1.0".into(),
        ));
    }
    let candidates = pool.entries_by_distance();
    let budget = ((rerank_factor as f64 * k as f64).ceil() as usize).min(candidates.len());

    // kept sorted ascending by (exact dist, id)
    let mut reranked: Vec<PoolEntry> = Vec::with_capacity(budget);
    let mut evals = 0usize;
    for (i, c) in candidates.iter().take(budget).enumerate() {
        if i >= k && c.dist > reranked[k - 1].dist + error_bound {
            break;
        }
        let exact = exact_distance(query, dataset.vector(c.id as usize), metric)?;
        evals += 1;
        let entry = PoolEntry {
            dist: exact,
            id: c.id,
        };
        let pos = reranked.partition_point(|e| *e <= entry);
        reranked.insert(pos, entry);
    }
    reranked.truncate(k);
    Ok((
        reranked.iter().map(|e| e.id).collect(),
        reranked.iter().map(|e| e.dist).collect(),
        evals,
    ))
}
