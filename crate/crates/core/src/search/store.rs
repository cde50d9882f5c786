//! Vector payload stores used during search.
//!
//! A store resolves a candidate id to its payload and computes the
//! low-precision distance used for traversal ordering. Three variants ship:
//! full precision (traversal distances are already exact), quantized codes,
//! and quantized codes with partially redundant storage, where a fraction of
//! nodes keep a contiguous copy of their neighbors' codes so a hop reads one
//! sequential block instead of scattered table entries.

use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

use crate::dataset::{Dataset, Metric};
use crate::distance::{precompute_base_norms, PreparedQuery};
use crate::error::{Error, Result};
use crate::graph::GraphIndex;
use crate::quant::{CodeStore, LowPrecQuery, QuantizerModel};
use crate::search::prefetch::prefetch_hint;

/// Where a candidate's payload may be read from: the node being expanded and
/// the candidate's position in that node's neighbor list.
#[derive(Debug, Clone, Copy)]
pub struct BlockCtx {
    pub node: u32,
    pub position: u32,
}

/// Per-query prepared state for a store.
#[derive(Debug, Clone)]
pub enum StoreQuery {
    Exact(PreparedQuery),
    Low(LowPrecQuery),
}

/// A source of per-candidate traversal distances.
pub trait SearchStore {
    fn node_count(&self) -> usize;

    fn prepare(&self, query: &[f32], metric: Metric) -> Result<StoreQuery>;

    /// Low-precision distance between the prepared query and node `id`.
    /// `ctx`, when present, names the expansion the read happens under so
    /// redundant blocks can serve it.
    fn candidate_distance(&self, query: &StoreQuery, id: u32, ctx: Option<BlockCtx>) -> f32;

    /// Advisory prefetch of the payload of `id`.
    fn prefetch(&self, id: u32, ctx: Option<BlockCtx>, depth_lines: usize);

    /// Worst-case gap between traversal distance and exact distance, fed to
    /// the re-rank early stop. Zero when traversal is already exact.
    fn rerank_error_bound(&self) -> f32 {
        0.0
    }
}

/// Full-precision store: traversal distances are exact distances computed
/// through the norm decomposition.
pub struct FullPrecisionStore<'a> {
    dataset: &'a Dataset,
    norms: Vec<f32>,
}

impl<'a> FullPrecisionStore<'a> {
    pub fn new(dataset: &'a Dataset) -> Result<Self> {
        Ok(FullPrecisionStore {
            norms: precompute_base_norms(dataset)?,
            dataset,
        })
    }
}

impl SearchStore for FullPrecisionStore<'_> {
    fn node_count(&self) -> usize {
        self.dataset.len()
    }

    fn prepare(&self, query: &[f32], metric: Metric) -> Result<StoreQuery> {
        if query.len() != self.dataset.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dataset.dim(),
                right: query.len(),
            });
        }
        Ok(StoreQuery::Exact(PreparedQuery::new(query, metric)?))
    }

    fn candidate_distance(&self, query: &StoreQuery, id: u32, _ctx: Option<BlockCtx>) -> f32 {
        match query {
            StoreQuery::Exact(q) => {
                q.distance_to(self.dataset.vector(id as usize), self.norms[id as usize])
            }
            StoreQuery::Low(_) => unreachable!("prepared by this store"),
        }
    }

    fn prefetch(&self, id: u32, _ctx: Option<BlockCtx>, depth_lines: usize) {
        prefetch_hint(self.dataset.vector(id as usize), depth_lines);
    }
}

/// Quantized store: traversal distances come from packed codes in one global
/// table.
pub struct QuantizedStore<'a> {
    model: &'a QuantizerModel,
    codes: &'a CodeStore,
}

impl<'a> QuantizedStore<'a> {
    pub fn new(model: &'a QuantizerModel, codes: &'a CodeStore) -> Result<Self> {
        if model.dim() != codes.dim() || model.bits() != codes.bits() {
            return Err(Error::InvalidParameter(
                "quantizer model and code store disagree on shape".into(),
            ));
        }
        Ok(QuantizedStore { model, codes })
    }
}

impl SearchStore for QuantizedStore<'_> {
    fn node_count(&self) -> usize {
        self.codes.len()
    }

    fn prepare(&self, query: &[f32], metric: Metric) -> Result<StoreQuery> {
        Ok(StoreQuery::Low(
            self.model.prepare_query_lowprec(query, metric)?,
        ))
    }

    fn candidate_distance(&self, query: &StoreQuery, id: u32, _ctx: Option<BlockCtx>) -> f32 {
        match query {
            StoreQuery::Low(q) => q.distance_unchecked(self.codes.code(id as usize)),
            StoreQuery::Exact(_) => unreachable!("prepared by this store"),
        }
    }

    fn prefetch(&self, id: u32, _ctx: Option<BlockCtx>, depth_lines: usize) {
        prefetch_hint(self.codes.code(id as usize), depth_lines);
    }

    fn rerank_error_bound(&self) -> f32 {
        self.model.quantization_error_bound()
    }
}

/// Quantized store with partially redundant neighbor blocks.
pub struct PrsStore<'a> {
    model: &'a QuantizerModel,
    codes: &'a CodeStore,
    redundancy_ratio: f32,
    /// For nodes selected for redundancy: their neighbors' codes laid out
    /// contiguously in neighbor-list order.
    blocks: Vec<Option<Box<[u8]>>>,
    extra_bytes: usize,
}

/// Materializes redundant neighbor-code blocks for a `redundancy_ratio`
/// fraction of nodes, chosen by descending in-degree (ties to the lower id).
pub fn build_prs<'a>(
    index: &GraphIndex,
    model: &'a QuantizerModel,
    codes: &'a CodeStore,
    redundancy_ratio: f32,
) -> Result<PrsStore<'a>> {
    if !(0.0..=1.0).contains(&redundancy_ratio) {
        return Err(Error::InvalidParameter(format!(
            "redundancy ratio must lie in [0, 1], got {redundancy_ratio}"
        )));
    }
    if codes.len() != index.len() {
        return Err(Error::InvalidParameter(format!(
            "code store holds {} vectors but index has {} nodes",
            codes.len(),
            index.len()
        )));
    }
    if model.dim() != codes.dim() || model.bits() != codes.bits() {
        return Err(Error::InvalidParameter(
            "quantizer model and code store disagree on shape".into(),
        ));
    }
    let n = index.len();
    let chosen = (redundancy_ratio as f64 * n as f64).round() as usize;
    let mut order: Vec<u32> = (0..n as u32).collect();
    let in_deg = index.in_degrees();
    order.sort_unstable_by(|&a, &b| {
        in_deg[b as usize]
            .cmp(&in_deg[a as usize])
            .then(a.cmp(&b))
    });

    let code_len = codes.code_len_bytes();
    let mut blocks: Vec<Option<Box<[u8]>>> = vec![None; n];
    let mut extra_bytes = 0usize;
    for &node in order.iter().take(chosen) {
        let list = index.neighbors_unchecked(node);
        let mut block = vec![0u8; list.len() * code_len];
        for (pos, e) in list.iter().enumerate() {
            block[pos * code_len..(pos + 1) * code_len]
                .copy_from_slice(codes.code(e.id as usize));
        }
        extra_bytes += block.len();
        blocks[node as usize] = Some(block.into_boxed_slice());
    }
    Ok(PrsStore {
        model,
        codes,
        redundancy_ratio,
        blocks,
        extra_bytes,
    })
}

impl PrsStore<'_> {
    #[inline]
    pub fn redundancy_ratio(&self) -> f32 {
        self.redundancy_ratio
    }

    /// Total bytes spent on redundant blocks.
    pub fn extra_bytes(&self) -> usize {
        self.extra_bytes
    }

    pub fn block_count(&self) -> usize {
        self.blocks.iter().filter(|b| b.is_some()).count()
    }

    pub fn block(&self, node: u32) -> Option<&[u8]> {
        self.blocks[node as usize].as_deref()
    }

    #[inline]
    fn resolve(&self, id: u32, ctx: Option<BlockCtx>) -> &[u8] {
        let code_len = self.codes.code_len_bytes();
        if let Some(BlockCtx { node, position }) = ctx {
            if let Some(block) = &self.blocks[node as usize] {
                let start = position as usize * code_len;
                return &block[start..start + code_len];
            }
        }
        self.codes.code(id as usize)
    }
}

impl SearchStore for PrsStore<'_> {
    fn node_count(&self) -> usize {
        self.codes.len()
    }

    fn prepare(&self, query: &[f32], metric: Metric) -> Result<StoreQuery> {
        Ok(StoreQuery::Low(
            self.model.prepare_query_lowprec(query, metric)?,
        ))
    }

    fn candidate_distance(&self, query: &StoreQuery, id: u32, ctx: Option<BlockCtx>) -> f32 {
        match query {
            StoreQuery::Low(q) => q.distance_unchecked(self.resolve(id, ctx)),
            StoreQuery::Exact(_) => unreachable!("prepared by this store"),
        }
    }

    fn prefetch(&self, id: u32, ctx: Option<BlockCtx>, depth_lines: usize) {
        prefetch_hint(self.resolve(id, ctx), depth_lines);
    }

    fn rerank_error_bound(&self) -> f32 {
        self.model.quantization_error_bound()
    }
}

/// Instrumented wrapper that counts payload fetches per node and prefetch
/// hints. Counters never influence computed values.
pub struct CountingStore<S> {
    inner: S,
    fetches: Vec<AtomicU64>,
    hints: AtomicUsize,
}

impl<S: SearchStore> CountingStore<S> {
    pub fn new(inner: S) -> Self {
        let n = inner.node_count();
        CountingStore {
            inner,
            fetches: (0..n).map(|_| AtomicU64::new(0)).collect(),
            hints: AtomicUsize::new(0),
        }
    }

    pub fn fetch_count(&self, id: u32) -> u64 {
        self.fetches[id as usize].load(Ordering::Relaxed)
    }

    pub fn max_fetch_count(&self) -> u64 {
        self.fetches
            .iter()
            .map(|c| c.load(Ordering::Relaxed))
            .max()
            .unwrap_or(0)
    }

    pub fn hint_count(&self) -> usize {
        self.hints.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        for c in &self.fetches {
            c.store(0, Ordering::Relaxed);
        }
        self.hints.store(0, Ordering::Relaxed);
    }
}

impl<S: SearchStore> SearchStore for CountingStore<S> {
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    fn prepare(&self, query: &[f32], metric: Metric) -> Result<StoreQuery> {
        self.inner.prepare(query, metric)
    }

    fn candidate_distance(&self, query: &StoreQuery, id: u32, ctx: Option<BlockCtx>) -> f32 {
        self.fetches[id as usize].fetch_add(1, Ordering::Relaxed);
        self.inner.candidate_distance(query, id, ctx)
    }

    fn prefetch(&self, id: u32, ctx: Option<BlockCtx>, depth_lines: usize) {
        self.hints.fetch_add(1, Ordering::Relaxed);
        self.inner.prefetch(id, ctx, depth_lines);
    }

    fn rerank_error_bound(&self) -> f32 {
        self.inner.rerank_error_bound()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_index, BuildParams};
    use crate::quant::{train_quantizer, CodeStore};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn fixture(n: usize) -> (Dataset, GraphIndex, QuantizerModel, CodeStore) {
        let mut rng = StdRng::seed_from_u64(71);
        let rows: Vec<Vec<f32>> = (0..n)
            .map(|_| (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let ds = Dataset::from_rows(&rows).unwrap();
        let g = build_index(&ds, &BuildParams::new(8, 32, vec![1.0, 1.5, 2.0])).unwrap();
        let model = train_quantizer(&ds, 8, 0.99).unwrap();
        let codes = CodeStore::encode_dataset(&model, &ds).unwrap();
        (ds, g, model, codes)
    }

    #[test]
    fn zero_ratio_has_no_blocks() {
        let (_ds, g, model, codes) = fixture(50);
        let prs = build_prs(&g, &model, &codes, 0.0).unwrap();
        assert_eq!(prs.block_count(), 0);
        assert_eq!(prs.extra_bytes(), 0);
    }

    #[test]
    fn full_ratio_covers_every_node() {
        let (_ds, g, model, codes) = fixture(50);
        let prs = build_prs(&g, &model, &codes, 1.0).unwrap();
        assert_eq!(prs.block_count(), g.len());
        let expected: usize = (0..g.len() as u32)
            .map(|i| g.neighbors_unchecked(i).len() * codes.code_len_bytes())
            .sum();
        assert_eq!(prs.extra_bytes(), expected);
    }

    #[test]
    fn half_ratio_rounds_node_count() {
        let (_ds, g, model, codes) = fixture(200);
        let prs = build_prs(&g, &model, &codes, 0.5).unwrap();
        assert_eq!(prs.block_count(), 100);
    }

    #[test]
    fn blocks_match_global_table_bytes() {
        let (_ds, g, model, codes) = fixture(120);
        let prs = build_prs(&g, &model, &codes, 0.7).unwrap();
        for node in 0..g.len() as u32 {
            if let Some(block) = prs.block(node) {
                let list = g.neighbors_unchecked(node);
                let code_len = codes.code_len_bytes();
                assert_eq!(block.len(), list.len() * code_len);
                for (pos, e) in list.iter().enumerate() {
                    assert_eq!(
                        &block[pos * code_len..(pos + 1) * code_len],
                        codes.code(e.id as usize)
                    );
                }
            }
        }
    }

    #[test]
    fn block_reads_equal_table_reads() {
        let (ds, g, model, codes) = fixture(80);
        let prs = build_prs(&g, &model, &codes, 1.0).unwrap();
        let q: Vec<f32> = ds.vector(3).to_vec();
        let sq = prs.prepare(&q, Metric::SquaredEuclidean).unwrap();
        for node in 0..g.len() as u32 {
            for (pos, e) in g.neighbors_unchecked(node).iter().enumerate() {
                let via_block = prs.candidate_distance(
                    &sq,
                    e.id,
                    Some(BlockCtx {
                        node,
                        position: pos as u32,
                    }),
                );
                let via_table = prs.candidate_distance(&sq, e.id, None);
                assert_eq!(via_block.to_bits(), via_table.to_bits());
            }
        }
    }

    #[test]
    fn invalid_ratio_is_rejected() {
        let (_ds, g, model, codes) = fixture(10);
        assert!(build_prs(&g, &model, &codes, -0.1).is_err());
        assert!(build_prs(&g, &model, &codes, 1.5).is_err());
    }
}
