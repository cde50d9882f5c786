//! Labeled proximity graph.
//!
//! The index is built once with relaxed limits; every edge carries the
//! minimal pruning rate at which it survives. Filtering edges by label at
//! search time then emulates any stricter construction configuration on the
//! same physical graph, so degree and pruning rate become runtime knobs.

mod build;
mod format;
mod labeling;

pub use build::{
    build_index, build_index_traced, build_index_with_metric, build_invocations, BuildTrace,
    LabelingRecord,
};
pub use format::{load_index, save_index};
pub use labeling::{prune_based_labeling, LabeledNeighbor};

use crate::dataset::Metric;
use crate::error::{Error, Result};

/// Construction parameters: relaxed maximum out-degree, candidate pool size
/// used while inserting, and the ascending ladder of pruning rates edges are
/// labeled with.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildParams {
    pub max_degree: usize,
    pub ef_construction: usize,
    pub pruning_rates: Vec<f32>,
}

impl BuildParams {
    pub fn new(max_degree: usize, ef_construction: usize, pruning_rates: Vec<f32>) -> Self {
        BuildParams {
            max_degree,
            ef_construction,
            pruning_rates,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_degree == 0 {
            return Err(Error::InvalidParameter("max_degree must be positive".into()));
        }
        if self.ef_construction < self.max_degree {
            return Err(Error::InvalidParameter(format!(
                "ef_construction {} must be at least max_degree {}",
                self.ef_construction, self.max_degree
            )));
        }
        validate_rates(&self.pruning_rates)
    }

    pub fn min_rate(&self) -> f32 {
        self.pruning_rates[0]
    }

    pub fn max_rate(&self) -> f32 {
        *self.pruning_rates.last().unwrap()
    }
}

pub(crate) fn validate_rates(rates: &[f32]) -> Result<()> {
    if rates.is_empty() {
        return Err(Error::InvalidParameter("pruning_rates is empty".into()));
    }
    if rates[0] < 1.0 {
        return Err(Error::InvalidParameter(format!(
            "pruning rates must be >= 1.0, got {}",
            rates[0]
        )));
    }
    if rates.iter().any(|r| !r.is_finite()) {
        return Err(Error::InvalidParameter("non-finite pruning rate".into()));
    }
    if rates.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "pruning rates must be strictly ascending".into(),
        ));
    }
    Ok(())
}

/// The immutable labeled graph: per-node neighbor lists sorted ascending by
/// construction distance, each edge carrying its label and cached distance.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphIndex {
    metric: Metric,
    dim: usize,
    max_degree: usize,
    pruning_rates: Vec<f32>,
    entry_points: Vec<u32>,
    neighbors: Vec<Vec<LabeledNeighbor>>,
}

impl GraphIndex {
    pub(crate) fn new(
        metric: Metric,
        dim: usize,
        max_degree: usize,
        pruning_rates: Vec<f32>,
        entry_points: Vec<u32>,
        neighbors: Vec<Vec<LabeledNeighbor>>,
    ) -> Self {
        GraphIndex {
            metric,
            dim,
            max_degree,
            pruning_rates,
            entry_points,
            neighbors,
        }
    }

    /// Assembles an index from raw parts, validating every structural
    /// invariant: ascending rates, in-range ids, no self-loops, labels drawn
    /// from the rate set, per-node lists sorted ascending by (dist, id) and
    /// within the degree bound.
    pub fn from_parts(
        metric: Metric,
        dim: usize,
        max_degree: usize,
        pruning_rates: Vec<f32>,
        entry_points: Vec<u32>,
        neighbors: Vec<Vec<LabeledNeighbor>>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("zero dimension".into()));
        }
        if max_degree == 0 {
            return Err(Error::InvalidParameter("zero max_degree".into()));
        }
        validate_rates(&pruning_rates)?;
        let n = neighbors.len();
        if n > 0 && entry_points.is_empty() {
            return Err(Error::InvalidParameter("no entry points".into()));
        }
        for &e in &entry_points {
            if e as usize >= n {
                return Err(Error::NodeOutOfRange { id: e, count: n });
            }
        }
        for (node, list) in neighbors.iter().enumerate() {
            if list.len() > max_degree {
                return Err(Error::InvalidParameter(format!(
                    "node {node} degree {} exceeds max_degree {max_degree}",
                    list.len()
                )));
            }
            for (k, e) in list.iter().enumerate() {
                if e.id as usize >= n {
                    return Err(Error::NodeOutOfRange { id: e.id, count: n });
                }
                if e.id as usize == node {
                    return Err(Error::InvalidParameter(format!(
                        "node {node} links to itself"
                    )));
                }
                if !e.dist.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "node {node} edge {k} has non-finite distance"
                    )));
                }
                if !pruning_rates.contains(&e.label) {
                    return Err(Error::InvalidParameter(format!(
                        "node {node} edge {k} label {} not in the rate set",
                        e.label
                    )));
                }
                if k > 0 && (e.dist, e.id) < (list[k - 1].dist, list[k - 1].id) {
                    return Err(Error::InvalidParameter(format!(
                        "node {node} neighbor list not sorted at {k}"
                    )));
                }
            }
        }
        Ok(GraphIndex::new(
            metric,
            dim,
            max_degree,
            pruning_rates,
            entry_points,
            neighbors,
        ))
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn metric(&self) -> Metric {
        self.metric
    }

    #[inline]
    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    #[inline]
    pub fn pruning_rates(&self) -> &[f32] {
        &self.pruning_rates
    }

    #[inline]
    pub fn min_rate(&self) -> f32 {
        self.pruning_rates[0]
    }

    #[inline]
    pub fn max_rate(&self) -> f32 {
        *self.pruning_rates.last().unwrap()
    }

    #[inline]
    pub fn entry_points(&self) -> &[u32] {
        &self.entry_points
    }

    pub fn neighbors(&self, node: u32) -> Result<&[LabeledNeighbor]> {
        self.neighbors
            .get(node as usize)
            .map(Vec::as_slice)
            .ok_or(Error::NodeOutOfRange {
                id: node,
                count: self.len(),
            })
    }

    #[inline]
    pub(crate) fn neighbors_unchecked(&self, node: u32) -> &[LabeledNeighbor] {
        &self.neighbors[node as usize]
    }

    /// Scans the neighbor list of `node` in ascending-distance order and
    /// emits ids that are not yet visited and whose label is within
    /// `pruning_rate`, stopping after `degree_limit` entries. Touches only
    /// ids and labels, never vector payloads.
    pub fn filtered_neighbors(
        &self,
        node: u32,
        pruning_rate: f32,
        degree_limit: usize,
        is_visited: impl Fn(u32) -> bool,
    ) -> Result<Vec<u32>> {
        let mut out = Vec::with_capacity(degree_limit.min(self.max_degree));
        for e in self.neighbors(node)? {
            if out.len() >= degree_limit {
                break;
            }
            if e.label <= pruning_rate && !is_visited(e.id) {
                out.push(e.id);
            }
        }
        Ok(out)
    }

    /// Like [`Self::filtered_neighbors`] but also reports each emitted id's
    /// position in the full neighbor list, which redundant-block storage
    /// needs to locate co-located codes.
    pub(crate) fn gather_unvisited(
        &self,
        node: u32,
        pruning_rate: f32,
        degree_limit: usize,
        visited: &[bool],
        out: &mut Vec<(u32, u32)>,
    ) {
        out.clear();
        for (pos, e) in self.neighbors_unchecked(node).iter().enumerate() {
            if out.len() >= degree_limit {
                break;
            }
            if e.label <= pruning_rate && !visited[e.id as usize] {
                out.push((e.id, pos as u32));
            }
        }
    }

    /// Number of directed edges in the index.
    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum()
    }

    /// In-degree of every node under the full (most relaxed) edge set.
    pub fn in_degrees(&self) -> Vec<u32> {
        let mut deg = vec![0u32; self.len()];
        for list in &self.neighbors {
            for e in list {
                deg[e.id as usize] += 1;
            }
        }
        deg
    }

    /// Nodes reachable from the entry points under (`pruning_rate`,
    /// `degree_limit`) filtering.
    pub fn reachable_count(&self, pruning_rate: f32, degree_limit: usize) -> usize {
        let mut seen = vec![false; self.len()];
        let mut stack: Vec<u32> = Vec::new();
        for &e in &self.entry_points {
            if !seen[e as usize] {
                seen[e as usize] = true;
                stack.push(e);
            }
        }
        let mut count = stack.len();
        while let Some(node) = stack.pop() {
            let mut taken = 0usize;
            for e in self.neighbors_unchecked(node) {
                if taken >= degree_limit {
                    break;
                }
                if e.label <= pruning_rate {
                    taken += 1;
                    if !seen[e.id as usize] {
                        seen[e.id as usize] = true;
                        count += 1;
                        stack.push(e.id);
                    }
                }
            }
        }
        count
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        format::index_to_bytes(self)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        format::index_from_bytes(bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn five_neighbor_index() -> GraphIndex {
        // Labels by distance order: 1.0, 1.4, 1.0, 1.2, 1.0
        let edges = vec![
            LabeledNeighbor::new(1, 0.1, 1.0),
            LabeledNeighbor::new(2, 0.2, 1.4),
            LabeledNeighbor::new(3, 0.3, 1.0),
            LabeledNeighbor::new(4, 0.4, 1.2),
            LabeledNeighbor::new(5, 0.5, 1.0),
        ];
        GraphIndex::new(
            Metric::SquaredEuclidean,
            2,
            5,
            vec![1.0, 1.2, 1.4],
            vec![0],
            vec![edges, vec![], vec![], vec![], vec![], vec![]],
        )
    }

    #[test]
    fn label_and_degree_filtering() {
        // With rate 1.2 and limit 3 the second neighbor is label-filtered
        // and the fifth is cut by the degree cap.
        let g = five_neighbor_index();
        let got = g.filtered_neighbors(0, 1.2, 3, |_| false).unwrap();
        assert_eq!(got, vec![1, 3, 4]);
    }

    #[test]
    fn relaxed_limits_return_everything() {
        let g = five_neighbor_index();
        let got = g.filtered_neighbors(0, 1.4, 5, |_| false).unwrap();
        assert_eq!(got, vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn all_visited_returns_empty() {
        let g = five_neighbor_index();
        let got = g.filtered_neighbors(0, 1.4, 5, |_| true).unwrap();
        assert!(got.is_empty());
    }

    #[test]
    fn unknown_node_errors() {
        let g = five_neighbor_index();
        assert!(matches!(
            g.filtered_neighbors(99, 1.0, 1, |_| false),
            Err(Error::NodeOutOfRange { id: 99, .. })
        ));
    }
}
