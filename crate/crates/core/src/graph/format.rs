//! Index file format.
//!
//! Little-endian layout: magic `VSGI`, version u32, metric u32, dim u32,
//! n u64, max_degree u32, rate count u32 + f32 rates, entry count u32 +
//! u32 entry ids, then per node: degree u32, neighbor ids (u32×degree),
//! labels (f32×degree), cached distances (f32×degree). Deserialization
//! validates structure and rejects corrupt or truncated input without
//! producing a partial index.

use std::path::Path;

use super::labeling::LabeledNeighbor;
use super::GraphIndex;
use crate::dataset::Metric;
use crate::error::{Error, Result};
use crate::io::ByteReader;

const INDEX_MAGIC: &[u8; 4] = b"VSGI";
const INDEX_FORMAT_VERSION: u32 = 1;

fn metric_code(metric: Metric) -> u32 {
    match metric {
        Metric::SquaredEuclidean => 0,
        Metric::InnerProduct => 1,
    }
}

fn metric_from_code(code: u32) -> Result<Metric> {
    match code {
        0 => Ok(Metric::SquaredEuclidean),
        1 => Ok(Metric::InnerProduct),
        other => Err(Error::format("index", format!("unknown metric code {other}"))),
    }
}

pub(super) fn index_to_bytes(index: &GraphIndex) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(INDEX_MAGIC);
    buf.extend_from_slice(&INDEX_FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&metric_code(index.metric()).to_le_bytes());
    buf.extend_from_slice(&(index.dim() as u32).to_le_bytes());
    buf.extend_from_slice(&(index.len() as u64).to_le_bytes());
    buf.extend_from_slice(&(index.max_degree() as u32).to_le_bytes());
    buf.extend_from_slice(&(index.pruning_rates().len() as u32).to_le_bytes());
    for &r in index.pruning_rates() {
        buf.extend_from_slice(&r.to_le_bytes());
    }
    buf.extend_from_slice(&(index.entry_points().len() as u32).to_le_bytes());
    for &e in index.entry_points() {
        buf.extend_from_slice(&e.to_le_bytes());
    }
    for node in 0..index.len() as u32 {
        let list = index.neighbors_unchecked(node);
        buf.extend_from_slice(&(list.len() as u32).to_le_bytes());
        for e in list {
            buf.extend_from_slice(&e.id.to_le_bytes());
        }
        for e in list {
            buf.extend_from_slice(&e.label.to_le_bytes());
        }
        for e in list {
            buf.extend_from_slice(&e.dist.to_le_bytes());
        }
    }
    buf
}

pub(super) fn index_from_bytes(bytes: &[u8]) -> Result<GraphIndex> {
    let mut r = ByteReader::new(bytes, "index");
    if r.take(4)? != INDEX_MAGIC {
        return Err(Error::format("index", "bad magic"));
    }
    let version = r.u32()?;
    if version != INDEX_FORMAT_VERSION {
        return Err(Error::format(
            "index",
            format!("unsupported version {version}"),
        ));
    }
    let metric = metric_from_code(r.u32()?)?;
    let dim = r.u32()? as usize;
    if dim == 0 {
        return Err(Error::format("index", "zero dimension"));
    }
    let n = r.u64()? as usize;
    let max_degree = r.u32()? as usize;
    if max_degree == 0 {
        return Err(Error::format("index", "zero max_degree"));
    }
    let n_rates = r.u32()? as usize;
    let rates = r.f32_vec(n_rates)?;
    let n_entry = r.u32()? as usize;
    let entry_points = r.u32_vec(n_entry)?;

    let mut neighbors = Vec::with_capacity(n.min(r.remaining() / 4));
    for node in 0..n {
        let degree = r.u32()? as usize;
        if degree > max_degree {
            return Err(Error::format(
                "index",
                format!("node {node} degree {degree} exceeds max_degree {max_degree}"),
            ));
        }
        let ids = r.u32_vec(degree)?;
        let labels = r.f32_vec(degree)?;
        let dists = r.f32_vec(degree)?;
        let list = (0..degree)
            .map(|k| LabeledNeighbor::new(ids[k], dists[k], labels[k]))
            .collect();
        neighbors.push(list);
    }
    r.expect_end()?;
    GraphIndex::from_parts(metric, dim, max_degree, rates, entry_points, neighbors)
        .map_err(|e| Error::format("index", e.to_string()))
}

pub fn save_index(index: &GraphIndex, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, index_to_bytes(index))?;
    Ok(())
}

pub fn load_index(path: impl AsRef<Path>) -> Result<GraphIndex> {
    index_from_bytes(&std::fs::read(path)?)
}
