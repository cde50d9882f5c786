use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distance metric. Both variants order candidates so that smaller is nearer:
/// squared Euclidean directly, inner product as the negated dot product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    SquaredEuclidean,
    InnerProduct,
}

impl Metric {
    /// Converts a stored comparison value to the metric-level value used by
    /// pruning rules: square root for squared Euclidean, identity otherwise.
    #[inline]
    pub(crate) fn level(&self, stored: f32) -> f32 {
        match self {
            Metric::SquaredEuclidean => stored.max(0.0).sqrt(),
            Metric::InnerProduct => stored,
        }
    }
}

/// A contiguous collection of fixed-dimension full-precision vectors.
/// Vector ids are their 0-based positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    data: Vec<f32>,
}

impl Dataset {
    /// Builds a dataset from a flat row-major buffer.
    ///
    /// Rejects a zero dimension (unless the buffer is empty), a buffer length
    /// that is not a multiple of `dim`, and non-finite components.
    pub fn from_flat(dim: usize, data: Vec<f32>) -> Result<Self> {
        if data.is_empty() {
            return Ok(Dataset { dim, data });
        }
        if dim == 0 {
            return Err(Error::InvalidParameter(
                "dimension must be positive".into(),
            ));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::InvalidParameter(format!(
                "buffer of {} values is not a multiple of dim {}",
                data.len(),
                dim
            )));
        }
        for (i, chunk) in data.chunks_exact(dim).enumerate() {
            if chunk.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { index: i });
            }
        }
        Ok(Dataset { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::InvalidParameter(format!(
                    "row {i} has dim {} but row 0 has dim {dim}",
                    row.len()
                )));
            }
        }
        let mut data = Vec::with_capacity(dim * rows.len());
        for row in rows {
            data.extend_from_slice(row);
        }
        Self::from_flat(dim, data)
    }

    /// An empty dataset (valid as a query set, rejected for index builds).
    pub fn empty(dim: usize) -> Self {
        Dataset {
            dim,
            data: Vec::new(),
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Returns the vector at `i`. Panics if out of range.
    #[inline]
    pub fn vector(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn get(&self, i: usize) -> Result<&[f32]> {
        if i >= self.len() {
            return Err(Error::NodeOutOfRange {
                id: i as u32,
                count: self.len(),
            });
        }
        Ok(self.vector(i))
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f32]> + '_ {
        (0..self.len()).map(move |i| self.vector(i))
    }

    #[inline]
    pub fn as_flat(&self) -> &[f32] {
        &self.data
    }
}
