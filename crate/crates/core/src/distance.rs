//! Exact and decomposed distance kernels.
//!
//! Distances are stored and compared in squared form for the Euclidean
//! metric (no square root in the hot path); inner product is negated so
//! every consumer can treat smaller as nearer. Kernels accumulate in f64
//! above [`WIDE_ACCUM_DIM`] dimensions to bound rounding drift on long
//! embeddings.

use crate::dataset::{Dataset, Metric};
use crate::error::{Error, Result};

/// Above this dimension, kernels switch to double-width accumulation.
pub const WIDE_ACCUM_DIM: usize = 1024;

#[inline]
pub(crate) fn l2_sq(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    if a.len() > WIDE_ACCUM_DIM {
        let mut acc = 0.0f64;
        for (x, y) in a.iter().zip(b.iter()) {
            let d = (*x - *y) as f64;
            acc += d * d;
        }
        acc as f32
    } else {
        let mut acc = 0.0f32;
        for (x, y) in a.iter().zip(b.iter()) {
            let d = x - y;
            acc += d * d;
        }
        acc
    }
}

#[inline]
pub(crate) fn dot(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    if a.len() > WIDE_ACCUM_DIM {
        let mut acc = 0.0f64;
        for (x, y) in a.iter().zip(b.iter()) {
            acc += (*x as f64) * (*y as f64);
        }
        acc as f32
    } else {
        let mut acc = 0.0f32;
        for (x, y) in a.iter().zip(b.iter()) {
            acc += x * y;
        }
        acc
    }
}

#[inline]
pub(crate) fn norm_sq(v: &[f32]) -> f32 {
    dot(v, v)
}

/// Exact distance between two vectors: `Σ(aᵢ−bᵢ)²` for squared Euclidean,
/// `−(a·b)` for inner product.
pub fn exact_distance(a: &[f32], b: &[f32], metric: Metric) -> Result<f32> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(match metric {
        Metric::SquaredEuclidean => l2_sq(a, b),
        Metric::InnerProduct => -dot(a, b),
    })
}

/// Squared norm of every base vector, indexed by vector id.
pub fn precompute_base_norms(dataset: &Dataset) -> Result<Vec<f32>> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(dataset.iter().map(norm_sq).collect())
}

/// A query with its squared norm cached, so Euclidean distances reduce to a
/// single dot product against base vectors with precomputed norms.
#[derive(Debug, Clone)]
pub struct PreparedQuery {
    values: Vec<f32>,
    norm_sq: f32,
    metric: Metric,
}

impl PreparedQuery {
    pub fn new(query: &[f32], metric: Metric) -> Result<Self> {
        if query.is_empty() {
            return Err(Error::InvalidParameter("empty query vector".into()));
        }
        if query.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: 0 });
        }
        Ok(PreparedQuery {
            norm_sq: norm_sq(query),
            values: query.to_vec(),
            metric,
        })
    }

    #[inline]
    pub fn values(&self) -> &[f32] {
        &self.values
    }

    #[inline]
    pub fn norm_sq(&self) -> f32 {
        self.norm_sq
    }

    #[inline]
    pub fn metric(&self) -> Metric {
        self.metric
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub(crate) fn distance_to(&self, base: &[f32], base_norm_sq: f32) -> f32 {
        match self.metric {
            Metric::SquaredEuclidean => {
                base_norm_sq + self.norm_sq - 2.0 * dot(base, &self.values)
            }
            Metric::InnerProduct => -dot(base, &self.values),
        }
    }
}

/// Distance via the norm decomposition
/// `‖b − q‖² = ‖b‖² + ‖q‖² − 2 b·q` (inner product falls back to `−(b·q)`).
pub fn decomposed_distance(
    prepared: &PreparedQuery,
    base: &[f32],
    base_norm_sq: f32,
) -> Result<f32> {
    if base.len() != prepared.dim() {
        return Err(Error::DimensionMismatch {
            left: prepared.dim(),
            right: base.len(),
        });
    }
    Ok(prepared.distance_to(base, base_norm_sq))
}
