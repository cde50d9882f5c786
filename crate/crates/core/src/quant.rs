//! Truncated scalar quantization.
//!
//! Per-dimension ranges are trained from order statistics rather than the
//! absolute extremes, so a handful of outliers cannot stretch the quantized
//! intervals and waste resolution on empty range. Codes are asymmetric:
//! the query stays full precision and distances are computed against the
//! implied decoded values without materializing them per candidate.

use std::path::Path;

use crate::dataset::{Dataset, Metric};
use crate::distance::WIDE_ACCUM_DIM;
use crate::error::{Error, Result};

const CODE_MAGIC: &[u8; 4] = b"VSQC";
const CODE_FORMAT_VERSION: u32 = 1;

/// Per-dimension truncated quantization ranges for b-bit codes.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizerModel {
    bits: u8,
    quantile: f32,
    lower: Vec<f32>,
    upper: Vec<f32>,
}

impl QuantizerModel {
    #[inline]
    pub fn bits(&self) -> u8 {
        self.bits
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Truncation quantile used at training time. Not persisted in code
    /// files; models loaded from disk report 1.0.
    #[inline]
    pub fn quantile(&self) -> f32 {
        self.quantile
    }

    #[inline]
    pub fn lower(&self) -> &[f32] {
        &self.lower
    }

    #[inline]
    pub fn upper(&self) -> &[f32] {
        &self.upper
    }

    /// Number of code levels minus one, i.e. `2^bits − 1`.
    #[inline]
    pub fn max_code(&self) -> u32 {
        (1u32 << self.bits) - 1
    }

    /// Bytes per encoded vector: `ceil(dim · bits / 8)`.
    #[inline]
    pub fn code_len_bytes(&self) -> usize {
        (self.dim() * self.bits as usize).div_ceil(8)
    }

    /// Width of one quantization interval in dimension `d` (0 when the
    /// dimension is constant).
    #[inline]
    pub fn interval_width(&self, d: usize) -> f32 {
        (self.upper[d] - self.lower[d]) / self.max_code() as f32
    }

    /// `Σ_d (interval_width[d] / 2)²`: the worst-case squared decode error
    /// for values inside the truncated ranges. Used by the re-rank early
    /// stop.
    pub fn quantization_error_bound(&self) -> f32 {
        (0..self.dim())
            .map(|d| {
                let half = self.interval_width(d) as f64 / 2.0;
                half * half
            })
            .sum::<f64>() as f32
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        if dim != self.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: dim,
            });
        }
        Ok(())
    }

    fn check_code_len(&self, len: usize) -> Result<()> {
        if len != self.code_len_bytes() {
            return Err(Error::Format {
                what: "code",
                detail: format!("expected {} bytes, got {len}", self.code_len_bytes()),
            });
        }
        Ok(())
    }

    /// Encodes one vector: per dimension the value is clamped to the trained
    /// range and mapped to `round((v − lower) / (upper − lower) · max_code)`,
    /// rounding half away from zero. Constant dimensions encode to 0.
    pub fn encode(&self, v: &[f32]) -> Result<Vec<u8>> {
        self.check_dim(v.len())?;
        let mut out = vec![0u8; self.code_len_bytes()];
        self.encode_into(v, &mut out);
        Ok(out)
    }

    pub(crate) fn encode_into(&self, v: &[f32], out: &mut [u8]) {
        debug_assert_eq!(out.len(), self.code_len_bytes());
        let levels = self.max_code() as f32;
        match self.bits {
            8 => {
                for (d, x) in v.iter().enumerate() {
                    out[d] = self.encode_dim(d, *x, levels) as u8;
                }
            }
            4 => {
                for (d, x) in v.iter().enumerate() {
                    let code = self.encode_dim(d, *x, levels) as u8;
                    // low nibble first
                    if d.is_multiple_of(2) {
                        out[d / 2] |= code;
                    } else {
                        out[d / 2] |= code << 4;
                    }
                }
            }
            _ => unreachable!("bits validated at construction"),
        }
    }

    #[inline]
    fn encode_dim(&self, d: usize, value: f32, levels: f32) -> u32 {
        let lo = self.lower[d];
        let hi = self.upper[d];
        if hi <= lo {
            return 0;
        }
        let clamped = value.clamp(lo, hi);
        let code = ((clamped - lo) / (hi - lo) * levels).round();
        (code as u32).min(self.max_code())
    }

    /// Reads the code of dimension `d` out of a packed code slice.
    #[inline]
    pub fn code_at(&self, code: &[u8], d: usize) -> u32 {
        match self.bits {
            8 => code[d] as u32,
            4 => {
                let byte = code[d / 2];
                if d.is_multiple_of(2) {
                    (byte & 0x0F) as u32
                } else {
                    (byte >> 4) as u32
                }
            }
            _ => unreachable!(),
        }
    }

    /// Inverse map: `lower + code · (upper − lower) / max_code` per
    /// dimension; constant dimensions decode to `lower`.
    pub fn decode(&self, code: &[u8]) -> Result<Vec<f32>> {
        self.check_code_len(code.len())?;
        let levels = self.max_code() as f32;
        Ok((0..self.dim())
            .map(|d| {
                let lo = self.lower[d];
                let hi = self.upper[d];
                if hi <= lo {
                    lo
                } else {
                    lo + self.code_at(code, d) as f32 * (hi - lo) / levels
                }
            })
            .collect())
    }

    /// Prepares a full-precision query for asymmetric distances against
    /// packed codes.
    pub fn prepare_query_lowprec(&self, query: &[f32], metric: Metric) -> Result<LowPrecQuery> {
        self.check_dim(query.len())?;
        if query.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: 0 });
        }
        let levels = self.max_code() as f32;
        let step: Vec<f32> = (0..self.dim())
            .map(|d| {
                let w = self.upper[d] - self.lower[d];
                if w > 0.0 {
                    w / levels
                } else {
                    0.0
                }
            })
            .collect();
        let kernel = match metric {
            Metric::SquaredEuclidean => LowPrecKernel::Euclidean {
                shifted: query
                    .iter()
                    .zip(&self.lower)
                    .map(|(q, lo)| q - lo)
                    .collect(),
                step,
            },
            Metric::InnerProduct => LowPrecKernel::InnerProduct {
                base: query
                    .iter()
                    .zip(&self.lower)
                    .map(|(q, lo)| (*q as f64) * (*lo as f64))
                    .sum::<f64>() as f32,
                weights: query.iter().zip(&step).map(|(q, s)| q * s).collect(),
            },
        };
        Ok(LowPrecQuery {
            bits: self.bits,
            dim: self.dim(),
            code_len: self.code_len_bytes(),
            kernel,
        })
    }
}

#[derive(Debug, Clone)]
enum LowPrecKernel {
    /// dist = Σ_d ((q_d − lower_d) − code_d · step_d)²
    Euclidean { shifted: Vec<f32>, step: Vec<f32> },
    /// dist = −(Σ_d q_d·lower_d + Σ_d (q_d·step_d) · code_d)
    InnerProduct { base: f32, weights: Vec<f32> },
}

/// A query transformed for low-precision distance computation: the distance
/// to a packed code equals the exact distance to the decoded vector.
#[derive(Debug, Clone)]
pub struct LowPrecQuery {
    bits: u8,
    dim: usize,
    code_len: usize,
    kernel: LowPrecKernel,
}

impl LowPrecQuery {
    /// Low-precision asymmetric distance to one packed code.
    pub fn distance(&self, code: &[u8]) -> Result<f32> {
        if code.len() != self.code_len {
            return Err(Error::Format {
                what: "code",
                detail: format!("expected {} bytes, got {}", self.code_len, code.len()),
            });
        }
        Ok(self.distance_unchecked(code))
    }

    #[inline]
    pub(crate) fn distance_unchecked(&self, code: &[u8]) -> f32 {
        #[inline]
        fn unpack(bits: u8, code: &[u8], d: usize) -> f32 {
            match bits {
                8 => code[d] as f32,
                _ => {
                    let byte = code[d / 2];
                    if d.is_multiple_of(2) {
                        (byte & 0x0F) as f32
                    } else {
                        (byte >> 4) as f32
                    }
                }
            }
        }
        match &self.kernel {
            LowPrecKernel::Euclidean { shifted, step } => {
                if self.dim > WIDE_ACCUM_DIM {
                    let mut acc = 0.0f64;
                    for d in 0..self.dim {
                        let r = (shifted[d] - unpack(self.bits, code, d) * step[d]) as f64;
                        acc += r * r;
                    }
                    acc as f32
                } else {
                    let mut acc = 0.0f32;
                    for d in 0..self.dim {
                        let r = shifted[d] - unpack(self.bits, code, d) * step[d];
                        acc += r * r;
                    }
                    acc
                }
            }
            LowPrecKernel::InnerProduct { base, weights } => {
                let mut acc = 0.0f32;
                for (d, w) in weights.iter().enumerate() {
                    acc += w * unpack(self.bits, code, d);
                }
                -(base + acc)
            }
        }
    }
}

/// Trains per-dimension truncated ranges: `lower[d]` is the
/// `(1 − quantile)`-order statistic and `upper[d]` the `quantile`-order
/// statistic of that dimension's values, taking the sorted element at index
/// `floor(q · (n − 1))`. `quantile = 1.0` reproduces plain min/max scalar
/// quantization.
pub fn train_quantizer(dataset: &Dataset, bits: u8, quantile: f32) -> Result<QuantizerModel> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if bits != 4 && bits != 8 {
        return Err(Error::InvalidParameter(format!(
            "bits must be 4 or 8, got {bits}"
        )));
    }
    if !(quantile > 0.5 && quantile <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "quantile must lie in (0.5, 1.0], got {quantile}"
        )));
    }
    let n = dataset.len();
    let dim = dataset.dim();
    let hi_idx = (quantile as f64 * (n - 1) as f64).floor() as usize;
    let lo_idx = ((1.0 - quantile as f64) * (n - 1) as f64).floor() as usize;
    let mut lower = Vec::with_capacity(dim);
    let mut upper = Vec::with_capacity(dim);
    let mut column = vec![0.0f32; n];
    for d in 0..dim {
        for (i, slot) in column.iter_mut().enumerate() {
            *slot = dataset.vector(i)[d];
        }
        column.sort_by(f32::total_cmp);
        let lo = column[lo_idx];
        let hi = column[hi_idx];
        lower.push(lo.min(hi));
        upper.push(hi.max(lo));
    }
    Ok(QuantizerModel {
        bits,
        quantile,
        lower,
        upper,
    })
}

/// Packed low-precision codes for a whole dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeStore {
    bits: u8,
    dim: usize,
    code_len: usize,
    count: usize,
    codes: Vec<u8>,
}

impl CodeStore {
    /// Encodes every vector of the dataset with the given model.
    pub fn encode_dataset(model: &QuantizerModel, dataset: &Dataset) -> Result<CodeStore> {
        if dataset.is_empty() {
            return Err(Error::EmptyDataset);
        }
        model.check_dim(dataset.dim())?;
        let code_len = model.code_len_bytes();
        let mut codes = vec![0u8; code_len * dataset.len()];
        for (i, v) in dataset.iter().enumerate() {
            model.encode_into(v, &mut codes[i * code_len..(i + 1) * code_len]);
        }
        Ok(CodeStore {
            bits: model.bits(),
            dim: dataset.dim(),
            code_len,
            count: dataset.len(),
            codes,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.count
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    #[inline]
    pub fn bits(&self) -> u8 {
        self.bits
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn code_len_bytes(&self) -> usize {
        self.code_len
    }

    /// Packed code bytes of vector `i`. Panics if out of range.
    #[inline]
    pub fn code(&self, i: usize) -> &[u8] {
        &self.codes[i * self.code_len..(i + 1) * self.code_len]
    }
}

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_f32(buf: &mut Vec<u8>, v: f32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

/// Serializes a trained model plus its codes:
/// magic `VSQC`, version u32, bits u32, dim u32, count u64 (little-endian),
/// per-dimension lower then upper as f32 arrays, then the packed codes.
pub fn code_store_to_bytes(model: &QuantizerModel, store: &CodeStore) -> Result<Vec<u8>> {
    model.check_dim(store.dim)?;
    if model.bits() != store.bits {
        return Err(Error::InvalidParameter(format!(
            "model is {}-bit but codes are {}-bit",
            model.bits(),
            store.bits
        )));
    }
    let mut buf = Vec::with_capacity(24 + 8 * model.dim() + store.codes.len());
    buf.extend_from_slice(CODE_MAGIC);
    put_u32(&mut buf, CODE_FORMAT_VERSION);
    put_u32(&mut buf, model.bits() as u32);
    put_u32(&mut buf, model.dim() as u32);
    buf.extend_from_slice(&(store.count as u64).to_le_bytes());
    for &v in model.lower() {
        put_f32(&mut buf, v);
    }
    for &v in model.upper() {
        put_f32(&mut buf, v);
    }
    buf.extend_from_slice(&store.codes);
    Ok(buf)
}

/// Parses a `VSQC` byte stream back into the model and codes. The training
/// quantile is not part of the format; loaded models report 1.0.
pub fn code_store_from_bytes(bytes: &[u8]) -> Result<(QuantizerModel, CodeStore)> {
    let mut r = crate::io::ByteReader::new(bytes, "code store");
    let magic = r.take(4)?;
    if magic != CODE_MAGIC {
        return Err(Error::format("code store", "bad magic"));
    }
    let version = r.u32()?;
    if version != CODE_FORMAT_VERSION {
        return Err(Error::format(
            "code store",
            format!("unsupported version {version}"),
        ));
    }
    let bits = r.u32()?;
    if bits != 4 && bits != 8 {
        return Err(Error::format("code store", format!("bits = {bits}")));
    }
    let dim = r.u32()? as usize;
    if dim == 0 {
        return Err(Error::format("code store", "zero dimension"));
    }
    let count = r.u64()?;
    let lower = r.f32_vec(dim)?;
    let upper = r.f32_vec(dim)?;
    for d in 0..dim {
        if !lower[d].is_finite() || !upper[d].is_finite() || lower[d] > upper[d] {
            return Err(Error::format(
                "code store",
                format!("invalid range in dimension {d}"),
            ));
        }
    }
    let model = QuantizerModel {
        bits: bits as u8,
        quantile: 1.0,
        lower,
        upper,
    };
    let code_len = model.code_len_bytes();
    let total = count
        .checked_mul(code_len as u64)
        .ok_or_else(|| Error::format("code store", "code section overflows"))?;
    let codes = r.take(total as usize)?.to_vec();
    r.expect_end()?;
    let store = CodeStore {
        bits: bits as u8,
        dim,
        code_len,
        count: count as usize,
        codes,
    };
    Ok((model, store))
}

pub fn save_code_store(
    model: &QuantizerModel,
    store: &CodeStore,
    path: impl AsRef<Path>,
) -> Result<()> {
    std::fs::write(path, code_store_to_bytes(model, store)?)?;
    Ok(())
}

pub fn load_code_store(path: impl AsRef<Path>) -> Result<(QuantizerModel, CodeStore)> {
    let bytes = std::fs::read(path)?;
    code_store_from_bytes(&bytes)
}
