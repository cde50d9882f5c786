//! Dataset file formats.
//!
//! fvecs/ivecs framing: each record is a 4-byte little-endian signed 32-bit
//! count followed by that many little-endian 32-bit payload values (floats
//! for fvecs, signed ints for ivecs). All records in a file must agree on
//! the count for fvecs. Round trips are bit-exact.

use std::path::Path;

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Bounds-checked little-endian reader over a byte slice. Never allocates
/// more than the remaining input, so hostile length fields cannot trigger
/// oversized allocations.
pub(crate) struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(bytes: &'a [u8], what: &'static str) -> Self {
        ByteReader {
            bytes,
            pos: 0,
            what,
        }
    }

    pub(crate) fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::Format {
                what: self.what,
                detail: format!(
                    "truncated: wanted {n} bytes at offset {}, {} left",
                    self.pos,
                    self.remaining()
                ),
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub(crate) fn i32(&mut self) -> Result<i32> {
        let b = self.take(4)?;
        Ok(i32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        let b = self.take(8)?;
        let mut arr = [0u8; 8];
        arr.copy_from_slice(b);
        Ok(u64::from_le_bytes(arr))
    }

    pub(crate) fn f32_vec(&mut self, n: usize) -> Result<Vec<f32>> {
        let raw = self.take(n.checked_mul(4).ok_or_else(|| Error::Format {
            what: self.what,
            detail: "length overflows".into(),
        })?)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }

    pub(crate) fn u32_vec(&mut self, n: usize) -> Result<Vec<u32>> {
        let raw = self.take(n.checked_mul(4).ok_or_else(|| Error::Format {
            what: self.what,
            detail: "length overflows".into(),
        })?)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }

    pub(crate) fn expect_end(&self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(Error::Format {
                what: self.what,
                detail: format!("{} trailing bytes after payload", self.remaining()),
            });
        }
        Ok(())
    }
}

/// Parses an fvecs byte stream. An empty input yields an empty dataset
/// (valid as a query set, rejected by index builds).
pub fn parse_fvecs(bytes: &[u8]) -> Result<Dataset> {
    let mut r = ByteReader::new(bytes, "fvecs");
    let mut dim: Option<usize> = None;
    let mut data = Vec::new();
    let mut record = 0usize;
    while r.remaining() > 0 {
        let d = r.i32()?;
        if d <= 0 {
            return Err(Error::format(
                "fvecs",
                format!("record {record} has non-positive dim {d}"),
            ));
        }
        let d = d as usize;
        match dim {
            None => dim = Some(d),
            Some(expected) if expected != d => {
                return Err(Error::format(
                    "fvecs",
                    format!("record {record} has dim {d}, expected {expected}"),
                ));
            }
            _ => {}
        }
        let values = r.f32_vec(d)?;
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::format(
                "fvecs",
                format!("record {record} has non-finite value at component {bad}"),
            ));
        }
        data.extend_from_slice(&values);
        record += 1;
    }
    match dim {
        Some(d) => Dataset::from_flat(d, data),
        None => Ok(Dataset::empty(0)),
    }
}

/// Serializes a dataset to fvecs bytes.
pub fn fvecs_to_bytes(dataset: &Dataset) -> Vec<u8> {
    let mut out = Vec::with_capacity(dataset.len() * (4 + 4 * dataset.dim()));
    for v in dataset.iter() {
        out.extend_from_slice(&(dataset.dim() as i32).to_le_bytes());
        for x in v {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

pub fn read_fvecs(path: impl AsRef<Path>) -> Result<Dataset> {
    parse_fvecs(&std::fs::read(path)?)
}

pub fn write_fvecs(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, fvecs_to_bytes(dataset))?;
    Ok(())
}

/// Parses an ivecs byte stream into id lists. Zero-length records are
/// allowed; negative ids are rejected (ids are non-negative positions).
pub fn parse_ivecs(bytes: &[u8]) -> Result<Vec<Vec<u32>>> {
    let mut r = ByteReader::new(bytes, "ivecs");
    let mut lists = Vec::new();
    let mut record = 0usize;
    while r.remaining() > 0 {
        let d = r.i32()?;
        if d < 0 {
            return Err(Error::format(
                "ivecs",
                format!("record {record} has negative length {d}"),
            ));
        }
        let mut list = Vec::with_capacity((d as usize).min(r.remaining() / 4));
        for _ in 0..d {
            let id = r.i32()?;
            if id < 0 {
                return Err(Error::format(
                    "ivecs",
                    format!("record {record} contains negative id {id}"),
                ));
            }
            list.push(id as u32);
        }
        lists.push(list);
        record += 1;
    }
    Ok(lists)
}

pub fn ivecs_to_bytes(lists: &[Vec<u32>]) -> Vec<u8> {
    let mut out = Vec::new();
    for list in lists {
        out.extend_from_slice(&(list.len() as i32).to_le_bytes());
        for &id in list {
            out.extend_from_slice(&(id as i32).to_le_bytes());
        }
    }
    out
}

pub fn read_ivecs(path: impl AsRef<Path>) -> Result<Vec<Vec<u32>>> {
    parse_ivecs(&std::fs::read(path)?)
}

pub fn write_ivecs(lists: &[Vec<u32>], path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, ivecs_to_bytes(lists))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn hand_derived_two_float_record() {
        let bytes: Vec<u8> = vec![
            0x02, 0x00, 0x00, 0x00, // dim = 2
            0x00, 0x00, 0x80, 0x3F, // 1.0
            0x00, 0x00, 0x00, 0x40, // 2.0
        ];
        let ds = parse_fvecs(&bytes).unwrap();
        assert_eq!(ds.dim(), 2);
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.vector(0), &[1.0, 2.0]);
        assert_eq!(fvecs_to_bytes(&ds), bytes);
    }

    #[test]
    fn empty_file_is_empty_dataset() {
        let ds = parse_fvecs(&[]).unwrap();
        assert!(ds.is_empty());
    }

    #[test]
    fn fvecs_round_trip_random() {
        let mut rng = StdRng::seed_from_u64(41);
        let rows: Vec<Vec<f32>> = (0..20)
            .map(|_| (0..9).map(|_| rng.gen_range(-5.0..5.0)).collect())
            .collect();
        let ds = Dataset::from_rows(&rows).unwrap();
        let bytes = fvecs_to_bytes(&ds);
        let back = parse_fvecs(&bytes).unwrap();
        assert_eq!(ds, back);
        assert_eq!(fvecs_to_bytes(&back), bytes);
    }

    #[test]
    fn inconsistent_dims_name_the_record() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&2i32.to_le_bytes());
        bytes.extend_from_slice(&1.0f32.to_le_bytes());
        bytes.extend_from_slice(&2.0f32.to_le_bytes());
        bytes.extend_from_slice(&3i32.to_le_bytes());
        bytes.extend_from_slice(&[0u8; 12]);
        let err = parse_fvecs(&bytes).unwrap_err();
        assert!(err.to_string().contains("record 1"), "{err}");
    }

    #[test]
    fn truncated_record_errors() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&4i32.to_le_bytes());
        bytes.extend_from_slice(&1.0f32.to_le_bytes());
        assert!(parse_fvecs(&bytes).is_err());
    }

    #[test]
    fn ivecs_three_ids() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&3i32.to_le_bytes());
        for id in [0i32, 5, 7] {
            bytes.extend_from_slice(&id.to_le_bytes());
        }
        let lists = parse_ivecs(&bytes).unwrap();
        assert_eq!(lists, vec![vec![0, 5, 7]]);
        assert_eq!(ivecs_to_bytes(&lists), bytes);
    }

    #[test]
    fn ivecs_empty_record_allowed() {
        let bytes = 0i32.to_le_bytes().to_vec();
        assert_eq!(parse_ivecs(&bytes).unwrap(), vec![Vec::<u32>::new()]);
    }

    #[test]
    fn ivecs_negative_id_rejected() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&1i32.to_le_bytes());
        bytes.extend_from_slice(&(-4i32).to_le_bytes());
        assert!(parse_ivecs(&bytes).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.fvecs");
        let ds = Dataset::from_rows(&[vec![1.5, -2.5], vec![0.0, 4.0]]).unwrap();
        write_fvecs(&ds, &path).unwrap();
        assert_eq!(read_fvecs(&path).unwrap(), ds);
    }
}
