//! Euclidean codebooks and their `KBF1` / CSV encodings.
//!
//! `KBF1` layout, all integers little-endian:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "KBF1"
//! 4       4     u32 version (1)
//! 8       8     u64 K
//! 16      8     u64 dim
//! 24      4·K·dim  f32 values, row-major
//! ```

use std::fs;
use std::io::Read;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::format::fmt_g17;
use crate::fsio::write_atomic;
use crate::geometry::check_finite;

pub const KBF_MAGIC: &[u8; 4] = b"KBF1";
pub const KBF_VERSION: u32 = 1;
const KBF_HEADER_LEN: usize = 24;

/// An ordered set of `size` vectors of equal dimension, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EuclideanCodebook {
    dim: usize,
    data: Vec<f64>,
}

impl EuclideanCodebook {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("codebook dim must be >= 1"));
        }
        if data.is_empty() || !data.len().is_multiple_of(dim) {
            return Err(Error::invalid(format!(
                "{} values do not form a non-empty codebook of dim {dim}",
                data.len()
            )));
        }
        check_finite(&data)?;
        Ok(Self { dim, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::invalid(format!(
                    "row {i} has dim {}, expected {dim}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(dim, data)
    }

    pub fn size(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vector(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn vectors(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// New codebook holding the rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            if i >= self.size() {
                return Err(Error::invalid(format!("index {i} out of range")));
            }
            data.extend_from_slice(self.vector(i));
        }
        Self::new(self.dim, data)
    }

    pub fn to_kbf_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(KBF_HEADER_LEN + 4 * self.data.len());
        out.extend_from_slice(KBF_MAGIC);
        out.extend_from_slice(&KBF_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.size() as u64).to_le_bytes());
        out.extend_from_slice(&(self.dim as u64).to_le_bytes());
        for &x in &self.data {
            out.extend_from_slice(&(x as f32).to_le_bytes());
        }
        out
    }

    pub fn from_kbf_bytes(bytes: &[u8]) -> Result<Self> {
        let header = read_header(bytes, KBF_MAGIC, KBF_VERSION)?;
        let k = read_u64(bytes, 8)?;
        let dim = read_u64(bytes, 16)?;
        if k == 0 {
            return Err(Error::decode(8, "codebook size K must be >= 1"));
        }
        if dim == 0 {
            return Err(Error::decode(16, "dim must be >= 1"));
        }
        let data = read_f32_block(bytes, header + 16, k, dim)?;
        Self::new(dim as usize, data)
    }

    /// SHA-256 of the canonical `KBF1` bytes, lowercase hex.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_kbf_bytes()))
    }

    fn check_f32_range(&self) -> Result<()> {
        match self.data.iter().position(|&x| !(x as f32).is_finite()) {
            Some(i) => Err(Error::invalid(format!(
                "value {} at position {i} does not fit in f32",
                self.data[i]
            ))),
            None => Ok(()),
        }
    }

    pub fn write_kbf(&self, path: &Path) -> Result<()> {
        self.check_f32_range()?;
        write_atomic(path, &self.to_kbf_bytes())
    }

    pub fn read_kbf(path: &Path) -> Result<Self> {
        Self::from_kbf_bytes(&fs::read(path)?)
    }

    /// One vector per row, no header, values to 17 significant digits.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for v in self.vectors() {
            let row: Vec<String> = v.iter().map(|&x| fmt_g17(x)).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::invalid(format!("csv row {}: {e}", line + 1)))?;
            let row = rec
                .iter()
                .map(|f| {
                    f.parse::<f64>().map_err(|e| {
                        Error::invalid(format!("csv row {}: bad value {f:?}: {e}", line + 1))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Self::from_rows(&rows)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv_string().as_bytes())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        Self::from_csv_reader(fs::File::open(path)?)
    }

    /// Reads CSV when the extension is `.csv`, `KBF1` otherwise.
    pub fn load(path: &Path) -> Result<Self> {
        if is_csv(path) {
            Self::read_csv(path)
        } else {
            Self::read_kbf(path)
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if is_csv(path) {
            self.write_csv(path)
        } else {
            self.write_kbf(path)
        }
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Checks magic and version; returns the offset just past the version field.
pub(crate) fn read_header(bytes: &[u8], magic: &[u8; 4], version: u32) -> Result<usize> {
    match bytes.get(..4) {
        Some(m) if m == magic => {}
        Some(m) => {
            return Err(Error::decode(
                0,
                format!(
                    "bad magic {:?}, expected {:?}",
                    String::from_utf8_lossy(m),
                    String::from_utf8_lossy(magic)
                ),
            ))
        }
        None => return Err(Error::decode(bytes.len() as u64, "truncated magic")),
    }
    let v = read_u32(bytes, 4)?;
    if v != version {
        return Err(Error::decode(4, format!("unsupported version {v}")));
    }
    Ok(8)
}

fn field<const N: usize>(bytes: &[u8], offset: usize) -> Result<[u8; N]> {
    bytes
        .get(offset..offset + N)
        .map(|s| s.try_into().expect("slice length"))
        .ok_or_else(|| Error::decode(bytes.len() as u64, "truncated header"))
}

pub(crate) fn read_u8(bytes: &[u8], offset: usize) -> Result<u8> {
    Ok(field::<1>(bytes, offset)?[0])
}

pub(crate) fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    Ok(u32::from_le_bytes(field(bytes, offset)?))
}

pub(crate) fn read_u64(bytes: &[u8], offset: usize) -> Result<u64> {
    Ok(u64::from_le_bytes(field(bytes, offset)?))
}

/// Reads exactly `rows·cols` f32 values starting at `start`, which must end the buffer.
pub(crate) fn read_f32_block(bytes: &[u8], start: usize, rows: u64, cols: u64) -> Result<Vec<f64>> {
    let count = rows
        .checked_mul(cols)
        .and_then(|c| c.checked_mul(4))
        .ok_or_else(|| Error::decode(start as u64, "declared shape overflows"))?;
    let have = (bytes.len() - start) as u64;
    if have < count {
        return Err(Error::decode(
            bytes.len() as u64,
            format!("truncated data: expected {count} bytes of values, found {have}"),
        ));
    }
    if have > count {
        return Err(Error::decode(
            start as u64 + count,
            format!("{} trailing bytes", have - count),
        ));
    }
    bytes[start..]
        .chunks_exact(4)
        .enumerate()
        .map(|(i, c)| {
            let x = f32::from_le_bytes(c.try_into().expect("chunk of 4"));
            if x.is_finite() {
                Ok(x as f64)
            } else {
                Err(Error::decode((start + 4 * i) as u64, "non-finite value"))
            }
        })
        .collect()
}
