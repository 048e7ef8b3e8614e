//! Vector quantization of feature grids and the index wire format.
//!
//! Wire layouts, integers little-endian:
//!
//! ```text
//! KBP1 payload:   "KBP1" u32 version  u32 H  u32 W  u64 K  u8 B  | bit stream (MSB first, zero padded)
//! KBX1 features:  "KBX1" u32 version  u64 H  u64 W  u64 dim      | H·W·dim f32
//! KBI1 indices:   "KBI1" u32 version  u32 H  u32 W  u64 K        | H·W u32
//! ```

use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::codebook::{
    read_f32_block, read_header, read_u32, read_u64, read_u8, EuclideanCodebook,
};
use crate::error::{Error, Result};
use crate::fsio::write_atomic;
use crate::geometry::{check_finite, squared_distance};

pub const PAYLOAD_MAGIC: &[u8; 4] = b"KBP1";
pub const FEATURES_MAGIC: &[u8; 4] = b"KBX1";
pub const INDICES_MAGIC: &[u8; 4] = b"KBI1";
pub const FORMAT_VERSION: u32 = 1;
pub const PAYLOAD_HEADER_LEN: usize = 25;

/// Largest codebook an index grid can address (indices are `u32`).
pub const MAX_KB_SIZE: u64 = 1 << 32;

/// `H × W` feature vectors of dimension `dim`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    height: usize,
    width: usize,
    dim: usize,
    values: Vec<f64>,
}

impl FeatureGrid {
    pub fn new(height: usize, width: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || dim == 0 {
            return Err(Error::invalid("feature grid dimensions must be >= 1"));
        }
        let expected = height
            .checked_mul(width)
            .and_then(|c| c.checked_mul(dim))
            .ok_or_else(|| Error::invalid("feature grid shape overflows"))?;
        if values.len() != expected {
            return Err(Error::invalid(format!(
                "expected {expected} values for {height}x{width}x{dim}, got {}",
                values.len()
            )));
        }
        check_finite(&values)?;
        Ok(Self {
            height,
            width,
            dim,
            values,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cell(&self, h: usize, w: usize) -> &[f64] {
        let i = h * self.width + w;
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn cells(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.values
    }

    /// Mean over cells of the squared distance to the matching cell of `other`.
    pub fn mean_squared_error(&self, other: &FeatureGrid) -> Result<f64> {
        if (self.height, self.width, self.dim) != (other.height, other.width, other.dim) {
            return Err(Error::invalid("feature grids differ in shape"));
        }
        let total: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok(total / (self.height * self.width) as f64)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + 4 * self.values.len());
        out.extend_from_slice(FEATURES_MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.height as u64).to_le_bytes());
        out.extend_from_slice(&(self.width as u64).to_le_bytes());
        out.extend_from_slice(&(self.dim as u64).to_le_bytes());
        for &x in &self.values {
            out.extend_from_slice(&(x as f32).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        read_header(bytes, FEATURES_MAGIC, FORMAT_VERSION)?;
        let h = read_u64(bytes, 8)?;
        let w = read_u64(bytes, 16)?;
        let dim = read_u64(bytes, 24)?;
        for (v, off, name) in [(h, 8, "height"), (w, 16, "width"), (dim, 24, "dim")] {
            if v == 0 {
                return Err(Error::decode(off, format!("{name} must be >= 1")));
            }
        }
        let cells = h
            .checked_mul(w)
            .ok_or_else(|| Error::decode(8, "declared shape overflows"))?;
        let values = read_f32_block(bytes, 32, cells, dim)?;
        Self::new(h as usize, w as usize, dim as usize, values)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(i) = self.values.iter().position(|&x| !(x as f32).is_finite()) {
            return Err(Error::invalid(format!(
                "value at position {i} does not fit in f32"
            )));
        }
        write_atomic(path, &self.to_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

/// `H × W` codebook indices, each below `kb_size`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexGrid {
    height: usize,
    width: usize,
    kb_size: u64,
    indices: Vec<u32>,
}

impl IndexGrid {
    pub fn new(height: usize, width: usize, kb_size: u64, indices: Vec<u32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid("index grid dimensions must be >= 1"));
        }
        if height > u32::MAX as usize || width > u32::MAX as usize {
            return Err(Error::invalid("index grid dimensions must fit in u32"));
        }
        if kb_size == 0 || kb_size > MAX_KB_SIZE {
            return Err(Error::invalid(format!(
                "kb_size {kb_size} outside 1..=2^32"
            )));
        }
        if indices.len() != height * width {
            return Err(Error::invalid(format!(
                "expected {} indices for {height}x{width}, got {}",
                height * width,
                indices.len()
            )));
        }
        if let Some(pos) = indices.iter().position(|&i| i as u64 >= kb_size) {
            return Err(Error::invalid(format!(
                "index {} at cell {pos} is not below kb_size {kb_size}",
                indices[pos]
            )));
        }
        Ok(Self {
            height,
            width,
            kb_size,
            indices,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn kb_size(&self) -> u64 {
        self.kb_size
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn get(&self, h: usize, w: usize) -> u32 {
        self.indices[h * self.width + w]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24 + 4 * self.indices.len());
        out.extend_from_slice(INDICES_MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        out.extend_from_slice(&self.kb_size.to_le_bytes());
        for &i in &self.indices {
            out.extend_from_slice(&i.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        read_header(bytes, INDICES_MAGIC, FORMAT_VERSION)?;
        let h = read_u32(bytes, 8)? as usize;
        let w = read_u32(bytes, 12)? as usize;
        let k = read_u64(bytes, 16)?;
        if h == 0 || w == 0 {
            return Err(Error::decode(8, "grid dimensions must be >= 1"));
        }
        if k == 0 || k > MAX_KB_SIZE {
            return Err(Error::decode(16, format!("kb_size {k} outside 1..=2^32")));
        }
        let body = &bytes[24..];
        let need = h * w * 4;
        if body.len() < need {
            return Err(Error::decode(bytes.len() as u64, "truncated index data"));
        }
        if body.len() > need {
            return Err(Error::decode((24 + need) as u64, "trailing bytes"));
        }
        let mut indices = Vec::with_capacity(h * w);
        for (n, c) in body.chunks_exact(4).enumerate() {
            let i = u32::from_le_bytes(c.try_into().expect("chunk of 4"));
            if i as u64 >= k {
                return Err(Error::decode(
                    (24 + 4 * n) as u64,
                    format!("index {i} >= K = {k}"),
                ));
            }
            indices.push(i);
        }
        Self::new(h, w, k, indices)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

/// `ceil(log2 K)`, except that a one-entry codebook still spends one bit.
pub fn bits_per_index(kb_size: u64) -> Result<u8> {
    if kb_size == 0 {
        return Err(Error::invalid("codebook size must be >= 1"));
    }
    if kb_size == 1 {
        return Ok(1);
    }
    Ok((64 - (kb_size - 1).leading_zeros()) as u8)
}

/// Index of the nearest codebook vector by squared Euclidean distance,
/// smallest index on ties.
pub fn nearest(kb: &EuclideanCodebook, x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, s) in kb.vectors().enumerate() {
        let d = squared_distance(x, s);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

pub fn quantize(features: &FeatureGrid, kb: &EuclideanCodebook) -> Result<IndexGrid> {
    if features.dim() != kb.dim() {
        return Err(Error::invalid(format!(
            "feature dim {} does not match codebook dim {}",
            features.dim(),
            kb.dim()
        )));
    }
    let indices: Vec<u32> = features
        .as_flat()
        .par_chunks_exact(features.dim())
        .map(|x| nearest(kb, x).0 as u32)
        .collect();
    IndexGrid::new(
        features.height(),
        features.width(),
        kb.size() as u64,
        indices,
    )
}

/// Receiver-side lookup: replaces every index with its codebook vector.
pub fn dequantize(indices: &IndexGrid, kb: &EuclideanCodebook) -> Result<FeatureGrid> {
    if indices.kb_size() != kb.size() as u64 {
        return Err(Error::invalid(format!(
            "index grid addresses {} vectors, codebook has {}",
            indices.kb_size(),
            kb.size()
        )));
    }
    let mut values = Vec::with_capacity(indices.indices().len() * kb.dim());
    for &i in indices.indices() {
        values.extend_from_slice(kb.vector(i as usize));
    }
    FeatureGrid::new(indices.height(), indices.width(), kb.dim(), values)
}

/// Packed indices plus the framing needed to unpack them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Payload {
    pub height: u32,
    pub width: u32,
    pub kb_size: u64,
    pub bits_per_index: u8,
    pub bytes: Vec<u8>,
}

impl Payload {
    /// Bits carrying index data, excluding framing and padding.
    pub fn payload_bits(&self) -> u64 {
        self.height as u64 * self.width as u64 * self.bits_per_index as u64
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(PAYLOAD_HEADER_LEN + self.bytes.len());
        out.extend_from_slice(PAYLOAD_MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.height.to_le_bytes());
        out.extend_from_slice(&self.width.to_le_bytes());
        out.extend_from_slice(&self.kb_size.to_le_bytes());
        out.push(self.bits_per_index);
        out.extend_from_slice(&self.bytes);
        out
    }

    /// Parses the framing; the bit stream itself is checked by [`unpack`].
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        read_header(bytes, PAYLOAD_MAGIC, FORMAT_VERSION)?;
        let height = read_u32(bytes, 8)?;
        let width = read_u32(bytes, 12)?;
        let kb_size = read_u64(bytes, 16)?;
        let bits_per_index = read_u8(bytes, 24)?;
        Ok(Self {
            height,
            width,
            kb_size,
            bits_per_index,
            bytes: bytes[PAYLOAD_HEADER_LEN..].to_vec(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

struct BitWriter {
    bytes: Vec<u8>,
    acc: u64,
    filled: u32,
}

impl BitWriter {
    fn with_capacity(bits: u64) -> Self {
        Self {
            bytes: Vec::with_capacity(bits.div_ceil(8) as usize),
            acc: 0,
            filled: 0,
        }
    }

    fn put(&mut self, value: u32, width: u8) {
        self.acc = (self.acc << width) | value as u64;
        self.filled += width as u32;
        while self.filled >= 8 {
            self.filled -= 8;
            self.bytes.push((self.acc >> self.filled) as u8);
        }
        self.acc &= (1u64 << self.filled) - 1;
    }

    fn finish(mut self) -> Vec<u8> {
        if self.filled > 0 {
            self.bytes.push((self.acc << (8 - self.filled)) as u8);
        }
        self.bytes
    }
}

/// Row-major indices, `B` bits each, most significant bit first.
pub fn pack(grid: &IndexGrid) -> Payload {
    let b = bits_per_index(grid.kb_size()).expect("IndexGrid keeps kb_size >= 1");
    let mut w = BitWriter::with_capacity(grid.indices().len() as u64 * b as u64);
    for &i in grid.indices() {
        w.put(i, b);
    }
    Payload {
        height: grid.height() as u32,
        width: grid.width() as u32,
        kb_size: grid.kb_size(),
        bits_per_index: b,
        bytes: w.finish(),
    }
}

pub fn unpack(payload: &Payload) -> Result<IndexGrid> {
    let at = |o: usize| (PAYLOAD_HEADER_LEN + o) as u64;
    if payload.height == 0 || payload.width == 0 {
        return Err(Error::decode(8, "grid dimensions must be >= 1"));
    }
    if payload.kb_size == 0 || payload.kb_size > MAX_KB_SIZE {
        return Err(Error::decode(
            16,
            format!("kb_size {} outside 1..=2^32", payload.kb_size),
        ));
    }
    let b = bits_per_index(payload.kb_size)?;
    if payload.bits_per_index != b {
        return Err(Error::decode(
            24,
            format!(
                "bits_per_index {} inconsistent with K = {} (expected {b})",
                payload.bits_per_index, payload.kb_size
            ),
        ));
    }
    let cells = payload.height as usize * payload.width as usize;
    let need = (cells as u64 * b as u64).div_ceil(8) as usize;
    if payload.bytes.len() < need {
        return Err(Error::decode(
            at(payload.bytes.len()),
            format!(
                "truncated bit stream: need {need} bytes, have {}",
                payload.bytes.len()
            ),
        ));
    }
    if payload.bytes.len() > need {
        return Err(Error::decode(at(need), "trailing bytes after bit stream"));
    }

    let mut indices = Vec::with_capacity(cells);
    let mut acc: u64 = 0;
    let mut filled: u32 = 0;
    let mut bytes = payload.bytes.iter();
    let mut consumed = 0usize;
    for _ in 0..cells {
        while filled < b as u32 {
            acc = (acc << 8) | *bytes.next().expect("length checked") as u64;
            consumed += 1;
            filled += 8;
        }
        filled -= b as u32;
        let v = (acc >> filled) as u32 & (((1u64 << b) - 1) as u32);
        acc &= (1u64 << filled) - 1;
        if v as u64 >= payload.kb_size {
            return Err(Error::decode(
                at(consumed - 1),
                format!("decoded index {v} >= K = {}", payload.kb_size),
            ));
        }
        indices.push(v);
    }
    if acc != 0 {
        return Err(Error::decode(at(need - 1), "nonzero padding bits"));
    }
    IndexGrid::new(
        payload.height as usize,
        payload.width as usize,
        payload.kb_size,
        indices,
    )
}
