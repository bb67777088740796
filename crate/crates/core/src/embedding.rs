//! Text-to-vector embedding by signed feature hashing, the view triple
//! container, and the EMB1 binary matrix format.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::decoupler::DecoupleRecord;

pub const DEFAULT_DIM: usize = 64;
const EMB1_MAGIC: &[u8; 4] = b"EMB1";
const EMB1_HEADER_LEN: usize = 12;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("embedding dimension must be at least 8, got {0}")]
    DimTooSmall(usize),
    #[error("{got} records supplied for a graph of {expected} nodes")]
    RecordCountMismatch { got: usize, expected: usize },
    #[error("record at position {position} belongs to node {node_id}")]
    RecordOrder { position: usize, node_id: usize },
    #[error("view shapes differ: {0:?}, {1:?}, {2:?}")]
    ShapeMismatch((usize, usize), (usize, usize), (usize, usize)),
    #[error("non-finite entry in row {row} of the {view} view")]
    NonFinite { view: &'static str, row: usize },
    #[error("bad magic bytes, expected \"EMB1\"")]
    BadMagic,
    #[error("truncated payload: header declares {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("{rows} x {cols} matrix does not fit in memory")]
    DimensionOverflow { rows: u64, cols: u64 },
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Lowercased maximal runs of alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Bucket and sign of a token. Both come from disjoint 64-bit lanes of one
/// SHA-256 digest.
fn token_slot(token: &str, dim: usize) -> (usize, f64) {
    let digest = Sha256::digest(token.as_bytes());
    let lane = |k: usize| u64::from_le_bytes(digest[8 * k..8 * k + 8].try_into().unwrap());
    let index = (lane(0) % dim as u64) as usize;
    let sign = if lane(1) & 1 == 0 { 1.0 } else { -1.0 };
    (index, sign)
}

/// Signed bag-of-words feature hashing, L2-normalized. Text without tokens
/// maps to the zero vector.
pub fn hash_embed(text: &str, dim: usize) -> Result<Array1<f64>, EmbeddingError> {
    if dim < 8 {
        return Err(EmbeddingError::DimTooSmall(dim));
    }
    let mut v = Array1::<f64>::zeros(dim);
    for tok in tokenize(text) {
        let (index, sign) = token_slot(&tok, dim);
        v[index] += sign;
    }
    let norm = v.dot(&v).sqrt();
    if norm > 0.0 {
        v /= norm;
    }
    Ok(v)
}

/// Original, relevant and irrelevant embeddings; row `i` belongs to node `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewTriple {
    pub ori: Array2<f64>,
    pub rel: Array2<f64>,
    pub irr: Array2<f64>,
}

impl ViewTriple {
    pub fn new(
        ori: Array2<f64>,
        rel: Array2<f64>,
        irr: Array2<f64>,
    ) -> Result<Self, EmbeddingError> {
        if ori.dim() != rel.dim() || ori.dim() != irr.dim() {
            return Err(EmbeddingError::ShapeMismatch(ori.dim(), rel.dim(), irr.dim()));
        }
        for (view, m) in [("ori", &ori), ("rel", &rel), ("irr", &irr)] {
            if let Some(row) = m
                .rows()
                .into_iter()
                .position(|r| r.iter().any(|v| !v.is_finite()))
            {
                return Err(EmbeddingError::NonFinite { view, row });
            }
        }
        Ok(Self { ori, rel, irr })
    }

    pub fn num_nodes(&self) -> usize {
        self.ori.nrows()
    }

    pub fn dim(&self) -> usize {
        self.ori.ncols()
    }
}

/// Embeds all three text fields of node-ordered decoupling records.
pub fn embed_views(
    records: &[DecoupleRecord],
    num_nodes: usize,
    dim: usize,
) -> Result<ViewTriple, EmbeddingError> {
    if records.len() != num_nodes {
        return Err(EmbeddingError::RecordCountMismatch {
            got: records.len(),
            expected: num_nodes,
        });
    }
    if dim < 8 {
        return Err(EmbeddingError::DimTooSmall(dim));
    }
    let mut ori = Array2::zeros((num_nodes, dim));
    let mut rel = Array2::zeros((num_nodes, dim));
    let mut irr = Array2::zeros((num_nodes, dim));
    for (i, rec) in records.iter().enumerate() {
        if rec.node_id != i {
            return Err(EmbeddingError::RecordOrder {
                position: i,
                node_id: rec.node_id,
            });
        }
        ori.row_mut(i).assign(&hash_embed(&rec.text_ori, dim)?);
        rel.row_mut(i).assign(&hash_embed(&rec.text_rel, dim)?);
        irr.row_mut(i).assign(&hash_embed(&rec.text_irr, dim)?);
    }
    ViewTriple::new(ori, rel, irr)
}

pub fn encode_emb1(m: &Array2<f32>) -> Vec<u8> {
    let mut out = Vec::with_capacity(EMB1_HEADER_LEN + 4 * m.len());
    out.extend_from_slice(EMB1_MAGIC);
    out.extend_from_slice(&(m.nrows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.ncols() as u32).to_le_bytes());
    for v in m.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_emb1(bytes: &[u8]) -> Result<Array2<f32>, EmbeddingError> {
    if bytes.len() < EMB1_HEADER_LEN {
        if !EMB1_MAGIC.starts_with(&bytes[..bytes.len().min(4)]) {
            return Err(EmbeddingError::BadMagic);
        }
        return Err(EmbeddingError::Truncated {
            expected: EMB1_HEADER_LEN,
            found: bytes.len(),
        });
    }
    if &bytes[..4] != EMB1_MAGIC {
        return Err(EmbeddingError::BadMagic);
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as u64;
    let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as u64;
    let payload = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| usize::try_from(n).ok())
        .ok_or(EmbeddingError::DimensionOverflow { rows, cols })?;
    let expected = EMB1_HEADER_LEN
        .checked_add(payload)
        .ok_or(EmbeddingError::DimensionOverflow { rows, cols })?;
    if bytes.len() < expected {
        return Err(EmbeddingError::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(EmbeddingError::TrailingBytes(bytes.len() - expected));
    }
    let data: Vec<f32> = bytes[EMB1_HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Array2::from_shape_vec((rows as usize, cols as usize), data)
        .expect("payload length checked against header"))
}

pub fn save_matrix(m: &Array2<f32>, path: impl AsRef<Path>) -> Result<(), EmbeddingError> {
    fs::write(path, encode_emb1(m))?;
    Ok(())
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<Array2<f32>, EmbeddingError> {
    decode_emb1(&fs::read(path)?)
}

/// Stores a 64-bit matrix as EMB1 (entries rounded to `f32`).
pub fn save_matrix_f64(m: &Array2<f64>, path: impl AsRef<Path>) -> Result<(), EmbeddingError> {
    save_matrix(&m.mapv(|v| v as f32), path)
}

pub fn load_matrix_f64(path: impl AsRef<Path>) -> Result<Array2<f64>, EmbeddingError> {
    Ok(load_matrix(path)?.mapv(f64::from))
}
