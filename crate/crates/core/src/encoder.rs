//! Two-layer graph convolution encoder `Z = Â · relu(Â X W1) · W2` with a
//! hand-written reverse pass.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{load_matrix_f64, save_matrix_f64, EmbeddingError};
use crate::graph::NormalizedAdjacency;
use crate::rng::seeded;

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("shape mismatch in {what}: expected {expected:?}, got {got:?}")]
    Shape {
        what: &'static str,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("encoder dimensions must be at least 1, got ({0}, {1}, {2})")]
    ZeroDim(usize, usize, usize),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Matrix(#[from] EmbeddingError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub w1: Array2<f64>,
    pub w2: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderGradients {
    pub w1: Array2<f64>,
    pub w2: Array2<f64>,
}

impl EncoderGradients {
    pub fn zeros_like(params: &EncoderParams) -> Self {
        Self {
            w1: Array2::zeros(params.w1.raw_dim()),
            w2: Array2::zeros(params.w2.raw_dim()),
        }
    }

    pub fn accumulate(&mut self, other: &EncoderGradients) {
        self.w1 += &other.w1;
        self.w2 += &other.w2;
    }
}

impl EncoderParams {
    /// Glorot-uniform initialization, deterministic in `seed`.
    pub fn init(d: usize, h: usize, o: usize, seed: u64) -> Result<Self, EncoderError> {
        if d == 0 || h == 0 || o == 0 {
            return Err(EncoderError::ZeroDim(d, h, o));
        }
        let mut rng = seeded(seed);
        let mut glorot = |fan_in: usize, fan_out: usize| {
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            Array2::from_shape_simple_fn((fan_in, fan_out), || rng.random_range(-bound..=bound))
        };
        let w1 = glorot(d, h);
        let w2 = glorot(h, o);
        Ok(Self { w1, w2 })
    }

    pub fn input_dim(&self) -> usize {
        self.w1.nrows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.w2.ncols()
    }

    pub fn is_finite(&self) -> bool {
        self.w1.iter().chain(self.w2.iter()).all(|v| v.is_finite())
    }
}

/// Intermediates of one forward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    /// `Â X`
    ax: Array2<f64>,
    /// `Â X W1` (pre-activation)
    pre: Array2<f64>,
    /// `Â relu(pre)`
    ah: Array2<f64>,
    w1: Array2<f64>,
    w2: Array2<f64>,
}

pub fn forward(
    params: &EncoderParams,
    adj: &NormalizedAdjacency,
    x: &Array2<f64>,
) -> Result<(Array2<f64>, Tape), EncoderError> {
    let expected = (adj.dim(), params.input_dim());
    if x.dim() != expected {
        return Err(EncoderError::Shape {
            what: "encoder input",
            expected,
            got: x.dim(),
        });
    }
    if params.w2.nrows() != params.hidden_dim() {
        return Err(EncoderError::Shape {
            what: "second layer weights",
            expected: (params.hidden_dim(), params.output_dim()),
            got: params.w2.dim(),
        });
    }
    let ax = adj.apply(x);
    let pre = ax.dot(&params.w1);
    let hidden = pre.mapv(|v| v.max(0.0));
    let ah = adj.apply(&hidden);
    let z = ah.dot(&params.w2);
    Ok((
        z,
        Tape {
            ax,
            pre,
            ah,
            w1: params.w1.clone(),
            w2: params.w2.clone(),
        },
    ))
}

/// Reverse pass: returns parameter gradients and the input gradient `dX`.
/// `adj` must be the adjacency used in the forward pass (it is symmetric, so
/// it serves as its own transpose).
pub fn backward(
    tape: &Tape,
    adj: &NormalizedAdjacency,
    dz: &Array2<f64>,
) -> Result<(EncoderGradients, Array2<f64>), EncoderError> {
    let expected = (tape.ah.nrows(), tape.w2.ncols());
    if dz.dim() != expected {
        return Err(EncoderError::Shape {
            what: "output gradient",
            expected,
            got: dz.dim(),
        });
    }
    let dw2 = tape.ah.t().dot(dz);
    let d_ah = dz.dot(&tape.w2.t());
    let mut d_pre = adj.apply(&d_ah);
    ndarray::Zip::from(&mut d_pre)
        .and(&tape.pre)
        .for_each(|g, &p| {
            if p <= 0.0 {
                *g = 0.0;
            }
        });
    let dw1 = tape.ax.t().dot(&d_pre);
    let d_ax = d_pre.dot(&tape.w1.t());
    let dx = adj.apply(&d_ax);
    Ok((EncoderGradients { w1: dw1, w2: dw2 }, dx))
}

/// The trainable GCN or the identity map used for raw-embedding baselines.
#[derive(Debug, Clone, PartialEq)]
pub enum Encoder {
    Gcn(EncoderParams),
    Identity,
}

impl Encoder {
    pub fn encode(&self, adj: &NormalizedAdjacency, x: &Array2<f64>) -> Result<Array2<f64>, EncoderError> {
        match self {
            Encoder::Gcn(p) => Ok(forward(p, adj, x)?.0),
            Encoder::Identity => Ok(x.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub d: usize,
    pub h: usize,
    pub o: usize,
    pub seed: u64,
    pub epoch: usize,
    #[serde(default)]
    pub identity: bool,
    /// Training configuration echoed for reproducibility.
    #[serde(default)]
    pub config: serde_json::Value,
}

/// Writes `{prefix}.w1.emb1`, `{prefix}.w2.emb1` and `{prefix}.json` into
/// `dir`. Weights are stored as 32-bit floats.
pub fn save_checkpoint(
    dir: &Path,
    prefix: &str,
    encoder: &Encoder,
    meta: &CheckpointMeta,
) -> Result<(), EncoderError> {
    if let Encoder::Gcn(p) = encoder {
        save_matrix_f64(&p.w1, dir.join(format!("{prefix}.w1.emb1")))?;
        save_matrix_f64(&p.w2, dir.join(format!("{prefix}.w2.emb1")))?;
    }
    let json = serde_json::to_string_pretty(meta).expect("metadata serializes");
    fs::write(dir.join(format!("{prefix}.json")), json)?;
    Ok(())
}

pub fn load_checkpoint(dir: &Path, prefix: &str) -> Result<(Encoder, CheckpointMeta), EncoderError> {
    let raw = fs::read_to_string(dir.join(format!("{prefix}.json")))?;
    let meta: CheckpointMeta =
        serde_json::from_str(&raw).map_err(|e| EncoderError::Checkpoint(e.to_string()))?;
    if meta.identity {
        return Ok((Encoder::Identity, meta));
    }
    let w1 = load_matrix_f64(dir.join(format!("{prefix}.w1.emb1")))?;
    let w2 = load_matrix_f64(dir.join(format!("{prefix}.w2.emb1")))?;
    if w1.dim() != (meta.d, meta.h) || w2.dim() != (meta.h, meta.o) {
        return Err(EncoderError::Checkpoint(format!(
            "weight shapes {:?}, {:?} disagree with sidecar ({}, {}, {})",
            w1.dim(),
            w2.dim(),
            meta.d,
            meta.h,
            meta.o
        )));
    }
    Ok((Encoder::Gcn(EncoderParams { w1, w2 }), meta))
}
