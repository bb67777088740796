//! Full-batch training of the shared encoder with Adam (decoupled weight
//! decay).

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::ViewTriple;
use crate::encoder::{backward, forward, Encoder, EncoderError, EncoderGradients, EncoderParams};
use crate::graph::{NormalizedAdjacency, TextAttributedGraph};
use crate::objectives::{combined_loss, infonce_symmetric, LossError, LossReport, Negatives};
use crate::rng::sub_seed;
use crate::synthetic::{random_augment, SyntheticError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("views have {views} rows but the graph has {nodes} nodes")]
    NodeMismatch { views: usize, nodes: usize },
    #[error("non-finite loss at epoch {epoch}: {report:?}")]
    NonFinite { epoch: usize, report: LossReport },
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Augment(#[from] SyntheticError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub tau: f64,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub hidden_dim: usize,
    pub output_dim: usize,
    pub identity_encoder: bool,
    /// Above this node count negatives are subsampled.
    pub full_negatives_max_nodes: usize,
    pub sampled_negatives: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            learning_rate: 1e-3,
            lambda: crate::objectives::DEFAULT_LAMBDA,
            tau: crate::objectives::DEFAULT_TAU,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-5,
            hidden_dim: 128,
            output_dim: 64,
            identity_encoder: false,
            full_negatives_max_nodes: 2_000,
            sampled_negatives: 256,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        if self.epochs < 1 {
            return bad("epochs must be at least 1".into());
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be non-negative, got {}", self.learning_rate));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad(format!("lambda must lie in [0, 1], got {}", self.lambda));
        }
        if !(self.tau > 0.0) {
            return bad(format!("tau must be positive, got {}", self.tau));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("adam betas must lie in [0, 1)".into());
        }
        if self.hidden_dim == 0 || self.output_dim == 0 {
            return bad("encoder dimensions must be at least 1".into());
        }
        Ok(())
    }

    fn negatives(&self, num_nodes: usize, epoch: usize) -> Negatives {
        if num_nodes > self.full_negatives_max_nodes {
            Negatives::Sampled {
                per_anchor: self.sampled_negatives,
                seed: sub_seed(self.seed, 1_000 + epoch as u64),
            }
        } else {
            Negatives::All
        }
    }
}

/// First and second moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    m: EncoderGradients,
    v: EncoderGradients,
}

impl AdamState {
    pub fn new(params: &EncoderParams) -> Self {
        Self {
            step: 0,
            m: EncoderGradients::zeros_like(params),
            v: EncoderGradients::zeros_like(params),
        }
    }
}

/// One bias-corrected Adam update with decoupled weight decay.
pub fn adam_step(
    params: &mut EncoderParams,
    grads: &EncoderGradients,
    state: &mut AdamState,
    cfg: &TrainConfig,
) {
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    let update = |p: &mut Array2<f64>, g: &Array2<f64>, m: &mut Array2<f64>, v: &mut Array2<f64>| {
        ndarray::Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= cfg.learning_rate * (m_hat / (v_hat.sqrt() + cfg.eps) + cfg.weight_decay * *p);
        });
    };
    update(&mut params.w1, &grads.w1, &mut state.m.w1, &mut state.v.w1);
    update(&mut params.w2, &grads.w2, &mut state.m.w2, &mut state.v.w2);
}

/// Encodes all three views with the same parameters, evaluates the combined
/// objective, and backpropagates every view path into one gradient.
pub fn loss_and_gradients(
    params: &EncoderParams,
    adj: &NormalizedAdjacency,
    g: &TextAttributedGraph,
    views: &ViewTriple,
    lambda: f64,
    tau: f64,
    negatives: Negatives,
) -> Result<(LossReport, EncoderGradients), TrainError> {
    let (z_ori, tape_ori) = forward(params, adj, &views.ori)?;
    let (z_rel, tape_rel) = forward(params, adj, &views.rel)?;
    let (z_irr, tape_irr) = forward(params, adj, &views.irr)?;
    let (report, dz) = combined_loss(&z_ori, &z_rel, &z_irr, g, lambda, tau, negatives)?;
    let mut total = EncoderGradients::zeros_like(params);
    for (tape, d) in [(&tape_ori, &dz.ori), (&tape_rel, &dz.rel), (&tape_irr, &dz.irr)] {
        let (grads, _) = backward(tape, adj, d)?;
        total.accumulate(&grads);
    }
    Ok((report, total))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub encoder: Encoder,
    pub history: Vec<LossReport>,
}

fn check_inputs(g: &TextAttributedGraph, views: &ViewTriple, cfg: &TrainConfig) -> Result<(), TrainError> {
    cfg.validate()?;
    if views.num_nodes() != g.num_nodes() {
        return Err(TrainError::NodeMismatch {
            views: views.num_nodes(),
            nodes: g.num_nodes(),
        });
    }
    Ok(())
}

pub fn train(
    g: &TextAttributedGraph,
    views: &ViewTriple,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    check_inputs(g, views, cfg)?;
    let n = g.num_nodes();
    if cfg.identity_encoder {
        let (report, _) = combined_loss(
            &views.ori,
            &views.rel,
            &views.irr,
            g,
            cfg.lambda,
            cfg.tau,
            cfg.negatives(n, 0),
        )?;
        if !report.is_finite() {
            return Err(TrainError::NonFinite { epoch: 0, report });
        }
        return Ok(TrainOutcome {
            encoder: Encoder::Identity,
            history: vec![report; cfg.epochs],
        });
    }

    let adj = g.normalized_adjacency();
    let mut params = EncoderParams::init(views.dim(), cfg.hidden_dim, cfg.output_dim, cfg.seed)?;
    let mut state = AdamState::new(&params);
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let (report, grads) = loss_and_gradients(
            &params,
            &adj,
            g,
            views,
            cfg.lambda,
            cfg.tau,
            cfg.negatives(n, epoch),
        )?;
        if !report.is_finite() {
            return Err(TrainError::NonFinite { epoch, report });
        }
        history.push(report);
        adam_step(&mut params, &grads, &mut state, cfg);
        if !params.is_finite() {
            return Err(TrainError::NonFinite { epoch, report });
        }
    }
    Ok(TrainOutcome {
        encoder: Encoder::Gcn(params),
        history,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub p_edge_drop: f64,
    pub p_feat_mask: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            p_edge_drop: 0.2,
            p_feat_mask: 0.3,
        }
    }
}

/// Two-view contrastive baseline: every epoch draws two random augmentations
/// of `x`, encodes each over its own dropped-edge graph with shared weights,
/// and minimizes the symmetric InfoNCE between them.
pub fn train_augmentation_baseline(
    g: &TextAttributedGraph,
    x: &Array2<f64>,
    cfg: &TrainConfig,
    aug: &AugmentConfig,
) -> Result<(EncoderParams, Vec<f64>), TrainError> {
    cfg.validate()?;
    if x.nrows() != g.num_nodes() {
        return Err(TrainError::NodeMismatch {
            views: x.nrows(),
            nodes: g.num_nodes(),
        });
    }
    let mut params = EncoderParams::init(x.ncols(), cfg.hidden_dim, cfg.output_dim, cfg.seed)?;
    let mut state = AdamState::new(&params);
    let mut losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut encoded = Vec::with_capacity(2);
        for view in 0..2u64 {
            let seed = sub_seed(cfg.seed, 10_000 + 2 * epoch as u64 + view);
            let a = random_augment(x, g, aug.p_edge_drop, aug.p_feat_mask, seed)?;
            let adj = g.with_edges(&a.edges).map_err(SyntheticError::from)?.normalized_adjacency();
            let (z, tape) = forward(&params, &adj, &a.features)?;
            encoded.push((z, tape, adj));
        }
        let (loss, d1, d2) = infonce_symmetric(&encoded[0].0, &encoded[1].0, cfg.tau)?;
        if !loss.is_finite() {
            return Err(TrainError::Config(format!("non-finite baseline loss at epoch {epoch}")));
        }
        losses.push(loss);
        let mut total = EncoderGradients::zeros_like(&params);
        for ((_, tape, adj), d) in encoded.iter().zip([&d1, &d2]) {
            total.accumulate(&backward(tape, adj, d)?.0);
        }
        adam_step(&mut params, &total, &mut state, cfg);
    }
    Ok((params, losses))
}
