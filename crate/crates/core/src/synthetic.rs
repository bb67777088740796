//! Planted-signal generators: stochastic block model topology, template
//! texts, view matrices with known signal/noise components, and the random
//! edge-drop / feature-mask augmentation baseline.

use ndarray::Array2;
use rand::seq::IndexedRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{tokenize, ViewTriple};
use crate::graph::{GraphError, TextAttributedGraph};
use crate::lexicon;
use crate::rng::{seeded, sub_seed};

/// Planted class prototypes must satisfy pairwise `|cos| <=` this value.
pub const PROTOTYPE_MAX_COSINE: f64 = 0.2;
const PROTOTYPE_MAX_RESAMPLES: usize = 100;

#[derive(Debug, Error)]
pub enum SyntheticError {
    #[error("invalid probability {name} = {value}")]
    InvalidProbability { name: &'static str, value: f64 },
    #[error("q > p requires heterophily mode (p = {p}, q = {q})")]
    HeterophilyNotEnabled { p: f64, q: f64 },
    #[error("need at least one class and one node per class")]
    EmptyConfig,
    #[error("lexicon for class {0} is empty")]
    EmptyLexicon(usize),
    #[error("no noise sentences supplied")]
    EmptyNoisePool,
    #[error("label {label} has no lexicon entry ({classes} classes)")]
    LabelOutOfLexicon { label: usize, classes: usize },
    #[error("dimension {dim} is smaller than the class count {classes}")]
    DimTooSmall { dim: usize, classes: usize },
    #[error("no near-orthogonal prototype for class {class} after {attempts} resamples")]
    PrototypeSampling { class: usize, attempts: usize },
    #[error("invalid standard deviation {name} = {value}")]
    InvalidSigma { name: &'static str, value: f64 },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SbmConfig {
    pub num_classes: usize,
    pub per_class: usize,
    pub p_intra: f64,
    pub q_inter: f64,
    pub seed: u64,
    #[serde(default)]
    pub heterophily: bool,
}

impl Default for SbmConfig {
    fn default() -> Self {
        Self {
            num_classes: 3,
            per_class: 100,
            p_intra: 0.5,
            q_inter: 0.05,
            seed: 0,
            heterophily: false,
        }
    }
}

impl SbmConfig {
    pub fn validate(&self) -> Result<(), SyntheticError> {
        for (name, value) in [("p", self.p_intra), ("q", self.q_inter)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(SyntheticError::InvalidProbability { name, value });
            }
        }
        if self.q_inter > self.p_intra && !self.heterophily {
            return Err(SyntheticError::HeterophilyNotEnabled {
                p: self.p_intra,
                q: self.q_inter,
            });
        }
        if self.num_classes == 0 || self.per_class == 0 {
            return Err(SyntheticError::EmptyConfig);
        }
        Ok(())
    }

    pub fn num_nodes(&self) -> usize {
        self.num_classes * self.per_class
    }
}

/// Block-labelled SBM graph with template texts from the built-in lexicon.
pub fn generate_sbm(cfg: &SbmConfig) -> Result<TextAttributedGraph, SyntheticError> {
    cfg.validate()?;
    let n = cfg.num_nodes();
    let labels: Vec<usize> = (0..n).map(|i| i / cfg.per_class).collect();
    let mut rng = seeded(sub_seed(cfg.seed, 1));
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let prob = if labels[u] == labels[v] {
                cfg.p_intra
            } else {
                cfg.q_inter
            };
            if rng.random::<f64>() < prob {
                edges.push((u, v));
            }
        }
    }
    let bare = TextAttributedGraph::new(n, &edges, vec![String::new(); n], labels)?;
    let texts = generate_texts(
        &bare,
        &lexicon::default_lexicon(cfg.num_classes),
        &lexicon::default_noise_sentences(),
        sub_seed(cfg.seed, 2),
    )?;
    Ok(bare.with_texts(texts)?)
}

/// One keyword sentence from the node's class lexicon plus one sentence from
/// the shared noise pool, in seeded random order.
pub fn generate_texts(
    g: &TextAttributedGraph,
    signal_lexicon: &[Vec<String>],
    noise_sentences: &[String],
    seed: u64,
) -> Result<Vec<String>, SyntheticError> {
    if let Some(c) = signal_lexicon.iter().position(|l| l.is_empty()) {
        return Err(SyntheticError::EmptyLexicon(c));
    }
    if noise_sentences.is_empty() {
        return Err(SyntheticError::EmptyNoisePool);
    }
    let templates = lexicon::signal_templates();
    let mut rng = seeded(seed);
    g.labels()
        .iter()
        .map(|&label| {
            let words = signal_lexicon
                .get(label)
                .ok_or(SyntheticError::LabelOutOfLexicon {
                    label,
                    classes: signal_lexicon.len(),
                })?;
            let keyword = words.choose(&mut rng).expect("lexicon checked non-empty");
            let template = templates.choose(&mut rng).expect("templates non-empty");
            let signal = template.replace("{}", keyword);
            let noise = noise_sentences.choose(&mut rng).expect("pool checked non-empty");
            Ok(if rng.random::<bool>() {
                format!("{signal} {noise}")
            } else {
                format!("{noise} {signal}")
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantConfig {
    pub dim: usize,
    pub sigma_jitter: f64,
    pub sigma_noise: f64,
    pub sigma_residual: f64,
    pub sigma_leak: f64,
    pub seed: u64,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self {
            dim: 64,
            sigma_jitter: 0.05,
            sigma_noise: 1.0,
            sigma_residual: 0.3,
            sigma_leak: 0.3,
            seed: 0,
        }
    }
}

/// Ground-truth components of the planted views:
/// `ori = signal + noise`, `rel = signal + residual`, `irr = noise + leak`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedDecomposition {
    pub prototypes: Array2<f64>,
    pub signal: Array2<f64>,
    pub noise: Array2<f64>,
    pub residual: Array2<f64>,
    pub leak: Array2<f64>,
}

impl PlantedDecomposition {
    pub fn views(&self) -> ViewTriple {
        ViewTriple {
            ori: &self.signal + &self.noise,
            rel: &self.signal + &self.residual,
            irr: &self.noise + &self.leak,
        }
    }
}

fn gaussian(rows: usize, cols: usize, sigma: f64, rng: &mut crate::rng::Rng) -> Array2<f64> {
    let dist = Normal::new(0.0, sigma).expect("sigma validated");
    Array2::from_shape_simple_fn((rows, cols), || dist.sample(rng))
}

fn sample_prototypes(
    classes: usize,
    dim: usize,
    rng: &mut crate::rng::Rng,
) -> Result<Array2<f64>, SyntheticError> {
    let mut protos = Array2::<f64>::zeros((classes, dim));
    for c in 0..classes {
        let mut attempts = 0;
        loop {
            let mut v: ndarray::Array1<f64> =
                (0..dim).map(|_| StandardNormal.sample(rng)).collect();
            let norm = v.dot(&v).sqrt();
            if norm > 0.0 {
                v /= norm;
                let ok = (0..c).all(|k| protos.row(k).dot(&v).abs() <= PROTOTYPE_MAX_COSINE);
                if ok {
                    protos.row_mut(c).assign(&v);
                    break;
                }
            }
            attempts += 1;
            if attempts > PROTOTYPE_MAX_RESAMPLES {
                return Err(SyntheticError::PrototypeSampling { class: c, attempts });
            }
        }
    }
    Ok(protos)
}

/// Draws unit class prototypes and the four Gaussian component matrices,
/// then assembles the three views from them.
pub fn plant_views(
    g: &TextAttributedGraph,
    cfg: &PlantConfig,
) -> Result<(PlantedDecomposition, ViewTriple), SyntheticError> {
    for (name, value) in [
        ("sigma_jitter", cfg.sigma_jitter),
        ("sigma_noise", cfg.sigma_noise),
        ("sigma_residual", cfg.sigma_residual),
        ("sigma_leak", cfg.sigma_leak),
    ] {
        if !(value >= 0.0 && value.is_finite()) {
            return Err(SyntheticError::InvalidSigma { name, value });
        }
    }
    let classes = g.num_classes().max(1);
    if cfg.dim < classes {
        return Err(SyntheticError::DimTooSmall {
            dim: cfg.dim,
            classes,
        });
    }
    let n = g.num_nodes();
    let d = cfg.dim;
    let mut rng = seeded(sub_seed(cfg.seed, 10));
    let prototypes = sample_prototypes(classes, d, &mut rng)?;
    let mut signal = gaussian(n, d, cfg.sigma_jitter, &mut rng);
    for (i, &label) in g.labels().iter().enumerate() {
        let mut row = signal.row_mut(i);
        row += &prototypes.row(label);
    }
    let noise = gaussian(n, d, cfg.sigma_noise, &mut rng);
    let residual = gaussian(n, d, cfg.sigma_residual, &mut rng);
    let leak = gaussian(n, d, cfg.sigma_leak, &mut rng);
    let planted = PlantedDecomposition {
        prototypes,
        signal,
        noise,
        residual,
        leak,
    };
    let views = planted.views();
    Ok((planted, views))
}

/// Output of [`random_augment`].
#[derive(Debug, Clone, PartialEq)]
pub struct Augmented {
    pub features: Array2<f64>,
    pub edges: Vec<(usize, usize)>,
    pub masked_columns: Vec<usize>,
}

/// Drops each edge with `p_edge_drop` and zeroes each feature column with
/// `p_feat_mask`, independently.
pub fn random_augment(
    x: &Array2<f64>,
    g: &TextAttributedGraph,
    p_edge_drop: f64,
    p_feat_mask: f64,
    seed: u64,
) -> Result<Augmented, SyntheticError> {
    for (name, value) in [("p_edge_drop", p_edge_drop), ("p_feat_mask", p_feat_mask)] {
        if !(0.0..=1.0).contains(&value) {
            return Err(SyntheticError::InvalidProbability { name, value });
        }
    }
    let mut rng = seeded(seed);
    let edges = g
        .edges()
        .iter()
        .copied()
        .filter(|_| rng.random::<f64>() >= p_edge_drop)
        .collect();
    let masked_columns: Vec<usize> = (0..x.ncols())
        .filter(|_| rng.random::<f64>() < p_feat_mask)
        .collect();
    let mut features = x.clone();
    for &c in &masked_columns {
        features.column_mut(c).fill(0.0);
    }
    Ok(Augmented {
        features,
        edges,
        masked_columns,
    })
}

/// Fraction of edges whose endpoints share a label (NaN for edgeless graphs).
pub fn edge_homophily(g: &TextAttributedGraph) -> f64 {
    let labels = g.labels();
    let same = g
        .edges()
        .iter()
        .filter(|&&(u, v)| labels[u] == labels[v])
        .count();
    same as f64 / g.num_edges() as f64
}

/// True when any token of `text` is one of `keywords`.
pub fn mentions_any(text: &str, keywords: &[String]) -> bool {
    tokenize(text).iter().any(|t| keywords.contains(t))
}
