//! Loss functions over encoded views, each with its analytic gradient.
//!
//! * [`sdm_loss`]: asymmetric contrastive loss. The anchor is the original
//!   view, the positive its own relevant view, and the negatives are the
//!   irrelevant views of all *other* nodes.
//! * [`scr_loss`]: mean neighborhood cosine distance of relevant views.
//! * [`combined_loss`]: `λ · sdm + (1 − λ) · scr`.
//! * [`infonce_symmetric`]: two-view InfoNCE used by the augmentation baseline.
//!
//! Cosine similarity is `⟨a, b⟩ / max(‖a‖‖b‖, 1e-12)`, and exactly 0 when
//! either vector is zero.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::TextAttributedGraph;
use crate::rng::{seeded, sub_seed};

pub const COSINE_FLOOR: f64 = 1e-12;
pub const DEFAULT_TAU: f64 = 0.5;
pub const DEFAULT_LAMBDA: f64 = 0.8;

#[derive(Debug, Error, PartialEq)]
pub enum LossError {
    #[error("contrastive loss needs at least 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),
    #[error("lambda must lie in [0, 1], got {0}")]
    LambdaOutOfRange(f64),
    #[error("shape mismatch: {0:?} vs {1:?}")]
    Shape((usize, usize), (usize, usize)),
    #[error("{rows} rows for a graph with {nodes} nodes")]
    GraphRows { rows: usize, nodes: usize },
}

/// Negatives drawn per anchor in [`sdm_loss`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Negatives {
    /// Every other node.
    All,
    /// A seeded uniform subset of `per_anchor` other nodes, without replacement.
    Sampled { per_anchor: usize, seed: u64 },
}

/// Per-epoch loss values; `l_total == lambda * l_sdm + (1 - lambda) * l_scr`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub l_sdm: f64,
    pub l_scr: f64,
    pub l_total: f64,
    pub lambda: f64,
    pub tau: f64,
}

impl LossReport {
    pub fn is_finite(&self) -> bool {
        self.l_sdm.is_finite() && self.l_scr.is_finite() && self.l_total.is_finite()
    }
}

/// Gradients with respect to the three encoded views.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewGradients {
    pub ori: Array2<f64>,
    pub rel: Array2<f64>,
    pub irr: Array2<f64>,
}

pub fn cosine_sim(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    CosineTerm::new(a.dot(&b), a.dot(&a), b.dot(&b)).sim
}

/// Cosine of one pair plus the coefficients of its gradient:
/// `∂sim/∂a = inv_den · b − self_a · a`, `∂sim/∂b = inv_den · a − self_b · b`.
#[derive(Debug, Clone, Copy, Default)]
struct CosineTerm {
    sim: f64,
    inv_den: f64,
    self_a: f64,
    self_b: f64,
}

impl CosineTerm {
    /// Takes squared norms; `sqrt(|a|²|b|²)` makes identical rows score exactly 1.
    fn new(dot: f64, sq_a: f64, sq_b: f64) -> Self {
        if sq_a == 0.0 || sq_b == 0.0 {
            return Self::default();
        }
        let den = (sq_a * sq_b).sqrt();
        if den >= COSINE_FLOOR {
            let raw = dot / den;
            Self {
                sim: raw.clamp(-1.0, 1.0),
                inv_den: 1.0 / den,
                self_a: raw / sq_a,
                self_b: raw / sq_b,
            }
        } else {
            Self {
                sim: (dot / COSINE_FLOOR).clamp(-1.0, 1.0),
                inv_den: 1.0 / COSINE_FLOOR,
                self_a: 0.0,
                self_b: 0.0,
            }
        }
    }
}

fn row_sq_norms(z: &Array2<f64>) -> Vec<f64> {
    z.rows().into_iter().map(|r| r.dot(&r)).collect()
}

/// All-pairs cosine between the rows of `a` and the rows of `b`.
struct CosineMatrix {
    sim: Array2<f64>,
    inv_den: Array2<f64>,
    self_a: Array2<f64>,
    self_b: Array2<f64>,
}

impl CosineMatrix {
    fn new(a: &Array2<f64>, b: &Array2<f64>) -> Self {
        let dots = a.dot(&b.t());
        let na = row_sq_norms(a);
        let nb = row_sq_norms(b);
        let shape = dots.raw_dim();
        let mut sim = Array2::zeros(shape);
        let mut inv_den = Array2::zeros(shape);
        let mut self_a = Array2::zeros(shape);
        let mut self_b = Array2::zeros(shape);
        for ((i, k), &d) in dots.indexed_iter() {
            let t = CosineTerm::new(d, na[i], nb[k]);
            sim[[i, k]] = t.sim;
            inv_den[[i, k]] = t.inv_den;
            self_a[[i, k]] = t.self_a;
            self_b[[i, k]] = t.self_b;
        }
        Self {
            sim,
            inv_den,
            self_a,
            self_b,
        }
    }

    /// Pulls `upstream = ∂L/∂sim` back onto `a` and `b`.
    fn backward(
        &self,
        a: &Array2<f64>,
        b: &Array2<f64>,
        upstream: &Array2<f64>,
    ) -> (Array2<f64>, Array2<f64>) {
        let scaled = upstream * &self.inv_den;
        let mut da = scaled.dot(b);
        let mut db = scaled.t().dot(a);
        let coef_a = (upstream * &self.self_a).sum_axis(Axis(1));
        let coef_b = (upstream * &self.self_b).sum_axis(Axis(0));
        for (i, c) in coef_a.iter().enumerate() {
            da.row_mut(i).scaled_add(-c, &a.row(i));
        }
        for (k, c) in coef_b.iter().enumerate() {
            db.row_mut(k).scaled_add(-c, &b.row(k));
        }
        (da, db)
    }
}

fn check_same_shape(a: &Array2<f64>, b: &Array2<f64>) -> Result<(), LossError> {
    if a.dim() != b.dim() {
        return Err(LossError::Shape(a.dim(), b.dim()));
    }
    Ok(())
}

fn check_tau(tau: f64) -> Result<(), LossError> {
    if !(tau > 0.0) {
        return Err(LossError::NonPositiveTemperature(tau));
    }
    Ok(())
}

/// Softmax cross-entropy of `logits[0]` against the rest, max-stabilized.
/// Returns the loss and `∂loss/∂logits`.
fn positive_softmax_loss(logits: &[f64]) -> (f64, Vec<f64>) {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let total: f64 = exps.iter().sum();
    let loss = if logits[0] == m {
        // ln(1 + rest) keeps tiny losses from rounding to zero
        exps[1..].iter().sum::<f64>().ln_1p()
    } else {
        m + total.ln() - logits[0]
    };
    let mut grad: Vec<f64> = exps.iter().map(|e| e / total).collect();
    grad[0] -= 1.0;
    (loss, grad)
}

/// Loss and gradients of the asymmetric contrastive objective, averaged over
/// anchors.
pub fn sdm_loss(
    z_ori: &Array2<f64>,
    z_rel: &Array2<f64>,
    z_irr: &Array2<f64>,
    tau: f64,
    negatives: Negatives,
) -> Result<(f64, ViewGradients), LossError> {
    check_same_shape(z_ori, z_rel)?;
    check_same_shape(z_ori, z_irr)?;
    check_tau(tau)?;
    let n = z_ori.nrows();
    if n < 2 {
        return Err(LossError::TooFewNodes(n));
    }
    let inv_n = 1.0 / n as f64;
    let n_ori = row_sq_norms(z_ori);
    let n_rel = row_sq_norms(z_rel);

    let mut d_ori = Array2::zeros(z_ori.raw_dim());
    let mut d_rel = Array2::zeros(z_rel.raw_dim());
    let mut total = 0.0;
    let mut pos_upstream = vec![0.0; n];
    let pos_terms: Vec<CosineTerm> = (0..n)
        .map(|i| CosineTerm::new(z_ori.row(i).dot(&z_rel.row(i)), n_ori[i], n_rel[i]))
        .collect();

    let d_irr = match negatives {
        Negatives::All => {
            let neg = CosineMatrix::new(z_ori, z_irr);
            let mut upstream = Array2::zeros((n, n));
            let mut logits = Vec::with_capacity(n);
            for i in 0..n {
                logits.clear();
                logits.push(pos_terms[i].sim / tau);
                logits.extend((0..n).filter(|&k| k != i).map(|k| neg.sim[[i, k]] / tau));
                let (loss, grad) = positive_softmax_loss(&logits);
                total += loss;
                pos_upstream[i] = grad[0] * inv_n / tau;
                for (slot, k) in (0..n).filter(|&k| k != i).enumerate() {
                    upstream[[i, k]] = grad[slot + 1] * inv_n / tau;
                }
            }
            let (da, db) = neg.backward(z_ori, z_irr, &upstream);
            d_ori += &da;
            db
        }
        Negatives::Sampled { per_anchor, seed } => {
            let n_irr = row_sq_norms(z_irr);
            let mut d_irr = Array2::zeros(z_irr.raw_dim());
            let take = per_anchor.min(n - 1);
            let mut logits = Vec::with_capacity(take + 1);
            for i in 0..n {
                let mut rng = seeded(sub_seed(seed, i as u64));
                let chosen: Vec<usize> = sample(&mut rng, n - 1, take)
                    .into_iter()
                    .map(|k| if k >= i { k + 1 } else { k })
                    .collect();
                let terms: Vec<CosineTerm> = chosen
                    .iter()
                    .map(|&k| CosineTerm::new(z_ori.row(i).dot(&z_irr.row(k)), n_ori[i], n_irr[k]))
                    .collect();
                logits.clear();
                logits.push(pos_terms[i].sim / tau);
                logits.extend(terms.iter().map(|t| t.sim / tau));
                let (loss, grad) = positive_softmax_loss(&logits);
                total += loss;
                pos_upstream[i] = grad[0] * inv_n / tau;
                for ((&k, t), g) in chosen.iter().zip(&terms).zip(&grad[1..]) {
                    let g = g * inv_n / tau;
                    d_ori.row_mut(i).scaled_add(g * t.inv_den, &z_irr.row(k));
                    d_ori.row_mut(i).scaled_add(-g * t.self_a, &z_ori.row(i));
                    d_irr.row_mut(k).scaled_add(g * t.inv_den, &z_ori.row(i));
                    d_irr.row_mut(k).scaled_add(-g * t.self_b, &z_irr.row(k));
                }
            }
            d_irr
        }
    };

    for i in 0..n {
        let (g, t) = (pos_upstream[i], pos_terms[i]);
        d_ori.row_mut(i).scaled_add(g * t.inv_den, &z_rel.row(i));
        d_ori.row_mut(i).scaled_add(-g * t.self_a, &z_ori.row(i));
        d_rel.row_mut(i).scaled_add(g * t.inv_den, &z_ori.row(i));
        d_rel.row_mut(i).scaled_add(-g * t.self_b, &z_rel.row(i));
    }

    Ok((
        total * inv_n,
        ViewGradients {
            ori: d_ori,
            rel: d_rel,
            irr: d_irr,
        },
    ))
}

/// Neighborhood smoothness of the relevant view; isolated nodes contribute 0.
pub fn scr_loss(
    z_rel: &Array2<f64>,
    g: &TextAttributedGraph,
) -> Result<(f64, Array2<f64>), LossError> {
    let n = z_rel.nrows();
    if n != g.num_nodes() {
        return Err(LossError::GraphRows {
            rows: n,
            nodes: g.num_nodes(),
        });
    }
    let mut grad = Array2::zeros(z_rel.raw_dim());
    if n == 0 {
        return Ok((0.0, grad));
    }
    let norms = row_sq_norms(z_rel);
    let mut total = 0.0;
    for i in 0..n {
        let deg = g.degree(i);
        if deg == 0 {
            continue;
        }
        let weight = 1.0 / (deg as f64 * n as f64);
        let mut node_sum = 0.0;
        for &j in g.neighbors(i) {
            let t = CosineTerm::new(z_rel.row(i).dot(&z_rel.row(j)), norms[i], norms[j]);
            node_sum += 1.0 - t.sim;
            let up = -weight;
            grad.row_mut(i).scaled_add(up * t.inv_den, &z_rel.row(j));
            grad.row_mut(i).scaled_add(-up * t.self_a, &z_rel.row(i));
            grad.row_mut(j).scaled_add(up * t.inv_den, &z_rel.row(i));
            grad.row_mut(j).scaled_add(-up * t.self_b, &z_rel.row(j));
        }
        total += node_sum / deg as f64;
    }
    Ok((total / n as f64, grad))
}

/// `λ · sdm + (1 − λ) · scr` with the matching gradient combination.
///
/// A term whose weight is exactly zero is not evaluated and reported as 0.
pub fn combined_loss(
    z_ori: &Array2<f64>,
    z_rel: &Array2<f64>,
    z_irr: &Array2<f64>,
    g: &TextAttributedGraph,
    lambda: f64,
    tau: f64,
    negatives: Negatives,
) -> Result<(LossReport, ViewGradients), LossError> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(LossError::LambdaOutOfRange(lambda));
    }
    check_tau(tau)?;
    check_same_shape(z_ori, z_rel)?;
    check_same_shape(z_ori, z_irr)?;

    let mut grads = ViewGradients {
        ori: Array2::zeros(z_ori.raw_dim()),
        rel: Array2::zeros(z_rel.raw_dim()),
        irr: Array2::zeros(z_irr.raw_dim()),
    };
    let mut l_sdm = 0.0;
    let mut l_scr = 0.0;
    if lambda > 0.0 {
        let (loss, sg) = sdm_loss(z_ori, z_rel, z_irr, tau, negatives)?;
        l_sdm = loss;
        grads.ori.scaled_add(lambda, &sg.ori);
        grads.rel.scaled_add(lambda, &sg.rel);
        grads.irr.scaled_add(lambda, &sg.irr);
    }
    if lambda < 1.0 {
        let (loss, rg) = scr_loss(z_rel, g)?;
        l_scr = loss;
        grads.rel.scaled_add(1.0 - lambda, &rg);
    }
    let report = LossReport {
        l_sdm,
        l_scr,
        l_total: lambda * l_sdm + (1.0 - lambda) * l_scr,
        lambda,
        tau,
    };
    Ok((report, grads))
}

/// Symmetric two-view InfoNCE: node `i` of one view is the positive for node
/// `i` of the other; all other nodes of the other view are negatives.
pub fn infonce_symmetric(
    z1: &Array2<f64>,
    z2: &Array2<f64>,
    tau: f64,
) -> Result<(f64, Array2<f64>, Array2<f64>), LossError> {
    check_same_shape(z1, z2)?;
    check_tau(tau)?;
    let n = z1.nrows();
    if n < 2 {
        return Err(LossError::TooFewNodes(n));
    }
    let cm = CosineMatrix::new(z1, z2);
    let logits = cm.sim.mapv(|s| s / tau);
    let scale = 1.0 / (2.0 * n as f64 * tau);
    let mut upstream = Array2::zeros((n, n));
    let mut total = 0.0;
    let mut row = Vec::with_capacity(n);
    for (axis, transpose) in [(Axis(0), false), (Axis(1), true)] {
        for (i, lane) in logits.axis_iter(axis).enumerate() {
            // positive first, then the others in index order
            row.clear();
            row.push(lane[i]);
            row.extend((0..n).filter(|&k| k != i).map(|k| lane[k]));
            let (loss, grad) = positive_softmax_loss(&row);
            total += loss;
            let mut put = |k: usize, v: f64| {
                if transpose {
                    upstream[[k, i]] += v * scale;
                } else {
                    upstream[[i, k]] += v * scale;
                }
            };
            put(i, grad[0]);
            for (slot, k) in (0..n).filter(|&k| k != i).enumerate() {
                put(k, grad[slot + 1]);
            }
        }
    }
    let (d1, d2) = cm.backward(z1, z2, &upstream);
    Ok((total / (2.0 * n as f64), d1, d2))
}

/// Mean absolute row-wise cosine between two view matrices.
pub fn orthogonality_metric(a: &Array2<f64>, b: &Array2<f64>) -> Result<f64, LossError> {
    check_same_shape(a, b)?;
    let n = a.nrows();
    if n == 0 {
        return Ok(0.0);
    }
    let sum: f64 = a
        .rows()
        .into_iter()
        .zip(b.rows())
        .map(|(x, y)| cosine_sim(x, y).abs())
        .sum();
    Ok(sum / n as f64)
}

/// Row-wise cosine between two matrices.
pub fn rowwise_cosine(a: &Array2<f64>, b: &Array2<f64>) -> Result<Array1<f64>, LossError> {
    check_same_shape(a, b)?;
    Ok(a.rows()
        .into_iter()
        .zip(b.rows())
        .map(|(x, y)| cosine_sim(x, y))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn graph(n: usize, edges: &[(usize, usize)]) -> TextAttributedGraph {
        TextAttributedGraph::new(n, edges, vec![String::new(); n], vec![0; n]).unwrap()
    }

    #[test]
    fn cosine_cases() {
        let a = array![1.0, 2.0, -3.0];
        assert!((cosine_sim(a.view(), a.view()) - 1.0).abs() < 1e-15);
        assert_eq!(cosine_sim(array![1.0, 0.0].view(), array![0.0, 1.0].view()), 0.0);
        assert_eq!(cosine_sim(a.view(), array![0.0, 0.0, 0.0].view()), 0.0);
        assert!((cosine_sim(a.view(), (-&a).view()) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn sdm_two_node_closed_form() {
        let ori = array![[1.0, 0.0], [0.0, 1.0]];
        let irr = array![[0.0, -1.0], [-1.0, 0.0]];
        let (loss, _) = sdm_loss(&ori, &ori, &irr, 1.0, Negatives::All).unwrap();
        let expected = (1.0 + (-2.0f64).exp()).ln();
        assert!((loss - expected).abs() < 1e-12);
        assert!((loss - 0.126928).abs() < 1e-6);
    }

    #[test]
    fn sdm_equal_similarities_give_log_one_plus_k() {
        let n = 2;
        let ori = array![[1.0, 0.0], [1.0, 0.0]];
        let (loss, _) = sdm_loss(&ori, &ori, &ori, 0.7, Negatives::All).unwrap();
        assert!((loss - ((n - 1) as f64 + 1.0).ln()).abs() < 1e-12);
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn sdm_zero_irrelevant_rows_are_neutral_negatives() {
        let ori = array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let irr = Array2::zeros((3, 2));
        let (loss, grads) = sdm_loss(&ori, &ori, &irr, 0.5, Negatives::All).unwrap();
        // each anchor: -log(e^2 / (e^2 + 2 e^0))
        let expected = (1.0 + 2.0 * (-2.0f64).exp()).ln();
        assert!((loss - expected).abs() < 1e-12);
        assert!(grads.irr.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sdm_errors() {
        let one = Array2::ones((1, 3));
        assert_eq!(sdm_loss(&one, &one, &one, 1.0, Negatives::All).unwrap_err(), LossError::TooFewNodes(1));
        let two = Array2::ones((2, 3));
        assert_eq!(sdm_loss(&two, &two, &two, 0.0, Negatives::All).unwrap_err(), LossError::NonPositiveTemperature(0.0));
        assert!(matches!(sdm_loss(&two, &one, &two, 1.0, Negatives::All), Err(LossError::Shape(..))));
    }

    #[test]
    fn sampled_negatives_with_full_budget_match_all() {
        let ori = array![[1.0, 0.2], [0.1, 1.0], [0.5, -0.4], [-0.3, 0.8]];
        let rel = array![[0.9, 0.1], [0.2, 0.8], [0.4, -0.5], [-0.1, 0.9]];
        let irr = array![[0.0, 1.0], [1.0, 0.3], [-0.2, 0.1], [0.6, 0.6]];
        let (a, ga) = sdm_loss(&ori, &rel, &irr, 0.5, Negatives::All).unwrap();
        let (b, gb) = sdm_loss(&ori, &rel, &irr, 0.5, Negatives::Sampled { per_anchor: 10, seed: 1 }).unwrap();
        assert!((a - b).abs() < 1e-12);
        for (x, y) in ga.ori.iter().chain(ga.irr.iter()).zip(gb.ori.iter().chain(gb.irr.iter())) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn scr_cases() {
        let g = graph(2, &[(0, 1)]);
        let same = array![[1.0, 2.0], [1.0, 2.0]];
        assert_eq!(scr_loss(&same, &g).unwrap().0, 0.0);
        let ortho = array![[1.0, 0.0], [0.0, 1.0]];
        assert!((scr_loss(&ortho, &g).unwrap().0 - 1.0).abs() < 1e-15);
        let opposite = array![[1.0, 0.0], [-1.0, 0.0]];
        assert!((scr_loss(&opposite, &g).unwrap().0 - 2.0).abs() < 1e-15);
        let isolated = graph(2, &[]);
        let (l, gr) = scr_loss(&opposite, &isolated).unwrap();
        assert_eq!(l, 0.0);
        assert!(gr.iter().all(|&v| v == 0.0));
        assert!(matches!(scr_loss(&same, &graph(3, &[])), Err(LossError::GraphRows { .. })));
    }

    #[test]
    fn combined_boundaries() {
        let g = graph(3, &[(0, 1), (1, 2)]);
        let ori = array![[1.0, 0.2], [0.1, 1.0], [0.5, -0.4]];
        let rel = array![[0.9, 0.1], [0.2, 0.8], [0.4, -0.5]];
        let irr = array![[0.0, 1.0], [1.0, 0.3], [-0.2, 0.1]];
        let (r1, _) = combined_loss(&ori, &rel, &irr, &g, 1.0, 0.5, Negatives::All).unwrap();
        assert_eq!(r1.l_total, r1.l_sdm);
        assert_eq!(r1.l_scr, 0.0);
        let (r0, g0) = combined_loss(&ori, &rel, &irr, &g, 0.0, 0.5, Negatives::All).unwrap();
        assert_eq!(r0.l_total, r0.l_scr);
        assert!(g0.ori.iter().all(|&v| v == 0.0));
        assert!(matches!(
            combined_loss(&ori, &rel, &irr, &g, 1.5, 0.5, Negatives::All),
            Err(LossError::LambdaOutOfRange(_))
        ));
        let mix = LossReport { l_sdm: 0.8, l_scr: 0.2, l_total: 0.5 * 0.8 + 0.5 * 0.2, lambda: 0.5, tau: 0.5 };
        assert!((mix.l_total - 0.5).abs() < 1e-15);
    }

    #[test]
    fn orthogonality_cases() {
        let a = array![[1.0, 2.0], [3.0, -1.0]];
        assert!((orthogonality_metric(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        let b = array![[-2.0, 1.0], [1.0, 3.0]];
        assert_eq!(orthogonality_metric(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn infonce_identical_aligned_views() {
        let z = array![[1.0, 0.0], [0.0, 1.0]];
        let (loss, _, _) = infonce_symmetric(&z, &z, 1.0).unwrap();
        let expected = (1.0 + (-1.0f64).exp()).ln();
        assert!((loss - expected).abs() < 1e-12);
    }
}
