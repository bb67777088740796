//! Evaluation of learned representations and checks of the spectral and
//! variance-reduction behaviour on synthetic graphs.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::ViewTriple;
use crate::encoder::{forward, Encoder, EncoderError};
use crate::graph::{NormalizedAdjacency, TextAttributedGraph};
use crate::objectives::{orthogonality_metric, rowwise_cosine, LossError};
use crate::rng::{seeded, sub_seed};
use crate::synthetic::{random_augment, SyntheticError};
use crate::trainer::{train_augmentation_baseline, AugmentConfig, TrainConfig, TrainError};

/// Dense eigendecomposition is refused above this node count.
pub const EIGEN_NODE_LIMIT: usize = 2_000;
const JACOBI_TOLERANCE: f64 = 1e-10;
const JACOBI_MAX_SWEEPS: usize = 100;
pub const MIN_VARIANCE_TRIALS: usize = 1_000;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("probe needs at least 2 classes in every training split, found {0}")]
    TooFewClasses(usize),
    #[error("probe inputs disagree: {rows} rows, {labels} labels")]
    LabelMismatch { rows: usize, labels: usize },
    #[error("invalid probe config: {0}")]
    ProbeConfig(String),
    #[error("graph has {0} nodes; dense eigendecomposition is limited to {EIGEN_NODE_LIMIT}")]
    TooLarge(usize),
    #[error("Jacobi iteration did not converge in {0} sweeps")]
    NotConverged(usize),
    #[error("Rayleigh quotient of the zero vector is undefined")]
    ZeroSignal,
    #[error("signal length {got} does not match {expected} nodes")]
    SignalLength { got: usize, expected: usize },
    #[error("variance experiment needs at least {MIN_VARIANCE_TRIALS} trials, got {0}")]
    TooFewTrials(usize),
    #[error("invalid noise scale {0}")]
    InvalidSigma(f64),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Synthetic(#[from] SyntheticError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeConfig {
    pub train_frac: f64,
    pub repeats: usize,
    pub seed: u64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub l2: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            train_frac: 0.5,
            repeats: 5,
            seed: 0,
            iterations: 500,
            learning_rate: 0.1,
            l2: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    /// Mean test accuracy over repeats.
    pub accuracy: f64,
    /// Sample standard deviation over repeats (0 for a single repeat).
    pub std: f64,
    pub per_repeat: Vec<f64>,
    pub train_frac: f64,
    pub repeats: usize,
    pub seed: u64,
}

/// Per-class shuffled split; every class with at least two members lands in
/// both halves.
fn stratified_split(labels: &[usize], train_frac: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut rng = seeded(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for members in &mut by_class {
        members.shuffle(&mut rng);
        let n = members.len();
        let k = if n >= 2 {
            ((train_frac * n as f64).round() as usize).clamp(1, n - 1)
        } else {
            n
        };
        train.extend_from_slice(&members[..k]);
        test.extend_from_slice(&members[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Multinomial logistic regression by full-batch gradient descent on
/// train-standardized features; returns test accuracy.
fn logistic_accuracy(
    z: &Array2<f64>,
    labels: &[usize],
    train: &[usize],
    test: &[usize],
    classes: usize,
    cfg: &ProbeConfig,
) -> f64 {
    let x_train = z.select(Axis(0), train);
    let mean = x_train.mean_axis(Axis(0)).expect("non-empty train split");
    let std = x_train.std_axis(Axis(0), 0.0).mapv(|s| if s > 1e-12 { s } else { 1.0 });
    let standardize = |m: Array2<f64>| (m - &mean) / &std;
    let x_train = standardize(x_train);
    let x_test = standardize(z.select(Axis(0), test));

    let n = train.len() as f64;
    let mut targets = Array2::<f64>::zeros((train.len(), classes));
    for (r, &i) in train.iter().enumerate() {
        targets[[r, labels[i]]] = 1.0;
    }
    let mut w = Array2::<f64>::zeros((z.ncols(), classes));
    let mut b = Array1::<f64>::zeros(classes);
    for _ in 0..cfg.iterations {
        let mut probs = x_train.dot(&w) + &b;
        for mut row in probs.rows_mut() {
            let m = row.fold(f64::NEG_INFINITY, |a, &v| a.max(v));
            row.mapv_inplace(|v| (v - m).exp());
            let s = row.sum();
            row /= s;
        }
        let err = probs - &targets;
        let grad_w = x_train.t().dot(&err) / n + &w * cfg.l2;
        let grad_b = err.sum_axis(Axis(0)) / n;
        w.scaled_add(-cfg.learning_rate, &grad_w);
        b.scaled_add(-cfg.learning_rate, &grad_b);
    }
    let scores = x_test.dot(&w) + &b;
    let correct = scores
        .rows()
        .into_iter()
        .zip(test)
        .filter(|(row, &i)| {
            let best = row
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (c, &v)| if v > acc.1 { (c, v) } else { acc })
                .0;
            best == labels[i]
        })
        .count();
    correct as f64 / test.len() as f64
}

pub fn linear_probe(
    z: &Array2<f64>,
    labels: &[usize],
    cfg: &ProbeConfig,
) -> Result<ProbeResult, AnalysisError> {
    if z.nrows() != labels.len() {
        return Err(AnalysisError::LabelMismatch {
            rows: z.nrows(),
            labels: labels.len(),
        });
    }
    if cfg.repeats == 0 || !(cfg.train_frac > 0.0 && cfg.train_frac < 1.0) {
        return Err(AnalysisError::ProbeConfig(format!(
            "need repeats >= 1 and train_frac in (0, 1), got {} and {}",
            cfg.repeats, cfg.train_frac
        )));
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut per_repeat = Vec::with_capacity(cfg.repeats);
    for r in 0..cfg.repeats {
        let (train, test) = stratified_split(labels, cfg.train_frac, sub_seed(cfg.seed, r as u64));
        let mut present: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
        present.sort_unstable();
        present.dedup();
        if present.len() < 2 {
            return Err(AnalysisError::TooFewClasses(present.len()));
        }
        if test.is_empty() {
            return Err(AnalysisError::ProbeConfig("test split is empty".into()));
        }
        per_repeat.push(logistic_accuracy(z, labels, &train, &test, classes, cfg));
    }
    let k = per_repeat.len() as f64;
    let accuracy = per_repeat.iter().sum::<f64>() / k;
    let std = if per_repeat.len() > 1 {
        (per_repeat.iter().map(|a| (a - accuracy).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(ProbeResult {
        accuracy,
        std,
        per_repeat,
        train_frac: cfg.train_frac,
        repeats: cfg.repeats,
        seed: cfg.seed,
    })
}

/// Probes of the three raw views (identity encoder).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceAblation {
    pub ori: ProbeResult,
    pub rel: ProbeResult,
    pub irr: ProbeResult,
}

pub fn subspace_ablation(
    views: &ViewTriple,
    labels: &[usize],
    cfg: &ProbeConfig,
) -> Result<SubspaceAblation, AnalysisError> {
    Ok(SubspaceAblation {
        ori: linear_probe(&views.ori, labels, cfg)?,
        rel: linear_probe(&views.rel, labels, cfg)?,
        irr: linear_probe(&views.irr, labels, cfg)?,
    })
}

/// Eigenpairs of `L = I − Â`, eigenvalues ascending, eigenvectors as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBasis {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Array2<f64>,
}

impl SpectralBasis {
    /// Fraction of `f`'s energy in the `band` lowest-frequency eigenvectors.
    pub fn low_band_fraction(&self, f: &[f64], band: usize) -> Result<f64, AnalysisError> {
        let f = Array1::from(f.to_vec());
        let total = f.dot(&f);
        if total == 0.0 {
            return Err(AnalysisError::ZeroSignal);
        }
        let coeffs = self.eigenvectors.t().dot(&f);
        let low: f64 = coeffs.iter().take(band).map(|c| c * c).sum();
        Ok((low / total).clamp(0.0, 1.0))
    }
}

fn off_diagonal_norm(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[[i, j]] * a[[i, j]];
            }
        }
    }
    s.sqrt()
}

/// Cyclic Jacobi eigendecomposition of a dense symmetric matrix.
pub fn jacobi_eigen(matrix: &Array2<f64>) -> Result<SpectralBasis, AnalysisError> {
    let n = matrix.nrows();
    let mut a = matrix.clone();
    let mut v = Array2::<f64>::eye(n);
    let mut sweeps = 0;
    while off_diagonal_norm(&a) >= JACOBI_TOLERANCE {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(AnalysisError::NotConverged(sweeps));
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[[p, q]];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[[i, i]].total_cmp(&a[[j, j]]));
    let eigenvalues = order.iter().map(|&i| a[[i, i]]).collect();
    let eigenvectors = v.select(Axis(1), &order);
    Ok(SpectralBasis {
        eigenvalues,
        eigenvectors,
    })
}

/// Dense `I − Â`.
pub fn laplacian_dense(adj: &NormalizedAdjacency) -> Result<Array2<f64>, AnalysisError> {
    if adj.dim() > EIGEN_NODE_LIMIT {
        return Err(AnalysisError::TooLarge(adj.dim()));
    }
    let a = adj.to_dense().map_err(|_| AnalysisError::TooLarge(adj.dim()))?;
    Ok(Array2::eye(adj.dim()) - a)
}

pub fn laplacian_eigen(g: &TextAttributedGraph) -> Result<SpectralBasis, AnalysisError> {
    jacobi_eigen(&laplacian_dense(&g.normalized_adjacency())?)
}

/// `fᵀ L f / fᵀ f` for `L = I − Â`.
pub fn rayleigh(adj: &NormalizedAdjacency, f: &[f64]) -> Result<f64, AnalysisError> {
    if f.len() != adj.dim() {
        return Err(AnalysisError::SignalLength {
            got: f.len(),
            expected: adj.dim(),
        });
    }
    let ff: f64 = f.iter().map(|v| v * v).sum();
    if ff == 0.0 {
        return Err(AnalysisError::ZeroSignal);
    }
    let af = adj.apply_vec(f);
    let f_af: f64 = f.iter().zip(&af).map(|(a, b)| a * b).sum();
    Ok((ff - f_af) / ff)
}

/// Mean Rayleigh quotient over the non-zero columns of `m` (NaN if none).
pub fn mean_column_rayleigh(adj: &NormalizedAdjacency, m: &Array2<f64>) -> Result<f64, AnalysisError> {
    let mut total = 0.0;
    let mut count = 0usize;
    for col in m.columns() {
        let f = col.to_vec();
        match rayleigh(adj, &f) {
            Ok(r) => {
                total += r;
                count += 1;
            }
            Err(AnalysisError::ZeroSignal) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(total / count as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSpectrum {
    /// Mean Rayleigh quotient over non-zero columns.
    pub rayleigh: f64,
    pub low_freq_energy_fraction: f64,
    pub high_freq_energy_fraction: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub eigenvalues: Vec<f64>,
    pub low_band_size: usize,
    pub signals: BTreeMap<String, SignalSpectrum>,
}

/// Rayleigh quotients and band energies for each named signal matrix; the
/// low band is the `ceil(N / 4)` smallest eigenvalues.
pub fn spectral_report(
    g: &TextAttributedGraph,
    signals: &[(&str, &Array2<f64>)],
) -> Result<SpectralReport, AnalysisError> {
    let adj = g.normalized_adjacency();
    let basis = jacobi_eigen(&laplacian_dense(&adj)?)?;
    let band = g.num_nodes().div_ceil(4);
    let mut out = BTreeMap::new();
    for &(name, m) in signals {
        let mut low = 0.0;
        let mut count = 0usize;
        for col in m.columns() {
            match basis.low_band_fraction(&col.to_vec(), band) {
                Ok(f) => {
                    low += f;
                    count += 1;
                }
                Err(AnalysisError::ZeroSignal) => {}
                Err(e) => return Err(e),
            }
        }
        let low = if count > 0 { low / count as f64 } else { 0.0 };
        out.insert(
            name.to_string(),
            SignalSpectrum {
                rayleigh: mean_column_rayleigh(&adj, m)?,
                low_freq_energy_fraction: low,
                high_freq_energy_fraction: 1.0 - low,
            },
        );
    }
    Ok(SpectralReport {
        eigenvalues: basis.eigenvalues,
        low_band_size: band,
        signals: out,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceRow {
    pub degree: usize,
    pub nodes: usize,
    pub empirical: f64,
    pub predicted: f64,
}

/// Monte Carlo variance of the neighborhood mean of iid `N(0, σ²)` residuals,
/// averaged over nodes of equal degree, next to the prediction `σ² / k`.
pub fn variance_reduction_experiment(
    g: &TextAttributedGraph,
    sigma: f64,
    trials: usize,
    seed: u64,
) -> Result<Vec<VarianceRow>, AnalysisError> {
    if trials < MIN_VARIANCE_TRIALS {
        return Err(AnalysisError::TooFewTrials(trials));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(AnalysisError::InvalidSigma(sigma));
    }
    let n = g.num_nodes();
    let normal = Normal::new(0.0, sigma).expect("sigma checked");
    let mut rng = seeded(seed);
    let mut mean = vec![0.0; n];
    let mut m2 = vec![0.0; n];
    let mut eps = vec![0.0; n];
    for t in 0..trials {
        eps.iter_mut().for_each(|e| *e = normal.sample(&mut rng));
        for i in 0..n {
            let nb = g.neighbors(i);
            if nb.is_empty() {
                continue;
            }
            let x = nb.iter().map(|&j| eps[j]).sum::<f64>() / nb.len() as f64;
            let delta = x - mean[i];
            mean[i] += delta / (t + 1) as f64;
            m2[i] += delta * (x - mean[i]);
        }
    }
    let mut buckets: BTreeMap<usize, (usize, f64)> = BTreeMap::new();
    for i in 0..n {
        let k = g.degree(i);
        if k == 0 {
            continue;
        }
        let var = m2[i] / (trials - 1) as f64;
        let entry = buckets.entry(k).or_insert((0, 0.0));
        entry.0 += 1;
        entry.1 += var;
    }
    Ok(buckets
        .into_iter()
        .map(|(degree, (nodes, sum))| VarianceRow {
            degree,
            nodes,
            empirical: sum / nodes as f64,
            predicted: sigma * sigma / degree as f64,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalityComparison {
    pub metric_sdm: f64,
    pub metric_random_aug: f64,
    /// Mean signed row-wise cosine, for the same pairs.
    pub signed_sdm: f64,
    pub signed_random_aug: f64,
}

/// Orthogonality of the encoded relevant and irrelevant views under the
/// trained encoder, against two random augmentations of the original view
/// encoded by a baseline trained with the same config.
pub fn orthogonality_comparison(
    g: &TextAttributedGraph,
    views: &ViewTriple,
    encoder: &Encoder,
    cfg: &TrainConfig,
    aug: &AugmentConfig,
) -> Result<OrthogonalityComparison, AnalysisError> {
    let adj = g.normalized_adjacency();
    let z_rel = encoder.encode(&adj, &views.rel)?;
    let z_irr = encoder.encode(&adj, &views.irr)?;
    let metric_sdm = orthogonality_metric(&z_rel, &z_irr)?;
    let signed_sdm = rowwise_cosine(&z_rel, &z_irr)?.mean().unwrap_or(0.0);

    let baseline_cfg = TrainConfig {
        identity_encoder: false,
        ..cfg.clone()
    };
    let (params, _) = train_augmentation_baseline(g, &views.ori, &baseline_cfg, aug)?;
    let mut encoded = Vec::with_capacity(2);
    for view in 0..2u64 {
        let a = random_augment(
            &views.ori,
            g,
            aug.p_edge_drop,
            aug.p_feat_mask,
            sub_seed(cfg.seed, 90_000 + view),
        )?;
        let view_adj = g.with_edges(&a.edges).map_err(SyntheticError::from)?.normalized_adjacency();
        encoded.push(forward(&params, &view_adj, &a.features)?.0);
    }
    let metric_random_aug = orthogonality_metric(&encoded[0], &encoded[1])?;
    let signed_random_aug = rowwise_cosine(&encoded[0], &encoded[1])?.mean().unwrap_or(0.0);
    Ok(OrthogonalityComparison {
        metric_sdm,
        metric_random_aug,
        signed_sdm,
        signed_random_aug,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn graph(n: usize, edges: &[(usize, usize)], labels: Vec<usize>) -> TextAttributedGraph {
        TextAttributedGraph::new(n, edges, vec![String::new(); n], labels).unwrap()
    }

    #[test]
    fn separable_one_dimensional_probe_is_perfect() {
        let labels: Vec<usize> = (0..40).map(|i| i % 2).collect();
        let z = Array2::from_shape_fn((40, 1), |(i, _)| if i % 2 == 0 { -1.0 } else { 1.0 });
        let r = linear_probe(&z, &labels, &ProbeConfig::default()).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.per_repeat.len(), 5);
    }

    #[test]
    fn uninformative_probe_is_near_chance() {
        let labels: Vec<usize> = (0..200).map(|i| i % 2).collect();
        let z = Array2::zeros((200, 4));
        let r = linear_probe(&z, &labels, &ProbeConfig { repeats: 10, ..Default::default() }).unwrap();
        assert!((r.accuracy - 0.5).abs() <= 0.1, "{}", r.accuracy);
    }

    #[test]
    fn probe_is_deterministic_and_validates() {
        let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let z = Array2::from_shape_fn((30, 3), |(i, j)| ((i * 7 + j * 3) % 11) as f64);
        let cfg = ProbeConfig::default();
        assert_eq!(linear_probe(&z, &labels, &cfg).unwrap(), linear_probe(&z, &labels, &cfg).unwrap());
        assert!(matches!(linear_probe(&z, &[0; 30], &cfg), Err(AnalysisError::TooFewClasses(1))));
        assert!(matches!(linear_probe(&z, &labels[..5], &cfg), Err(AnalysisError::LabelMismatch { .. })));
        assert!(matches!(
            linear_probe(&z, &labels, &ProbeConfig { repeats: 0, ..Default::default() }),
            Err(AnalysisError::ProbeConfig(_))
        ));
    }

    #[test]
    fn stratified_split_keeps_every_class_on_both_sides() {
        let labels = vec![0, 0, 1, 1, 1, 2, 2, 2, 2, 2];
        let (train, test) = stratified_split(&labels, 0.5, 3);
        for c in 0..3 {
            assert!(train.iter().any(|&i| labels[i] == c));
            assert!(test.iter().any(|&i| labels[i] == c));
        }
        assert_eq!(train.len() + test.len(), labels.len());
    }

    #[test]
    fn single_edge_spectrum() {
        let g = graph(2, &[(0, 1)], vec![0, 1]);
        let basis = laplacian_eigen(&g).unwrap();
        assert!((basis.eigenvalues[0] - 0.0).abs() < 1e-12);
        assert!((basis.eigenvalues[1] - 1.0).abs() < 1e-12);
        let adj = g.normalized_adjacency();
        assert!((rayleigh(&adj, &[1.0, -1.0]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn connected_graph_null_space_is_degree_weighted_constant() {
        let g = graph(4, &[(0, 1), (1, 2), (2, 3), (0, 2)], vec![0; 4]);
        let basis = laplacian_eigen(&g).unwrap();
        assert!(basis.eigenvalues[0].abs() < 1e-10);
        let expected: Vec<f64> = g.degrees().iter().map(|&d| ((d + 1) as f64).sqrt()).collect();
        let norm = expected.iter().map(|v| v * v).sum::<f64>().sqrt();
        let v0 = basis.eigenvectors.column(0);
        let dot: f64 = expected.iter().zip(v0.iter()).map(|(a, b)| a * b / norm).sum();
        assert!((dot.abs() - 1.0).abs() < 1e-10);
        let adj = g.normalized_adjacency();
        assert!(rayleigh(&adj, &expected).unwrap().abs() < 1e-14);
        assert!(basis.eigenvalues.iter().all(|&l| (-1e-12..=2.0 + 1e-9).contains(&l)));
    }

    #[test]
    fn jacobi_reconstructs_matrix() {
        let m = array![[4.0, 1.0, -2.0], [1.0, 3.0, 0.5], [-2.0, 0.5, 1.0]];
        let b = jacobi_eigen(&m).unwrap();
        let lambda = Array2::from_diag(&Array1::from(b.eigenvalues.clone()));
        let back = b.eigenvectors.dot(&lambda).dot(&b.eigenvectors.t());
        for (x, y) in back.iter().zip(m.iter()) {
            assert!((x - y).abs() < 1e-10);
        }
        assert!(b.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn rayleigh_errors() {
        let g = graph(2, &[(0, 1)], vec![0, 1]);
        let adj = g.normalized_adjacency();
        assert!(matches!(rayleigh(&adj, &[0.0, 0.0]), Err(AnalysisError::ZeroSignal)));
        assert!(matches!(rayleigh(&adj, &[1.0]), Err(AnalysisError::SignalLength { .. })));
    }

    #[test]
    fn variance_rows_for_small_degrees() {
        // star: hub has degree 3, leaves degree 1
        let g = graph(4, &[(0, 1), (0, 2), (0, 3)], vec![0; 4]);
        let rows = variance_reduction_experiment(&g, 1.0, 4_000, 5).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!((rows[0].degree, rows[0].nodes), (1, 3));
        assert!((rows[0].empirical - 1.0).abs() < 0.1, "{:?}", rows[0]);
        assert_eq!((rows[1].degree, rows[1].nodes), (3, 1));
        assert!((rows[1].predicted - 1.0 / 3.0).abs() < 1e-15);
        assert!(matches!(variance_reduction_experiment(&g, 1.0, 10, 5), Err(AnalysisError::TooFewTrials(10))));
    }

    #[test]
    fn predicted_variance_for_ten_neighbors() {
        let edges: Vec<(usize, usize)> = (1..=10).map(|j| (0, j)).collect();
        let g = graph(11, &edges, vec![0; 11]);
        let rows = variance_reduction_experiment(&g, 1.0, 1_000, 0).unwrap();
        let hub = rows.iter().find(|r| r.degree == 10).unwrap();
        assert!((hub.predicted - 0.1).abs() < 1e-15);
    }
}
