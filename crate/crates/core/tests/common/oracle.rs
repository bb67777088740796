//! Direct, unoptimized re-statements of the objectives and encoder, used as
//! references for the library implementations.

use ndarray::Array2;
use sdmscr::graph::TextAttributedGraph;

pub const FD_STEP: f64 = 1e-5;

/// splitmix64, kept separate from the library RNG.
pub struct Lcg(u64);

impl Lcg {
    pub fn new(seed: u64) -> Self {
        Self(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn signed(&mut self) -> f64 {
        2.0 * self.uniform() - 1.0
    }

    pub fn range(&mut self, lo: usize, hi: usize) -> usize {
        lo + (self.next_u64() % (hi - lo + 1) as u64) as usize
    }

    pub fn matrix(&mut self, rows: usize, cols: usize) -> Array2<f64> {
        Array2::from_shape_simple_fn((rows, cols), || self.signed())
    }

    pub fn graph(&mut self, n: usize, p: f64) -> TextAttributedGraph {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if self.uniform() < p {
                    edges.push((u, v));
                }
            }
        }
        TextAttributedGraph::new(n, &edges, vec![String::new(); n], vec![0; n]).unwrap()
    }
}

pub fn cos(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb).max(1e-12)).clamp(-1.0, 1.0)
}

fn row(m: &Array2<f64>, i: usize) -> Vec<f64> {
    m.row(i).to_vec()
}

pub fn sdm(ori: &Array2<f64>, rel: &Array2<f64>, irr: &Array2<f64>, tau: f64) -> f64 {
    let n = ori.nrows();
    let mut total = 0.0;
    for i in 0..n {
        let pos = (cos(&row(ori, i), &row(rel, i)) / tau).exp();
        let mut den = pos;
        for k in 0..n {
            if k != i {
                den += (cos(&row(ori, i), &row(irr, k)) / tau).exp();
            }
        }
        total += -(pos / den).ln();
    }
    total / n as f64
}

pub fn scr(rel: &Array2<f64>, g: &TextAttributedGraph) -> f64 {
    let n = rel.nrows();
    let mut total = 0.0;
    for i in 0..n {
        let nb = g.neighbors(i);
        if nb.is_empty() {
            continue;
        }
        let s: f64 = nb.iter().map(|&j| 1.0 - cos(&row(rel, i), &row(rel, j))).sum();
        total += s / nb.len() as f64;
    }
    total / n as f64
}

pub fn combined(
    ori: &Array2<f64>,
    rel: &Array2<f64>,
    irr: &Array2<f64>,
    g: &TextAttributedGraph,
    lambda: f64,
    tau: f64,
) -> f64 {
    lambda * sdm(ori, rel, irr, tau) + (1.0 - lambda) * scr(rel, g)
}

/// Dense `D^-1/2 (A + I) D^-1/2` built from the neighbor lists.
pub fn dense_adjacency(g: &TextAttributedGraph) -> Array2<f64> {
    let n = g.num_nodes();
    let mut a = Array2::<f64>::eye(n);
    for i in 0..n {
        for &j in g.neighbors(i) {
            a[[i, j]] = 1.0;
        }
    }
    let d: Vec<f64> = (0..n).map(|i| a.row(i).sum()).collect();
    Array2::from_shape_fn((n, n), |(i, j)| a[[i, j]] / (d[i] * d[j]).sqrt())
}

pub fn encode(adj: &Array2<f64>, w1: &Array2<f64>, w2: &Array2<f64>, x: &Array2<f64>) -> Array2<f64> {
    let h = adj.dot(x).dot(w1).mapv(|v| v.max(0.0));
    adj.dot(&h).dot(w2)
}

/// Central differences of `f` with respect to every entry of `x`.
pub fn numeric_gradient(x: &Array2<f64>, f: impl Fn(&Array2<f64>) -> f64) -> Array2<f64> {
    let mut grad = Array2::zeros(x.raw_dim());
    let mut probe = x.clone();
    for idx in 0..x.len() {
        let (r, c) = (idx / x.ncols(), idx % x.ncols());
        let orig = probe[[r, c]];
        probe[[r, c]] = orig + FD_STEP;
        let up = f(&probe);
        probe[[r, c]] = orig - FD_STEP;
        let down = f(&probe);
        probe[[r, c]] = orig;
        grad[[r, c]] = (up - down) / (2.0 * FD_STEP);
    }
    grad
}

/// Worst entrywise relative error, floored at 1e-6 in the denominator.
pub fn max_relative_error(analytic: &Array2<f64>, numeric: &Array2<f64>) -> f64 {
    assert_eq!(analytic.dim(), numeric.dim());
    analytic
        .iter()
        .zip(numeric.iter())
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-6))
        .fold(0.0, f64::max)
}
