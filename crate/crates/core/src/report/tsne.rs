//! Exact t-SNE for small point sets, with a PCA fallback below 10 points.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{svd, Matrix, SvdOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsneConfig {
    /// `None` picks `min(30, (n − 1) / 3)`.
    pub perplexity: Option<f64>,
    pub iterations: usize,
    pub exaggeration: f64,
    pub exaggeration_iters: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub final_momentum: f64,
    /// Below this many points the top two principal components are used.
    pub pca_below: usize,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            perplexity: None,
            iterations: 1000,
            exaggeration: 12.0,
            exaggeration_iters: 250,
            learning_rate: 200.0,
            momentum: 0.5,
            final_momentum: 0.8,
            pca_below: 10,
        }
    }
}

fn squared_distances(x: &[Vec<f64>]) -> Vec<f64> {
    let n = x.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let s: f64 = x[i].iter().zip(&x[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            d[i * n + j] = s;
            d[j * n + i] = s;
        }
    }
    d
}

/// Conditional affinities with per-point precision found by bisection so the
/// row entropy matches `ln(perplexity)`, then symmetrized.
fn joint_probabilities(d: &[f64], n: usize, perplexity: f64) -> Vec<f64> {
    let target = perplexity.ln();
    let mut p = vec![0.0; n * n];
    let mut row = vec![0.0; n];
    for i in 0..n {
        let (mut beta, mut lo, mut hi) = (1.0f64, 0.0f64, f64::INFINITY);
        let dist = &d[i * n..(i + 1) * n];
        // shift by the nearest distance so the exponentials cannot all underflow
        let dmin = (0..n).filter(|&j| j != i).map(|j| dist[j]).fold(f64::INFINITY, f64::min);
        for _ in 0..200 {
            let mut sum = 0.0;
            for j in 0..n {
                row[j] = if j == i { 0.0 } else { (-(dist[j] - dmin) * beta).exp() };
                sum += row[j];
            }
            let mut h = 0.0;
            for j in 0..n {
                if j != i && row[j] > 0.0 {
                    let pj = row[j] / sum;
                    h -= pj * pj.ln();
                }
            }
            let diff = h - target;
            if diff.abs() < 1e-5 {
                break;
            }
            if diff > 0.0 {
                lo = beta;
                beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = (beta + lo) / 2.0;
            }
        }
        let sum: f64 = row.iter().sum();
        for j in 0..n {
            p[i * n + j] = row[j] / sum;
        }
    }
    let mut joint = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                joint[i * n + j] = ((p[i * n + j] + p[j * n + i]) / (2.0 * n as f64)).max(1e-12);
            }
        }
    }
    joint
}

/// Top-two principal component scores via the Gram matrix of the centered
/// points. Each axis is signed so its largest-magnitude coordinate is positive.
pub fn pca_2d(x: &[Vec<f64>]) -> Result<Vec<[f64; 2]>> {
    let n = x.len();
    let dim = x.first().map_or(0, Vec::len);
    let mean: Vec<f64> = (0..dim).map(|c| x.iter().map(|r| r[c]).sum::<f64>() / n as f64).collect();
    let centered: Vec<Vec<f64>> = x
        .iter()
        .map(|r| r.iter().zip(&mean).map(|(v, m)| v - m).collect())
        .collect();
    let mut gram = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            gram[(i, j)] = centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum();
        }
    }
    let dec = svd(&gram, &SvdOptions::default())?;
    let mut out = vec![[0.0; 2]; n];
    for axis in 0..2.min(n) {
        let s = dec.singular_values[axis].sqrt();
        let col: Vec<f64> = (0..n).map(|i| dec.u[(i, axis)] * s).collect();
        let pivot = col.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            out[i][axis] = col[i] * sign + 0.0;
        }
    }
    Ok(out)
}

/// Embeds the rows of `x` in two dimensions. Deterministic for a given seed.
pub fn tsne(x: &[Vec<f64>], seed: u64, cfg: &TsneConfig) -> Result<Vec<[f64; 2]>> {
    let n = x.len();
    if n < 3 {
        return Err(Error::TooShort { needed: 3, found: n });
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("t-SNE input".into()));
    }
    if n < cfg.pca_below {
        return pca_2d(x);
    }
    let perplexity = cfg.perplexity.unwrap_or_else(|| 30f64.min((n - 1) as f64 / 3.0));
    if !(perplexity >= 1.0 && perplexity < n as f64) {
        return Err(Error::InvalidConfig(format!("perplexity {perplexity} unusable for {n} points")));
    }
    let p = joint_probabilities(&squared_distances(x), n, perplexity);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = Normal::new(0.0, 1e-2).expect("valid normal");
    let mut y: Vec<[f64; 2]> = (0..n).map(|_| [init.sample(&mut rng), init.sample(&mut rng)]).collect();
    let mut update = vec![[0.0; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut num = vec![0.0; n * n];
    let mut grad = vec![[0.0; 2]; n];

    for iter in 0..cfg.iterations {
        let exaggerate = if iter < cfg.exaggeration_iters { cfg.exaggeration } else { 1.0 };
        let momentum = if iter < cfg.exaggeration_iters { cfg.momentum } else { cfg.final_momentum };
        let mut zsum = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let dx = y[i][0] - y[j][0];
                let dy = y[i][1] - y[j][1];
                let q = 1.0 / (1.0 + dx * dx + dy * dy);
                num[i * n + j] = q;
                num[j * n + i] = q;
                zsum += 2.0 * q;
            }
        }
        for i in 0..n {
            let mut g = [0.0; 2];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let q = num[i * n + j];
                let m = (exaggerate * p[i * n + j] - q / zsum) * q;
                g[0] += m * (y[i][0] - y[j][0]);
                g[1] += m * (y[i][1] - y[j][1]);
            }
            grad[i] = [4.0 * g[0], 4.0 * g[1]];
        }
        for i in 0..n {
            for c in 0..2 {
                gains[i][c] = if (grad[i][c] > 0.0) != (update[i][c] > 0.0) {
                    gains[i][c] + 0.2
                } else {
                    (gains[i][c] * 0.8).max(0.01)
                };
                update[i][c] = momentum * update[i][c] - cfg.learning_rate * gains[i][c] * grad[i][c];
                y[i][c] += update[i][c];
            }
        }
        for c in 0..2 {
            let mean = y.iter().map(|p| p[c]).sum::<f64>() / n as f64;
            y.iter_mut().for_each(|p| p[c] -= mean);
        }
    }
    if y.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("t-SNE diverged".into()));
    }
    Ok(y)
}
