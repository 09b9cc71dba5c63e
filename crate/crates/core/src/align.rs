//! Orthogonal Procrustes alignment and the aligned-cosine ranking baseline.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detect::{shared_eligible_words, DetectorConfig, Method, RankedList};
use crate::error::{Error, Result};
use crate::linalg::{svd, Matrix, Svd, SvdOptions};
use crate::space::EmbeddingSpace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignOptions {
    pub unit_normalize: bool,
    pub mean_center: bool,
}

impl Default for AlignOptions {
    fn default() -> Self {
        AlignOptions {
            unit_normalize: true,
            mean_center: false,
        }
    }
}

/// Paired rows: row `i` of `x` and of `y` belong to the same word.
#[derive(Debug, Clone)]
pub struct AlignmentProblem {
    pub x: Matrix,
    pub y: Matrix,
    pub options: AlignOptions,
}

#[derive(Debug, Clone)]
pub struct OrthogonalMap {
    pub w: Matrix,
    /// `‖XW − Y‖_F` on the preprocessed rows.
    pub residual: f64,
}

/// SVD of a square matrix, capped at 1024×1024.
pub fn svd_small(m: &Matrix) -> Result<Svd> {
    if m.rows() != m.cols() {
        return Err(Error::DimensionMismatch {
            expected: m.rows(),
            found: m.cols(),
        });
    }
    svd(m, &SvdOptions::default())
}

fn preprocess(m: &Matrix, opts: AlignOptions) -> Result<Matrix> {
    let mut m = m.clone();
    if opts.mean_center && m.rows() > 0 {
        let mut mean = vec![0.0; m.cols()];
        for r in 0..m.rows() {
            for (s, v) in mean.iter_mut().zip(m.row(r)) {
                *s += v;
            }
        }
        let n = m.rows() as f64;
        for r in 0..m.rows() {
            for (v, s) in m.row_mut(r).iter_mut().zip(&mean) {
                *v -= s / n;
            }
        }
    }
    for r in 0..m.rows() {
        let norm = m.row(r).iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Degenerate(format!("row {r} is all zeros")));
        }
        if opts.unit_normalize {
            m.row_mut(r).iter_mut().for_each(|v| *v /= norm);
        }
    }
    Ok(m)
}

impl AlignmentProblem {
    pub fn new(x: Matrix, y: Matrix, options: AlignOptions) -> Result<Self> {
        if x.rows() != y.rows() {
            return Err(Error::DimensionMismatch {
                expected: x.rows(),
                found: y.rows(),
            });
        }
        if x.cols() != y.cols() {
            return Err(Error::DimensionMismatch {
                expected: x.cols(),
                found: y.cols(),
            });
        }
        Ok(AlignmentProblem { x, y, options })
    }
}

/// `W = UVᵀ` where `XᵀY = UΣVᵀ`: the orthogonal `W` minimizing `‖XW − Y‖_F`.
/// Reflections are allowed.
pub fn procrustes_fit(p: &AlignmentProblem) -> Result<OrthogonalMap> {
    let x = preprocess(&p.x, p.options)?;
    let y = preprocess(&p.y, p.options)?;
    fit_preprocessed(&x, &y)
}

fn fit_preprocessed(x: &Matrix, y: &Matrix) -> Result<OrthogonalMap> {
    let (n, d) = (x.rows(), x.cols());
    if n < d {
        warn!("aligning {n} pairs in {d} dimensions: the map is underdetermined");
    }
    let m = x.t_matmul(y)?;
    let dec = svd_small(&m)?;
    if dec.singular_values.first().is_none_or(|s| *s == 0.0) {
        return Err(Error::Degenerate("cross-covariance matrix has rank 0".into()));
    }
    let w = dec.u.matmul(&dec.vt)?;
    let residual = x.matmul(&w)?.sub(y)?.frobenius_norm();
    Ok(OrthogonalMap { w, residual })
}

fn rows_of(space: &EmbeddingSpace, words: &[&str]) -> Result<Matrix> {
    let rows = words
        .iter()
        .map(|w| space.id(w).map(|i| space.raw_row(i)))
        .collect::<Result<Vec<_>>>()?;
    Matrix::from_rows(&rows)
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Fits the map on every shared eligible word and ranks those words by
/// `1 − cos(x_w·W, y_w)`, largest first. Returns the map alongside.
pub fn aligncos(
    a: &EmbeddingSpace,
    b: &EmbeddingSpace,
    cfg: &DetectorConfig,
    opts: AlignOptions,
) -> Result<(RankedList, OrthogonalMap)> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let shared = shared_eligible_words(a, b, cfg)?;
    let words: Vec<&str> = shared.iter().map(String::as_str).collect();
    let x = preprocess(&rows_of(a, &words)?, opts)?;
    let y = preprocess(&rows_of(b, &words)?, opts)?;
    let map = fit_preprocessed(&x, &y)?;
    let xw = x.matmul(&map.w)?;
    let scored = words
        .par_iter()
        .enumerate()
        .map(|(i, w)| {
            let f = a.vocab().freq_of(w).min(b.vocab().freq_of(w));
            (w.to_string(), 1.0 - cosine(xw.row(i), y.row(i)), f)
        })
        .collect();
    let mut list = RankedList::from_scores(Method::AlignCos, scored)?;
    list.provenance.config = cfg.to_map();
    list.provenance
        .config
        .insert("unit_normalize".into(), opts.unit_normalize.to_string());
    list.provenance
        .config
        .insert("mean_center".into(), opts.mean_center.to_string());
    Ok((list, map))
}

pub fn aligncos_rank(a: &EmbeddingSpace, b: &EmbeddingSpace, cfg: &DetectorConfig) -> Result<RankedList> {
    aligncos(a, b, cfg, AlignOptions::default()).map(|(l, _)| l)
}
