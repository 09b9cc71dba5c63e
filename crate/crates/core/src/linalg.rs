//! Small dense linear algebra: a row-major matrix and a one-sided Jacobi SVD.

use std::fmt;
use std::ops::{Index, IndexMut};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{}", self.rows, self.cols)?;
        for r in 0..self.rows.min(8) {
            writeln!(f, "  {:?}", &self.row(r)[..self.cols.min(8)])?;
        }
        Ok(())
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    /// Matrix with i.i.d. standard normal entries.
    pub fn random_normal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let data = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[(c, r)] = self[(r, c)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: other.rows,
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            let dst = &mut out.data[r * other.cols..(r + 1) * other.cols];
            for (k, &a) in self.row(r).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (d, &b) in dst.iter_mut().zip(other.row(k)) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · other` without materializing the transpose.
    pub fn t_matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                found: other.rows,
            });
        }
        let mut out = Matrix::zeros(self.cols, other.cols);
        for r in 0..self.rows {
            let b = other.row(r);
            for (i, &a) in self.row(r).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &bv) in dst.iter_mut().zip(b) {
                    *d += a * bv;
                }
            }
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::DimensionMismatch {
                expected: self.data.len(),
                found: other.data.len(),
            });
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `‖MᵀM − I‖_max`.
    pub fn orthogonality_error(&self) -> f64 {
        let g = self.t_matmul(self).expect("square gram");
        g.sub(&Matrix::identity(self.cols)).expect("same shape").max_abs()
    }

    /// Determinant by partial-pivot LU. Intended for small matrices.
    pub fn determinant(&self) -> Result<f64> {
        if self.rows != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                found: self.cols,
            });
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut det = 1.0;
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| a[(i, k)].abs().total_cmp(&a[(j, k)].abs()))
                .unwrap();
            if a[(p, k)] == 0.0 {
                return Ok(0.0);
            }
            if p != k {
                for c in 0..n {
                    a.data.swap(p * n + c, k * n + c);
                }
                det = -det;
            }
            let pivot = a[(k, k)];
            det *= pivot;
            for i in k + 1..n {
                let f = a[(i, k)] / pivot;
                if f != 0.0 {
                    for c in k..n {
                        let v = a[(k, c)];
                        a[(i, c)] -= f * v;
                    }
                }
            }
        }
        Ok(det)
    }

    /// Whitespace-separated text, one row per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for r in 0..self.rows {
            let line: Vec<String> = self.row(r).iter().map(|v| format!("{v:e}")).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

/// Thin SVD `M = U Σ Vᵀ` with `U` m×p, `Σ` length p, `Vᵀ` p×n where p = min(m, n).
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Matrix,
    pub singular_values: Vec<f64>,
    pub vt: Matrix,
    pub sweeps: usize,
}

impl Svd {
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for r in 0..us.rows {
            for (v, s) in us.row_mut(r).iter_mut().zip(&self.singular_values) {
                *v *= s;
            }
        }
        us.matmul(&self.vt).expect("conformant factors")
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SvdOptions {
    /// Largest accepted dimension (rows or columns).
    pub max_dim: usize,
    /// A column pair counts as orthogonal once `|aᵢ·aⱼ| ≤ tol·‖aᵢ‖‖aⱼ‖`.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for SvdOptions {
    fn default() -> Self {
        SvdOptions {
            max_dim: 1024,
            tol: 1e-10,
            max_sweeps: 100,
        }
    }
}

/// One-sided (Hestenes) Jacobi SVD.
///
/// Plane rotations are applied to column pairs of a working copy of `M` (or
/// `Mᵀ` when `M` is wide) until all pairs are orthogonal to within `opts.tol`;
/// the column norms are then the singular values. Left singular vectors for
/// zero singular values are completed to an orthonormal basis.
pub fn svd(m: &Matrix, opts: &SvdOptions) -> Result<Svd> {
    if !m.is_finite() {
        return Err(Error::NonFinite("SVD input".into()));
    }
    if m.rows.max(m.cols) > opts.max_dim {
        return Err(Error::InvalidConfig(format!(
            "SVD dimension {} exceeds cap {}",
            m.rows.max(m.cols),
            opts.max_dim
        )));
    }
    if m.rows < m.cols {
        let t = svd(&m.transpose(), opts)?;
        return Ok(Svd {
            u: t.vt.transpose(),
            singular_values: t.singular_values,
            vt: t.u.transpose(),
            sweeps: t.sweeps,
        });
    }

    let (rows, n) = (m.rows, m.cols);
    // Work on columns stored contiguously.
    let mut a: Vec<Vec<f64>> = (0..n).map(|c| (0..rows).map(|r| m[(r, c)]).collect()).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|c| (0..n).map(|r| if r == c { 1.0 } else { 0.0 }).collect())
        .collect();

    let mut sweeps = 0;
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (alpha, beta, gamma) = column_products(&a[p], &a[q]);
                if alpha == 0.0 || beta == 0.0 || gamma.abs() <= opts.tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut a, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sigma: Vec<f64> = a.iter().map(|col| norm(col)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]).then(i.cmp(&j)));
    sigma = order.iter().map(|&i| sigma[i]).collect();

    let scale = sigma.first().copied().unwrap_or(0.0);
    let zero_tol = scale * (rows.max(n) as f64) * f64::EPSILON;
    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut missing = Vec::new();
    for (k, &i) in order.iter().enumerate() {
        if sigma[k] > zero_tol && sigma[k] > 0.0 {
            u_cols.push(a[i].iter().map(|x| x / sigma[k]).collect());
        } else {
            sigma[k] = sigma[k].max(0.0);
            u_cols.push(vec![0.0; rows]);
            missing.push(k);
        }
    }
    complete_basis(&mut u_cols, &missing);

    let mut u = Matrix::zeros(rows, n);
    let mut vt = Matrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        for r in 0..rows {
            u[(r, k)] = u_cols[k][r];
        }
        vt.row_mut(k).copy_from_slice(&v[i]);
    }
    Ok(Svd {
        u,
        singular_values: sigma,
        vt,
        sweeps,
    })
}

fn column_products(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let (mut a, mut b, mut g) = (0.0, 0.0, 0.0);
    for (&xi, &yi) in x.iter().zip(y) {
        a += xi * xi;
        b += yi * yi;
        g += xi * yi;
    }
    (a, b, g)
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(q);
    for (xp, xq) in left[p].iter_mut().zip(right[0].iter_mut()) {
        let (a, b) = (*xp, *xq);
        *xp = c * a - s * b;
        *xq = s * a + c * b;
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

// Fills the columns listed in `missing` with unit vectors orthogonal to every
// other column, by Gram–Schmidt over the standard basis.
fn complete_basis(cols: &mut [Vec<f64>], missing: &[usize]) {
    if missing.is_empty() {
        return;
    }
    let rows = cols[0].len();
    let mut candidate = 0;
    for &k in missing {
        while candidate < rows {
            let mut e = vec![0.0; rows];
            e[candidate] = 1.0;
            candidate += 1;
            // two passes for numerical orthogonality
            for _ in 0..2 {
                for (j, col) in cols.iter().enumerate() {
                    if j == k || (missing.contains(&j) && col.iter().all(|&x| x == 0.0)) {
                        continue;
                    }
                    let d: f64 = e.iter().zip(col).map(|(a, b)| a * b).sum();
                    for (ei, ci) in e.iter_mut().zip(col) {
                        *ei -= d * ci;
                    }
                }
            }
            let nrm = norm(&e);
            if nrm > 1e-6 {
                cols[k] = e.into_iter().map(|x| x / nrm).collect();
                break;
            }
        }
    }
}

/// Haar-distributed random orthogonal matrix (QR of a Gaussian matrix with
/// sign correction).
pub fn random_orthogonal<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Matrix {
    let g = Matrix::random_normal(d, d, rng);
    // modified Gram–Schmidt on columns
    let mut q: Vec<Vec<f64>> = (0..d).map(|c| (0..d).map(|r| g[(r, c)]).collect()).collect();
    for j in 0..d {
        for i in 0..j {
            let (left, right) = q.split_at_mut(j);
            let d_ij: f64 = left[i].iter().zip(&right[0]).map(|(a, b)| a * b).sum();
            for (x, y) in right[0].iter_mut().zip(&left[i]) {
                *x -= d_ij * y;
            }
        }
        let n = norm(&q[j]);
        for x in q[j].iter_mut() {
            *x /= n;
        }
    }
    let mut m = Matrix::zeros(d, d);
    for (c, col) in q.iter().enumerate() {
        for (r, v) in col.iter().enumerate() {
            m[(r, c)] = *v;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn check(m: &Matrix) -> Svd {
        let s = svd(m, &SvdOptions::default()).unwrap();
        let err = s.reconstruct().sub(m).unwrap().frobenius_norm();
        assert!(err <= 1e-8 * m.frobenius_norm().max(1e-300), "reconstruction {err}");
        assert!(s.u.orthogonality_error() <= 1e-8, "U {}", s.u.orthogonality_error());
        assert!(s.vt.transpose().orthogonality_error() <= 1e-8);
        for w in s.singular_values.windows(2) {
            assert!(w[0] >= w[1]);
        }
        assert!(s.singular_values.iter().all(|&x| x >= 0.0));
        s
    }

    #[test]
    fn identity_has_unit_singular_values() {
        let s = check(&Matrix::identity(4));
        assert_eq!(s.singular_values, vec![1.0; 4]);
    }

    #[test]
    fn diagonal_case() {
        let s = check(&Matrix::diag(&[3.0, 1.0]));
        assert_eq!(s.singular_values, vec![3.0, 1.0]);
        for r in 0..2 {
            for c in 0..2 {
                let expect = if r == c { 1.0 } else { 0.0 };
                assert!((s.u[(r, c)].abs() - expect).abs() < 1e-12);
                assert!((s.vt[(r, c)].abs() - expect).abs() < 1e-12);
            }
        }
        // unsorted diagonal is reordered
        let s = check(&Matrix::diag(&[1.0, 5.0, 2.0]));
        assert_eq!(s.singular_values, vec![5.0, 2.0, 1.0]);
    }

    #[test]
    fn random_square_50() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        check(&Matrix::random_normal(50, 50, &mut rng));
    }

    #[test]
    fn rectangular_and_rank_deficient() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        check(&Matrix::random_normal(30, 7, &mut rng));
        check(&Matrix::random_normal(5, 12, &mut rng));
        let a = Matrix::random_normal(10, 2, &mut rng);
        let b = Matrix::random_normal(2, 10, &mut rng);
        let s = check(&a.matmul(&b).unwrap());
        assert!(s.singular_values[2] < 1e-10);
        let s = check(&Matrix::zeros(3, 3));
        assert_eq!(s.singular_values, vec![0.0; 3]);
    }

    #[test]
    fn singular_values_match_nalgebra() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = Matrix::random_normal(20, 20, &mut rng);
        let ours = svd(&m, &SvdOptions::default()).unwrap().singular_values;
        let na = nalgebra::DMatrix::from_row_slice(20, 20, m.as_slice());
        let mut theirs: Vec<f64> = na.singular_values().iter().copied().collect();
        theirs.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in ours.iter().zip(&theirs) {
            assert!((a - b).abs() < 1e-10 * theirs[0]);
        }
    }

    #[test]
    fn rejects_non_finite_and_oversized() {
        let mut m = Matrix::identity(2);
        m[(0, 1)] = f64::NAN;
        assert!(matches!(svd(&m, &SvdOptions::default()), Err(Error::NonFinite(_))));
        let opts = SvdOptions {
            max_dim: 3,
            ..Default::default()
        };
        assert!(svd(&Matrix::identity(4), &opts).is_err());
    }

    #[test]
    fn random_orthogonal_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q = random_orthogonal(30, &mut rng);
        assert!(q.orthogonality_error() < 1e-12);
        assert!((q.determinant().unwrap().abs() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn determinant_small() {
        let m = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        assert!((m.determinant().unwrap() - 5.0).abs() < 1e-12);
        let p = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!((p.determinant().unwrap() + 1.0).abs() < 1e-12);
    }
}
