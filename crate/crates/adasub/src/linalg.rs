//! Self-contained dense numerics: minimal-norm least squares and symmetric
//! eigenvalues via cyclic Jacobi rotations.
//!
//! Everything here operates on matrices of at most a few dozen rows and
//! columns, so simplicity and verifiability win over asymptotic speed.

use crate::error::{Error, Result};

/// Relative singular-value cutoff for rank decisions.
pub const RANK_CUTOFF: f64 = 1e-10;
/// Maximum number of Jacobi sweeps before giving up.
const MAX_SWEEPS: usize = 64;

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    entries: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite matrix entry".into()));
        }
        Ok(DenseMatrix {
            rows,
            cols,
            entries,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            entries: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from column vectors.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let cols = columns.len();
        let rows = columns.first().map(|c| c.len()).unwrap_or(0);
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::DimensionMismatch(
                "columns have differing lengths".into(),
            ));
        }
        let mut m = Self::zeros(rows, cols);
        for (j, col) in columns.iter().enumerate() {
            for (i, &x) in col.iter().enumerate() {
                m[(i, j)] = x;
            }
        }
        Ok(m)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    /// `A^T x` for a vector `x` of length `rows`.
    pub fn transpose_apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[j] += self[(i, j)] * x[i];
            }
        }
        out
    }

    /// `A x` for a vector `x` of length `cols`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[i] += self[(i, j)] * x[j];
            }
        }
        out
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.entries[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.entries[i * self.cols + j]
    }
}

/// `A^T A`, exactly symmetric by construction (upper triangle copied down).
pub fn gram(a: &DenseMatrix) -> DenseMatrix {
    let n = a.cols;
    let mut g = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let mut dot = 0.0;
            for r in 0..a.rows {
                dot += a[(r, i)] * a[(r, j)];
            }
            g[(i, j)] = dot;
            g[(j, i)] = dot;
        }
    }
    g
}

/// Full symmetric eigendecomposition by cyclic Jacobi rotations.
/// Returns eigenvalues (ascending) and the matching orthonormal
/// eigenvectors as matrix columns.
pub fn sym_eigen(m: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
    if m.rows != m.cols {
        return Err(Error::DimensionMismatch("eigen needs a square matrix".into()));
    }
    let n = m.rows;
    let norm: f64 = m.entries.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut max_asym: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            max_asym = max_asym.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if max_asym > 1e-10 * norm.max(1.0) {
        return Err(Error::NotSymmetric(max_asym));
    }

    let mut a = m.clone();
    let mut v = DenseMatrix::identity(n);
    let target = 1e-12 * norm.max(f64::MIN_POSITIVE);
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let off: f64 = {
            let mut s = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    s += 2.0 * a[(i, j)] * a[(i, j)];
                }
            }
            s.sqrt()
        };
        if off < target {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() < f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        // Check once more after the final sweep.
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += 2.0 * a[(i, j)] * a[(i, j)];
            }
        }
        if off.sqrt() >= target {
            return Err(Error::NoConvergence(MAX_SWEEPS));
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    order.sort_by(|&i, &j| diag[i].total_cmp(&diag[j]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let mut vectors = DenseMatrix::zeros(n, n);
    for (new_j, &old_j) in order.iter().enumerate() {
        for i in 0..n {
            vectors[(i, new_j)] = v[(i, old_j)];
        }
    }
    Ok((eigenvalues, vectors))
}

/// Extreme eigenvalues of a symmetric matrix.
pub fn sym_eigen_extremes(m: &DenseMatrix) -> Result<(f64, f64)> {
    let (eigenvalues, _) = sym_eigen(m)?;
    match (eigenvalues.first(), eigenvalues.last()) {
        (Some(&lo), Some(&hi)) => Ok((lo, hi)),
        _ => Err(Error::DimensionMismatch("empty matrix".into())),
    }
}

/// Minimal-norm solution of `min ||b - A w||^2`, with the squared residual.
///
/// Solves through the eigendecomposition of the Gram matrix: singular
/// values below `RANK_CUTOFF` times the largest are treated as zero, which
/// also yields the minimal-norm solution for rank-deficient `A`.
pub fn least_squares(a: &DenseMatrix, b: &[f64]) -> Result<(Vec<f64>, f64)> {
    if a.rows != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "matrix has {} rows but rhs has {} entries",
            a.rows,
            b.len()
        )));
    }
    if a.cols == 0 {
        let residual = b.iter().map(|x| x * x).sum();
        return Ok((Vec::new(), residual));
    }
    let g = gram(a);
    let (eigenvalues, vectors) = sym_eigen(&g)?;
    let atb = a.transpose_apply(b);
    let lambda_max = eigenvalues.last().copied().unwrap_or(0.0).max(0.0);
    // Eigenvalues of A^T A are squared singular values.
    let cutoff = RANK_CUTOFF * RANK_CUTOFF * lambda_max;
    let mut w = vec![0.0; a.cols];
    for (j, &lambda) in eigenvalues.iter().enumerate() {
        if lambda <= cutoff || lambda <= 0.0 {
            continue;
        }
        let mut proj = 0.0;
        for i in 0..a.cols {
            proj += vectors[(i, j)] * atb[i];
        }
        let scale = proj / lambda;
        for i in 0..a.cols {
            w[i] += scale * vectors[(i, j)];
        }
    }
    let fitted = a.apply(&w);
    let residual_sq = b
        .iter()
        .zip(&fitted)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>();
    Ok((w, residual_sq))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_least_squares() {
        let a = DenseMatrix::identity(3);
        let b = vec![1.0, -2.0, 0.5];
        let (w, r) = least_squares(&a, &b).unwrap();
        for (x, y) in w.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(r < 1e-12);
    }

    #[test]
    fn zero_column_gives_minimal_norm() {
        let a = DenseMatrix::from_columns(&[vec![0.0, 0.0, 0.0]]).unwrap();
        let b = vec![1.0, 2.0, 3.0];
        let (w, r) = least_squares(&a, &b).unwrap();
        assert_eq!(w, vec![0.0]);
        assert!((r - 14.0).abs() < 1e-12);
    }

    /// Normal-equation solve by Gaussian elimination, used as an
    /// independent oracle for full-rank systems.
    fn normal_equations(a: &DenseMatrix, b: &[f64]) -> Vec<f64> {
        let n = a.cols;
        let g = gram(a);
        let rhs = a.transpose_apply(b);
        let mut m = vec![vec![0.0; n + 1]; n];
        for i in 0..n {
            for j in 0..n {
                m[i][j] = g[(i, j)];
            }
            m[i][n] = rhs[i];
        }
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
                .unwrap();
            m.swap(col, pivot);
            let d = m[col][col];
            for j in col..=n {
                m[col][j] /= d;
            }
            for i in 0..n {
                if i != col {
                    let factor = m[i][col];
                    for j in col..=n {
                        m[i][j] -= factor * m[col][j];
                    }
                }
            }
        }
        (0..n).map(|i| m[i][n]).collect()
    }

    #[test]
    fn random_full_rank_matches_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let cols: Vec<Vec<f64>> = (0..3)
                .map(|_| (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let a = DenseMatrix::from_columns(&cols).unwrap();
            let b: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (w, r) = least_squares(&a, &b).unwrap();
            let w_ref = normal_equations(&a, &b);
            for (x, y) in w.iter().zip(&w_ref) {
                assert!((x - y).abs() < 1e-9, "{w:?} vs {w_ref:?}");
            }
            let fitted = a.apply(&w_ref);
            let r_ref: f64 = b.iter().zip(&fitted).map(|(x, y)| (x - y) * (x - y)).sum();
            assert!((r - r_ref).abs() < 1e-9);
        }
    }

    #[test]
    fn residual_orthogonal_to_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let cols: Vec<Vec<f64>> = (0..4)
                .map(|_| (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect();
            let a = DenseMatrix::from_columns(&cols).unwrap();
            let b: Vec<f64> = (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let (w, _) = least_squares(&a, &b).unwrap();
            let fitted = a.apply(&w);
            let resid: Vec<f64> = b.iter().zip(&fitted).map(|(x, y)| x - y).collect();
            let at_r = a.transpose_apply(&resid);
            let a_norm: f64 = (0..a.cols)
                .map(|j| a.column(j).iter().map(|x| x * x).sum::<f64>())
                .sum::<f64>()
                .sqrt();
            let b_norm: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            for x in at_r {
                assert!(x.abs() <= 1e-8 * a_norm.max(1.0) * b_norm.max(1.0));
            }
        }
    }

    #[test]
    fn eigen_identity() {
        let (lo, hi) = sym_eigen_extremes(&DenseMatrix::identity(5)).unwrap();
        assert!((lo - 1.0).abs() < 1e-12);
        assert!((hi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigen_two_column_correlated_block() {
        // Gram of columns e1 and (e1+e2)/sqrt(2): [[1, 1/sqrt2], [1/sqrt2, 1]].
        let s = 1.0 / 2.0f64.sqrt();
        let m = DenseMatrix::new(2, 2, vec![1.0, s, s, 1.0]).unwrap();
        let (lo, hi) = sym_eigen_extremes(&m).unwrap();
        assert!((lo - (1.0 - s)).abs() < 1e-9);
        assert!((hi - (1.0 + s)).abs() < 1e-9);
    }

    /// Roots of the characteristic polynomial of a symmetric 3x3 matrix,
    /// via the trigonometric closed form.
    fn eigen3_closed_form(m: &DenseMatrix) -> Vec<f64> {
        let p1 = m[(0, 1)].powi(2) + m[(0, 2)].powi(2) + m[(1, 2)].powi(2);
        let q = (m[(0, 0)] + m[(1, 1)] + m[(2, 2)]) / 3.0;
        let p2 = (m[(0, 0)] - q).powi(2) + (m[(1, 1)] - q).powi(2) + (m[(2, 2)] - q).powi(2)
            + 2.0 * p1;
        let p = (p2 / 6.0).sqrt();
        if p < 1e-300 {
            return vec![q, q, q];
        }
        let mut b = DenseMatrix::zeros(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                b[(i, j)] = (m[(i, j)] - if i == j { q } else { 0.0 }) / p;
            }
        }
        let det_b = b[(0, 0)] * (b[(1, 1)] * b[(2, 2)] - b[(1, 2)] * b[(2, 1)])
            - b[(0, 1)] * (b[(1, 0)] * b[(2, 2)] - b[(1, 2)] * b[(2, 0)])
            + b[(0, 2)] * (b[(1, 0)] * b[(2, 1)] - b[(1, 1)] * b[(2, 0)]);
        let r = (det_b / 2.0).clamp(-1.0, 1.0);
        let phi = r.acos() / 3.0;
        let e1 = q + 2.0 * p * phi.cos();
        let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
        let e2 = 3.0 * q - e1 - e3;
        let mut out = vec![e1, e2, e3];
        out.sort_by(f64::total_cmp);
        out
    }

    #[test]
    fn random_symmetric_matches_cubic_roots() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let mut m = DenseMatrix::zeros(3, 3);
            for i in 0..3 {
                for j in i..3 {
                    let x = rng.gen_range(-2.0..2.0);
                    m[(i, j)] = x;
                    m[(j, i)] = x;
                }
            }
            let (eigenvalues, _) = sym_eigen(&m).unwrap();
            let reference = eigen3_closed_form(&m);
            for (a, b) in eigenvalues.iter().zip(&reference) {
                assert!((a - b).abs() < 1e-8, "{eigenvalues:?} vs {reference:?}");
            }
        }
    }

    #[test]
    fn rayleigh_quotient_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut m = DenseMatrix::zeros(4, 4);
        for i in 0..4 {
            for j in i..4 {
                let x = rng.gen_range(-1.0..1.0);
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
        }
        let (lo, hi) = sym_eigen_extremes(&m).unwrap();
        for _ in 0..1000 {
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm_sq: f64 = x.iter().map(|v| v * v).sum();
            if norm_sq < 1e-9 {
                continue;
            }
            let mx = m.apply(&x);
            let quad: f64 = x.iter().zip(&mx).map(|(a, b)| a * b).sum();
            let rayleigh = quad / norm_sq;
            assert!(rayleigh >= lo - 1e-8);
            assert!(rayleigh <= hi + 1e-8);
        }
    }

    #[test]
    fn trace_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..10 {
            let n = rng.gen_range(2..6);
            let mut m = DenseMatrix::zeros(n, n);
            for i in 0..n {
                for j in i..n {
                    let x = rng.gen_range(-1.0..1.0);
                    m[(i, j)] = x;
                    m[(j, i)] = x;
                }
            }
            let trace: f64 = (0..n).map(|i| m[(i, i)]).sum();
            let (eigenvalues, _) = sym_eigen(&m).unwrap();
            let sum: f64 = eigenvalues.iter().sum();
            assert!((trace - sum).abs() <= 1e-8 * trace.abs().max(1.0));
        }
    }

    #[test]
    fn gram_entries_are_column_dots() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let cols: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let a = DenseMatrix::from_columns(&cols).unwrap();
        let g = gram(&a);
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = cols[i].iter().zip(&cols[j]).map(|(x, y)| x * y).sum();
                assert!((g[(i, j)] - dot).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn not_symmetric_rejected() {
        let m = DenseMatrix::new(2, 2, vec![1.0, 0.5, 0.0, 1.0]).unwrap();
        assert!(matches!(sym_eigen(&m), Err(Error::NotSymmetric(_))));
    }
}
