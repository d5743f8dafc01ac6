//! Thin wrappers over LAPACK/CBLAS for the few dense kernels this crate
//! needs: symmetric eigendecomposition, singular value decomposition, and
//! symmetric rank-k products.
//!
//! The linked BLAS is pinned to a single thread on first use so that
//! results are byte-identical regardless of the environment's thread
//! configuration; concurrency comes from the caller (per-holdout
//! parallelism in validation), not from the BLAS.

use crate::error::{Error, Result};
use std::sync::Once;

extern crate openblas_src as _;

extern "C" {
    fn openblas_set_num_threads(n: i32);
}

static BLAS_INIT: Once = Once::new();

/// Forces deterministic single-threaded BLAS. Idempotent.
pub fn init_blas() {
    BLAS_INIT.call_once(|| unsafe {
        openblas_set_num_threads(1);
    });
}

/// Dense column-major matrix, the layout LAPACK expects.
#[derive(Debug, Clone, PartialEq)]
pub struct ColMat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ColMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ColMat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_columns(rows: usize, columns: &[Vec<f64>]) -> Self {
        let mut data = Vec::with_capacity(rows * columns.len());
        for c in columns {
            assert_eq!(c.len(), rows);
            data.extend_from_slice(c);
        }
        ColMat {
            rows,
            cols: columns.len(),
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[c * self.rows + r]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[c * self.rows + r] = v;
    }

    pub fn column(&self, c: usize) -> &[f64] {
        &self.data[c * self.rows..(c + 1) * self.rows]
    }

    pub fn column_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.data[c * self.rows..(c + 1) * self.rows]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// `self * x` for a vector `x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        let mut y = vec![0.0; self.rows];
        for (c, &xc) in x.iter().enumerate() {
            let col = self.column(c);
            for (yr, &v) in y.iter_mut().zip(col) {
                *yr += v * xc;
            }
        }
        y
    }

    /// `selfᵀ * x` for a vector `x`.
    pub fn tr_matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows);
        (0..self.cols)
            .map(|c| {
                self.column(c)
                    .iter()
                    .zip(x)
                    .map(|(&a, &b)| a * b)
                    .sum::<f64>()
            })
            .collect()
    }

    /// Rows of `self` gathered at `indices`, as a new `k x cols` matrix.
    pub fn select_rows(&self, indices: &[usize]) -> ColMat {
        let k = indices.len();
        let mut out = ColMat::zeros(k, self.cols);
        for c in 0..self.cols {
            let col = self.column(c);
            for (r, &i) in indices.iter().enumerate() {
                out.set(r, c, col[i]);
            }
        }
        out
    }

    /// Leading `m` columns as a new matrix.
    pub fn leading_columns(&self, m: usize) -> ColMat {
        assert!(m <= self.cols);
        ColMat {
            rows: self.rows,
            cols: m,
            data: self.data[..self.rows * m].to_vec(),
        }
    }
}

/// `A Aᵀ * alpha` for column-major `A` (rows x cols), producing a full
/// symmetric `rows x rows` matrix via DSYRK.
pub fn syrk_aat(a: &ColMat, alpha: f64) -> ColMat {
    init_blas();
    let n = a.rows as i32;
    let k = a.cols as i32;
    let mut c = ColMat::zeros(a.rows, a.rows);
    unsafe {
        cblas::dsyrk(
            cblas::Layout::ColumnMajor,
            cblas::Part::Lower,
            cblas::Transpose::None,
            n,
            k,
            alpha,
            &a.data,
            n,
            0.0,
            &mut c.data,
            n,
        );
    }
    mirror_lower(&mut c);
    c
}

/// `Aᵀ A * alpha` for column-major `A` (rows x cols), producing a full
/// symmetric `cols x cols` matrix via DSYRK.
pub fn syrk_ata(a: &ColMat, alpha: f64) -> ColMat {
    init_blas();
    let n = a.cols as i32;
    let k = a.rows as i32;
    let mut c = ColMat::zeros(a.cols, a.cols);
    unsafe {
        cblas::dsyrk(
            cblas::Layout::ColumnMajor,
            cblas::Part::Lower,
            cblas::Transpose::Ordinary,
            n,
            k,
            alpha,
            &a.data,
            k,
            0.0,
            &mut c.data,
            n,
        );
    }
    mirror_lower(&mut c);
    c
}

fn mirror_lower(c: &mut ColMat) {
    let n = c.rows;
    for col in 0..n {
        for row in (col + 1)..n {
            let v = c.get(row, col);
            c.set(col, row, v);
        }
    }
}

/// Maximum absolute deviation of `AᵀA` from the identity; `A` must have
/// orthonormal columns for this to be ~machine epsilon.
pub fn orthonormality_defect(a: &ColMat) -> f64 {
    let g = syrk_ata(a, 1.0);
    let n = g.rows;
    let mut worst = 0.0f64;
    for c in 0..n {
        for r in 0..n {
            let target = if r == c { 1.0 } else { 0.0 };
            worst = worst.max((g.get(r, c) - target).abs());
        }
    }
    worst
}

/// Full symmetric eigendecomposition via DSYEVD. Input is the dense
/// symmetric matrix in column-major order; returns eigenvalues in the
/// solver's ascending order with eigenvectors as the columns of the
/// returned matrix.
pub fn eigh(sym: &ColMat) -> Result<(Vec<f64>, ColMat)> {
    init_blas();
    assert_eq!(sym.rows, sym.cols);
    let d = sym.rows;
    let n = d as i32;
    let mut a = sym.clone();
    let mut w = vec![0.0f64; d];
    let mut info = 0i32;
    let lwork = 1 + 6 * d + 2 * d * d;
    let liwork = 3 + 5 * d;
    let mut work = vec![0.0f64; lwork];
    let mut iwork = vec![0i32; liwork];
    unsafe {
        lapack::dsyevd(
            b'V',
            b'L',
            n,
            &mut a.data,
            n,
            &mut w,
            &mut work,
            lwork as i32,
            &mut iwork,
            liwork as i32,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Numerical(format!(
            "symmetric eigensolver failed to converge (dsyevd info={info})"
        )));
    }
    Ok((w, a))
}

/// Singular value decomposition result for a `rows x cols` matrix:
/// `A = U diag(s) Vᵀ` with economy-size factors.
pub struct Svd {
    /// `rows x min(rows, cols)`, orthonormal columns.
    pub u: ColMat,
    /// Singular values, descending.
    pub s: Vec<f64>,
    /// `min(rows, cols) x cols`; rows are right singular vectors.
    pub vt: ColMat,
}

/// Economy SVD via DGESVD.
pub fn svd(a: &ColMat) -> Result<Svd> {
    init_blas();
    let m = a.rows as i32;
    let n = a.cols as i32;
    let mn = a.rows.min(a.cols);
    let mut work_a = a.clone();
    let mut s = vec![0.0f64; mn];
    let mut u = ColMat::zeros(a.rows, mn);
    let mut vt = ColMat::zeros(mn, a.cols);
    let mut info = 0i32;
    let lwork = (5 * (a.rows + a.cols)).max(64);
    let mut work = vec![0.0f64; lwork];
    unsafe {
        lapack::dgesvd(
            b'S',
            b'S',
            m,
            n,
            &mut work_a.data,
            m,
            &mut s,
            &mut u.data,
            m,
            &mut vt.data,
            mn as i32,
            &mut work,
            lwork as i32,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Numerical(format!(
            "singular value decomposition failed (dgesvd info={info})"
        )));
    }
    Ok(Svd { u, s, vt })
}

/// Minimum-norm least-squares solution of `A x ~ b` through the SVD,
/// treating singular values below `rel_tol * s_max` as zero. Returns the
/// solution and the effective rank.
pub fn svd_lstsq(a: &ColMat, b: &[f64], rel_tol: f64) -> Result<(Vec<f64>, usize)> {
    assert_eq!(b.len(), a.rows);
    let Svd { u, s, vt } = svd(a)?;
    let smax = s.first().copied().unwrap_or(0.0);
    let cutoff = rel_tol * smax;
    let mut x = vec![0.0; a.cols];
    let mut rank = 0usize;
    for (i, &sv) in s.iter().enumerate() {
        if sv <= cutoff || sv == 0.0 {
            continue;
        }
        rank += 1;
        let coeff = u.column(i).iter().zip(b).map(|(&ui, &bi)| ui * bi).sum::<f64>() / sv;
        // Row i of Vᵀ is the right singular vector.
        for (j, xj) in x.iter_mut().enumerate() {
            *xj += coeff * vt.get(i, j);
        }
    }
    Ok((x, rank))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn syrk_matches_naive_product() {
        let a = ColMat::from_columns(3, &[vec![1.0, 2.0, 3.0], vec![0.5, -1.0, 2.0]]);
        let aat = syrk_aat(&a, 1.0);
        let ata = syrk_ata(&a, 1.0);
        for r in 0..3 {
            for c in 0..3 {
                let expect: f64 = (0..2).map(|k| a.get(r, k) * a.get(c, k)).sum();
                assert!((aat.get(r, c) - expect).abs() < 1e-12);
            }
        }
        for r in 0..2 {
            for c in 0..2 {
                let expect: f64 = (0..3).map(|k| a.get(k, r) * a.get(k, c)).sum();
                assert!((ata.get(r, c) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn eigh_diagonalizes() {
        let mut c = ColMat::zeros(3, 3);
        for (r, col, v) in [
            (0, 0, 2.0),
            (1, 1, 3.0),
            (2, 2, 1.0),
            (0, 1, 0.5),
            (1, 0, 0.5),
            (1, 2, -0.25),
            (2, 1, -0.25),
        ] {
            c.set(r, col, v);
        }
        let (w, p) = eigh(&c).unwrap();
        // Residual C p_i - w_i p_i should vanish.
        for i in 0..3 {
            let pi = p.column(i).to_vec();
            let cpi = c.matvec(&pi);
            for r in 0..3 {
                assert!((cpi[r] - w[i] * pi[r]).abs() < 1e-12);
            }
        }
        assert!(orthonormality_defect(&p) < 1e-14);
    }

    #[test]
    fn svd_lstsq_solves_consistent_system() {
        // Overdetermined but consistent: b = A x*.
        let a = ColMat::from_columns(
            4,
            &[vec![1.0, 0.0, 1.0, 2.0], vec![0.0, 1.0, 1.0, -1.0]],
        );
        let xstar = [0.7, -0.3];
        let b = a.matvec(&xstar);
        let (x, rank) = svd_lstsq(&a, &b, 1e-10).unwrap();
        assert_eq!(rank, 2);
        assert!((x[0] - 0.7).abs() < 1e-12);
        assert!((x[1] + 0.3).abs() < 1e-12);
    }

    #[test]
    fn svd_lstsq_rank_deficient_reports_rank() {
        // Second column is twice the first.
        let a = ColMat::from_columns(3, &[vec![1.0, 2.0, 3.0], vec![2.0, 4.0, 6.0]]);
        let b = vec![1.0, 2.0, 3.0];
        let (x, rank) = svd_lstsq(&a, &b, 1e-10).unwrap();
        assert_eq!(rank, 1);
        // Minimum-norm solution of x0 + 2 x1 = 1 along (1,2)/5.
        assert!((x[0] - 0.2).abs() < 1e-12);
        assert!((x[1] - 0.4).abs() < 1e-12);
    }
}
