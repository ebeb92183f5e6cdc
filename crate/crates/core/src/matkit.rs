//! Dense complex linear algebra: vectors, matrices, Jacobi SVD and Hermitian
//! eigendecomposition, dense LU and a periodic tridiagonal solver.
//!
//! Everything here is sized for desk-scale problems (a few hundred rows).

use std::fmt;
use std::ops::{Index, IndexMut};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Above this many multiply-adds a product is split across threads by rows.
const PAR_THRESHOLD: usize = 1 << 16;

/// Rotation threshold for both Jacobi variants, relative to the pair scale.
const JACOBI_TOL: f64 = 1e-15;
const JACOBI_MAX_SWEEPS: usize = 80;

#[derive(Clone, PartialEq, Default)]
pub struct CVector(Vec<Complex64>);

impl CVector {
    pub fn new(entries: Vec<Complex64>) -> Self {
        CVector(entries)
    }

    /// Like [`CVector::new`] but rejects NaN or infinite entries.
    pub fn try_new(entries: Vec<Complex64>) -> Result<Self> {
        if let Some(i) = entries.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite vector entry at index {i}")));
        }
        Ok(CVector(entries))
    }

    pub fn from_real(values: &[f64]) -> Self {
        CVector(values.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn zeros(n: usize) -> Self {
        CVector(vec![ZERO; n])
    }

    /// Canonical basis vector `e_k` of length `n`.
    pub fn basis(n: usize, k: usize) -> Self {
        let mut v = Self::zeros(n);
        v.0[k] = ONE;
        v
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<Complex64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Complex64> {
        self.0.iter()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Inner product `<self, other>`, conjugate-linear in `self`.
    pub fn dot(&self, other: &CVector) -> Complex64 {
        assert_eq!(self.len(), other.len(), "dot: length mismatch");
        self.0.iter().zip(&other.0).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn scale(&self, c: Complex64) -> CVector {
        CVector(self.0.iter().map(|z| z * c).collect())
    }

    pub fn scale_real(&self, c: f64) -> CVector {
        CVector(self.0.iter().map(|z| z * c).collect())
    }

    pub fn add(&self, other: &CVector) -> CVector {
        assert_eq!(self.len(), other.len(), "add: length mismatch");
        CVector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &CVector) -> CVector {
        assert_eq!(self.len(), other.len(), "sub: length mismatch");
        CVector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    /// `self + c * other`
    pub fn axpy(&self, c: f64, other: &CVector) -> CVector {
        assert_eq!(self.len(), other.len(), "axpy: length mismatch");
        CVector(self.0.iter().zip(&other.0).map(|(a, b)| a + b * c).collect())
    }

    /// Unit vector in the same direction, or `None` for the zero vector.
    pub fn normalized(&self) -> Option<CVector> {
        let n = self.norm();
        if n == 0.0 {
            None
        } else {
            Some(self.scale_real(1.0 / n))
        }
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.0.iter().map(|z| z.re).collect()
    }

    pub fn max_imag(&self) -> f64 {
        self.0.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &CVector) -> f64 {
        assert_eq!(self.len(), other.len(), "max_abs_diff: length mismatch");
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

impl fmt::Debug for CVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

impl Index<usize> for CVector {
    type Output = Complex64;
    fn index(&self, i: usize) -> &Complex64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for CVector {
    fn index_mut(&mut self, i: usize) -> &mut Complex64 {
        &mut self.0[i]
    }
}

impl FromIterator<Complex64> for CVector {
    fn from_iter<I: IntoIterator<Item = Complex64>>(iter: I) -> Self {
        CVector(iter.into_iter().collect())
    }
}

/// Dense row-major complex matrix.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        CMatrix { rows, cols, data }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidArgument(format!("{} entries cannot fill a {rows}x{cols} matrix", data.len())));
        }
        Ok(CMatrix { rows, cols, data })
    }

    pub fn from_real(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        Self::from_row_major(rows, cols, values.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn from_diag(diag: &[Complex64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * n + i] = d;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> CVector {
        (0..self.rows).map(|i| self.data[i * self.cols + j]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn adjoint(&self) -> CMatrix {
        CMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> CMatrix {
        CMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Entrywise complex conjugate.
    pub fn conj(&self) -> CMatrix {
        CMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn scale(&self, c: Complex64) -> CMatrix {
        CMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * c).collect() }
    }

    pub fn scale_real(&self, c: f64) -> CMatrix {
        self.scale(Complex64::new(c, 0.0))
    }

    pub fn add(&self, other: &CMatrix) -> Result<CMatrix> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &CMatrix) -> Result<CMatrix> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    fn zip_with(
        &self,
        other: &CMatrix,
        op: &'static str,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<CMatrix> {
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch { op, left: self.shape(), right: other.shape() });
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(CMatrix { rows: self.rows, cols: self.cols, data })
    }

    pub fn matmul(&self, other: &CMatrix) -> Result<CMatrix> {
        matmul(self, other)
    }

    pub fn matvec(&self, v: &CVector) -> Result<CVector> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch { op: "matvec", left: self.shape(), right: (v.len(), 1) });
        }
        let row_dot = |i: usize| -> Complex64 { self.row(i).iter().zip(v.as_slice()).map(|(a, b)| a * b).sum() };
        let out = if self.rows * self.cols >= PAR_THRESHOLD {
            (0..self.rows).into_par_iter().map(row_dot).collect()
        } else {
            (0..self.rows).map(row_dot).collect()
        };
        Ok(CVector::new(out))
    }

    /// Copy of the `rows x cols` block starting at `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> CMatrix {
        assert!(r0 + rows <= self.rows && c0 + cols <= self.cols, "block out of range");
        CMatrix::from_fn(rows, cols, |i, j| self[(r0 + i, c0 + j)])
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, b: &CMatrix) {
        assert!(r0 + b.rows <= self.rows && c0 + b.cols <= self.cols, "block out of range");
        for i in 0..b.rows {
            for j in 0..b.cols {
                self[(r0 + i, c0 + j)] = b[(i, j)];
            }
        }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Largest entry magnitude.
    pub fn max_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        assert_eq!(self.shape(), other.shape(), "max_abs_diff: shape mismatch");
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn max_imag(&self) -> f64 {
        self.data.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    /// `max |(M^dagger M - I)_ij|`
    pub fn unitarity_error(&self) -> f64 {
        let gram = matmul(&self.adjoint(), self).expect("square product");
        gram.max_abs_diff(&CMatrix::identity(self.cols))
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.is_square() && self.unitarity_error() <= tol
    }

    pub fn hermiticity_error(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut err: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                err = err.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        err
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn matmul(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if a.cols != b.rows {
        return Err(Error::DimensionMismatch { op: "matmul", left: a.shape(), right: b.shape() });
    }
    let (n, m) = (a.cols, b.cols);
    let mut out = CMatrix::zeros(a.rows, m);
    if m == 0 {
        return Ok(out);
    }
    let kernel = |(i, out_row): (usize, &mut [Complex64])| {
        for k in 0..n {
            let aik = a.data[i * n + k];
            if aik == ZERO {
                continue;
            }
            for (o, bkj) in out_row.iter_mut().zip(b.row(k)) {
                *o += aik * bkj;
            }
        }
    };
    if a.rows * n * m >= PAR_THRESHOLD {
        out.data.par_chunks_mut(m).enumerate().for_each(kernel);
    } else {
        out.data.chunks_mut(m).enumerate().for_each(kernel);
    }
    Ok(out)
}

/// Thin singular value decomposition `M = sum_k sigma_k |w_k><v_k|`.
#[derive(Clone, Debug)]
pub struct SvdResult {
    /// Descending, nonnegative.
    pub singular_values: Vec<f64>,
    /// Left singular vectors `w_k` as columns (`rows x k`).
    pub left_vectors: CMatrix,
    /// Right singular vectors `v_k` as columns (`cols x k`).
    pub right_vectors: CMatrix,
}

impl SvdResult {
    pub fn rank_count(&self) -> usize {
        self.singular_values.len()
    }

    pub fn sigma_max(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    pub fn sigma_min(&self) -> f64 {
        self.singular_values.last().copied().unwrap_or(0.0)
    }

    /// `sum_k f(sigma_k) |w_k><v_k|`
    pub fn map_singular_values(&self, f: impl Fn(f64) -> Complex64) -> CMatrix {
        let weights: Vec<Complex64> = self.singular_values.iter().map(|&s| f(s)).collect();
        outer_sum(&self.left_vectors, &weights, &self.right_vectors)
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.map_singular_values(|s| Complex64::new(s, 0.0))
    }
}

/// `sum_k weights[k] |left_k><right_k|` for column sets `left` and `right`.
pub fn outer_sum(left: &CMatrix, weights: &[Complex64], right: &CMatrix) -> CMatrix {
    let scaled = CMatrix::from_fn(left.rows, weights.len(), |i, k| left[(i, k)] * weights[k]);
    matmul(&scaled, &right.adjoint()).expect("column counts agree")
}

/// One-sided (Hestenes) Jacobi SVD.
///
/// Sign convention: the first component of each right vector with magnitude
/// above 1e-10 is real and positive.
pub fn svd(m: &CMatrix) -> Result<SvdResult> {
    if !m.is_finite() {
        return Err(Error::InvalidArgument("svd input has non-finite entries".into()));
    }
    if m.rows < m.cols {
        let t = svd(&m.adjoint())?;
        let mut out = SvdResult {
            singular_values: t.singular_values,
            left_vectors: t.right_vectors,
            right_vectors: t.left_vectors,
        };
        fix_phases(&mut out);
        return Ok(out);
    }
    let (rows, cols) = m.shape();
    let mut g: Vec<Vec<Complex64>> = (0..cols).map(|j| m.column(j).into_inner()).collect();
    let mut v: Vec<Vec<Complex64>> = (0..cols).map(|j| CVector::basis(cols, j).into_inner()).collect();

    let mut converged = cols < 2;
    let mut residual = 0.0;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        residual = 0.0_f64;
        for p in 0..cols - 1 {
            for q in p + 1..cols {
                let alpha: f64 = g[p].iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = g[q].iter().map(|z| z.norm_sqr()).sum();
                let gamma: Complex64 = g[p].iter().zip(&g[q]).map(|(a, b)| a.conj() * b).sum();
                let scale = (alpha * beta).sqrt();
                if scale == 0.0 {
                    continue;
                }
                let ratio = gamma.norm() / scale;
                residual = residual.max(ratio);
                if ratio <= JACOBI_TOL {
                    continue;
                }
                rotated = true;
                let (c, s, phase) = jacobi_rotation(alpha, beta, gamma);
                let (lo, hi) = g.split_at_mut(q);
                rotate_pair(&mut lo[p], &mut hi[0], c, s, phase);
                let (lo, hi) = v.split_at_mut(q);
                rotate_pair(&mut lo[p], &mut hi[0], c, s, phase);
            }
        }
        if !rotated {
            converged = true;
        }
    }
    if !converged {
        return Err(Error::NoConvergence { method: "one-sided Jacobi SVD", sweeps: JACOBI_MAX_SWEEPS, residual });
    }

    let sigma: Vec<f64> = g.iter().map(|col| col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]));
    let sigma_max = order.first().map(|&k| sigma[k]).unwrap_or(0.0);
    let negligible = sigma_max * (rows.max(cols) as f64) * f64::EPSILON;

    let mut left = CMatrix::zeros(rows, cols);
    let mut right = CMatrix::zeros(cols, cols);
    let mut sorted_sigma = Vec::with_capacity(cols);
    let mut deficient = Vec::new();
    for (k, &src) in order.iter().enumerate() {
        let s = sigma[src];
        sorted_sigma.push(s);
        for i in 0..cols {
            right[(i, k)] = v[src][i];
        }
        if s > negligible && s > 0.0 {
            for i in 0..rows {
                left[(i, k)] = g[src][i] / s;
            }
        } else {
            deficient.push(k);
        }
    }
    complete_orthonormal(&mut left, &deficient);

    let mut out = SvdResult { singular_values: sorted_sigma, left_vectors: left, right_vectors: right };
    fix_phases(&mut out);
    Ok(out)
}

/// Rotation zeroing the off-diagonal of the Hermitian pair `[[alpha, gamma], [conj(gamma), beta]]`.
/// Returns `(c, s, conj(gamma)/|gamma|)`.
fn jacobi_rotation(alpha: f64, beta: f64, gamma: Complex64) -> (f64, f64, Complex64) {
    let g = gamma.norm();
    let zeta = (beta - alpha) / (2.0 * g);
    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
    let c = 1.0 / (1.0 + t * t).sqrt();
    (c, c * t, gamma.conj() / g)
}

/// `p <- c p - s w q`, `q <- s p + c w q` with `w` the unimodular phase.
fn rotate_pair(p: &mut [Complex64], q: &mut [Complex64], c: f64, s: f64, w: Complex64) {
    for (a, b) in p.iter_mut().zip(q.iter_mut()) {
        let wb = w * *b;
        let na = *a * c - wb * s;
        let nb = *a * s + wb * c;
        *a = na;
        *b = nb;
    }
}

/// Fill the listed columns of `m` so that all columns are orthonormal.
fn complete_orthonormal(m: &mut CMatrix, targets: &[usize]) {
    if targets.is_empty() {
        return;
    }
    let rows = m.rows;
    let mut filled: Vec<usize> = (0..m.cols).filter(|k| !targets.contains(k)).collect();
    let mut candidate = 0;
    for &k in targets {
        while candidate < rows {
            let mut vec = CVector::basis(rows, candidate).into_inner();
            candidate += 1;
            for _ in 0..2 {
                for &j in &filled {
                    let proj: Complex64 = (0..rows).map(|i| m[(i, j)].conj() * vec[i]).sum();
                    for (i, x) in vec.iter_mut().enumerate() {
                        *x -= proj * m[(i, j)];
                    }
                }
            }
            let norm = vec.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm > 1e-8 {
                for (i, x) in vec.iter().enumerate() {
                    m[(i, k)] = x / norm;
                }
                filled.push(k);
                break;
            }
        }
    }
}

fn fix_phases(svd: &mut SvdResult) {
    let (n, k) = svd.right_vectors.shape();
    for col in 0..k {
        let Some(lead) = (0..n).map(|i| svd.right_vectors[(i, col)]).find(|z| z.norm() > 1e-10) else {
            continue;
        };
        let phase = lead.conj() / lead.norm();
        for i in 0..n {
            svd.right_vectors[(i, col)] *= phase;
        }
        for i in 0..svd.left_vectors.rows() {
            svd.left_vectors[(i, col)] *= phase;
        }
    }
}

/// Eigendecomposition of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct EighResult {
    /// Ascending.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns.
    pub vectors: CMatrix,
}

impl EighResult {
    /// `V f(Lambda) V^dagger`
    pub fn map_eigenvalues(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let w: Vec<Complex64> = self.values.iter().map(|&l| Complex64::new(f(l), 0.0)).collect();
        outer_sum(&self.vectors, &w, &self.vectors)
    }
}

/// Cyclic Jacobi eigensolver for Hermitian matrices.
pub fn eigh(m: &CMatrix) -> Result<EighResult> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch { op: "eigh", left: m.shape(), right: m.shape() });
    }
    let herm_err = m.hermiticity_error();
    let scale = m.frobenius_norm().max(f64::MIN_POSITIVE);
    if herm_err > 1e-10 * scale.max(1.0) {
        return Err(Error::InvalidArgument(format!("eigh input is not Hermitian (error {herm_err:.3e})")));
    }
    let n = m.rows;
    let mut h = m.clone();
    let mut vecs = CMatrix::identity(n);
    let tol = JACOBI_TOL * scale;
    let mut off = 0.0;
    let mut converged = n < 2;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if converged {
            break;
        }
        off = 0.0_f64;
        let mut rotated = false;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let gamma = h[(p, q)];
                off = off.max(gamma.norm());
                if gamma.norm() <= tol {
                    continue;
                }
                rotated = true;
                let (c, s, w) = jacobi_rotation(h[(p, p)].re, h[(q, q)].re, gamma);
                // columns: H <- H J
                for i in 0..n {
                    let hp = h[(i, p)];
                    let wq = w * h[(i, q)];
                    h[(i, p)] = hp * c - wq * s;
                    h[(i, q)] = hp * s + wq * c;
                    let vp = vecs[(i, p)];
                    let wv = w * vecs[(i, q)];
                    vecs[(i, p)] = vp * c - wv * s;
                    vecs[(i, q)] = vp * s + wv * c;
                }
                // rows: H <- J^dagger H
                let wc = w.conj();
                for j in 0..n {
                    let hp = h[(p, j)];
                    let wq = wc * h[(q, j)];
                    h[(p, j)] = hp * c - wq * s;
                    h[(q, j)] = hp * s + wq * c;
                }
                h[(p, q)] = ZERO;
                h[(q, p)] = ZERO;
                h[(p, p)] = Complex64::new(h[(p, p)].re, 0.0);
                h[(q, q)] = Complex64::new(h[(q, q)].re, 0.0);
            }
        }
        if !rotated {
            converged = true;
        }
    }
    if !converged {
        return Err(Error::NoConvergence { method: "Hermitian Jacobi", sweeps: JACOBI_MAX_SWEEPS, residual: off });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| h[(a, a)].re.total_cmp(&h[(b, b)].re));
    let values = order.iter().map(|&k| h[(k, k)].re).collect();
    let vectors = CMatrix::from_fn(n, n, |i, k| vecs[(i, order[k])]);
    Ok(EighResult { values, vectors })
}

/// Dense solve by LU with partial pivoting.
pub fn solve_dense(a: &CMatrix, rhs: &CVector) -> Result<CVector> {
    if !a.is_square() || a.rows != rhs.len() {
        return Err(Error::DimensionMismatch { op: "solve_dense", left: a.shape(), right: (rhs.len(), 1) });
    }
    let n = a.rows;
    let mut lu = a.clone();
    let mut x = rhs.clone().into_inner();
    let scale = a.max_norm();
    if scale == 0.0 {
        return Err(Error::Singular("zero matrix".into()));
    }
    for k in 0..n {
        let piv = (k..n).max_by(|&i, &j| lu[(i, k)].norm().total_cmp(&lu[(j, k)].norm())).unwrap();
        if lu[(piv, k)].norm() <= 1e-14 * scale {
            return Err(Error::Singular(format!("zero pivot in column {k}")));
        }
        if piv != k {
            for j in 0..n {
                let t = lu[(k, j)];
                lu[(k, j)] = lu[(piv, j)];
                lu[(piv, j)] = t;
            }
            x.swap(k, piv);
        }
        let d = lu[(k, k)];
        for i in k + 1..n {
            let f = lu[(i, k)] / d;
            if f == ZERO {
                continue;
            }
            for j in k + 1..n {
                let u = lu[(k, j)];
                lu[(i, j)] -= f * u;
            }
            let xk = x[k];
            x[i] -= f * xk;
        }
    }
    for k in (0..n).rev() {
        let mut acc = x[k];
        for j in k + 1..n {
            acc -= lu[(k, j)] * x[j];
        }
        x[k] = acc / lu[(k, k)];
    }
    Ok(CVector::new(x))
}

/// Dense periodic tridiagonal matrix with `diag` on the main diagonal and
/// `off` on both neighbours (wrapping at the corners).
pub fn cyclic_tridiag_matrix(diag: f64, off: f64, n: usize) -> CMatrix {
    let mut m = CMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] += Complex64::new(diag, 0.0);
        m[(i, (i + 1) % n)] += Complex64::new(off, 0.0);
        m[(i, (i + n - 1) % n)] += Complex64::new(off, 0.0);
    }
    m
}

/// Solve the periodic tridiagonal system `[diag on main, off on +-1, wrapped] x = rhs`.
///
/// Thomas elimination with a Sherman-Morrison correction for the corner
/// entries. Falls back to dense LU when the reduced system needs pivoting.
pub fn solve_cyclic_tridiag(diag: f64, off: f64, n: usize, rhs: &CVector) -> Result<CVector> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!("cyclic tridiagonal solve needs n >= 3, got {n}")));
    }
    if rhs.len() != n {
        return Err(Error::DimensionMismatch { op: "solve_cyclic_tridiag", left: (n, n), right: (rhs.len(), 1) });
    }
    if !diag.is_finite() || !off.is_finite() {
        return Err(Error::InvalidArgument("non-finite coefficients".into()));
    }
    // circulant spectrum: diag + 2 off cos(2 pi k / n)
    let eig = |k: usize| diag + 2.0 * off * (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos();
    let (lo, hi) = (0..n).map(eig).fold((f64::INFINITY, 0.0_f64), |(lo, hi), l| (lo.min(l.abs()), hi.max(l.abs())));
    if hi == 0.0 || lo <= 1e-13 * hi {
        return Err(Error::Singular(format!("circulant eigenvalue {lo:.3e} vs spectral radius {hi:.3e}")));
    }

    match sherman_morrison(diag, off, n, rhs) {
        Some(x) => Ok(x),
        None => solve_dense(&cyclic_tridiag_matrix(diag, off, n), rhs),
    }
}

fn sherman_morrison(diag: f64, off: f64, n: usize, rhs: &CVector) -> Option<CVector> {
    // A = T + u v^T, u = (gamma, 0, .., off), v = (1, 0, .., off / gamma)
    let gamma = if diag != 0.0 { -diag } else { -1.0 };
    let mut main = vec![diag; n];
    main[0] -= gamma;
    main[n - 1] -= off * off / gamma;

    let thomas = |d: &[Complex64]| -> Option<Vec<Complex64>> {
        let mut c_prime = vec![0.0; n];
        let mut d_prime = vec![ZERO; n];
        let mut denom = main[0];
        let tiny = 1e-13 * (diag.abs() + 2.0 * off.abs());
        if denom.abs() <= tiny {
            return None;
        }
        c_prime[0] = off / denom;
        d_prime[0] = d[0] / denom;
        for i in 1..n {
            denom = main[i] - off * c_prime[i - 1];
            if denom.abs() <= tiny {
                return None;
            }
            c_prime[i] = off / denom;
            d_prime[i] = (d[i] - d_prime[i - 1] * off) / denom;
        }
        let mut x = d_prime;
        for i in (0..n - 1).rev() {
            let next = x[i + 1];
            x[i] -= next * c_prime[i];
        }
        Some(x)
    };

    let y = thomas(rhs.as_slice())?;
    let mut u = vec![ZERO; n];
    u[0] = Complex64::new(gamma, 0.0);
    u[n - 1] = Complex64::new(off, 0.0);
    let z = thomas(&u)?;
    let v_last = off / gamma;
    let vy = y[0] + y[n - 1] * v_last;
    let vz = z[0] + z[n - 1] * v_last;
    let denom = ONE + vz;
    if denom.norm() <= 1e-13 {
        return None;
    }
    let f = vy / denom;
    Some(y.iter().zip(&z).map(|(yi, zi)| yi - zi * f).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMatrix {
        CMatrix::from_fn(rows, cols, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> CVector {
        (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
    }

    fn orthonormality_error(cols: &CMatrix) -> f64 {
        matmul(&cols.adjoint(), cols).unwrap().max_abs_diff(&CMatrix::identity(cols.cols()))
    }

    #[test]
    fn identity_times_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_matrix(&mut rng, 2, 2);
        assert_eq!(matmul(&CMatrix::identity(2), &m).unwrap(), m);
    }

    #[test]
    fn pauli_z_squares_to_identity() {
        let z = CMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, -1.0]).unwrap();
        assert_eq!(matmul(&z, &z).unwrap(), CMatrix::identity(2));
    }

    #[test]
    fn matmul_shape_error_reports_both_shapes() {
        let err = matmul(&CMatrix::zeros(2, 3), &CMatrix::zeros(2, 3)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("(2, 3)"), "{msg}");
    }

    #[test]
    fn adjoint_is_involution() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = random_matrix(&mut rng, 3, 5);
        assert_eq!(m.adjoint().adjoint(), m);
    }

    #[test]
    fn matrix_times_inverse_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_matrix(&mut rng, 4, 4).add(&CMatrix::identity(4).scale_real(3.0)).unwrap();
        let cols: Vec<CVector> = (0..4).map(|k| solve_dense(&m, &CVector::basis(4, k)).unwrap()).collect();
        let inv = CMatrix::from_fn(4, 4, |i, j| cols[j][i]);
        assert!(matmul(&m, &inv).unwrap().max_abs_diff(&CMatrix::identity(4)) < 1e-12);
    }

    #[test]
    fn svd_of_diagonal() {
        let m = CMatrix::from_real(2, 2, &[3.0, 0.0, 0.0, 1.0]).unwrap();
        let r = svd(&m).unwrap();
        assert_eq!(r.singular_values, vec![3.0, 1.0]);
        assert!(r.left_vectors.max_abs_diff(&CMatrix::identity(2)) < 1e-15);
        assert!(r.right_vectors.max_abs_diff(&CMatrix::identity(2)) < 1e-15);
    }

    #[test]
    fn svd_orders_swapped_diagonal() {
        let m = CMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, -3.0]).unwrap();
        let r = svd(&m).unwrap();
        assert_eq!(r.singular_values, vec![3.0, 1.0]);
        // right vector e_1 positive, so the left vector carries the sign
        assert!((r.left_vectors[(1, 0)] - c(-1.0)).norm() < 1e-15);
        assert!((r.right_vectors[(1, 0)] - c(1.0)).norm() < 1e-15);
    }

    #[test]
    fn svd_random_reconstruction_and_orthonormality() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for trial in 0..100 {
            let rows = rng.gen_range(1..=32);
            let cols = rng.gen_range(1..=32);
            let m = random_matrix(&mut rng, rows, cols);
            let r = svd(&m).unwrap();
            assert!(r.reconstruct().max_abs_diff(&m) <= 1e-10, "trial {trial} {rows}x{cols}");
            assert!(orthonormality_error(&r.left_vectors) <= 1e-10, "trial {trial}");
            assert!(orthonormality_error(&r.right_vectors) <= 1e-10, "trial {trial}");
            assert!(r.singular_values.windows(2).all(|w| w[0] >= w[1]));
            assert!(r.singular_values.iter().all(|&s| s >= 0.0));
        }
    }

    #[test]
    fn svd_rank_deficient_completes_left_basis() {
        let m = CMatrix::from_real(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 0.0, 0.0, 0.0]).unwrap();
        let r = svd(&m).unwrap();
        assert!(r.reconstruct().max_abs_diff(&m) <= 1e-12);
        assert!(orthonormality_error(&r.left_vectors) <= 1e-10);
        assert!(r.singular_values[1] < 1e-12);
    }

    #[test]
    fn svd_right_vectors_lead_real_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let r = svd(&random_matrix(&mut rng, 6, 6)).unwrap();
        for k in 0..6 {
            let lead = (0..6).map(|i| r.right_vectors[(i, k)]).find(|z| z.norm() > 1e-10).unwrap();
            assert!(lead.im.abs() < 1e-14 && lead.re > 0.0);
        }
    }

    #[test]
    fn normalized_pade_matrix_singular_values() {
        let n = 128;
        let a = cyclic_tridiag_matrix(1.0, 0.25, n).scale_real(1.0 / 1.5);
        let r = svd(&a).unwrap();
        for &s in &r.singular_values {
            assert!((1.0 / 3.0 - 1e-10..=1.0 + 1e-10).contains(&s), "{s}");
        }
        assert!((r.sigma_max() - 1.0).abs() < 1e-10);
        assert!((r.sigma_min() - 1.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn eigh_reconstructs_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g = random_matrix(&mut rng, 10, 10);
        let h = g.add(&g.adjoint()).unwrap();
        let e = eigh(&h).unwrap();
        assert!(e.map_eigenvalues(|l| l).max_abs_diff(&h) < 1e-12);
        assert!(orthonormality_error(&e.vectors) < 1e-12);
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn eigh_rejects_non_hermitian() {
        let m = CMatrix::from_real(2, 2, &[1.0, 2.0, 0.0, 1.0]).unwrap();
        assert!(eigh(&m).is_err());
    }

    #[test]
    fn cyclic_identity_returns_rhs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let b = random_vector(&mut rng, 9);
        let x = solve_cyclic_tridiag(1.0, 0.0, 9, &b).unwrap();
        assert!(x.max_abs_diff(&b) < 1e-15);
    }

    #[test]
    fn cyclic_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut n = 4;
        while n <= 256 {
            let b = random_vector(&mut rng, n);
            let x = solve_cyclic_tridiag(1.0, 0.25, n, &b).unwrap();
            let dense = solve_dense(&cyclic_tridiag_matrix(1.0, 0.25, n), &b).unwrap();
            assert!(x.sub(&dense).norm() <= 1e-10 * dense.norm(), "n = {n}");
            n += 4;
        }
    }

    #[test]
    fn cyclic_row_sum_identity() {
        let n = 128;
        let ones = CVector::from_real(&vec![1.0; n]);
        let rhs = cyclic_tridiag_matrix(1.0, 0.25, n).matvec(&ones).unwrap();
        assert!(rhs.iter().all(|z| (z - c(1.5)).norm() < 1e-15));
        let x = solve_cyclic_tridiag(1.0, 0.25, n, &rhs).unwrap();
        assert!(x.max_abs_diff(&ones) < 1e-13);
    }

    #[test]
    fn cyclic_singular_is_error() {
        // eigenvalues 1 - 2 cos(2 pi k / 6) vanish at k = 1
        let b = CVector::from_real(&[1.0; 6]);
        assert!(matches!(solve_cyclic_tridiag(1.0, -1.0, 6, &b), Err(Error::Singular(_))));
    }

    #[test]
    fn cyclic_without_diagonal_dominance_falls_back() {
        // diag 0 forces the pivot-free path to give up
        let n = 3;
        let b = CVector::from_real(&[1.0, 2.0, 3.0]);
        let x = solve_cyclic_tridiag(0.0, 1.0, n, &b).unwrap();
        let r = cyclic_tridiag_matrix(0.0, 1.0, n).matvec(&x).unwrap();
        assert!(r.sub(&b).norm() <= 1e-10 * b.norm());
    }

    #[test]
    fn vector_norm_zero_iff_zero() {
        assert_eq!(CVector::zeros(4).norm(), 0.0);
        assert!(CVector::basis(4, 2).norm() > 0.0);
        assert!(CVector::try_new(vec![Complex64::new(f64::NAN, 0.0)]).is_err());
    }
}
