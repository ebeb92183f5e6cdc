//! Matrix-level singular value transformation.
//!
//! A square matrix is rescaled so that its singular values lie in
//! `[1/kappa, 1]` and embedded as the top-left block of the unitary
//! `U(A) = [[A, sqrt(I - A A^dagger)], [sqrt(I - A^dagger A), -A^dagger]]`.
//! Alternating products of `U`, `U^dagger` and projector-controlled phases
//! then carry a polynomial of the singular values in their top-left block.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matkit::{matmul, outer_sum, svd, CMatrix, CVector, SvdResult};
use crate::phasekit::{Parity, PhaseSchedule};

#[derive(Clone, Debug)]
pub struct BlockEncoding {
    /// The input matrix, before rescaling.
    pub a_orig: CMatrix,
    /// `scale * a_orig`, spectral norm 1.
    pub a_norm: CMatrix,
    /// `1 / sigma_max(a_orig)`.
    pub scale: f64,
    /// The `2N x 2N` embedding.
    pub u: CMatrix,
    /// Singular value decomposition of `a_norm`.
    pub svd: SvdResult,
    pub kappa: f64,
}

impl BlockEncoding {
    pub fn dim(&self) -> usize {
        self.a_norm.rows()
    }

    pub fn condition_number(&self) -> f64 {
        self.svd.sigma_max() / self.svd.sigma_min()
    }

    /// `U^dagger`, equal to `u` when the encoded matrix is Hermitian.
    pub fn u_adjoint(&self) -> CMatrix {
        self.u.adjoint()
    }

    pub fn is_hermitian(&self) -> bool {
        self.a_norm.is_hermitian(1e-12)
    }

    /// Hermitian with all eigenvalues positive. Since the singular values of a
    /// Hermitian matrix are the absolute eigenvalues, this holds exactly when
    /// the trace equals the sum of singular values.
    pub fn is_hermitian_positive_definite(&self) -> bool {
        let sum: f64 = self.svd.singular_values.iter().sum();
        self.is_hermitian() && (self.a_norm.trace().re - sum).abs() <= 1e-9 * sum.max(1.0)
    }
}

pub fn block_encode(a: &CMatrix, kappa: f64) -> Result<BlockEncoding> {
    if !a.is_square() || a.rows() == 0 {
        return Err(Error::InvalidArgument(format!(
            "block encoding needs a nonempty square matrix, got {:?}",
            a.shape()
        )));
    }
    if !a.is_finite() {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    if !(kappa >= 1.0) {
        return Err(Error::InvalidArgument(format!("kappa must be at least 1, got {kappa}")));
    }
    let dec = svd(a)?;
    let (sigma_max, sigma_min) = (dec.sigma_max(), dec.sigma_min());
    if sigma_max == 0.0 || sigma_min * kappa < sigma_max * (1.0 - 1e-12) {
        return Err(Error::IllConditioned { scaled_min: sigma_min * kappa, sigma_max });
    }
    let scale = 1.0 / sigma_max;
    let a_norm = a.scale_real(scale);
    let svd = SvdResult {
        singular_values: dec.singular_values.iter().map(|s| s * scale).collect(),
        left_vectors: dec.left_vectors,
        right_vectors: dec.right_vectors,
    };

    let u = unitary_embedding(&a_norm)?;
    Ok(BlockEncoding { a_orig: a.clone(), a_norm, scale, u, svd, kappa })
}

/// `[[A, sqrt(I - A A^dagger)], [sqrt(I - A^dagger A), -A^dagger]]` for a
/// square `A` of spectral norm at most 1.
///
/// Both defect roots come from one SVD `A = W S V^dagger`, which keeps the
/// off-diagonal blocks consistent when `A` has singular values at 1.
pub fn unitary_embedding(a: &CMatrix) -> Result<CMatrix> {
    if !a.is_square() {
        return Err(Error::InvalidArgument(format!("embedding needs a square matrix, got {:?}", a.shape())));
    }
    let dec = svd(a)?;
    if dec.sigma_max() > 1.0 + 1e-9 {
        return Err(Error::InvalidArgument(format!("spectral norm {:.6} exceeds 1", dec.sigma_max())));
    }
    let defect: Vec<Complex64> =
        dec.singular_values.iter().map(|s| Complex64::new((1.0 - s * s).max(0.0).sqrt(), 0.0)).collect();
    let n = a.rows();
    let mut u = CMatrix::zeros(2 * n, 2 * n);
    u.set_block(0, 0, a);
    u.set_block(0, n, &outer_sum(&dec.left_vectors, &defect, &dec.left_vectors));
    u.set_block(n, 0, &outer_sum(&dec.right_vectors, &defect, &dec.right_vectors));
    u.set_block(n, n, &a.adjoint().scale_real(-1.0));
    Ok(u)
}

/// Which side of the encoded block a projector phase acts on. For square
/// matrices both sides span the first `N` coordinates and act identically.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subspace {
    Row,
    Column,
}

/// `diag(e^{(-1)^{b_i} i phi})` with `b_i = 0` on the encoded block.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectorPhase {
    pub phi: f64,
    /// `true` marks coordinates outside the encoded block.
    pub signature: Vec<bool>,
}

impl ProjectorPhase {
    pub fn new(phi: f64, n: usize, _side: Subspace) -> Self {
        ProjectorPhase { phi, signature: (0..2 * n).map(|i| i >= n).collect() }
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        self.signature.iter().map(|&b| Complex64::from_polar(1.0, if b { -self.phi } else { self.phi })).collect()
    }

    pub fn matrix(&self) -> CMatrix {
        CMatrix::from_diag(&self.diagonal())
    }

    /// `self * m`, scaling rows.
    pub fn apply_left(&self, m: &CMatrix) -> CMatrix {
        let d = self.diagonal();
        CMatrix::from_fn(m.rows(), m.cols(), |i, j| d[i] * m[(i, j)])
    }
}

fn check_len(phis: &[f64], parity: Parity) -> Result<()> {
    if phis.is_empty() || Parity::of_degree(phis.len() - 1) != parity {
        return Err(Error::InvalidArgument(format!(
            "{} phases do not define a polynomial of {parity:?} degree",
            phis.len()
        )));
    }
    Ok(())
}

/// Product `Pi(p_0) W_1 Pi(p_1) ... W_d Pi(p_d)` applied to the encoded
/// columns, where `W_d = U` and the signal operators alternate leftward.
/// Returns the full `2N x N` slab.
fn sequence_columns(be: &BlockEncoding, u_adj: &CMatrix, phis: &[f64]) -> Result<CMatrix> {
    let n = be.dim();
    let d = phis.len() - 1;
    let mut x = CMatrix::zeros(2 * n, n);
    for i in 0..n {
        x[(i, i)] = Complex64::new(1.0, 0.0);
    }
    x = ProjectorPhase::new(phis[d], n, Subspace::Column).apply_left(&x);
    for j in (1..=d).rev() {
        let w = if (d - j).is_multiple_of(2) { &be.u } else { u_adj };
        x = matmul(w, &x)?;
        let side = if j % 2 == 1 { Subspace::Row } else { Subspace::Column };
        x = ProjectorPhase::new(phis[j - 1], n, side).apply_left(&x);
    }
    Ok(x)
}

fn sequence_block(be: &BlockEncoding, phis: &[f64], parity: Parity) -> Result<CMatrix> {
    check_len(phis, parity)?;
    let slab = sequence_columns(be, &be.u_adjoint(), phis)?;
    Ok(slab.block(0, 0, be.dim(), be.dim()))
}

/// Top-left block of the even-degree phase sequence.
pub fn sequence_even(be: &BlockEncoding, phis: &[f64]) -> Result<CMatrix> {
    sequence_block(be, phis, Parity::Even)
}

/// Top-left block of the odd-degree phase sequence (one unpaired `U`).
pub fn sequence_odd(be: &BlockEncoding, phis: &[f64]) -> Result<CMatrix> {
    sequence_block(be, phis, Parity::Odd)
}

/// Full `2N x 2N` sequence unitary, for checks at small sizes.
pub fn sequence_unitary(be: &BlockEncoding, phis: &[f64]) -> Result<CMatrix> {
    let n = be.dim();
    let d = phis.len().checked_sub(1).ok_or_else(|| Error::InvalidArgument("empty phase list".into()))?;
    let u_adj = be.u_adjoint();
    let mut m = ProjectorPhase::new(phis[d], n, Subspace::Column).matrix();
    for j in (1..=d).rev() {
        let w = if (d - j) % 2 == 0 { &be.u } else { &u_adj };
        m = ProjectorPhase::new(phis[j - 1], n, Subspace::Row).apply_left(&matmul(w, &m)?);
    }
    Ok(m)
}

/// `sum_k poly(sigma_k) |w_k><v_k|` over the singular triples of the normalized matrix.
pub fn svd_oracle(be: &BlockEncoding, poly: impl Fn(f64) -> Complex64) -> CMatrix {
    be.svd.map_singular_values(poly)
}

/// Parity-aware form of [`svd_oracle`]. An even polynomial maps the right
/// singular space back onto itself, `sum_k poly(sigma_k) |v_k><v_k|`; an odd
/// one maps it to the left space, as in [`svd_oracle`].
pub fn svd_oracle_parity(be: &BlockEncoding, poly: impl Fn(f64) -> Complex64, parity: Parity) -> CMatrix {
    match parity {
        Parity::Odd => svd_oracle(be, poly),
        Parity::Even => {
            let w: Vec<Complex64> = be.svd.singular_values.iter().map(|&s| poly(s)).collect();
            crate::matkit::outer_sum(&be.svd.right_vectors, &w, &be.svd.right_vectors)
        }
    }
}

/// `(M + conj(M)) / 2`, entrywise.
pub fn real_part(m: &CMatrix) -> CMatrix {
    CMatrix::from_fn(m.rows(), m.cols(), |i, j| Complex64::new(m[(i, j)].re, 0.0))
}

/// `Re(P_even(A) + P_odd(A))` from the two phase sequences.
pub fn p_real_matrix(be: &BlockEncoding, sched: &PhaseSchedule) -> Result<CMatrix> {
    let even = sequence_even(be, &sched.phis_even)?;
    let odd = sequence_odd(be, &sched.phis_odd)?;
    Ok(real_part(&even.add(&odd)?))
}

#[derive(Clone, Debug)]
pub struct QsvtSolveResult {
    pub x: CVector,
    /// `||b|| * scale / s`
    pub gamma: f64,
    /// `||A x - b|| / ||b||` against the unscaled matrix.
    pub residual: f64,
}

/// A cached approximation `M ~ s * A_norm^-1` and the bookkeeping that turns
/// `M b` back into a solution of `A x = b`.
#[derive(Clone, Debug)]
pub struct InverseOperator {
    pub matrix: CMatrix,
    pub scale: f64,
    pub s: f64,
    a_orig: CMatrix,
}

fn require_positive_definite(be: &BlockEncoding) -> Result<()> {
    if !be.is_hermitian_positive_definite() {
        return Err(Error::InvalidArgument("polynomial inversion needs a Hermitian positive definite matrix".into()));
    }
    Ok(())
}

impl InverseOperator {
    /// Built from the even and odd phase sequences of a trained schedule.
    pub fn from_schedule(be: &BlockEncoding, sched: &PhaseSchedule) -> Result<Self> {
        sched.validate()?;
        require_positive_definite(be)?;
        if be.condition_number() > sched.kappa * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "matrix condition number {:.6} exceeds the schedule's kappa {}",
                be.condition_number(),
                sched.kappa
            )));
        }
        Ok(InverseOperator {
            matrix: p_real_matrix(be, sched)?,
            scale: be.scale,
            s: sched.s,
            a_orig: be.a_orig.clone(),
        })
    }

    /// `s / sigma` applied through the singular value decomposition.
    pub fn exact(be: &BlockEncoding, s: f64) -> Result<Self> {
        require_positive_definite(be)?;
        let matrix = svd_oracle(be, |sigma| Complex64::new(s / sigma, 0.0));
        Ok(InverseOperator { matrix, scale: be.scale, s, a_orig: be.a_orig.clone() })
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    /// `x = (scale ||b|| / s) M (b / ||b||)`.
    pub fn apply(&self, b: &CVector) -> Result<QsvtSolveResult> {
        if b.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                op: "apply_inverse",
                left: self.matrix.shape(),
                right: (b.len(), 1),
            });
        }
        let norm = b.norm();
        if norm == 0.0 {
            return Err(Error::InvalidArgument("right-hand side is zero".into()));
        }
        let gamma = norm * self.scale / self.s;
        let x = self.matrix.matvec(&b.scale_real(1.0 / norm))?.scale_real(gamma);
        let residual = self.a_orig.matvec(&x)?.sub(b).norm() / norm;
        Ok(QsvtSolveResult { x, gamma, residual })
    }
}

/// Solve `A x = b` with the polynomial approximation of `A^-1`.
pub fn apply_inverse(be: &BlockEncoding, sched: &PhaseSchedule, b: &CVector) -> Result<QsvtSolveResult> {
    InverseOperator::from_schedule(be, sched)?.apply(b)
}
