//! Fourth-order compact (Padé) first derivative on a periodic unit grid.
//!
//! The scheme couples neighbouring derivative values,
//! `alpha f'_{i-1} + f'_i + alpha f'_{i+1} = a (f_{i+1} - f_{i-1}) / (2h)`,
//! with `alpha = 1/4` and `a = 3/2`, which is the system `A f' = B f`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matkit::{cyclic_tridiag_matrix, solve_cyclic_tridiag, CMatrix, CVector};
use crate::maxwell::{FieldState, Medium};

pub const ALPHA: f64 = 0.25;
pub const A_COEF: f64 = 1.5;

/// Smallest grid accepted by [`build_pade_system`].
pub const MIN_CELLS: usize = 4;

/// Uniform periodic grid on `[0, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub n: usize,
    pub h: f64,
    pub z: Vec<f64>,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        validate_cells(n)?;
        let h = 1.0 / n as f64;
        Ok(Grid { n, h, z: (0..n).map(|i| i as f64 * h).collect() })
    }
}

fn validate_cells(n: usize) -> Result<()> {
    if n < MIN_CELLS || !n.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "grid size must be a power of two and at least {MIN_CELLS}, got {n}"
        )));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct PadeSystem {
    pub grid: Grid,
    pub alpha: f64,
    pub a_coef: f64,
    /// Left-hand side: 1 on the diagonal, `alpha` on both neighbours.
    pub a: CMatrix,
    /// Right-hand side: `+-a_coef / (2h)` on the `+-1` offsets.
    pub b: CMatrix,
}

impl PadeSystem {
    pub fn n(&self) -> usize {
        self.grid.n
    }

    pub fn h(&self) -> f64 {
        self.grid.h
    }

    /// `B f` by the two-point stencil, without forming the dense product.
    pub fn apply_rhs(&self, f: &CVector) -> Result<CVector> {
        let n = self.n();
        if f.len() != n {
            return Err(Error::DimensionMismatch { op: "apply_rhs", left: (n, n), right: (f.len(), 1) });
        }
        let w = self.a_coef / (2.0 * self.h());
        Ok((0..n).map(|i| (f[(i + 1) % n] - f[(i + n - 1) % n]) * w).collect())
    }

    /// Largest `|k'|` the discrete derivative assigns to any Fourier mode of the grid.
    pub fn max_modified_wavenumber(&self) -> f64 {
        let n = self.n();
        (0..n)
            .map(|k| {
                let theta = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                (self.a_coef * theta.sin() / (self.h() * (1.0 + 2.0 * self.alpha * theta.cos()))).abs()
            })
            .fold(0.0, f64::max)
    }
}

pub fn build_pade_system(n: usize) -> Result<PadeSystem> {
    let grid = Grid::new(n)?;
    let a = cyclic_tridiag_matrix(1.0, ALPHA, n);
    let w = Complex64::new(A_COEF / (2.0 * grid.h), 0.0);
    let mut b = CMatrix::zeros(n, n);
    for i in 0..n {
        b[(i, (i + 1) % n)] += w;
        b[(i, (i + n - 1) % n)] -= w;
    }
    Ok(PadeSystem { grid, alpha: ALPHA, a_coef: A_COEF, a, b })
}

/// `f' = A^-1 B f` through the periodic tridiagonal solver.
pub fn classical_derivative(sys: &PadeSystem, f: &CVector) -> Result<CVector> {
    let rhs = sys.apply_rhs(f)?;
    solve_cyclic_tridiag(1.0, sys.alpha, sys.n(), &rhs)
}

/// One explicit Euler step, advancing `Ex` first and then `Hy` from the new `Ex`.
pub fn classical_maxwell_step(sys: &PadeSystem, state: &FieldState, dt: f64, medium: Medium) -> Result<FieldState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    if state.ex.len() != sys.n() || state.hy.len() != sys.n() {
        return Err(Error::DimensionMismatch {
            op: "classical_maxwell_step",
            left: (sys.n(), 1),
            right: (state.ex.len(), state.hy.len()),
        });
    }
    let dhy = classical_derivative(sys, &state.hy)?;
    let ex = state.ex.axpy(-dt / medium.eps, &dhy);
    let dex = classical_derivative(sys, &ex)?;
    let hy = state.hy.axpy(-dt / medium.mu, &dex);
    Ok(FieldState { ex, hy, t: state.t + dt })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matkit::{eigh, solve_dense};
    use crate::maxwell::initial_condition;
    use std::f64::consts::PI;

    fn sine(n: usize) -> CVector {
        CVector::from_real(&(0..n).map(|i| (2.0 * PI * i as f64 / n as f64).sin()).collect::<Vec<_>>())
    }

    fn max_derivative_error(n: usize) -> f64 {
        let sys = build_pade_system(n).unwrap();
        let d = classical_derivative(&sys, &sine(n)).unwrap();
        sys.grid
            .z
            .iter()
            .zip(d.iter())
            .map(|(z, di)| (di - Complex64::new(2.0 * PI * (2.0 * PI * z).cos(), 0.0)).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn four_cell_rows() {
        let sys = build_pade_system(4).unwrap();
        let h = 0.25;
        let a_row: Vec<f64> = sys.a.row(0).iter().map(|z| z.re).collect();
        let b_row: Vec<f64> = sys.b.row(0).iter().map(|z| z.re).collect();
        assert_eq!(a_row, vec![1.0, 0.25, 0.0, 0.25]);
        assert_eq!(b_row, vec![0.0, 3.0 / (4.0 * h), 0.0, -3.0 / (4.0 * h)]);
    }

    #[test]
    fn rejects_bad_sizes() {
        for n in [0, 2, 6, 12, 100] {
            assert!(build_pade_system(n).is_err(), "n = {n}");
        }
    }

    #[test]
    fn row_sums_and_antisymmetry() {
        for n in [8, 32, 128] {
            let sys = build_pade_system(n).unwrap();
            let ones = CVector::from_real(&vec![1.0; n]);
            let a1 = sys.a.matvec(&ones).unwrap();
            let b1 = sys.b.matvec(&ones).unwrap();
            assert!(a1.iter().all(|z| *z == Complex64::new(1.5, 0.0)));
            assert!(b1.iter().all(|z| z.norm() == 0.0));
            assert_eq!(sys.b.transpose(), sys.b.scale_real(-1.0));
            assert_eq!(sys.a.transpose(), sys.a);
        }
    }

    #[test]
    fn spectrum_of_a() {
        let sys = build_pade_system(128).unwrap();
        let e = eigh(&sys.a).unwrap();
        for &l in &e.values {
            assert!((0.5 - 1e-12..=1.5 + 1e-12).contains(&l), "{l}");
        }
    }

    #[test]
    fn stencil_matches_dense_rhs() {
        let sys = build_pade_system(16).unwrap();
        let f = sine(16);
        let dense = sys.b.matvec(&f).unwrap();
        assert!(sys.apply_rhs(&f).unwrap().max_abs_diff(&dense) < 1e-12);
    }

    #[test]
    fn modified_wavenumber_bounds() {
        // the continuous maximum sqrt(3)/h sits at theta = 2 pi / 3, which no power-of-two grid hits exactly
        for n in [16, 64, 256] {
            let sys = build_pade_system(n).unwrap();
            let k = sys.max_modified_wavenumber();
            assert!(k <= 3f64.sqrt() * n as f64 + 1e-9 && k >= 0.98 * 3f64.sqrt() * n as f64, "n = {n}: {k}");
        }
        // a resolved mode is differentiated almost exactly
        let sys = build_pade_system(64).unwrap();
        let f: CVector = (0..64).map(|i| Complex64::from_polar(1.0, 2.0 * PI * i as f64 / 64.0)).collect();
        let d = classical_derivative(&sys, &f).unwrap();
        assert!(d.sub(&f.scale(Complex64::new(0.0, 2.0 * PI))).norm() / d.norm() < 1e-5);
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        let sys = build_pade_system(32).unwrap();
        let d = classical_derivative(&sys, &CVector::from_real(&vec![3.7; 32])).unwrap();
        assert!(d.norm() < 1e-12);
    }

    #[test]
    fn derivative_residual_and_accuracy() {
        let sys = build_pade_system(64).unwrap();
        let f = sine(64);
        let d = classical_derivative(&sys, &f).unwrap();
        let bf = sys.b.matvec(&f).unwrap();
        let resid = sys.a.matvec(&d).unwrap().sub(&bf);
        assert!(resid.norm() <= 1e-10 * bf.norm());
        let dense = solve_dense(&sys.a, &bf).unwrap();
        assert!(d.max_abs_diff(&dense) < 1e-10);
        assert!(max_derivative_error(64) <= 1e-4);
    }

    #[test]
    fn fourth_order_convergence() {
        let ratio = max_derivative_error(32) / max_derivative_error(64);
        assert!((14.0..=18.0).contains(&ratio), "ratio {ratio}");
        for n in [32, 64] {
            let order = (max_derivative_error(n) / max_derivative_error(2 * n)).log2();
            assert!((3.7..=4.3).contains(&order), "n = {n}: order {order}");
        }
    }

    #[test]
    fn zero_magnetic_field_leaves_ex_after_first_half() {
        let sys = build_pade_system(32).unwrap();
        let s0 = initial_condition(32).unwrap();
        let dhy = classical_derivative(&sys, &s0.hy).unwrap();
        assert_eq!(s0.ex.axpy(-0.01, &dhy), s0.ex);
    }

    #[test]
    fn zero_fields_are_stationary() {
        let sys = build_pade_system(16).unwrap();
        let s = FieldState { ex: CVector::zeros(16), hy: CVector::zeros(16), t: 0.0 };
        let next = classical_maxwell_step(&sys, &s, 0.01, Medium::default()).unwrap();
        assert_eq!(next.ex, s.ex);
        assert_eq!(next.hy, s.hy);
        assert!((next.t - 0.01).abs() < 1e-15);
    }

    #[test]
    fn gaussian_step_matches_dense_solves() {
        let n = 128;
        let dt = 0.01;
        let sys = build_pade_system(n).unwrap();
        let s0 = initial_condition(n).unwrap();
        let next = classical_maxwell_step(&sys, &s0, dt, Medium::default()).unwrap();

        // independent route: dense LU on the assembled matrices
        let deriv = |f: &CVector| solve_dense(&sys.a, &sys.b.matvec(f).unwrap()).unwrap();
        let ex = s0.ex.axpy(-dt, &deriv(&s0.hy));
        let hy = s0.hy.axpy(-dt, &deriv(&ex));
        assert!(next.ex.max_abs_diff(&ex) <= 1e-10);
        assert!(next.hy.max_abs_diff(&hy) <= 1e-10);
    }

    #[test]
    fn step_rejects_bad_input() {
        let sys = build_pade_system(16).unwrap();
        let s = initial_condition(16).unwrap();
        assert!(classical_maxwell_step(&sys, &s, 0.0, Medium::default()).is_err());
        let short = FieldState { ex: CVector::zeros(8), hy: CVector::zeros(8), t: 0.0 };
        assert!(classical_maxwell_step(&sys, &short, 0.01, Medium::default()).is_err());
    }
}
